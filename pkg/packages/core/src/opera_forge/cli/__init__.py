"""CLI module for opera-forge."""
