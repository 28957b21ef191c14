"""Core types, exceptions and logging setup."""
