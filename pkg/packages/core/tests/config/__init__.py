"""Configuration system tests."""
