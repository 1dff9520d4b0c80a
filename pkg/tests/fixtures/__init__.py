"""Test fixtures and utilities."""
