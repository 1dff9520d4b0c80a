"""Integration tests for fracpr (full model runs)."""
