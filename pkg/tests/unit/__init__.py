"""Unit tests for fracpr components."""
