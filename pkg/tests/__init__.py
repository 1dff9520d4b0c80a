"""fracpr test suite."""
