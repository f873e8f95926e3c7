"""Domain models and configuration schemas."""
