"""Test package for irregular-forecast."""
