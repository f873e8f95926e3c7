"""Utility modules for the forecasting workflow."""
