"""Irregular time series forecasting

Feature extraction from the irregularity of unevenly spaced time series and a
resample, embed, featurize and forecast workflow built around it.
"""

__version__ = "0.1.0"
