"""Cryptocurrency price-high forecasting from market and social activity data."""

__version__ = "0.1.0"
