"""Sparse VAR-X forecasting of weekly regional unemployment claims."""
__version__ = '0.1.0'
