"""Isotonic maximum likelihood estimators and pointwise confidence intervals."""

__version__ = "0.1.0"
