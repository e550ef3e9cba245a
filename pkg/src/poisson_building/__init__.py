"""Interference and link metrics for in-building wireless networks on a Poisson grid."""

__version__ = "0.1.0"
