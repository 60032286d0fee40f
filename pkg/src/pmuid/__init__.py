"""Interpolatory low-rank compression and pilot-stream monitoring of PMU data."""

__version__ = "0.1.0"
