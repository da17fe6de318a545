"""Split-and-mix secure aggregation: protocol, exact analysis, lower bounds and a DP layer."""

__version__ = "0.1.0"
