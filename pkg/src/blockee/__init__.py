"""Block-based resampling, studentized block statistics and Edgeworth expansions
for weakly dependent time series."""

__version__ = "0.1.0"
