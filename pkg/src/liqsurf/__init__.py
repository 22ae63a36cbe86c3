"""Factor analysis of liquidity surfaces on rank-standardized grids."""

__version__ = "0.1.0"
