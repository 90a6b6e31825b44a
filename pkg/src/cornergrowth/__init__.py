"""Corner growth model: last-passage percolation with exponential weights."""
__version__ = "0.1.0"
