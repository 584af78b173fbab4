"""Forest-guided smoothing."""

__version__ = "0.1.0"
