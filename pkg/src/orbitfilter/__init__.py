"""Statistical orbit determination for GEO/GSO navigation satellites."""
__version__ = "0.1.0"
