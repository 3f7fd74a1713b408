"""adharvest: classified-ads harvesting, matching and notification toolkit."""

__version__ = "0.1.0"
