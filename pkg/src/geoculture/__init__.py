"""Geo-social network analysis of cultural investment in urban areas."""

__version__ = "0.1.0"
