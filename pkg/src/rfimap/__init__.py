"""Localize RF interference sources from UAV horizon scans."""

__version__ = "0.1.0"
