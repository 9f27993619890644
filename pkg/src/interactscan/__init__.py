"""Interaction-guided object discovery and reconstruction from RGB-D scans."""

__version__ = "0.1.0"
