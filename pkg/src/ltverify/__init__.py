"""Exact verification engine for Lubin-Tate formal groups and their blowups."""

__version__ = "0.1.0"
