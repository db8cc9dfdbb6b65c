"""Moment-space policy search for parameterized ensemble control systems."""

__version__ = "0.1.0"
