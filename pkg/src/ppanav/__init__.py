"""Pixel processor array emulation, gate-marker detection and reactive steering."""

__version__ = "0.1.0"
