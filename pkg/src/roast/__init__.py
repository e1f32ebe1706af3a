"""Overflow-suppressed robust JPEG steganography (ROAST-OS / ROAST-ST)."""

__version__ = "0.1.0"
