"""Unsourced random access over cell-free massive MIMO: link-level simulator."""

__version__ = "0.1.0"
