"""Gradient-bounded dual dynamic programming for slot-pricing DPs."""
__version__ = "0.1.0"
