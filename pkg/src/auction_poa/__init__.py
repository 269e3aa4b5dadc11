"""Numerical laboratory for price-of-anarchy bounds in non-truthful auctions."""
__version__ = "0.1.0"
