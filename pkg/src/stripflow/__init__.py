"""Monotone heteroclinic stream functions and steady Euler flows in a strip."""

__version__ = "0.1.0"
