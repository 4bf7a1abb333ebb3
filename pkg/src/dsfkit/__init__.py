"""Structure-revealing factorizations of LTI systems."""

__version__ = "0.1.0"
