"""Inverse design of Casimir-Polder forces with FDTD, adjoints and level sets."""

__version__ = "0.1.0"
