"""Certified lower bounds on temporal-logic satisfaction for switched stochastic systems."""

__version__ = "0.1.0"
