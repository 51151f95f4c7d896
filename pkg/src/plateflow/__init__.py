"""Galerkin simulator for a linearized channel flow coupled to a clamped elastic plate."""

__version__ = "0.1.0"
