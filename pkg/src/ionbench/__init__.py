"""Trapped-ion gate-set simulation and analysis toolkit."""

__version__ = "0.1.0"
