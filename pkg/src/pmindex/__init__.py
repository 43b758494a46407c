"""Population-modulated bibliometric scoring built on a one-factor CFA."""

__version__ = "0.1.0"
