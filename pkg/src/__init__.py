"""drroots: derivative-root annuli, fast Newton basins and the cascade solver."""

__version__ = "0.1.0"
