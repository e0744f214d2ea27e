"""Re-verification tools for covering systems with distinct square-free moduli."""

__version__ = "0.1.0"
