"""Map-variable separation for a minimal intermediate verification language."""

__version__ = "0.1.0"
