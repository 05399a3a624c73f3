"""Relief feature ranking and cascade-forward wind speed prediction."""

__version__ = "0.1.0"
