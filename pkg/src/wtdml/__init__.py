"""Machine-learning water table depth models with monotone constraints."""
__version__ = "0.1.0"
