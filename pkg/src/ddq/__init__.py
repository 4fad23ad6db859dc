"""Deep Dyna-Q dialogue policy learning for movie-ticket booking."""

__version__ = "0.1.0"
