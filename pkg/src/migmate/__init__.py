"""migmate: human-in-the-loop library migration for Python projects."""

__version__ = "0.1.0"
