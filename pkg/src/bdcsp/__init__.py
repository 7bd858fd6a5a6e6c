"""Tools for testing bounded-degree constraint satisfaction problems."""

__version__ = "0.1.0"
