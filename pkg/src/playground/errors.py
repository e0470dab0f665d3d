"""Base exception for everything raised by this package."""


class PlaygroundError(Exception):
    """Root of the package exception hierarchy."""
