"""Self-hostable no-code text-classification workbench."""

__version__ = "0.1.0"
