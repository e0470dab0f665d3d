"""Worker runtime imported by generated job scripts."""

__version__ = "0.1.0"
