"""Security analysis and round-level simulation of position verification over lossy channels."""

__version__ = "0.1.0"
