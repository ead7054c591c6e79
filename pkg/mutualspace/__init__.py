"""Version control."""

__version__ = "0.3.0"

from mutualspace.cli import main
