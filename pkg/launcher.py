"""For calling module without pip install."""

from mutualspace import cli

cli.main()
