"""Gets called with python -m mutualspace."""

import sys

from mutualspace import cli

sys.exit(cli.main())
