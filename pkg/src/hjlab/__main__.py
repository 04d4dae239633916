"""python -m hjlab forwards to the CLI."""

import sys

from .cli import main

sys.exit(main())
