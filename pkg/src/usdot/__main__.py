"""Allow `python -m usdot` as an alias for the installed console script."""

import sys

from .cli import main

sys.exit(main())
