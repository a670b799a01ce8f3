"""Entry point of ``python -m vpal``."""

import sys

from .cli import main

sys.exit(main())
