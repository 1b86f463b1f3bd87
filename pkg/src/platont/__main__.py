"""Run the workbench command line."""

import sys

from . import _cli

sys.exit(_cli.main())
