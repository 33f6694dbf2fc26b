import sys

from .toplevel.cli import main

sys.exit(main())
