import sys

from seriation.cli import main

sys.exit(main())
