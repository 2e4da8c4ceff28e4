import sys

from spotlier.cli import main

sys.exit(main())
