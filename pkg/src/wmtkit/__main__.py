import sys

from wmtkit.cli import main

sys.exit(main())
