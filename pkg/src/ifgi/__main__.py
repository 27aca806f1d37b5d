import sys

from ifgi.cli import main

sys.exit(main())
