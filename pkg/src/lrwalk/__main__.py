import sys

from lrwalk.cli import main

sys.exit(main())
