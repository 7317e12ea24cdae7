import sys

from invopt.cli import main

sys.exit(main())
