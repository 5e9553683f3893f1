import sys

from robust_cascade.cli import main

sys.exit(main())
