import sys

from tfqkd.cli import main

sys.exit(main())
