import sys

from vsrl.cli import main

sys.exit(main())
