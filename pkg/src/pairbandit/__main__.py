import sys

from pairbandit.harness.cli import main

sys.exit(main())
