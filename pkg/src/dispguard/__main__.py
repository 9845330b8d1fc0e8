import sys

from dispguard.harness.cli import main

sys.exit(main())
