import sys

from trialexec.cli import main

sys.exit(main())
