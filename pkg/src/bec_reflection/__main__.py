import sys

from bec_reflection.cli import main

sys.exit(main())
