import sys

from qpsi.cli import main

sys.exit(main())
