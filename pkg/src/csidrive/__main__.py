import sys

from csidrive.cli import main

sys.exit(main())
