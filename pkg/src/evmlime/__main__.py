import sys

from evmlime.cli import main

sys.exit(main())
