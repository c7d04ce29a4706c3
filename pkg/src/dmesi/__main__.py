import sys

from dmesi.cli import main

sys.exit(main())
