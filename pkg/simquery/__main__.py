import sys

from simquery.cli import main

sys.exit(main())
