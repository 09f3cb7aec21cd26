import sys

from globalrnn.cli import main


sys.exit(main())
