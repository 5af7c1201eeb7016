import sys

from ddvm.cli.main import main

sys.exit(main())
