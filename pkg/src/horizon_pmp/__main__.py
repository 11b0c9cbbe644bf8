import sys

from horizon_pmp.cli import main

if __name__ == "__main__":
    sys.exit(main())
