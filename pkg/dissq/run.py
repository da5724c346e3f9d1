import sys

from dissq.main import main

if __name__ == "__main__":
    # Same entry point as the installed `dissq` script
    sys.exit(main())
