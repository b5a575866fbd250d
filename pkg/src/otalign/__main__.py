"""otalign CLI entry point."""

import sys

if __name__ == "__main__":
    from otalign.cli import main
    sys.exit(main())
