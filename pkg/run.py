"""
Command-line entry point.

    python run.py --config data/toy/config.txt pipeline

Builds the click group through the `create_cli` factory and exits with the
code it returns.
"""
import sys

from convsearch import create_cli

main = create_cli()

if __name__ == '__main__':
    sys.exit(main())
