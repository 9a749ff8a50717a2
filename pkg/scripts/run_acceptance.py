"""Run the acceptance suite and print the criterion table (same as `stochdecay accept`)."""
import sys

from stochdecay.cli import main

if __name__ == "__main__":
    sys.exit(main(["accept", *sys.argv[1:]]))
