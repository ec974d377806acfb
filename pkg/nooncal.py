"""
Command-line entry point for the N00N phase-sensor calibration toolkit
"""
import sys

from app.cli import main

if __name__ == '__main__':
    sys.exit(main())
