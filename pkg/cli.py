#!/usr/bin/env python3
"""
Clonal interference toolkit, command-line entry point.

Usage: python cli.py <command> --help
"""
import sys

from src.cli import main

if __name__ == '__main__':
    sys.exit(main())
