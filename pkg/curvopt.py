#!/usr/bin/env python3
"""curvopt entry point."""

from curvopt.cli import cli

if __name__ == "__main__":
    cli()
