#!/usr/bin/env python3
"""AGOP-TRIS entry point: python main.py <gen|train|attribute|evaluate|report> ..."""

from __future__ import annotations

import sys

from bench.cli import main

if __name__ == "__main__":
    sys.exit(main())
