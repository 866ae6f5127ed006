#!/usr/bin/env python3
"""
Simple script to run the hetrrr command line from a source checkout
"""

import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

from cli import main

if __name__ == "__main__":
    sys.exit(main())
