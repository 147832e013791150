#!/usr/bin/env python3
"""
Multiscale flat norm toolkit - entry point
"""

import os
import sys

from dotenv import load_dotenv

# Load environment variables before Config reads them
load_dotenv()

# Add project root to path
project_root = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, project_root)

# Import after setting path
from app import main as app_main  # noqa: E402
from utils.config import get_config  # noqa: E402


def main(argv=None) -> int:
    """Validate configuration, then hand over to the command line app"""
    validation = get_config().validate_config()
    if not validation['valid']:
        sys.stderr.write("Configuration validation failed:\n")
        for error in validation['required']:
            sys.stderr.write(f"  - {error}\n")
        return 2

    for warning in validation['warnings']:
        sys.stderr.write(f"Configuration warning: {warning}\n")

    return app_main(argv)


if __name__ == '__main__':
    sys.exit(main())
