# app.py (Main entry point)
#!/usr/bin/env python3
"""
Meshfree operator learning on point-cloud manifolds
Command-line launcher
"""

import sys
from pathlib import Path

# Add repo root to path
sys.path.insert(0, str(Path(__file__).parent))

from src.cli.main import main

if __name__ == "__main__":
    sys.exit(main())
