"""
Main entry point for gembed when run from a source checkout.

    python main.py preprocess --synthetic --dataset-dir ./datasets/toy
    python main.py train --dataset-dir ./datasets/toy --run-dir ./runs/toy
"""

import sys
from pathlib import Path

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent / "src"))

from gembed.cli.main import main

if __name__ == "__main__":
    sys.exit(main())
