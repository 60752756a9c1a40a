"""Grid experiment: synthesis success across network width and domain radius.

Reproduces the shape of the width-vs-radius performance table on the planar
benchmark (success / out-of-time per cell, not wall-clock numbers, which
are hardware and solver dependent).

Run from the repository root:  python3 scripts/run_domain_grid.py [out.csv]
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from lyasynth.cli import main as cli_main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "domain_grid.csv"
    sys.exit(
        cli_main(
            [
                "sweep",
                "--benchmark", "parrilo",
                "--hidden-grid", "2;5;10",
                "--gamma-grid", "10,20,50,100",
                "--seed", "0",
                "--out", out,
            ]
        )
    )
