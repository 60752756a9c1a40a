"""End-to-end demo on the planar benchmark system.

Synthesizes a certificate for x' = -x + x*y, y' = -y over the radius-100
disc with a two-neuron quadratic network, prints the exact certificate,
and exports a level-set grid for plotting.

Run from the repository root:  python3 scripts/run_walkthrough.py
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from lyasynth.cegis import CegisConfig, run_cegis
from lyasynth.cli import main as cli_main
from lyasynth.dynamics import get_benchmark
from lyasynth.network import NetworkShape


def run(out_dir: Path) -> int:
    bench = get_benchmark("parrilo")
    cfg = CegisConfig(
        shape=NetworkShape(2, (2,), (2,)),
        domain=bench.default_domain,
        last_layer_mode="ones",
        master_seed=2024,
        emit_smt=True,
    )
    outcome = run_cegis(bench.field, cfg, artifact_dir=out_dir, progress=print)
    print(f"\nstatus: {outcome.status} after {len(outcome.iterations)} iteration(s)")
    if not outcome.verified:
        return 1
    names = outcome.certificate.var_names
    print("certificate:")
    print("  V =", outcome.certificate.v.to_text(names))
    print("  Vdot =", outcome.certificate.vdot.to_text(names))

    cli_main(
        [
            "levelsets",
            "--certificate", str(out_dir / "certificate.txt"),
            "--benchmark", "parrilo",
            "--resolution", "201",
            "--history", str(out_dir / "history.json"),
            "--out", str(out_dir / "levelsets.csv"),
        ]
    )
    print(f"artifacts in {out_dir}/")
    return 0


if __name__ == "__main__":
    sys.exit(run(Path(sys.argv[1] if len(sys.argv) > 1 else "walkthrough_out")))
