"""Write the resolution trade-off table (edge and streaming) as CSV files.

    python3 scripts/resolution_sweep.py --out results/
"""

from __future__ import annotations

import argparse
from pathlib import Path

from edgenode.cli import sweep_report
from edgenode.scenario_io import DEFAULT_CALIBRATION, SCENARIO_DIR, emit_report


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    ap.add_argument("--calibration", type=Path, default=DEFAULT_CALIBRATION)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for mode in ("edge", "streaming"):
        report = sweep_report(args.calibration, mode, SCENARIO_DIR / "edge_192.cfg", SCENARIO_DIR / "streaming.cfg")
        path = args.out / f"sweep_{mode}.csv"
        path.write_bytes(emit_report(report, "csv"))
        print(emit_report(report, "text").decode())
        print(f"-> {path}\n")


if __name__ == "__main__":
    main()
