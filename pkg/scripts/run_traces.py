"""Convergence traces (objective residual, gap, non-bang-bang count) for one level.

    python scripts/run_traces.py --level 256
    python scripts/run_traces.py --config configs/nonlinear_neumann.json --level 64
"""

import argparse
import logging
from pathlib import Path

from l1proxgrad.cli import ExperimentConfig, read_csv, run_trace

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "linear_dirichlet.json")
    ap.add_argument("--level", type=int, default=256)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    cfg = ExperimentConfig.from_json(args.config)
    for path in run_trace(cfg, args.level):
        rows = read_csv(path)
        nonbb = [int(r["nonbb"]) for r in rows]
        print(f"{path.name}: {len(rows) - 1} iterations, final residual {float(rows[-1]['residual']):.3e}, "
              f"non-bang-bang max {max(nonbb)} final {nonbb[-1]}")


if __name__ == "__main__":
    main()
