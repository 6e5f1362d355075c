"""Iteration/time tables for the four problem configurations in configs/.

    python scripts/run_tables.py                    # levels from each config
    python scripts/run_tables.py --levels 32,64 --jobs 4
"""

import argparse
import logging
from dataclasses import replace
from pathlib import Path

from l1proxgrad.cli import ExperimentConfig, read_csv, run_table

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=lambda s: [int(x) for x in s.split(",")])
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("configs", nargs="*", type=Path,
                    default=sorted(CONFIG_DIR.glob("*.json")))
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    for path in args.configs:
        cfg = replace(ExperimentConfig.from_json(path), jobs=args.jobs)
        if args.levels:
            cfg = replace(cfg, levels=args.levels)
        out = run_table(cfg)
        print(f"\n{path.stem} -> {out}")
        rows = read_csv(out)
        header = ["level"] + [f"{a:>7}" for a in cfg.algorithms]
        print("  ".join(header))
        for lvl, row in zip(cfg.levels, rows):
            print("  ".join([f"{lvl:>5}"] + [f"{row[a + '_iter']:>7}" for a in cfg.algorithms]))


if __name__ == "__main__":
    main()
