"""Iteration counts as a function of the initial stepsize parameter L_init.

With the default L_init = 1 the linear runs never reject a trial step, so
the count is essentially the number of shrink steps needed to bring L_k
down to the scale of the problem. This script makes that dependence visible.

    python scripts/stepsize_sensitivity.py --level 64
"""

import argparse

import numpy as np

from l1proxgrad import BacktrackConfig, PdeConfig, RunConfig, run
from l1proxgrad.optimizers import ALGORITHMS


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--level", type=int, default=32)
    ap.add_argument("--alpha", type=float, default=0.0)
    ap.add_argument("--l-init", type=lambda s: [float(x) for x in s.split(",")],
                    default=[1e-6, 1e-4, 1e-2, 1.0, 1e2])
    args = ap.parse_args()
    pde = PdeConfig.dirichlet(args.alpha)

    print(f"{'L_init':>8}  " + "  ".join(f"{a:>18}" for a in ALGORITHMS))
    print(f"{'':>8}  " + "  ".join(f"{'iters rej L_last':>18}" for _ in ALGORITHMS))
    for L0 in args.l_init:
        cells = []
        for alg in ALGORITHMS:
            bt = BacktrackConfig(L_init=L0)
            res = run(RunConfig(algorithm=alg, pde=pde, level=args.level, backtrack=bt))
            steps = res.history[:-1]
            rejected = sum(r.trials - 1 for r in steps)
            last = steps[-1].stepsize if steps else np.nan
            cells.append(f"{res.iterations:>5} {rejected:>4} {last:>8.1e}")
        print(f"{L0:>8.0e}  " + "  ".join(f"{c:>18}" for c in cells))


if __name__ == "__main__":
    main()
