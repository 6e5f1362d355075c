"""Experiment driver: iteration tables, convergence traces, regularity report.

Usage::

    python -m l1proxgrad table --config configs/linear_dirichlet.json --levels 32,64
    python -m l1proxgrad trace --config configs/linear_dirichlet.json --level 256
    python -m l1proxgrad regularity --level 64
    python -m l1proxgrad prox-bench --instances 2000
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import prox, regularity
from .fem import ControlProblem, NonConvergence, PdeConfig
from .mesh import build_uniform_mesh
from .optimizers import ALGORITHMS, BacktrackConfig, BacktrackExhausted, RunConfig, run
from .refcache import reference_solution

log = logging.getLogger("l1proxgrad")

DEFAULT_LEVELS = [32, 64, 128, 256, 512, 1024]


@dataclass
class ExperimentConfig:
    alpha: float = 0.0
    bc: str = "dirichlet"
    bounds: tuple[float, float] | None = None  # default: ±5 Dirichlet, ±10 Neumann
    levels: list[int] = field(default_factory=lambda: list(DEFAULT_LEVELS))
    algorithms: list[str] = field(default_factory=lambda: list(ALGORITHMS))
    gap_tol: float = 1e-8
    ref_gap_tol: float = 1e-11
    max_iter: int = 5000
    seed: int = 0
    output_dir: str = "results"
    cache_dir: str | None = None
    jobs: int = 1

    def __post_init__(self):
        self.levels = sorted(int(n) for n in self.levels)
        if any(n < 1 for n in self.levels):
            raise ValueError("mesh levels must be positive")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms {sorted(unknown)}")
        if not self.gap_tol > 0 or not self.ref_gap_tol < self.gap_tol:
            raise ValueError("need gap_tol > 0 and ref_gap_tol < gap_tol")
        self.pde  # validates bounds/bc early

    @property
    def pde(self) -> PdeConfig:
        if self.bc not in ("dirichlet", "neumann"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")
        base = PdeConfig.neumann(self.alpha) if self.bc == "neumann" else PdeConfig.dirichlet(self.alpha)
        return base if self.bounds is None else replace(base, bounds=tuple(self.bounds))

    @property
    def cache_path(self) -> Path:
        return Path(self.cache_dir) if self.cache_dir else Path(self.output_dir) / "cache"

    def run_config(self, algorithm: str, level: int) -> RunConfig:
        return RunConfig(algorithm=algorithm, gap_tol=self.gap_tol, max_iter=self.max_iter,
                         pde=self.pde, level=level, backtrack=BacktrackConfig(), seed=self.seed)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        problem = doc.pop("problem", {}) or {}
        for key in ("alpha", "bc", "bounds"):
            if key in problem:
                doc[key] = problem[key]
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        if doc.get("bounds") is not None:
            doc["bounds"] = tuple(doc["bounds"])
        return cls(**doc)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["problem"] = {"alpha": d.pop("alpha"), "bc": d.pop("bc"), "bounds": list(self.pde.bounds)}
        return d


def _write_csv(path: Path, columns: list[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write("# columns: " + ",".join(columns) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)
    return path


def read_csv(path) -> list[dict]:
    """Read a CSV written by this module, skipping the '#' schema line."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _table_job(args):
    cfg, algorithm, level = args
    try:
        res = run(cfg.run_config(algorithm, level))
    except (NonConvergence, BacktrackExhausted, ArithmeticError) as exc:
        log.error("%s at level %d failed: %s", algorithm, level, exc)
        return "DNF", "DNF"
    if not res.converged:
        return "DNF", f"{res.history[-1].wall_time:.3f}"
    return res.iterations, f"{res.history[-1].wall_time:.3f}"


def table_columns(algorithms) -> list[str]:
    cols = ["nodes", "triangles"]
    for alg in algorithms:
        cols += [f"{alg}_iter", f"{alg}_time"]
    return cols


def run_table(config: ExperimentConfig) -> Path:
    """One row per mesh level with (iterations, seconds) per algorithm."""
    tasks = [(config, alg, lvl) for lvl in config.levels for alg in config.algorithms]
    if config.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_table_job, tasks))
    else:
        results = [_table_job(t) for t in tasks]
    rows = []
    it = iter(results)
    if config.algorithms:
        for lvl in config.levels:
            row = [(lvl + 1) ** 2, 2 * lvl * lvl]
            for _ in config.algorithms:
                row.extend(next(it))
            rows.append(row)
    out = _write_csv(Path(config.output_dir) / "table.csv", table_columns(config.algorithms), rows)
    log.info("wrote %s", out)
    return out


TRACE_COLUMNS = ["k", "residual", "gap", "nonbb", "stepsize"]


def run_trace(config: ExperimentConfig, level: int) -> list[Path]:
    """Per-iteration trace for each configured algorithm, relative to a cached reference."""
    mesh = build_uniform_mesh(level)
    ref_problem = ControlProblem(mesh, config.pde)
    _, j_ref = reference_solution(level, config.pde, config.cache_path, config.ref_gap_tol,
                                  config.seed, ref_problem)
    paths = []
    for alg in config.algorithms:
        res = run(config.run_config(alg, level), ControlProblem(mesh, config.pde))
        rows = [(r.k, repr(r.objective - j_ref), repr(r.gap), r.nonbb, repr(r.stepsize))
                for r in res.history]
        path = Path(config.output_dir) / f"trace_{alg}_{level}.csv"
        paths.append(_write_csv(path, TRACE_COLUMNS, rows))
        log.info("wrote %s (%d iterations)", path, res.iterations)
    return paths


REGULARITY_COLUMNS = ["section", "key", "value", "reference", "extra", "ok"]
EPS_LIST = [1e-1, 5e-2, 2e-2, 1e-2, 5e-3, 2e-3, 1e-3, 1e-4]


def run_regularity_report(config: ExperimentConfig, level: int | None = None) -> Path:
    """Counterexample checks plus the sublevel-set diagnostic of a converged adjoint."""
    rows = []
    grid = np.logspace(-6, 0, 2000)
    qg = regularity.check_qg_63(grid)
    rows.append(("qg_63", "min_ratio", repr(qg), repr(1 / 7), "", qg >= 1 / 7 - 1e-12))
    for w in regularity.check_plk_failure_63():
        rows.append(("plk_63", w.i, repr(w.t), repr(w.grad), repr(w.value),
                     w.grad == 0.0 and w.value > 0))
    for n, target, lo, hi, ok in regularity.stationary_lattice_64():
        rows.append(("sms_64", n, repr(target), f"[{lo!r},{hi!r}]", "", ok))

    level = config.levels[0] if level is None else level
    mesh = build_uniform_mesh(level)
    prob = ControlProblem(mesh, config.pde)
    u_ref, _ = reference_solution(level, config.pde, config.cache_path, config.ref_gap_tol,
                                  config.seed, prob)
    p = prob.solve_adjoint(prob.solve_state(u_ref))
    table, c_hat = regularity.check_71_diagnostic(p, mesh, EPS_LIST)
    for r in table:
        rows.append(("sublevel", repr(r.eps), repr(r.measure), repr(r.ratio), level, ""))
    rows.append(("sublevel", "c_hat", repr(c_hat), "", level, ""))
    out = _write_csv(Path(config.output_dir) / "regularity.csv", REGULARITY_COLUMNS, rows)
    log.info("wrote %s", out)
    return out


def random_prox_problem(rng: np.random.Generator, n: int, bounds=(-1.0, 1.0)) -> prox.ProxProblem:
    """Random instance: log-uniform areas and stepsize, normal gradient, mixed bang-bang start."""
    ua, ub = bounds
    areas = np.exp(rng.uniform(np.log(1e-6), 0.0, n))
    gamma = rng.standard_normal(n)
    L = float(np.exp(rng.uniform(np.log(1e-3), np.log(1e3))))
    u = rng.uniform(ua, ub, n)
    at_bound = rng.random(n) < 0.5
    u[at_bound] = rng.choice([ua, ub], at_bound.sum())
    return prox.ProxProblem(gamma, areas, u, L, bounds)


BENCH_COLUMNS = ["n", "quickselect_s", "sorted_s", "max_alpha_diff", "max_kkt"]


def run_prox_bench(config: ExperimentConfig, instances: int = 1000,
                   sizes=(1_000, 10_000, 100_000, 1_000_000)) -> Path:
    """Random-instance cross-check of both prox solvers plus timing on large N."""
    rng = np.random.default_rng(config.seed)
    worst_alpha = worst_kkt = 0.0
    for _ in range(instances):
        p = random_prox_problem(rng, int(rng.integers(1, 65)))
        a = prox.solve_quickselect(p, rng)
        b = prox.solve_sorted(p)
        worst_alpha = max(worst_alpha, abs(a.alpha - b.alpha))
        worst_kkt = max(worst_kkt, prox.kkt_check(p, a), prox.kkt_check(p, b))
    rows = [("random_small", "", "", repr(worst_alpha), repr(worst_kkt))]
    for n in sizes:
        p = random_prox_problem(rng, n)
        t0 = time.perf_counter()
        a = prox.solve_quickselect(p, rng)
        t1 = time.perf_counter()
        b = prox.solve_sorted(p)
        t2 = time.perf_counter()
        rows.append((n, f"{t1 - t0:.6f}", f"{t2 - t1:.6f}", repr(abs(a.alpha - b.alpha)),
                     repr(prox.kkt_check(p, a))))
    out = _write_csv(Path(config.output_dir) / "prox_bench.csv", BENCH_COLUMNS, rows)
    log.info("wrote %s", out)
    return out


def _levels(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _algorithms(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="l1proxgrad", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment manifest")
    common.add_argument("--alpha", type=float)
    common.add_argument("--bc", choices=["dirichlet", "neumann"])
    common.add_argument("--levels", type=_levels, help="comma-separated mesh levels")
    common.add_argument("--algorithms", type=_algorithms, help="subset of pg_l1,pg_l2,fw")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", dest="output_dir")
    common.add_argument("--jobs", type=int)

    sub.add_parser("table", parents=[common], help="iteration/time table over mesh levels")
    tr = sub.add_parser("trace", parents=[common], help="per-iteration convergence traces")
    tr.add_argument("--level", type=int, default=None)
    rg = sub.add_parser("regularity", parents=[common], help="counterexamples and sublevel diagnostic")
    rg.add_argument("--level", type=int, default=None)
    pb = sub.add_parser("prox-bench", parents=[common], help="prox solver cross-check and timing")
    pb.add_argument("--instances", type=int, default=1000)
    pb.add_argument("--sizes", type=_levels, default=[1_000, 10_000, 100_000, 1_000_000])
    return parser


def config_from_args(args) -> ExperimentConfig:
    doc = json.loads(args.config.read_text()) if args.config else {}
    cfg = ExperimentConfig.from_dict(doc)
    overrides = {k: getattr(args, k) for k in
                 ("alpha", "bc", "levels", "algorithms", "seed", "output_dir", "jobs")
                 if getattr(args, k, None) is not None}
    if "bc" in overrides and "bounds" not in (doc.get("problem") or {}) and "bounds" not in doc:
        overrides["bounds"] = None
    return replace(cfg, **overrides) if overrides else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = config_from_args(args)
    if args.command == "table":
        print(run_table(cfg))
    elif args.command == "trace":
        level = args.level if args.level is not None else cfg.levels[0]
        for p in run_trace(cfg, level):
            print(p)
    elif args.command == "regularity":
        print(run_regularity_report(cfg, args.level))
    elif args.command == "prox-bench":
        print(run_prox_bench(cfg, args.instances, args.sizes))
    return 0


if __name__ == "__main__":
    sys.exit(main())
