import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from l1proxgrad import cli
from l1proxgrad.cli import (
    ExperimentConfig,
    config_from_args,
    build_parser,
    main,
    read_csv,
    run_prox_bench,
    run_regularity_report,
    run_table,
    run_trace,
    table_columns,
)
from l1proxgrad.fem import PdeConfig
from l1proxgrad.refcache import CacheFormatError, cache_key, read_control, reference_solution, write_control


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(allow_nan=False), max_size=50))
def test_cache_round_trip(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("c") / "u.bin"
    u = np.array(values, dtype=float)
    write_control(path, u)
    assert read_control(path).tobytes() == u.tobytes()


def test_cache_rejects_corruption(tmp_path):
    path = tmp_path / "u.bin"
    write_control(path, np.arange(4.0))
    data = path.read_bytes()
    (tmp_path / "magic.bin").write_bytes(b"XXXX" + data[4:])
    (tmp_path / "short.bin").write_bytes(data[:-3])
    (tmp_path / "head.bin").write_bytes(data[:5])
    (tmp_path / "version.bin").write_bytes(data[:4] + (7).to_bytes(4, "little") + data[8:])
    for name in ("magic", "short", "head", "version"):
        with pytest.raises(CacheFormatError):
            read_control(tmp_path / f"{name}.bin")
    assert not list(tmp_path.glob("*.tmp"))


def test_cache_key_distinguishes_problems():
    keys = {cache_key(32, PdeConfig.dirichlet(0)), cache_key(64, PdeConfig.dirichlet(0)),
            cache_key(32, PdeConfig.dirichlet(10)), cache_key(32, PdeConfig.neumann(0))}
    assert len(keys) == 4
    assert cache_key(32, PdeConfig.dirichlet(0)) == cache_key(32, PdeConfig.dirichlet(0.0))


def test_reference_solution_cached(tmp_path):
    u1, j1 = reference_solution(4, PdeConfig.dirichlet(0), tmp_path)
    files = list(tmp_path.glob("ref_*.bin"))
    assert len(files) == 1
    u2, j2 = reference_solution(4, PdeConfig.dirichlet(0), tmp_path)
    assert u1.tobytes() == u2.tobytes() and j1 == j2


def test_config_from_json_nested_problem(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"problem": {"alpha": 10, "bc": "neumann"}, "levels": [64, 32]}))
    cfg = ExperimentConfig.from_json(path)
    assert cfg.levels == [32, 64] and cfg.pde == PdeConfig.neumann(10)
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again.pde == cfg.pde and again.levels == cfg.levels


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(algorithms=["newton"])
    with pytest.raises(ValueError):
        ExperimentConfig(bc="robin")
    with pytest.raises(ValueError):
        ExperimentConfig(levels=[0])
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"unknown": 1})
    with pytest.raises(ValueError):
        ExperimentConfig(gap_tol=1e-12)


def test_cli_overrides(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"problem": {"alpha": 0, "bc": "dirichlet"}, "levels": [32]}))
    args = build_parser().parse_args(["table", "--config", str(path), "--bc", "neumann",
                                      "--levels", "4,8", "--algorithms", "fw"])
    cfg = config_from_args(args)
    assert cfg.pde.bounds == (-10.0, 10.0) and cfg.levels == [4, 8] and cfg.algorithms == ["fw"]


def test_table_schema_and_determinism(tmp_path):
    cfg = ExperimentConfig(levels=[4, 6], output_dir=str(tmp_path))
    out = run_table(cfg)
    assert out.read_text().splitlines()[0] == "# columns: " + ",".join(table_columns(cfg.algorithms))
    rows = read_csv(out)
    assert [int(r["nodes"]) for r in rows] == [25, 49]
    assert [int(r["triangles"]) for r in rows] == [32, 72]
    iters = [[r[f"{a}_iter"] for a in cfg.algorithms] for r in rows]
    assert all(x.isdigit() for row in iters for x in row)
    again = read_csv(run_table(cfg))
    assert iters == [[r[f"{a}_iter"] for a in cfg.algorithms] for r in again]


def test_table_parallel_matches_serial(tmp_path):
    serial = read_csv(run_table(ExperimentConfig(levels=[4, 5], output_dir=str(tmp_path / "a"))))
    par = read_csv(run_table(ExperimentConfig(levels=[4, 5], output_dir=str(tmp_path / "b"), jobs=2)))
    for a, b in zip(serial, par):
        assert [a[k] for k in a if k.endswith("_iter")] == [b[k] for k in b if k.endswith("_iter")]


def test_table_without_algorithms(tmp_path):
    out = run_table(ExperimentConfig(levels=[4], algorithms=[], output_dir=str(tmp_path)))
    assert out.read_text().splitlines() == ["# columns: nodes,triangles", "nodes,triangles"]


def test_table_marks_unconverged_runs(tmp_path):
    cfg = ExperimentConfig(levels=[4], algorithms=["fw"], max_iter=1, output_dir=str(tmp_path))
    assert read_csv(run_table(cfg))[0]["fw_iter"] == "DNF"


def test_table_marks_failures(tmp_path, monkeypatch):
    from l1proxgrad.optimizers import BacktrackExhausted

    def boom(*a, **k):
        raise BacktrackExhausted("forced")

    monkeypatch.setattr(cli, "run", boom)
    cfg = ExperimentConfig(levels=[4], algorithms=["pg_l1"], output_dir=str(tmp_path))
    row = read_csv(run_table(cfg))[0]
    assert row["pg_l1_iter"] == "DNF" and row["pg_l1_time"] == "DNF"


def test_trace_files(tmp_path):
    cfg = ExperimentConfig(levels=[6], output_dir=str(tmp_path))
    paths = run_trace(cfg, 6)
    assert [p.name for p in paths] == [f"trace_{a}_6.csv" for a in cfg.algorithms]
    for path, alg in zip(paths, cfg.algorithms):
        rows = read_csv(path)
        assert list(rows[0]) == cli.TRACE_COLUMNS
        res = np.array([float(r["residual"]) for r in rows])
        assert res.min() >= -1e-11
        if alg != "fw":
            assert np.all(np.diff(res) <= 1e-14)
        assert float(rows[-1]["gap"]) <= cfg.gap_tol


def test_regularity_report(tmp_path):
    out = run_regularity_report(ExperimentConfig(levels=[8], output_dir=str(tmp_path)))
    rows = read_csv(out)
    sections = {r["section"] for r in rows}
    assert sections == {"qg_63", "plk_63", "sms_64", "sublevel"}
    assert all(r["ok"] == "True" for r in rows if r["section"] != "sublevel")
    c_hat = [r for r in rows if r["key"] == "c_hat"]
    assert len(c_hat) == 1 and np.isfinite(float(c_hat[0]["value"]))


def test_prox_bench(tmp_path):
    out = run_prox_bench(ExperimentConfig(output_dir=str(tmp_path)), instances=200, sizes=(100, 1000))
    rows = read_csv(out)
    assert rows[0]["n"] == "random_small"
    assert float(rows[0]["max_alpha_diff"]) <= 1e-12 * 1e6
    assert [r["n"] for r in rows[1:]] == ["100", "1000"]


def test_main_entry(tmp_path, capsys):
    assert main(["table", "--levels", "4", "--algorithms", "pg_l1", "--out", str(tmp_path)]) == 0
    assert "table.csv" in capsys.readouterr().out
    assert main(["prox-bench", "--instances", "10", "--sizes", "50", "--out", str(tmp_path)]) == 0
    with pytest.raises(SystemExit):
        main(["nonsense"])
