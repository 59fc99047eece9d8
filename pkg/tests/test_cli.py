import json

import numpy as np
import pytest

from memoctrl.cli import (ConfigError, field_from_csv, field_to_csv,
                          load_config, main, normalize_config)
from memoctrl.fields import SpaceTimeField, SpatialGrid
from memoctrl.params import Box
from memoctrl.timeops import TimeGrid


def write_cfg(tmp_path, overrides, name="cfg.json"):
    path = tmp_path / name
    with open(path, "w") as fh:
        json.dump(overrides, fh)
    return str(path)


TINY = {"nodes_per_axis": [17], "nt": 16,
        "source": {"preset": "constant", "amplitude": 0.0}}


def test_config_round_trip(tmp_path):
    cfg = normalize_config({"n": 4, "C0": 2.0, "nt": 32})
    path = tmp_path / "echo.json"
    with open(path, "w") as fh:
        json.dump(cfg, fh)
    again = load_config(path)
    assert again == cfg


def test_config_rejections():
    with pytest.raises(ConfigError):
        normalize_config({"mystery_key": 1})
    with pytest.raises(ConfigError):
        normalize_config({"n": 2})
    with pytest.raises(ConfigError):
        normalize_config({"omega_box": {"lo": [0.5], "hi": [1.5]}})
    with pytest.raises(ConfigError):
        normalize_config({"nodes_per_axis": [2]})
    with pytest.raises(ConfigError):
        normalize_config({"source": {"preset": "banana"}})
    with pytest.raises(ConfigError):
        normalize_config({"solver": {"bogus": 1}})


def test_memory_cap_guard():
    with pytest.raises(ConfigError):
        normalize_config({"nodes_per_axis": [100000], "nt": 10000})


def test_solve_zero_source(tmp_path):
    cfg = write_cfg(tmp_path, TINY)
    out = tmp_path / "run"
    assert main(["--config", cfg, "--out", str(out), "solve"]) == 0
    lines = (out / "u0.csv").read_text().splitlines()
    assert lines[0] == "x,t,value"
    vals = [float(line.split(",")[2]) for line in lines[1:]]
    assert all(v == 0.0 for v in vals)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["reports"]["state"]["converged"] is True


def test_solve_bad_config_exit_1(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"omega_box": {"lo": [-1.0], "hi": [2.0]}})
    assert main(["--config", cfg, "--out", str(tmp_path / "x"), "solve"]) == 1
    assert "strictly inside" in capsys.readouterr().err


def test_oversize_grid_exit_1(tmp_path):
    cfg = write_cfg(tmp_path, {"nodes_per_axis": [100000], "nt": 10000})
    assert main(["--config", cfg, "--out", str(tmp_path / "x"), "solve"]) == 1


def test_optimize_zero_source(tmp_path):
    cfg = write_cfg(tmp_path, TINY)
    out = tmp_path / "opt"
    assert main(["--config", cfg, "--out", str(out), "optimize"]) == 0
    breakdown = json.loads((out / "breakdown.json").read_text())
    assert breakdown["total"] == 0.0
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["outputs"]) >= {"u0.csv", "p0.csv", "v0.csv",
                                        "breakdown.json", "breakdown.csv"}


def test_optimize_deterministic(tmp_path):
    overrides = {"nodes_per_axis": [17], "nt": 16,
                 "source": {"preset": "sine-product", "amplitude": 1.0}}
    cfg = write_cfg(tmp_path, overrides)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["--config", cfg, "--out", str(out_a), "optimize"]) == 0
    assert main(["--config", cfg, "--out", str(out_b), "optimize"]) == 0
    for name in ("u0.csv", "p0.csv", "v0.csv", "breakdown.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_field_csv_round_trip(tmp_path):
    grid = SpatialGrid(Box((0.0, 0.0), (1.0, 2.0)), (5, 7))
    tgrid = TimeGrid(T=1.0, nt=4)
    rng = np.random.default_rng(0)
    field = SpaceTimeField(grid, tgrid,
                           rng.normal(size=(grid.nnodes, tgrid.nt + 1)))
    path = tmp_path / "field.csv"
    field_to_csv(field, path)
    header = path.read_text().splitlines()[0]
    assert header == "x,y,t,value"
    back = field_from_csv(path, grid, tgrid)
    assert np.array_equal(back.values, field.values)


def test_source_from_csv(tmp_path):
    cfg0 = normalize_config(dict(TINY))
    from memoctrl.cli import build_grids, build_params, build_source
    params = build_params(cfg0)
    grid, tgrid = build_grids(cfg0, params)
    field = SpaceTimeField.from_function(grid, tgrid,
                                         lambda x, t: np.sin(x) * (1 + t))
    path = tmp_path / "f.csv"
    field_to_csv(field, path)
    cfg = normalize_config({**TINY, "source": {"csv": str(path)}})
    rebuilt = build_source(cfg, params, grid, tgrid)
    assert np.allclose(rebuilt.values, field.values, atol=1e-15)


def test_verify_exit_codes(tmp_path, capsys):
    cfg = write_cfg(tmp_path, TINY)
    code = main(["--config", cfg, "--out", str(tmp_path / "v1"),
                 "--seed", "7", "verify"])
    table_a = capsys.readouterr().out
    assert code == 0
    assert table_a.count("PASS") >= 15
    code = main(["--config", cfg, "--out", str(tmp_path / "v2"),
                 "--seed", "7", "verify"])
    table_b = capsys.readouterr().out
    assert code == 0
    assert table_a == table_b  # same seed, identical report


def test_verify_tamper_exit_3(tmp_path, capsys):
    cfg = write_cfg(tmp_path, TINY)
    code = main(["--config", cfg, "--out", str(tmp_path / "v3"),
                 "verify", "--tamper-an", "1.1"])
    captured = capsys.readouterr()
    assert code == 3
    assert "capacity-oracle" in captured.err


def test_sweep_aggregate(tmp_path):
    overrides = {"nodes_per_axis": [17], "nt": 16,
                 "source": {"preset": "constant", "amplitude": 1.0}}
    cfg = write_cfg(tmp_path, overrides)
    out = tmp_path / "swp"
    code = main(["--config", cfg, "--out", str(out),
                 "sweep", "--axis", "N", "--values", "1,10"])
    assert code == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    header = lines[0].split(",")
    rows = [dict(zip(header, line.split(","))) for line in lines[1:]]
    assert len(rows) == 2
    # the explicit-control cost coefficient N*An*Bn scales with the swept N
    coef = [float(r["N_param"]) * float(r["An"]) * float(r["Bn"])
            for r in rows]
    assert coef[1] / coef[0] == pytest.approx(10.0, rel=1e-12)
    assert all(r["converged"] == "True" for r in rows)


def test_sweep_refinement_gap_decreases(tmp_path):
    overrides = {"nodes_per_axis": [33], "nt": 16,
                 "source": {"preset": "constant", "amplitude": 1.0}}
    cfg = write_cfg(tmp_path, overrides)
    out = tmp_path / "swp_nt"
    code = main(["--config", cfg, "--out", str(out),
                 "sweep", "--axis", "nt", "--values", "16,32,64"])
    assert code == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    header = lines[0].split(",")
    gaps = [float(dict(zip(header, line.split(",")))["fp_rel_gap"])
            for line in lines[1:]]
    assert gaps[0] > gaps[1] > gaps[2]


def test_sweep_empty_values_exit_1(tmp_path):
    cfg = write_cfg(tmp_path, TINY)
    assert main(["--config", cfg, "--out", str(tmp_path / "s"),
                 "sweep", "--axis", "N", "--values", ","]) == 1


def test_sweep_parallel_workers(tmp_path):
    overrides = {"nodes_per_axis": [9], "nt": 8,
                 "source": {"preset": "constant", "amplitude": 1.0}}
    cfg = write_cfg(tmp_path, overrides)
    out = tmp_path / "par"
    code = main(["--config", cfg, "--out", str(out), "--workers", "2",
                 "sweep", "--axis", "C0", "--values", "0.5,1.0"])
    assert code == 0
    assert (out / "sweep.csv").exists()
    assert (out / "point_000" / "manifest.json").exists()
    assert (out / "point_001" / "manifest.json").exists()


def test_series_csv_round_trip(tmp_path):
    from memoctrl.cli import series_from_csv, series_to_csv
    from memoctrl.timeops import TimeGrid, TimeSeries
    grid = TimeGrid(T=2.0, nt=10)
    s = TimeSeries(grid, np.sin(grid.times))
    path = tmp_path / "series.csv"
    series_to_csv(s, path)
    assert path.read_text().splitlines()[0] == "t,value"
    back = series_from_csv(path, grid)
    assert np.array_equal(back.values, s.values)


def test_usage_error_exit_1(tmp_path):
    cfg = write_cfg(tmp_path, TINY)
    # unknown sweep axis is a usage/validation error, never anything but 1
    assert main(["--config", cfg, "--out", str(tmp_path / "u"),
                 "sweep", "--axis", "bogus", "--values", "1,2"]) == 1
    assert main(["--totally-bogus-flag", "solve"]) == 1


def test_optimize_default_desk_grid_fp_gap(tmp_path):
    # the stock configuration must demonstrate the cost identity at 1e-3
    out = tmp_path / "desk"
    assert main(["--out", str(out), "optimize"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["fp_identity"]["rel_gap"] <= 1e-3
