import csv
import os
import re
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustreg import config as cfgmod
from robustreg.cli import main
from robustreg.config import ConfigError, derive_seed, loads
from robustreg.runner import COLUMNS, fmt, read_csv, write_csv

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def yaml_text(**over):
    base = {
        "spec": """
  w_star: [0.3, -0.2, 0.1]
  D: 1.0
  feature: {variant: signed_basis, d: 3}
  noise: {variant: uniform_symmetric, sigma: 0.1}
  corruption:
    alpha: 0.2
    conditional: {variant: point_mass, M: 1000.0}
  rho: 0.3333333333333333""",
        "algorithms": "\n  - algorithm: huber_known_mean\n  - algorithm: l2_sgd",
        "t_grid": " [256, 1024]",
        "alphas": " [0.0, 0.2]",
        "repeats": " 2",
        "base_seed": " 11",
        "n_mc": " 2000",
        "output_path": " out.csv",
        "record_wall_time": " false",
    }
    base.update(over)
    return "".join(f"{k}:{v}\n" for k, v in base.items() if v is not None)


def line_of(text, prefix):
    return next(i for i, line in enumerate(text.splitlines(), 1) if line.lstrip().startswith(prefix))


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


# configuration

@pytest.mark.parametrize("name", ["minimal.yaml", "box_sweep.yaml"])
def test_config_round_trip(name):
    c1 = cfgmod.load(str(CONFIGS / name))
    c2 = loads(c1.dumps())
    assert c1 == c2
    assert c2.dumps() == c1.dumps()


def test_config_round_trip_generated():
    c1 = loads(yaml_text())
    assert loads(c1.dumps()).to_dict() == c1.to_dict()


@pytest.mark.parametrize("over, key", [
    ({"t_grid": " [1024, 256]"}, "t_grid:"),
    ({"alphas": " [0.2, 1.0]"}, "alphas:"),
    ({"repeats": " 0"}, "repeats:"),
    ({"algorithms": "\n  - algorithm: adam"}, "- algorithm: adam"),
])
def test_config_errors_carry_line_numbers(over, key):
    text = yaml_text(**over)
    line = line_of(text, key)
    with pytest.raises(ConfigError) as info:
        loads(text)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")


def test_config_error_inside_spec():
    text = yaml_text().replace("rho: 0.3333333333333333", "rho: -1")
    with pytest.raises(ConfigError) as info:
        loads(text)
    assert info.value.line == line_of(text, "rho:")


def test_config_yaml_syntax_error():
    with pytest.raises(ConfigError) as info:
        loads("spec: [1, 2\nalphas: 3\n")
    assert info.value.line is not None


def test_seed_injective_on_large_grid():
    seeds = {derive_seed(2024, a, f"alg{a}", li, ti, r)
             for a in range(4) for li in range(5) for ti in range(10) for r in range(50)}
    assert len(seeds) == 4 * 5 * 10 * 50


def test_seed_is_stable():
    assert derive_seed(0, 0, "l2_sgd", 0, 0, 0) == derive_seed(0, 0, "l2_sgd", 0, 0, 0)
    assert derive_seed(0, 0, "l2_sgd", 0, 0, 0) != derive_seed(1, 0, "l2_sgd", 0, 0, 0)


# CSV

@settings(max_examples=200)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_rendering_round_trips(x):
    assert float(fmt(x)) == x


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    vals = np.concatenate([rng.normal(size=40) * 10.0 ** rng.integers(-300, 300, size=40),
                           [0.1, 1 / 3, 2**-1074, 1.7976931348623157e308]])
    rows = [[f"r{i}", "l2_sgd", fmt(0.7), "1024", str(2**64 - 1 - i), fmt(v), fmt(-v), fmt(abs(v)),
             "" if i % 2 else fmt(v * 2), fmt(0.0)] for i, v in enumerate(vals)]
    path = tmp_path / "r.csv"
    write_csv(str(path), rows)
    raw = path.read_bytes()
    assert b"\r" not in raw and raw.startswith(",".join(COLUMNS).encode() + b"\n")
    back = read_csv(str(path))
    for v, row, i in zip(vals, back, range(len(vals))):
        assert row["est_error"] == v and row["excess_risk"] == -v
        assert row["seed"] == 2**64 - 1 - i
        assert (row["bound"] is None) == bool(i % 2)


# run

def test_minimal_config_one_row(tmp_path, capsys):
    shutil.copy(CONFIGS / "minimal.yaml", tmp_path)
    code, out, _ = run_cli(["run", str(tmp_path / "minimal.yaml")], capsys)
    assert code == 0
    lines = (tmp_path / "minimal.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[0] == ",".join(COLUMNS)
    assert "huber_known_mean" in out


def test_run_grid_rows_and_rerun_identical(tmp_path, capsys):
    path = write(tmp_path / "c.yaml", yaml_text())
    assert run_cli(["run", path, "--threads", "2"], capsys)[0] == 0
    first = (tmp_path / "out.csv").read_bytes()
    assert run_cli(["--threads", "1", "run", path], capsys)[0] == 0
    assert (tmp_path / "out.csv").read_bytes() == first
    rows = read_csv(str(tmp_path / "out.csv"))
    assert len(rows) == 2 * 2 * 2 * 2
    assert [r["run_id"] for r in rows][:3] == ["0-huber_known_mean-a0-T256-r0",
                                               "0-huber_known_mean-a0-T256-r1",
                                               "0-huber_known_mean-a0-T1024-r0"]
    assert all(r["wall_ms"] == 0.0 for r in rows)
    assert all((r["bound"] is None) == (r["algorithm"] == "l2_sgd") for r in rows)
    assert len({r["seed"] for r in rows}) == len(rows)


def test_seed_override_changes_results(tmp_path, capsys):
    path = write(tmp_path / "c.yaml", yaml_text(repeats=" 1"))
    run_cli(["run", path], capsys)
    a = read_csv(str(tmp_path / "out.csv"))
    run_cli(["run", path, "--seed-override", "12"], capsys)
    b = read_csv(str(tmp_path / "out.csv"))
    assert [r["seed"] for r in a] != [r["seed"] for r in b]


def test_wall_time_recorded_when_enabled(tmp_path, capsys):
    path = write(tmp_path / "c.yaml", yaml_text(record_wall_time=" true", repeats=" 1"))
    assert run_cli(["run", path], capsys)[0] == 0
    assert all(r["wall_ms"] > 0 for r in read_csv(str(tmp_path / "out.csv")))


def test_invalid_config_exit_2(tmp_path, capsys):
    text = yaml_text(t_grid=" [1024, 256]")
    path = write(tmp_path / "bad.yaml", text)
    code, _, err = run_cli(["run", path], capsys)
    assert code == 2
    assert re.search(rf"line {line_of(text, 't_grid:')}: t_grid must be strictly increasing", err)
    assert run_cli(["run", str(tmp_path / "missing.yaml")], capsys)[0] == 2


def test_runtime_failure_exit_1(tmp_path, capsys):
    (tmp_path / "blocker").write_text("not a directory")
    path = write(tmp_path / "c.yaml", yaml_text(output_path=" blocker/out.csv", repeats=" 1"))
    code, _, err = run_cli(["run", path], capsys)
    assert code == 1 and "run failed" in err


def test_usage_errors_exit_2(capsys):
    assert run_cli([], capsys)[0] == 2
    assert run_cli(["bogus"], capsys)[0] == 2
    assert run_cli(["run", "x.yaml", "--threads", "0"], capsys)[0] == 2


@pytest.mark.slow
def test_box_sweep_rows_and_plot(tmp_path, capsys):
    shutil.copy(CONFIGS / "box_sweep.yaml", tmp_path)
    code, _, _ = run_cli(["run", str(tmp_path / "box_sweep.yaml")], capsys)
    assert code == 0
    csv_path = tmp_path / "results" / "box_sweep.csv"
    rows = read_csv(str(csv_path))
    conf = cfgmod.load(str(CONFIGS / "box_sweep.yaml"))
    assert len(rows) == 2 * 3 * len(conf.t_grid) * 15

    code, out, _ = run_cli(["plot", str(csv_path), str(tmp_path / "fig.svg")], capsys)
    assert code == 0
    for alpha in ("0.01", "0.7"):
        svg = (tmp_path / f"fig_alpha{alpha}.svg").read_text()
        assert svg.count('class="mean"') == 3 and svg.count('class="ci"') == 3
        big = [r for r in rows if r["alpha"] == float(alpha) and r["T"] == conf.t_grid[-1]]
        means = {a: np.mean([r["est_error"] for r in big if r["algorithm"] == a])
                 for a in ("huber_streaming_mean", "huber_noncentered", "l2_sgd")}
        assert min(means, key=means.get) == "huber_streaming_mean"


# plot

def _result_csv(path, algorithms=("l2_sgd",), alphas=(0.1,)):
    rows = []
    for a in algorithms:
        for al in alphas:
            for T in (100, 1000, 10000):
                for r in range(3):
                    v = (1 + r) / T
                    rows.append([f"{a}-{T}-{r}", a, fmt(al), str(T), str(r), fmt(v), fmt(v / 2), fmt(0.0),
                                 "", fmt(1.0)])
    write_csv(str(path), rows)
    return str(path)


def test_plot_single_algorithm(tmp_path, capsys):
    src = _result_csv(tmp_path / "r.csv")
    out = tmp_path / "p.svg"
    code, _, _ = run_cli(["plot", src, str(out)], capsys)
    assert code == 0
    svg = out.read_text()
    assert svg.startswith("<?xml") and 'version="1.1"' in svg
    assert svg.count('class="mean"') == 1 and svg.count('class="legend"') == 1
    first = out.read_bytes()
    run_cli(["plot", src, str(out)], capsys)
    assert out.read_bytes() == first


def test_plot_one_file_per_alpha(tmp_path, capsys):
    src = _result_csv(tmp_path / "r.csv", ("a", "b"), (0.01, 0.7))
    code, out, _ = run_cli(["plot", src, str(tmp_path / "p.svg"), "--y", "excess_risk", "--no-logy"], capsys)
    assert code == 0
    assert sorted(os.listdir(tmp_path)) == ["p_alpha0.01.svg", "p_alpha0.7.svg", "r.csv"]


def test_plot_empty_body_exit_2(tmp_path, capsys):
    path = tmp_path / "e.csv"
    path.write_text(",".join(COLUMNS) + "\n")
    code, _, err = run_cli(["plot", str(path), str(tmp_path / "p.svg")], capsys)
    assert code == 2 and "no data" in err


def test_plot_schema_mismatch_lists_columns(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run_id", "algorithm", "alpha", "T", "seed", "est_error"])
        w.writerow(["x", "l2_sgd", "0.1", "10", "1", "0.5"])
    code, _, err = run_cli(["plot", str(path), str(tmp_path / "p.svg")], capsys)
    assert code == 2
    for col in ("excess_risk", "excess_risk_se", "bound", "wall_ms"):
        assert col in err


# demos

def test_demo_outputs_and_exit_codes(capsys):
    code, out, _ = run_cli(["demo", "example21", "--C", "10", "--alpha", "0.5"], capsys)
    assert code == 0
    kv = dict(line.split("=", 1) for line in out.splitlines() if "=" in line and " " not in line)
    assert abs(float(kv["l2_estimate_mean"]) - 6.0) <= 0.5
    assert abs(float(kv["huber_estimate_mean"]) - 1.0) <= 0.1
    code, out, _ = run_cli(["demo", "indistinguishable", "--T", "100000"], capsys)
    assert code == 0 and "passed=true" in out
    code, out, _ = run_cli(["demo", "decomposition", "--points", "5", "--n-mc", "20000"], capsys)
    assert code == 0 and "max_abs_z=" in out


def test_demo_failed_assertion_exit_1(capsys):
    code, out, _ = run_cli(["demo", "indistinguishable", "--alpha", "0", "--T", "1000"], capsys)
    assert code == 1 and "passed=false" in out


def test_unknown_demo_exit_2(capsys):
    assert run_cli(["demo", "nonsense"], capsys)[0] == 2


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "robustreg", "demo", "nonsense"],
                         capture_output=True, text=True)
    assert out.returncode == 2 and "unknown demo" in out.stderr
