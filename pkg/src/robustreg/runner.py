"""Grid execution over (algorithm, alpha, T, repeat) and the results CSV."""
from __future__ import annotations

import csv
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .config import ExperimentConfig, derive_seed
from .data_gen import sample_stream
from .evaluation import MetricPoint, aggregate_runs, metric_point
from .optimizers import run, samples_needed

COLUMNS = ("run_id", "algorithm", "alpha", "T", "seed", "est_error", "excess_risk",
           "excess_risk_se", "bound", "wall_ms")
MC_SEED_OFFSET = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class Cell:
    run_id: str
    algorithm_index: int
    alpha_index: int
    t_index: int
    repeat: int
    seed: int


def grid_cells(config: ExperimentConfig) -> list[Cell]:
    """All runs in deterministic order: algorithm, then alpha, then T, then repeat."""
    cells = []
    for ai, tpl in enumerate(config.algorithms):
        for li, _ in enumerate(config.alphas):
            for ti, T in enumerate(config.t_grid):
                for r in range(config.repeats):
                    seed = derive_seed(config.base_seed, ai, tpl.algorithm, li, ti, r)
                    run_id = f"{ai}-{tpl.algorithm}-a{li}-T{T}-r{r}"
                    cells.append(Cell(run_id, ai, li, ti, r, seed))
    return cells


def run_cell(config: ExperimentConfig, cell: Cell) -> MetricPoint:
    tpl = config.algorithms[cell.algorithm_index]
    spec = config.spec.with_alpha(config.alphas[cell.alpha_index])
    T = config.t_grid[cell.t_index]
    opt = tpl.resolve(spec, T)
    stream = sample_stream(spec, cell.seed, samples_needed(opt))
    mean = spec.known_mean if spec.known_mean is not None else spec.feature.mean()
    result = run(stream, opt, mean=mean)
    mc_seed = (cell.seed + MC_SEED_OFFSET) % 2**64
    return metric_point(result, spec, opt, cell.seed, config.n_mc, mc_seed)


def _run_cell_args(args):
    return run_cell(*args)


def run_grid(config: ExperimentConfig, threads: int | None = None):
    """Execute every cell; results come back in grid order."""
    cells = grid_cells(config)
    threads = threads or os.cpu_count() or 1
    if threads <= 1 or len(cells) == 1:
        points = [run_cell(config, c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(_run_cell_args, [(config, c) for c in cells], chunksize=4))
    return cells, points


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return "%.17g" % v


def result_rows(cells, points, record_wall_time=True):
    for cell, p in zip(cells, points):
        wall_ms = p.wall_time * 1e3 if record_wall_time else 0.0
        yield [cell.run_id, p.algorithm, fmt(p.alpha), str(p.T), str(cell.seed),
               fmt(p.est_error), fmt(p.excess_risk), fmt(p.excess_risk_se), fmt(p.bound),
               fmt(wall_ms)]


def write_csv(path, rows) -> None:
    """Write header plus rows atomically (temporary file, then rename)."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(COLUMNS)
            writer.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class SchemaError(ValueError):
    pass


def read_csv(path) -> list[dict]:
    """Parse a results CSV; numeric columns become ``int``/``float``, empty bound ``None``."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"missing columns: {', '.join(missing)}")
        rows = []
        for raw in reader:
            row = dict(raw)
            row["T"] = int(raw["T"])
            row["seed"] = int(raw["seed"])
            for key in ("alpha", "est_error", "excess_risk", "excess_risk_se", "wall_ms"):
                row[key] = float(raw[key])
            row["bound"] = float(raw["bound"]) if raw["bound"] else None
            rows.append(row)
    return rows


def summary_table(points) -> str:
    est = aggregate_runs(points, "est_error")
    risk = aggregate_runs(points, "excess_risk")
    lines = [f"{'algorithm':<22}{'alpha':>7}{'T':>9}{'n':>4}  {'est_error (95% CI)':<28}{'excess_risk':>12}"]
    for key in est:
        algo, alpha, T = key
        e, r = est[key], risk[key]
        hw = "n/a" if math.isnan(e.half_width) else f"{e.half_width:.3g}"
        lines.append(f"{algo:<22}{alpha:>7.3g}{T:>9}{e.n:>4}  {e.mean:<12.4g} +- {hw:<12}{r.mean:>12.4g}")
    return "\n".join(lines)
