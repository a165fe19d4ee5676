"""Experiment harness: records, counterbalancing, statistics, persistence.

Runs seeded condition grids through the technique engines, collects trial
records, summarizes them with descriptive statistics, and round-trips
everything through CSV / JSONL.
"""

from __future__ import annotations

import csv
import functools
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as _scipy_stats

from . import foottap, gaitsim, proximity, walkline

TECHNIQUES = ("walkline", "foottap", "proximity")

_FACTOR_KEYS = {
    "walkline": {"lanes", "selection_time"},
    "foottap": {"rows", "cols", "mode"},
    "proximity": {"layers"},
}

_DEFAULT_FACTORS = {
    "walkline": {"lanes": [8, 12, 16], "selection_time": [1 / 3, 2 / 3, 1.0]},
    "foottap": {"rows": [1, 2, 3], "cols": [2, 4, 6], "mode": ["direct"]},
    "proximity": {"layers": [2, 3, 4, 5, 6, 7, 8]},
}

_CONFIG_KEYS = {"technique", "factors", "trials", "seed", "gait", "plan", "scatter", "reach", "out"}


def balanced_latin_square(n: int) -> list[list[int]]:
    """Condition-order matrix balancing first-order carryover effects.

    Every symbol appears once per row and once per column.  For even n the
    classic n-row construction balances every ordered adjacency exactly
    once; odd n appends each row reversed, balancing adjacencies twice over
    2n rows.
    """
    if n < 2:
        raise ValueError(f"need at least two conditions, got {n}")
    first = [0]
    low, high = 1, n - 1
    for j in range(1, n):
        first.append(low if j % 2 == 1 else high)
        if j % 2 == 1:
            low += 1
        else:
            high -= 1
    rows = [[(v + i) % n for v in first] for i in range(n)]
    if n % 2 == 1:
        rows += [list(reversed(row)) for row in rows]
    return rows


@dataclass(frozen=True)
class SummaryStats:
    """Descriptive statistics of one group: mean, spread, and 95% CI.

    ``sd`` uses the n-1 normalization; the confidence interval uses the
    Student-t quantile at n-1 degrees of freedom.  For n == 1 only the mean
    is defined and the spread fields are None.
    """

    n: int
    mean: float
    sd: float | None
    se: float | None
    ci95: tuple[float, float] | None


def summarize(values: Sequence[float]) -> SummaryStats:
    values = [float(v) for v in values]
    if not values:
        raise ValueError("no values to summarize")
    n = len(values)
    mean = sum(values) / n
    if n == 1:
        return SummaryStats(n=1, mean=mean, sd=None, se=None, ci95=None)
    sd = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))
    se = sd / math.sqrt(n)
    t = float(_scipy_stats.t.ppf(0.975, n - 1))
    return SummaryStats(n=n, mean=mean, sd=sd, se=se, ci95=(mean - t * se, mean + t * se))


@dataclass(frozen=True)
class TrialRecord:
    """One scored trial; ``tct`` is None for techniques without a time model."""

    technique: str
    condition: dict[str, int | float | str]
    target: str
    success: bool
    tct: float | None
    metrics: dict[str, float]
    seed: int
    run: int

    def __post_init__(self):
        if self.tct is not None and self.success and self.tct < 0.0:
            raise ValueError("tct must be >= 0 on success")

    def sort_key(self):
        return (
            self.technique,
            tuple(sorted(self.condition.items())),
            self.run,
            self.target,
        )


def _metric_value(record: TrialRecord, metric: str) -> float | None:
    if metric == "success":
        return 1.0 if record.success else 0.0
    if metric == "tct":
        return record.tct
    return record.metrics.get(metric)


def describe(
    records: Iterable[TrialRecord],
    group_by: Sequence[str],
    metric: str,
) -> dict[tuple, SummaryStats]:
    """Per-group summary of one metric, grouped by condition keys.

    Records without a value for the metric (e.g. tct of trials that never
    activated a lane) are skipped.
    """
    groups: dict[tuple, list[float]] = {}
    for record in records:
        value = _metric_value(record, metric)
        if value is None:
            continue
        key = tuple(record.condition.get(k) for k in group_by)
        groups.setdefault(key, []).append(float(value))
    return {key: summarize(vals) for key, vals in sorted(groups.items())}


# -- persistence -------------------------------------------------------------


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_cell(text: str):
    if text == "":
        return None
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _condition_keys(records: Sequence[TrialRecord]) -> list[str]:
    keys: set[str] = set()
    for r in records:
        keys.update(r.condition)
    return sorted(keys)


def _metric_keys(records: Sequence[TrialRecord]) -> list[str]:
    keys: set[str] = set()
    for r in records:
        keys.update(r.metrics)
    return sorted(keys)


def export_records(records: Sequence[TrialRecord], path: str | Path, fmt: str | None = None) -> None:
    """Write records as CSV or JSONL (inferred from the extension).

    The CSV header is technique, the condition columns sorted
    lexicographically, target, success, tct, the metric columns, seed, run.
    Floats use their shortest round-trip representation.
    """
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix == ".csv" else "jsonl")
    records = sorted(records, key=TrialRecord.sort_key)
    if fmt == "jsonl":
        with path.open("w") as fh:
            for r in records:
                fh.write(record_to_json(r) + "\n")
        return
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    cond_keys = _condition_keys(records)
    metric_keys = _metric_keys(records)
    header = ["technique", *cond_keys, "target", "success", "tct", *metric_keys, "seed", "run"]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in records:
            row = [r.technique]
            row += [_format_cell(r.condition.get(k)) for k in cond_keys]
            row += [r.target, _format_cell(r.success), _format_cell(r.tct)]
            row += [_format_cell(r.metrics.get(k)) for k in metric_keys]
            row += [_format_cell(r.seed), _format_cell(r.run)]
            writer.writerow(row)


def record_to_json(record: TrialRecord) -> str:
    payload = {
        "technique": record.technique,
        "condition": record.condition,
        "target": record.target,
        "success": record.success,
        "tct": record.tct,
        "metrics": record.metrics,
        "seed": record.seed,
        "run": record.run,
    }
    return json.dumps(payload, sort_keys=True)


def record_from_json(line: str) -> TrialRecord:
    data = json.loads(line)
    return TrialRecord(
        technique=data["technique"],
        condition=data["condition"],
        target=data["target"],
        success=data["success"],
        tct=data["tct"],
        metrics=data["metrics"],
        seed=data["seed"],
        run=data["run"],
    )


def load_records(path: str | Path, fmt: str | None = None) -> list[TrialRecord]:
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix == ".csv" else "jsonl")
    if fmt == "jsonl":
        with path.open() as fh:
            return [record_from_json(line) for line in fh if line.strip()]
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        fixed_after = header.index("target")
        cond_keys = header[1:fixed_after]
        metric_keys = header[fixed_after + 3 : -2]
        records = []
        for row in reader:
            cells = dict(zip(header, row))
            condition = {
                k: _parse_cell(cells[k]) for k in cond_keys if cells[k] != ""
            }
            metrics = {k: _parse_cell(cells[k]) for k in metric_keys if cells[k] != ""}
            records.append(
                TrialRecord(
                    technique=cells["technique"],
                    condition=condition,
                    target=cells["target"],
                    success=_parse_cell(cells["success"]),
                    tct=_parse_cell(cells["tct"]),
                    metrics=metrics,
                    seed=_parse_cell(cells["seed"]),
                    run=_parse_cell(cells["run"]),
                )
            )
        return records


def export_stats(
    stats: dict[tuple, SummaryStats], group_by: Sequence[str], path: str | Path
) -> None:
    header = [*group_by, "n", "mean", "sd", "se", "ci_lo", "ci_hi"]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for key, s in stats.items():
            ci_lo, ci_hi = s.ci95 if s.ci95 is not None else (None, None)
            writer.writerow(
                [_format_cell(v) for v in key]
                + [_format_cell(v) for v in (s.n, s.mean, s.sd, s.se, ci_lo, ci_hi)]
            )


# -- experiment runner ---------------------------------------------------------


@dataclass
class ExperimentConfig:
    technique: str
    factors: dict[str, list] = field(default_factory=dict)
    trials: int = 10
    seed: int = 0
    gait: dict = field(default_factory=dict)
    plan: dict = field(default_factory=dict)
    scatter: dict = field(default_factory=dict)
    reach: dict = field(default_factory=dict)
    out: str | None = None

    def __post_init__(self):
        if self.technique not in TECHNIQUES:
            raise ValueError(
                f"unknown technique {self.technique!r}; expected one of {TECHNIQUES}"
            )
        allowed = _FACTOR_KEYS[self.technique]
        unknown = set(self.factors) - allowed
        if unknown:
            raise ValueError(f"unknown factors for {self.technique}: {sorted(unknown)}")
        # Condition keys are fixed per technique: unspecified factors take
        # their default levels.
        for key, levels in _DEFAULT_FACTORS[self.technique].items():
            self.factors.setdefault(key, list(levels))
        for key, levels in self.factors.items():
            if not levels:
                raise ValueError(f"factor {key!r} has no levels")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - _CONFIG_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "technique" not in data:
            raise ValueError("config needs a technique")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        with Path(path).open() as fh:
            return cls.from_dict(json.load(fh))

    def conditions(self) -> list[dict]:
        keys = sorted(self.factors)
        combos = itertools.product(*(self.factors[k] for k in keys))
        return [dict(zip(keys, combo)) for combo in combos]


def derive_seed(master_seed: int, condition_index: int, trial_index: int) -> int:
    """Per-trial seed from the master seed via a splittable scheme."""
    sequence = np.random.SeedSequence(master_seed, spawn_key=(condition_index, trial_index))
    return int(sequence.generate_state(1, np.uint64)[0])


def _walkline_trial(config: ExperimentConfig, condition: dict, seed: int, run: int) -> TrialRecord:
    layout = walkline.build_lanes(int(condition["lanes"]))
    selection = walkline.SelectorConfig(float(condition["selection_time"]))
    targets = layout.option_lanes()
    target = targets[run % len(targets)]
    gait_kwargs = dict(config.gait)
    if "phase" not in gait_kwargs:
        # Trials start at an arbitrary point of the stride cycle.
        phase_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
        gait_kwargs["phase"] = float(phase_rng.uniform(0.0, 2.0 * math.pi))
    gait = gaitsim.GaitParams(**gait_kwargs)
    plan = gaitsim.ShiftPlan(
        target_x=layout.lane_center(target),
        target_halfwidth=layout.lane_width / 2.0,
        **config.plan,
    )
    duration = layout.length / gait.speed + 2.0
    trace = gaitsim.gen_walk_trace(gait, plan, duration, seed)
    m = walkline.score_trial(trace, target, selection, layout)
    return TrialRecord(
        technique="walkline",
        condition=dict(condition),
        target=str(target),
        success=m.success,
        tct=m.tct,
        metrics={
            "walked_distance": m.walked_distance,
            "forward_displacement": m.forward_displacement,
            "stabilizing_error": 1.0 if m.stabilizing_error else 0.0,
            "overshoot_error": 1.0 if m.error_kind == "overshoot" else 0.0,
            "swing_back_error": 1.0 if m.error_kind == "swing_back" else 0.0,
        },
        seed=seed,
        run=run,
    )


@functools.lru_cache(maxsize=64)
def _indirect_classifier(
    master_seed: int,
    condition_index: int,
    rows: int,
    cols: int,
    scatter_items: tuple,
    taps_per_cell: int = 30,
) -> foottap.TapClassifier:
    grid = foottap.build_grid(rows, cols)
    scatter = gaitsim.TapScatterParams(**dict(scatter_items))
    samples: list[foottap.TapSample] = []
    for i, cell in enumerate(grid.cells()):
        train_seed = derive_seed(master_seed, condition_index, 1_000_000 + i)
        samples.extend(gaitsim.gen_taps(grid, cell, taps_per_cell, scatter, train_seed))
    return foottap.train_classifier(samples)


def _foottap_trial(
    config: ExperimentConfig, condition: dict, condition_index: int, seed: int, run: int
) -> TrialRecord:
    rows, cols = int(condition["rows"]), int(condition["cols"])
    mode = condition.get("mode", "direct")
    grid = foottap.build_grid(rows, cols)
    cells = grid.cells()
    target = cells[run % len(cells)]
    scatter = gaitsim.TapScatterParams(**config.scatter)
    tap = gaitsim.gen_tap(grid, target, scatter, seed)
    if mode == "direct":
        predicted = foottap.hit_test(grid, tap.point)
    elif mode == "indirect":
        model = _indirect_classifier(
            config.seed, condition_index, rows, cols, tuple(sorted(config.scatter.items()))
        )
        predicted = model.predict([tap.point])[0]
    else:
        raise ValueError(f"unknown foottap mode {mode!r}")
    centroid = foottap.cell_centroid(grid, target)
    offset = math.hypot(tap.point[0] - centroid[0], tap.point[1] - centroid[1])
    return TrialRecord(
        technique="foottap",
        condition=dict(condition),
        target=f"r{target.row}c{target.col}",
        success=predicted == target,
        tct=None,
        metrics={"centroid_offset": offset},
        seed=seed,
        run=run,
    )


def _proximity_trial(config: ExperimentConfig, condition: dict, seed: int, run: int) -> TrialRecord:
    n_layers = int(condition["layers"])
    bounds = proximity.InteractionBounds()
    layers = proximity.partition_uniform(bounds, n_layers)
    target_index = run % n_layers
    reach = gaitsim.HandReachParams(**config.reach)
    trace = gaitsim.gen_hand_trace(
        bounds, layers.reference_point, layers.center(target_index), reach, seed
    )
    d_confirm = None
    for t, d in trace.samples:
        if t > trace.confirm_time:
            break
        d_confirm = d
    success = proximity.locate(layers, d_confirm) == target_index
    try:
        m = proximity.hand_trial_metrics(
            trace.samples, layers.interval(target_index), trace.confirm_time
        )
        tct, metrics = m.tct, {
            "overshoot": m.overshoot_error,
            "holding": m.holding_error,
        }
    except proximity.TargetNotReached:
        tct, metrics = None, {}
    return TrialRecord(
        technique="proximity",
        condition=dict(condition),
        target=str(target_index),
        success=success,
        tct=tct,
        metrics=metrics,
        seed=seed,
        run=run,
    )


def _run_one(args: tuple) -> TrialRecord:
    config, conditions, condition_index, run = args
    condition = conditions[condition_index]
    seed = derive_seed(config.seed, condition_index, run)
    if config.technique == "walkline":
        return _walkline_trial(config, condition, seed, run)
    if config.technique == "foottap":
        return _foottap_trial(config, condition, condition_index, seed, run)
    return _proximity_trial(config, condition, seed, run)


def run_experiment(config: ExperimentConfig, workers: int = 1) -> list[TrialRecord]:
    """Run the full condition grid: ``trials`` seeded passes per cell.

    Each pass visits the conditions in the order of one balanced-Latin-
    square row (cycled), standing in for one counterbalanced participant;
    per-trial seeds are derived from (master seed, condition, trial), so the
    record set is independent of execution order and safe to parallelize.
    Records are returned canonically sorted.
    """
    conditions = config.conditions()
    if len(conditions) >= 2:
        square = balanced_latin_square(len(conditions))
    else:
        square = [[0]]
    jobs = []
    for run in range(config.trials):
        order = square[run % len(square)]
        jobs.extend((config, conditions, ci, run) for ci in order)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one, jobs, chunksize=32))
    else:
        records = [_run_one(job) for job in jobs]
    records.sort(key=TrialRecord.sort_key)
    return records
