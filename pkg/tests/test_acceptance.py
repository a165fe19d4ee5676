"""Acceptance suite: one test per release criterion.

Each test enforces its stated tolerance and time budget and prints one
PASS line; run with ``pytest -s tests/test_acceptance.py`` to see them.
"""

import math
import time
from collections import Counter

import numpy as np
import pytest

from abi import cli, foottap, gaitsim, harness, infospace, proximity, walkline
from test_infospace import random_space_walk
from test_walkline import random_trace, replay, scan_outcome


def _passed(name, elapsed, budget):
    assert elapsed < budget, f"{name} took {elapsed:.2f}s (budget {budget}s)"
    print(f"ACCEPTANCE PASS: {name} ({elapsed:.3f}s)")


def test_lane_geometry():
    start = time.perf_counter()
    widths = {n: walkline.build_lanes(n).lane_width for n in (8, 12, 16)}
    elapsed = time.perf_counter() - start
    assert abs(widths[8] - 1.0 / 9.0) < 1e-12
    assert abs(widths[12] - 1.0 / 13.0) < 1e-12
    assert abs(widths[16] - 1.0 / 17.0) < 1e-12
    _passed("lane geometry (1/(n+1) widths exact)", elapsed, 0.001)


def test_selector_correctness():
    start = time.perf_counter()
    rng = np.random.default_rng(20_240_001)
    outcomes = Counter()
    for _ in range(10_000):
        n_lanes = int(rng.choice([4, 8, 12, 16]))
        layout = walkline.LaneLayout(n_lanes, length=float(rng.uniform(1.0, 4.0)))
        config = walkline.SelectorConfig(float(rng.uniform(0.15, 0.8)))
        samples = random_trace(rng, layout, n_samples=100)
        expected = scan_outcome(samples, config.selection_time, layout)
        result, t_end = replay(samples, config, layout)
        if isinstance(result, walkline.Selected):
            assert expected == ("selected", result.lane, t_end)
        elif isinstance(result, walkline.Failed):
            assert expected == ("end_of_track", None, t_end)
        else:
            assert expected[0] == "none"
        outcomes[expected[0]] += 1
    elapsed = time.perf_counter() - start
    assert min(outcomes.values()) > 200  # every outcome genuinely exercised
    _passed("selector correctness (10^4 traces vs window scanner)", elapsed, 10.0)


def test_zero_noise_soundness():
    start = time.perf_counter()
    config = harness.ExperimentConfig(
        technique="walkline",
        factors={"lanes": [8, 12, 16], "selection_time": [1 / 3, 2 / 3, 1.0]},
        trials=100,
        seed=11,
        gait={"oscillation_amp": 0.0, "lateral_noise_sd": 0.0},
        plan={
            "overshoot_fraction": 0.0,
            "aim_error_sd": 0.0,
            "overshoot_sd": 0.0,
            "hold_drift_rate": 0.0,
        },
    )
    records = harness.run_experiment(config)
    elapsed = time.perf_counter() - start
    assert len(records) == 900
    assert all(r.success for r in records)
    assert all(r.metrics["stabilizing_error"] == 0.0 for r in records)
    _passed("zero-noise soundness (100% accuracy, 0% stabilizing error)", elapsed, 30.0)


def _rate_z(p_low, n_low, p_high, n_high):
    """One-sided z statistic of (p_high - p_low) > 0."""
    se = math.sqrt(p_low * (1 - p_low) / n_low + p_high * (1 - p_high) / n_high)
    if se == 0.0:
        return 0.0 if p_high == p_low else math.copysign(math.inf, p_high - p_low)
    return (p_high - p_low) / se


def test_trend_reproduction():
    """Rank-order reproduction of the lane-grid accuracy/stability trends.

    With the calibrated shift-plan constants: accuracy must not fall with
    fewer lanes (no significant violation of 8 >= 12 >= 16 per selection
    time), the stabilizing-error rate must rise strictly in both the lane
    count and the selection time, and the shortest selection time must be
    significantly less accurate than the middle one at every lane count.
    Strict orderings require a one-sided 95% binomial z of at least 1.645;
    the non-strict accuracy ordering must not be violated at that level.
    """
    start = time.perf_counter()
    times = [1 / 3, 2 / 3, 1.0]
    config = harness.ExperimentConfig(
        technique="walkline",
        factors={"lanes": [8, 12, 16], "selection_time": times},
        trials=1000,
        seed=2024,
    )
    records = harness.run_experiment(config)
    accuracy, stability = {}, {}
    for key, s in harness.describe(records, ["lanes", "selection_time"], "success").items():
        accuracy[(key[0], round(key[1], 3))] = (s.mean, s.n)
    for key, s in harness.describe(
        records, ["lanes", "selection_time"], "stabilizing_error"
    ).items():
        stability[(key[0], round(key[1], 3))] = (s.mean, s.n)
    elapsed = time.perf_counter() - start

    t = [round(x, 3) for x in times]
    for st in t:
        for wide, narrow in ((8, 12), (12, 16)):
            z = _rate_z(*accuracy[(narrow, st)], *accuracy[(wide, st)])
            assert z >= -1.645, f"accuracy {wide}>={narrow} violated at {st}: z={z:.2f}"
    for st in t:
        for fewer, more in ((8, 12), (12, 16)):
            z = _rate_z(*stability[(fewer, st)], *stability[(more, st)])
            assert z >= 1.645, f"stab not increasing {fewer}->{more} at {st}: z={z:.2f}"
    for lanes in (8, 12, 16):
        for shorter, longer in ((t[0], t[1]), (t[1], t[2])):
            z = _rate_z(*stability[(lanes, shorter)], *stability[(lanes, longer)])
            assert z >= 1.645, f"stab not increasing in time at {lanes}: z={z:.2f}"
        z = _rate_z(*accuracy[(lanes, t[0])], *accuracy[(lanes, t[1])])
        assert z >= 1.645, f"accuracy 1/3 not below 2/3 at {lanes}: z={z:.2f}"
    _passed("trend reproduction (lane/selection-time rank order)", elapsed, 300.0)


def test_foot_grid_geometry():
    start = time.perf_counter()
    grid = foottap.build_grid(3, 6)
    rng = np.random.default_rng(77)
    points = rng.uniform(-0.6, 0.6, size=(100_000, 2))
    edges = grid.radius_edges()
    t_edges = grid.theta_edges()
    inside = 0
    for p in points:
        point = (float(p[0]), float(p[1]))
        cell = foottap.hit_test(grid, point)
        r = math.hypot(*point)
        theta = math.degrees(math.atan2(point[1], point[0]))
        in_annulus = edges[0] <= r < edges[-1] and 0.0 <= theta < t_edges[-1]
        if cell is None:
            assert not in_annulus  # no gaps inside the annulus
        else:
            inside += 1
            r_lo, r_hi, th_lo, th_hi = foottap.cell_bounds(grid, cell)
            assert r_lo <= r < r_hi and th_lo <= theta < th_hi
    elapsed = time.perf_counter() - start
    assert inside > 1000
    _passed("foot-grid geometry (10^5-point brute-force agreement)", elapsed, 5.0)


def test_classifier_sanity():
    start = time.perf_counter()
    scatter = gaitsim.TapScatterParams()

    def cv_accuracy(rows, cols, seed):
        grid = foottap.build_grid(rows, cols)
        samples = []
        for i, cell in enumerate(grid.cells()):
            samples.extend(gaitsim.gen_taps(grid, cell, 50, scatter, seed=seed + i))
        return foottap.evaluate_cv(samples, folds=10, repetitions=3, seed=seed)

    one_row = cv_accuracy(1, 4, seed=500)
    two_row = cv_accuracy(2, 4, seed=600)
    three_row = cv_accuracy(3, 4, seed=700)
    elapsed = time.perf_counter() - start
    assert one_row == pytest.approx(0.977, abs=0.05)
    assert one_row >= two_row >= three_row
    _passed(
        f"classifier sanity (1-row/4-col cv={one_row:.3f}, row trend "
        f"{one_row:.3f}>={two_row:.3f}>={three_row:.3f})",
        elapsed,
        120.0,
    )


def test_ellipse_calibration():
    start = time.perf_counter()
    rng = np.random.default_rng(88)
    points = rng.normal(0.0, 0.05, size=(10_000, 2))
    ellipse = foottap.probability_ellipse(points, coverage=0.95)
    fresh = rng.normal(0.0, 0.05, size=(10_000, 2))
    containment = foottap.ellipse_overlap(ellipse, fresh)
    elapsed = time.perf_counter() - start
    expected_axis = math.sqrt(foottap.chi2_quantile_2df(0.95)) * 0.05
    assert expected_axis == pytest.approx(0.1224, abs=5e-4)
    for axis in ellipse.semi_axes:
        assert axis == pytest.approx(expected_axis, abs=0.004)
    assert containment == pytest.approx(0.95, abs=0.02)
    _passed(
        f"ellipse calibration (semi-axes ~{expected_axis:.4f} m, containment {containment:.3f})",
        elapsed,
        5.0,
    )


def test_proximity_guideline():
    """Nominal thicknesses are exact and reaches stay inside such layers.

    A reach aims at the entry edge of a layer of the zone's nominal
    thickness; the trial lands inside when its overshoot excursion never
    crosses the far edge.  The guideline sizes each thickness as the zone
    overshoot mean plus twice its spread, which predicts ~97.7% containment,
    so the >95% claim must hold with at most a 2-point slack.
    """
    start = time.perf_counter()
    assert proximity.GUIDELINE_THICKNESS[proximity.Zone.NEAR] == 0.078
    assert proximity.GUIDELINE_THICKNESS[proximity.Zone.MEDIUM] == 0.042
    assert proximity.GUIDELINE_THICKNESS[proximity.Zone.FAR] == 0.030

    bounds = proximity.InteractionBounds(0.125, 0.725)
    start_pos = bounds.midpoint
    reach = gaitsim.HandReachParams()
    per_zone_targets = {
        proximity.Zone.NEAR: start_pos + 0.010,
        proximity.Zone.MEDIUM: start_pos + 0.110,
        proximity.Zone.FAR: start_pos + 0.210,
    }
    trials_per_zone = 3334
    for zone, entry_edge in per_zone_targets.items():
        thickness = proximity.GUIDELINE_THICKNESS[zone]
        assert proximity.travel_zone(
            start_pos, bounds.min_distance, bounds.max_distance, entry_edge
        ) is zone
        landed = 0
        for seed in range(trials_per_zone):
            trace = gaitsim.gen_hand_trace(bounds, start_pos, entry_edge, reach, seed=seed)
            peak = max(d for _, d in trace.samples)
            if peak < entry_edge + thickness:
                landed += 1
        rate = landed / trials_per_zone
        assert rate >= 0.95 - 0.02, f"{zone}: containment {rate:.3f}"
    elapsed = time.perf_counter() - start
    _passed("proximity guideline (nominals exact, >=93% containment/zone)", elapsed, 60.0)


def test_kalman_handover():
    start = time.perf_counter()
    params = proximity.FusionParams()
    sqrt_r = math.sqrt(params.measurement_var)
    rng = np.random.default_rng(5)

    # Constant-distance tracking converges inside 2 sqrt(r) by 100 steps.
    state = proximity.SensorState(estimate=0.05, variance=0.05)
    true_distance = 0.30
    for _ in range(100):
        reading = proximity.SensorReading(
            float(rng.normal(true_distance, sqrt_r)), 0.0, True
        )
        state = proximity.fuse_step(state, reading, params)
    assert abs(state.estimate - true_distance) < 2 * sqrt_r

    # Handover: the walker moves outward through the switch point where
    # sensor one loses the body; the fused estimate never jumps more than
    # 3 sqrt(r) between steps despite a 1.5 cm inter-sensor bias.
    state = proximity.SensorState(estimate=0.15, variance=1e-4)
    previous = state.estimate
    max_jump = 0.0
    for step in range(200):
        true = 0.15 + 0.001 * step  # slow outward motion through ~0.20 m
        sees_body = true < 0.20
        reading = proximity.SensorReading(
            s1=float(rng.normal(true, sqrt_r / 2)),
            s2=float(rng.normal(true + 0.015, sqrt_r / 2)),
            s1_sees_body=sees_body,
        )
        state = proximity.fuse_step(state, reading, params)
        max_jump = max(max_jump, abs(state.estimate - previous))
        previous = state.estimate
    elapsed = time.perf_counter() - start
    assert max_jump < 3 * sqrt_r
    _passed(f"kalman/handover (max step jump {max_jump*1000:.1f} mm)", elapsed, 1.0)


def test_latin_squares():
    start = time.perf_counter()
    for n in range(2, 13):
        square = harness.balanced_latin_square(n)
        for row in square:
            assert sorted(row) == list(range(n))
        for col in range(n):
            column = [row[col] for row in square]
            assert sorted(column) == sorted(list(range(n)) * (len(square) // n))
        pairs = Counter()
        for row in square:
            for a, b in zip(row, row[1:]):
                pairs[(a, b)] += 1
        assert len({pairs[(a, b)] for a in range(n) for b in range(n) if a != b}) == 1
    elapsed = time.perf_counter() - start
    _passed("latin squares (n=2..12 balance verified)", elapsed, 1.0)


def test_stats_oracle():
    start = time.perf_counter()
    s = harness.summarize([1.0, 2.0, 3.0])
    elapsed = time.perf_counter() - start
    assert s.mean == pytest.approx(2.0, abs=1e-4)
    assert s.sd == pytest.approx(1.0, abs=1e-4)
    assert s.se == pytest.approx(0.57735, abs=1e-4)
    # Student-t: 2 +/- 4.302653 * 0.577350 = [-0.484138, 4.484138].
    assert s.ci95[0] == pytest.approx(-0.484138, abs=1e-4)
    assert s.ci95[1] == pytest.approx(4.484138, abs=1e-4)
    _passed("stats oracle (describe([1,2,3]))", elapsed, 0.001)


def test_infospace_safety():
    start = time.perf_counter()
    operations = 0
    walks = 0
    seed = 0
    while operations < 100_000:
        space = random_space_walk(seed, steps=60)
        operations += len(space.journal)
        walks += 1
        for user in ("alice", "bob"):
            for entry in space.snapshot_for(user):
                drop = space.drops[entry["id"]]
                if drop.visibility == infospace.PRIVATE:
                    assert drop.owner == user or user in drop.shared_with, (
                        f"private drop leaked to {user} (walk seed {seed})"
                    )
        if seed % 40 == 0:
            assert infospace.replay(space.journal) == space
        seed += 1
    elapsed = time.perf_counter() - start
    _passed(
        f"infospace safety ({operations} ops over {walks} walks, no leaks, replay exact)",
        elapsed,
        30.0,
    )


def test_run_determinism(tmp_path):
    start = time.perf_counter()
    outputs = []
    for name in ("a.jsonl", "b.jsonl"):
        out = tmp_path / name
        code = cli.main(
            [
                "run",
                "walkline",
                "--lanes",
                "8,12",
                "--selection-time",
                "1/3,2/3",
                "--trials",
                "10",
                "--seed",
                "31337",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        outputs.append(out.read_bytes())
    elapsed = time.perf_counter() - start
    assert outputs[0] == outputs[1]
    assert len(outputs[0]) > 0
    _passed("run determinism (byte-identical JSONL)", elapsed, 60.0)
