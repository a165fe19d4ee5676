"""Seeded synthetic human-motion generator.

Produces walking trajectories (forward motion, stride-synchronous lateral
oscillation, lateral shift maneuvers with behavioral error), foot-tap
scatter around grid cells, and hand-reach distance traces.  Every generator
is a pure function of its parameters and seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np

from .foottap import Cell, FootGrid, TapSample, cell_centroid
from .proximity import InteractionBounds, Zone, travel_zone
from .walkline import WalkSample


@dataclass(frozen=True)
class GaitParams:
    """Walking kinematics: ~1 Hz strides shift the head 10-15 mm sideways.

    The lateral noise is a mean-reverting wander with stationary deviation
    ``lateral_noise_sd`` and correlation time ``lateral_noise_tau``; heads
    drift smoothly rather than jumping sample to sample.
    """

    speed: float = 1.2
    stride_freq: float = 1.0
    oscillation_amp: float = 0.0125
    phase: float = 0.0
    lateral_noise_sd: float = 0.005
    lateral_noise_tau: float = 0.8
    sample_rate: float = 60.0

    def __post_init__(self):
        if self.speed <= 0.0 or self.stride_freq <= 0.0 or self.sample_rate <= 0.0:
            raise ValueError("speed, stride_freq and sample_rate must be > 0")
        if not (0.0 <= self.oscillation_amp <= 0.02):
            raise ValueError("oscillation_amp must be within [0, 0.02] m")
        if self.lateral_noise_sd < 0.0 or self.lateral_noise_tau <= 0.0:
            raise ValueError("lateral_noise_sd must be >= 0 and its tau > 0")


@dataclass(frozen=True)
class ShiftPlan:
    """Behavioral model of one lateral shift toward a target position.

    After a reaction delay the walker ramps sideways at ``lateral_rate``,
    overshoots the aimed position and settles back exponentially.  The
    remaining fields model human error: the aim misses the true target by a
    per-maneuver Gaussian offset, the overshoot fraction varies per
    maneuver, and when ``target_halfwidth`` is given the walker notices
    (after ``correction_delay``) that it drifted out of, or settled outside,
    the target band and starts a corrective maneuver.  All error constants
    are free parameters; the defaults are the calibrated values used by the
    experiment harness and are provisional, not measured quantities.
    """

    target_x: float
    reaction_time: float = 0.5
    lateral_rate: float = 0.5
    overshoot_fraction: float = 0.10
    settle_time_constant: float = 0.4
    aim_error_sd: float = 0.020
    overshoot_sd: float = 0.06
    hold_drift_rate: float = 0.035
    correction_delay: float = 0.35
    target_halfwidth: float | None = None

    def __post_init__(self):
        if (
            self.reaction_time <= 0.0
            or self.lateral_rate <= 0.0
            or self.settle_time_constant <= 0.0
            or self.correction_delay <= 0.0
        ):
            raise ValueError("plan times and rates must be > 0")
        if min(self.overshoot_fraction, self.aim_error_sd, self.overshoot_sd, self.hold_drift_rate) < 0.0:
            raise ValueError("plan spreads must be >= 0")
        if self.target_halfwidth is not None and self.target_halfwidth <= 0.0:
            raise ValueError("target_halfwidth must be > 0 when given")


def zero_noise_gait(**overrides) -> GaitParams:
    """Gait with stride oscillation and lateral noise disabled."""
    params = {"oscillation_amp": 0.0, "lateral_noise_sd": 0.0}
    params.update(overrides)
    return GaitParams(**params)


def zero_noise_plan(target_x: float, **overrides) -> ShiftPlan:
    """Shift plan with every stochastic and excursion mechanism disabled.

    The walker ramps straight to the exact target and holds it, so replaying
    such traces must give perfect selections with no stabilizing errors.
    """
    params = {
        "overshoot_fraction": 0.0,
        "aim_error_sd": 0.0,
        "overshoot_sd": 0.0,
        "hold_drift_rate": 0.0,
    }
    params.update(overrides)
    return ShiftPlan(target_x=target_x, **params)


@dataclass(frozen=True)
class _Maneuver:
    start_t: float
    from_pos: float
    aim: float
    peak: float
    peak_t: float

    def position(self, t: float, rate: float, tau: float) -> float:
        if t <= self.start_t:
            return self.from_pos
        if t <= self.peak_t:
            direction = 1.0 if self.peak >= self.from_pos else -1.0
            return self.from_pos + direction * rate * (t - self.start_t)
        return self.aim + (self.peak - self.aim) * math.exp(-(t - self.peak_t) / tau)


def _new_maneuver(
    plan: ShiftPlan, rng: np.random.Generator, start_t: float, from_pos: float
) -> _Maneuver:
    aim = plan.target_x
    if plan.aim_error_sd > 0.0:
        aim += rng.normal(0.0, plan.aim_error_sd)
    fraction = plan.overshoot_fraction
    if plan.overshoot_sd > 0.0:
        fraction = max(0.0, rng.normal(plan.overshoot_fraction, plan.overshoot_sd))
    move = aim - from_pos
    direction = math.copysign(1.0, move) if move != 0.0 else math.copysign(1.0, plan.target_x)
    peak = aim + direction * fraction * abs(move)
    ramp_duration = abs(peak - from_pos) / plan.lateral_rate
    return _Maneuver(
        start_t=start_t,
        from_pos=from_pos,
        aim=aim,
        peak=peak,
        peak_t=start_t + ramp_duration,
    )


def _plan_path(
    plan: ShiftPlan, t: np.ndarray, disturbance: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Sequence of shift maneuvers, with corrections driven by the noisy path.

    While actively maneuvering the walker is visually locked to the aim;
    once past the maneuver's peak the held line drifts as an unanchored
    random walk (dead-reckoning error grows with hold time) until a
    correction re-acquires the target and restarts the walk from zero.
    """
    path = np.zeros(len(t))
    if plan.target_x == 0.0:
        return path

    tau = plan.settle_time_constant
    rate = plan.lateral_rate
    halfwidth = plan.target_halfwidth
    n = len(t)
    dt = t[1] - t[0] if n > 1 else 0.0
    if plan.hold_drift_rate > 0.0 and dt > 0.0:
        innovations = rng.normal(0.0, plan.hold_drift_rate * math.sqrt(dt), n)
    else:
        innovations = np.zeros(n)

    maneuver = _new_maneuver(plan, rng, plan.reaction_time, 0.0)
    drift = 0.0
    entered = False
    correction_at: float | None = None
    outside_since: float | None = None

    for i in range(n):
        ti = t[i]
        if correction_at is not None and ti >= correction_at:
            # The drift so far is part of the walked path; fold it into the
            # new maneuver's start so the path stays continuous, then let a
            # fresh drift build up once this maneuver completes.
            previous = maneuver.position(ti, rate, tau) + drift
            maneuver = _new_maneuver(plan, rng, ti, previous)
            drift = 0.0
            correction_at = None
            outside_since = None
        if ti > maneuver.peak_t:
            drift += innovations[i]
        p = maneuver.position(ti, rate, tau) + drift
        path[i] = p
        if halfwidth is None:
            continue
        inside = abs(p + disturbance[i] - plan.target_x) < halfwidth
        if inside:
            entered = True
            outside_since = None
        elif ti > maneuver.peak_t and correction_at is None:
            if entered:
                # Oscillated or overshot out of the band: correct after the
                # walker notices.
                correction_at = ti + plan.correction_delay
            elif ti > maneuver.peak_t + 2.0 * tau:
                # Maneuver finished on a wrong band: correct after dwelling
                # there long enough to notice.
                if outside_since is None:
                    outside_since = ti
                elif ti - outside_since >= plan.correction_delay:
                    correction_at = ti
    return path


def gen_walk_trace(
    gait: GaitParams, plan: ShiftPlan, duration: float, seed: int
) -> list[WalkSample]:
    """Walking trajectory: shift plan plus stride oscillation plus noise.

    ``x(t) = plan(t) + amp * sin(2 pi f t + phase) + noise`` and
    ``y(t) = speed * t``; bit-identical for equal seeds.
    """
    if duration <= 0.0:
        raise ValueError("duration must be > 0")
    n = int(round(duration * gait.sample_rate)) + 1
    t = np.arange(n) / gait.sample_rate
    rng = np.random.default_rng(seed)
    noise = np.zeros(n)
    if gait.lateral_noise_sd > 0.0:
        decay = math.exp(-1.0 / (gait.sample_rate * gait.lateral_noise_tau))
        step_sd = gait.lateral_noise_sd * math.sqrt(1.0 - decay * decay)
        innovations = rng.normal(0.0, step_sd, n)
        value = rng.normal(0.0, gait.lateral_noise_sd)
        for i in range(n):
            value = value * decay + innovations[i]
            noise[i] = value
    oscillation = gait.oscillation_amp * np.sin(
        2.0 * math.pi * gait.stride_freq * t + gait.phase
    )
    disturbance = oscillation + noise
    x = _plan_path(plan, t, disturbance, rng) + disturbance
    y = gait.speed * t
    return [WalkSample(float(ti), float(xi), float(yi)) for ti, xi, yi in zip(t, x, y)]


@dataclass(frozen=True)
class TapScatterParams:
    """Isotropic tap scatter per grid row, growing with distance.

    Defaults follow the measured per-row coverage-ellipse areas
    (sigma = sqrt(area / (pi * chi2))): 0.005 m^2 for row 1 and 0.0454 m^2
    for row 3; intermediate rows interpolate linearly in the row index.
    """

    sigma_row1: float = 0.0163
    sigma_row3: float = 0.0491

    def __post_init__(self):
        if self.sigma_row1 < 0.0 or self.sigma_row3 < self.sigma_row1:
            raise ValueError("need 0 <= sigma_row1 <= sigma_row3")

    def sigma_for_row(self, row: int) -> float:
        return self.sigma_row1 + (self.sigma_row3 - self.sigma_row1) * (row - 1) / 2.0


def gen_tap(
    grid: FootGrid,
    target: Cell,
    scatter: TapScatterParams = TapScatterParams(),
    seed: int = 0,
) -> TapSample:
    """One tap around the target cell's centroid with the row's scatter."""
    return gen_taps(grid, target, 1, scatter, seed)[0]


def gen_taps(
    grid: FootGrid,
    target: Cell,
    count: int,
    scatter: TapScatterParams = TapScatterParams(),
    seed: int = 0,
) -> list[TapSample]:
    centroid = cell_centroid(grid, target)
    sigma = scatter.sigma_for_row(target.row)
    rng = np.random.default_rng(seed)
    if sigma > 0.0:
        points = rng.normal(0.0, sigma, (count, 2)) + centroid
    else:
        points = np.tile(centroid, (count, 1))
    return [TapSample((float(p[0]), float(p[1])), label=target) for p in points]


_ZONE_INDEX = {Zone.NEAR: 0, Zone.MEDIUM: 1, Zone.FAR: 2}


@dataclass(frozen=True)
class HandReachParams:
    """Hand-reach behavior: per-zone overshoot statistics and holding drift.

    Overshoot means/sds are the measured zone values (near 4.4/1.7 cm,
    medium 2.1/1.0 cm, far 1.6/0.7 cm); holding drift magnitudes follow the
    measured holding errors.  Durations shape the synthetic profile only.
    """

    overshoot_mean: tuple[float, float, float] = (0.044, 0.021, 0.016)
    overshoot_sd: tuple[float, float, float] = (0.017, 0.010, 0.007)
    hold_drift_sd: tuple[float, float, float] = (0.006, 0.005, 0.008)
    hold_drift_tau: float = 1.0
    reach_duration: float = 1.2
    excursion_duration: float = 0.5
    hold_duration: float = 3.2
    sample_rate: float = 60.0

    def __post_init__(self):
        if any(v < 0.0 for trio in (self.overshoot_mean, self.overshoot_sd, self.hold_drift_sd) for v in trio):
            raise ValueError("overshoot and drift parameters must be >= 0")
        if min(self.reach_duration, self.excursion_duration, self.hold_duration) <= 0.0:
            raise ValueError("durations must be > 0")
        if self.sample_rate <= 0.0 or self.hold_drift_tau <= 0.0:
            raise ValueError("sample_rate and hold_drift_tau must be > 0")


@dataclass(frozen=True)
class HandTrace:
    """Synthetic reach: (time, distance) samples plus the confirmation time."""

    samples: tuple[tuple[float, float], ...]
    confirm_time: float
    target: float
    zone: Zone


def minimum_jerk(start: float, goal: float, fraction: float) -> float:
    """Minimum-jerk position at normalized time ``fraction`` in [0, 1]."""
    f = min(max(fraction, 0.0), 1.0)
    s = 10.0 * f**3 - 15.0 * f**4 + 6.0 * f**5
    return start + (goal - start) * s


def gen_hand_trace(
    bounds: InteractionBounds,
    start: float,
    target: float,
    reach: HandReachParams = HandReachParams(),
    seed: int = 0,
) -> HandTrace:
    """Reach from ``start`` to ``target``: minimum-jerk approach, one
    overshoot excursion past the target drawn from the travel zone's
    statistics, then a hold with slow drift."""
    if not (bounds.min_distance <= start <= bounds.max_distance):
        raise ValueError("start outside bounds")
    zone = travel_zone(start, bounds.min_distance, bounds.max_distance, target)
    if zone is None:
        raise ValueError(f"target {target} not reachable from {start} within bounds")
    zi = _ZONE_INDEX[zone]
    rng = np.random.default_rng(seed)
    mean, sd = reach.overshoot_mean[zi], reach.overshoot_sd[zi]
    overshoot = 0.0
    if mean > 0.0 or sd > 0.0:
        overshoot = max(0.0, rng.normal(mean, sd)) if sd > 0.0 else mean
    direction = math.copysign(1.0, target - start) if target != start else 1.0

    dt = 1.0 / reach.sample_rate
    samples: list[tuple[float, float]] = []
    t = 0.0
    while t < reach.reach_duration:
        samples.append((t, minimum_jerk(start, target, t / reach.reach_duration)))
        t += dt
    excursion_end = reach.reach_duration + reach.excursion_duration
    while t < excursion_end:
        u = (t - reach.reach_duration) / reach.excursion_duration
        samples.append((t, target + direction * overshoot * math.sin(math.pi * u)))
        t += dt
    confirm_time = excursion_end
    drift = 0.0
    drift_sd = reach.hold_drift_sd[zi]
    decay = math.exp(-dt / reach.hold_drift_tau)
    step_sd = drift_sd * math.sqrt(max(0.0, 1.0 - decay * decay))
    hold_end = confirm_time + reach.hold_duration
    while t <= hold_end:
        samples.append((t, target + drift))
        if drift_sd > 0.0:
            drift = drift * decay + rng.normal(0.0, step_sd)
        else:
            drift = 0.0
        t += dt
    return HandTrace(
        samples=tuple(samples),
        confirm_time=confirm_time,
        target=target,
        zone=zone,
    )
