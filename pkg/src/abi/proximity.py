"""Layered hand-distance input space.

Partitions the reachable axis between the user's face and their arm length
into layers, calibrates per-user interaction ranges, classifies discrete
hand raises, fuses the two wrist distance sensors, and scores reach trials.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

# Near point of the eye: the hand never comes closer than this (meters).
DEFAULT_MIN_DISTANCE = 0.125


class Zone(Enum):
    """Equal thirds of the travel range from the rest position, per direction."""

    NEAR = "near"
    MEDIUM = "medium"
    FAR = "far"


# Nominal layer thickness per zone for the descending-thickness partition
# (meters): each equals the zone's mean overshoot plus twice its spread,
# so a reach that enters a layer stays inside it in >95% of attempts.
GUIDELINE_THICKNESS = {
    Zone.NEAR: 0.078,
    Zone.MEDIUM: 0.042,
    Zone.FAR: 0.030,
}


class TargetNotReached(ValueError):
    """The motion trace never entered the target layer before confirmation."""


@dataclass(frozen=True)
class InteractionBounds:
    """Reachable distance interval, from the face near-point to arm length."""

    min_distance: float = DEFAULT_MIN_DISTANCE
    max_distance: float = 0.625

    def __post_init__(self):
        if not (0.0 < self.min_distance < self.max_distance):
            raise ValueError(
                f"need 0 < min_distance < max_distance, got "
                f"[{self.min_distance}, {self.max_distance}]"
            )

    @property
    def span(self) -> float:
        return self.max_distance - self.min_distance

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.min_distance + self.max_distance)


@dataclass(frozen=True)
class LayerSet:
    """Partition of a distance interval into contiguous half-open layers.

    ``boundaries`` has ``n_layers + 1`` strictly increasing entries; layer
    ``i`` occupies ``[boundaries[i], boundaries[i+1])``.  ``reference_point``
    is the rest position of the hand that trials start from.
    """

    boundaries: tuple[float, ...]
    reference_point: float

    def __post_init__(self):
        if len(self.boundaries) < 2:
            raise ValueError("a layer set needs at least one layer")
        if any(a >= b for a, b in zip(self.boundaries, self.boundaries[1:])):
            raise ValueError("layer boundaries must be strictly increasing")

    @property
    def n_layers(self) -> int:
        return len(self.boundaries) - 1

    @property
    def min_distance(self) -> float:
        return self.boundaries[0]

    @property
    def max_distance(self) -> float:
        return self.boundaries[-1]

    def interval(self, index: int) -> tuple[float, float]:
        return self.boundaries[index], self.boundaries[index + 1]

    def center(self, index: int) -> float:
        lo, hi = self.interval(index)
        return 0.5 * (lo + hi)

    def thickness(self, index: int) -> float:
        lo, hi = self.interval(index)
        return hi - lo

    def zone_of(self, distance: float) -> Zone | None:
        return travel_zone(
            self.reference_point, self.min_distance, self.max_distance, distance
        )


def travel_zone(start: float, lo: float, hi: float, position: float) -> Zone | None:
    """Zone of ``position`` by its travel fraction from ``start`` toward one end.

    The available range in the direction of travel is split into three equal
    thirds: near, medium, far.  Returns None when the position lies outside
    ``[lo, hi]`` or there is no room in that direction.
    """
    if position >= start:
        available = hi - start
        travel = position - start
    else:
        available = start - lo
        travel = start - position
    if available <= 0.0 or travel > available:
        return None
    fraction = travel / available
    if fraction < 1.0 / 3.0:
        return Zone.NEAR
    if fraction < 2.0 / 3.0:
        return Zone.MEDIUM
    return Zone.FAR


def partition_uniform(bounds: InteractionBounds, n_layers: int) -> LayerSet:
    """Split the bounds into ``n_layers`` equal-thickness layers."""
    if n_layers < 1:
        raise ValueError(f"n_layers must be >= 1, got {n_layers}")
    span = bounds.span
    edges = [bounds.min_distance + span * i / n_layers for i in range(n_layers)]
    edges.append(bounds.max_distance)
    return LayerSet(tuple(edges), bounds.midpoint)


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def _zone_edges(lo: float, hi: float, ascending_nominals: Sequence[float]) -> list[float]:
    """Internal edges of one direction's three zones, subdivided into layers.

    ``ascending_nominals`` are the nominal thicknesses of the zones in
    ascending-distance order.  Within each zone the layer count is the
    nominal-rounded count (at least one) and the layers share the zone
    length equally.
    """
    zone_len = (hi - lo) / 3.0
    edges: list[float] = []
    for z, nominal in enumerate(ascending_nominals):
        z_lo = lo + zone_len * z
        z_hi = lo + zone_len * (z + 1)
        count = max(1, _round_half_up(zone_len / nominal))
        edges.extend(z_lo + (z_hi - z_lo) * i / count for i in range(count))
    edges.append(hi)
    return edges


def partition_guideline(bounds: InteractionBounds) -> LayerSet:
    """Partition with descending layer thickness away from the rest position.

    From the midpoint of the bounds, each direction's range is split into
    its three zones and filled with layers of nominal thickness
    ``GUIDELINE_THICKNESS`` (7.8 / 4.2 / 3.0 cm for near / medium / far).
    """
    reference = bounds.midpoint
    nominals = [GUIDELINE_THICKNESS[z] for z in (Zone.NEAR, Zone.MEDIUM, Zone.FAR)]
    for half in (reference - bounds.min_distance, bounds.max_distance - reference):
        if half < nominals[0]:
            raise ValueError(
                f"directional half-range {half:.3f} m is smaller than the "
                f"near-zone nominal thickness {nominals[0]} m"
            )
    # Inward half runs far -> near as distance ascends, outward near -> far;
    # both halves meet at the reference point.
    inward = _zone_edges(bounds.min_distance, reference, nominals[::-1])
    outward = _zone_edges(reference, bounds.max_distance, nominals)
    edges = inward[:-1] + outward
    edges[0] = bounds.min_distance
    edges[-1] = bounds.max_distance
    return LayerSet(tuple(edges), reference)


def locate(layers: LayerSet, distance: float) -> int | None:
    """Index of the layer containing ``distance``, or None when out of bounds.

    Intervals are half-open: a distance exactly on a boundary belongs to the
    upper layer; the overall maximum is exclusive.  Out-of-bounds distances
    are never clamped.
    """
    b = layers.boundaries
    if not (b[0] <= distance < b[-1]):
        return None
    return bisect_right(b, distance) - 1


@dataclass(frozen=True)
class PersonalSpace:
    """Per-user comfortable interaction range, for normalizing distances."""

    observed_min: float
    observed_max: float

    def __post_init__(self):
        if not (self.observed_min < self.observed_max):
            raise ValueError("observed_min must be < observed_max")

    @classmethod
    def from_observations(cls, distances: Iterable[float]) -> "PersonalSpace":
        values = list(distances)
        if len(values) < 2 or min(values) == max(values):
            raise ValueError("need at least two distinct observed distances")
        return cls(min(values), max(values))

    def normalize(self, distance: float) -> float:
        return (distance - self.observed_min) / (self.observed_max - self.observed_min)

    def denormalize(self, value: float) -> float:
        return self.observed_min + value * (self.observed_max - self.observed_min)


@dataclass(frozen=True)
class DiscreteLayerModel:
    """Per-user 1-D nearest-mean classifier over normalized distances."""

    class_means: tuple[float, ...]
    decision_boundaries: tuple[float, ...]

    def __post_init__(self):
        if len(self.class_means) < 1:
            raise ValueError("model needs at least one class")
        if any(a >= b for a, b in zip(self.class_means, self.class_means[1:])):
            raise ValueError("class means must be strictly increasing")
        if len(self.decision_boundaries) != len(self.class_means) - 1:
            raise ValueError("need exactly one boundary between adjacent means")
        for i, b in enumerate(self.decision_boundaries):
            if not (self.class_means[i] < b < self.class_means[i + 1]):
                raise ValueError("boundaries must lie strictly between adjacent means")


def fit_discrete_model(
    labeled_samples: Iterable[tuple[int, float]],
) -> DiscreteLayerModel:
    """Fit per-layer means and midpoint boundaries from (layer, distance) pairs.

    Every layer index from 0 to the maximum seen must have at least one
    sample, and the per-layer means must come out strictly increasing.
    """
    by_layer: dict[int, list[float]] = {}
    for layer, distance in labeled_samples:
        by_layer.setdefault(int(layer), []).append(float(distance))
    if not by_layer:
        raise ValueError("no samples")
    n_classes = max(by_layer) + 1
    missing = [i for i in range(n_classes) if i not in by_layer]
    if min(by_layer) < 0 or missing:
        raise ValueError(f"missing samples for layers {missing or list(by_layer)}")
    means = tuple(sum(v) / len(v) for v in (by_layer[i] for i in range(n_classes)))
    if any(a >= b for a, b in zip(means, means[1:])):
        raise ValueError(f"per-layer means are not strictly increasing: {means}")
    boundaries = tuple(0.5 * (a + b) for a, b in zip(means, means[1:]))
    return DiscreteLayerModel(means, boundaries)


def classify_discrete(model: DiscreteLayerModel, normalized_distance: float) -> int:
    """Layer index for a normalized distance; boundary ties go to the lower index."""
    return bisect_left(model.decision_boundaries, normalized_distance)


@dataclass(frozen=True)
class SensorReading:
    """One raw sample from the two tilted wrist distance sensors."""

    s1: float
    s2: float
    s1_sees_body: bool


@dataclass(frozen=True)
class FusionParams:
    # Defaults sized to the prototype's ~1.9 cm sensor deviation.
    process_var: float = 1e-5
    measurement_var: float = 4e-4

    def __post_init__(self):
        if self.process_var <= 0.0 or self.measurement_var <= 0.0:
            raise ValueError("process and measurement variance must be > 0")


@dataclass(frozen=True)
class SensorState:
    """Fused distance estimate; advanced functionally by :func:`fuse_step`."""

    estimate: float
    variance: float
    active_sensor: str = "S1"

    def __post_init__(self):
        if self.variance <= 0.0:
            raise ValueError("variance must be > 0")


def fuse_step(
    state: SensorState,
    reading: SensorReading,
    params: FusionParams = FusionParams(),
) -> SensorState:
    """One predict/update cycle of the constant-position distance filter.

    Sensor one is trusted while it has the body in view; otherwise sensor
    two supplies the measurement (handover happens around 0.20 m on the
    prototype).
    """
    measurement = reading.s1 if reading.s1_sees_body else reading.s2
    if not math.isfinite(measurement):
        raise ValueError(f"non-finite sensor measurement: {measurement}")
    variance = state.variance + params.process_var
    gain = variance / (variance + params.measurement_var)
    estimate = state.estimate + gain * (measurement - state.estimate)
    return SensorState(
        estimate=estimate,
        variance=(1.0 - gain) * variance,
        active_sensor="S1" if reading.s1_sees_body else "S2",
    )


@dataclass(frozen=True)
class HandTrialMetrics:
    tct: float
    overshoot_error: float
    holding_error: float

    def __post_init__(self):
        if self.tct < 0.0 or self.overshoot_error < 0.0 or self.holding_error < 0.0:
            raise ValueError("trial metrics must be non-negative")


def hand_trial_metrics(
    trace: Sequence[tuple[float, float]],
    target: tuple[float, float],
    confirm_time: float,
    hold_window: float = 3.0,
) -> HandTrialMetrics:
    """Score one reach from a (time, distance) trace.

    Overshoot is the maximum deviation from the target layer's center
    between first entering the layer and the confirmation; holding error is
    the maximum drift from the confirmed position over the hold window; TCT
    runs from the start of the trace to the confirmation.
    """
    if not trace:
        raise ValueError("empty trace")
    lo, hi = target
    center = 0.5 * (lo + hi)
    t0 = trace[0][0]
    if trace[-1][0] < confirm_time + hold_window:
        raise ValueError("trace does not cover the confirmation plus hold window")

    first_reach = None
    for t, d in trace:
        if t > confirm_time:
            break
        if lo <= d < hi:
            first_reach = t
            break
    if first_reach is None:
        raise TargetNotReached(f"target layer [{lo}, {hi}) never reached before confirm")

    overshoot = 0.0
    d_confirm = None
    for t, d in trace:
        if first_reach <= t <= confirm_time:
            overshoot = max(overshoot, abs(d - center))
        if t <= confirm_time:
            d_confirm = d
    holding = 0.0
    for t, d in trace:
        if confirm_time <= t <= confirm_time + hold_window:
            holding = max(holding, abs(d - d_confirm))
    return HandTrialMetrics(
        tct=confirm_time - t0,
        overshoot_error=overshoot,
        holding_error=holding,
    )
