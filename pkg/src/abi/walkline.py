"""Lane-walking selection: lane geometry, dwell-timer automaton, trial scoring.

Options are lanes parallel to the walking path; the center lane (id 0) is a
null lane that never selects.  Walking on a non-null lane accumulates dwell
time; reaching the configured selection time selects the lane.  Leaving a
lane resets the timer, and non-active lanes fade with the dwell fraction.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

DEFAULT_TOTAL_WIDTH = 1.0
DEFAULT_TRACK_LENGTH = 20.0


class InvalidState(RuntimeError):
    """The selection automaton was stepped after finishing."""


@dataclass(frozen=True)
class LaneLayout:
    """Even count of option lanes around a central null lane.

    Lane ids run -n/2..+n/2 with 0 the null lane; every lane is
    ``total_width / (n_lanes + 1)`` wide and lane k covers
    ``[(k - 1/2) * w, (k + 1/2) * w)``.
    """

    n_lanes: int
    total_width: float = DEFAULT_TOTAL_WIDTH
    length: float = DEFAULT_TRACK_LENGTH

    def __post_init__(self):
        if self.n_lanes < 2 or self.n_lanes % 2 != 0:
            raise ValueError(f"n_lanes must be even and >= 2, got {self.n_lanes}")
        if self.total_width <= 0.0 or self.length <= 0.0:
            raise ValueError("total_width and length must be > 0")

    @property
    def lane_width(self) -> float:
        return self.total_width / (self.n_lanes + 1)

    @property
    def max_lane(self) -> int:
        return self.n_lanes // 2

    def option_lanes(self) -> list[int]:
        half = self.max_lane
        return [k for k in range(-half, half + 1) if k != 0]

    def lane_center(self, lane: int) -> float:
        if abs(lane) > self.max_lane:
            raise ValueError(f"lane {lane} outside layout")
        return lane * self.lane_width

    def lane_interval(self, lane: int) -> tuple[float, float]:
        w = self.lane_width
        return (lane - 0.5) * w, (lane + 0.5) * w


def build_lanes(
    n_lanes: int,
    total_width: float = DEFAULT_TOTAL_WIDTH,
    length: float = DEFAULT_TRACK_LENGTH,
) -> LaneLayout:
    return LaneLayout(n_lanes=n_lanes, total_width=total_width, length=length)


def lane_at(layout: LaneLayout, x: float) -> int | None:
    """Lane id under lateral position x, or None when off the strip.

    Positions at or beyond half the total width are off-track; within the
    strip the half-open lane intervals make the assignment unique.
    """
    if abs(x) >= 0.5 * layout.total_width:
        return None
    return math.floor(x / layout.lane_width + 0.5)


@dataclass(frozen=True)
class SelectorConfig:
    selection_time: float

    def __post_init__(self):
        if self.selection_time <= 0.0:
            raise ValueError("selection_time must be > 0")


@dataclass(frozen=True)
class Selected:
    lane: int


@dataclass(frozen=True)
class Failed:
    reason: str  # "end_of_track"


@dataclass(frozen=True)
class SelectorEvent:
    kind: str  # entered | left | selected | off_track | on_track | end_of_track
    t: float
    lane: int | None = None


@dataclass(frozen=True)
class SelectorState:
    """Dwell automaton state, advanced functionally by :func:`selector_step`.

    ``current_lane`` is None while off the strip; ``held_lane`` remembers
    the lane whose dwell is banked so that an off-track excursion pauses
    the timer instead of resetting it.
    """

    current_lane: int | None
    dwell_elapsed: float
    opacity_fraction: float
    result: Selected | Failed | None = None
    held_lane: int | None = None


def initial_selector_state(layout: LaneLayout, x: float) -> SelectorState:
    lane = lane_at(layout, x)
    return SelectorState(
        current_lane=lane,
        dwell_elapsed=0.0,
        opacity_fraction=0.0,
        result=None,
        held_lane=lane,
    )


@dataclass(frozen=True)
class WalkSample:
    t: float
    x: float
    y: float


def write_trace_jsonl(samples: Iterable[WalkSample], path: str | Path) -> None:
    """One {"t","x","y"} object per trajectory sample."""
    with Path(path).open("w") as fh:
        for s in samples:
            fh.write(json.dumps({"t": s.t, "x": s.x, "y": s.y}) + "\n")


def read_trace_jsonl(path: str | Path) -> list[WalkSample]:
    with Path(path).open() as fh:
        return [
            WalkSample(d["t"], d["x"], d["y"])
            for d in (json.loads(line) for line in fh if line.strip())
        ]


def selector_step(
    state: SelectorState,
    config: SelectorConfig,
    layout: LaneLayout,
    sample: WalkSample,
    prev_t: float,
) -> tuple[SelectorState, list[SelectorEvent]]:
    """Advance the automaton by one sample.

    The step's elapsed time is credited to the lane under the new sample
    (piecewise-constant-from-right); changing lanes resets the timer, the
    null lane never accumulates, and exactly reaching the selection time
    selects.  Reaching the end of the track without a selection fails the
    trial.
    """
    if state.result is not None:
        raise InvalidState("selector already finished")
    if sample.t < prev_t:
        raise ValueError(f"samples must be time-ordered: {sample.t} < {prev_t}")
    dt = sample.t - prev_t
    events: list[SelectorEvent] = []
    lane = lane_at(layout, sample.x)
    dwell = state.dwell_elapsed
    held = state.held_lane

    if lane is None:
        if state.current_lane is not None:
            events.append(SelectorEvent("off_track", sample.t))
        # Dwell pauses while off the strip; held_lane keeps the banked lane.
    else:
        if lane != held:
            if held is not None:
                events.append(SelectorEvent("left", sample.t, held))
            events.append(SelectorEvent("entered", sample.t, lane))
            dwell = 0.0
            held = lane
        elif state.current_lane is None:
            events.append(SelectorEvent("on_track", sample.t, lane))
        if lane != 0:
            dwell += dt
        else:
            dwell = 0.0

    opacity = min(1.0, dwell / config.selection_time)
    result: Selected | Failed | None = None
    if lane is not None and lane != 0 and dwell >= config.selection_time:
        result = Selected(lane)
        events.append(SelectorEvent("selected", sample.t, lane))
    elif sample.y >= layout.length:
        result = Failed("end_of_track")
        events.append(SelectorEvent("end_of_track", sample.t))

    new_state = SelectorState(
        current_lane=lane,
        dwell_elapsed=dwell,
        opacity_fraction=opacity,
        result=result,
        held_lane=held,
    )
    return new_state, events


@dataclass(frozen=True)
class WalkTrialMetrics:
    """Outcome of one lane-selection trial.

    ``walked_distance`` is the trajectory arc length during the TCT window
    (task shown until entering the eventually selected lane);
    ``forward_displacement`` is the longitudinal displacement over the same
    window, exposed for comparison.  ``tct`` is None when no lane was
    activated.
    """

    success: bool
    selected_lane: int | None
    tct: float | None
    walked_distance: float
    forward_displacement: float
    stabilizing_error: bool
    error_kind: str | None  # overshoot | swing_back
    failure_reason: str | None  # wrong_lane | end_of_track

    def __post_init__(self):
        if self.tct is not None and self.tct < 0.0:
            raise ValueError("tct must be >= 0 when present")
        if self.walked_distance < 0.0:
            raise ValueError("walked_distance must be >= 0")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "WalkTrialMetrics":
        return cls(**json.loads(line))


def _interp_at(samples: Sequence[WalkSample], t: float) -> tuple[float, float]:
    """Linear interpolation of (x, y) at time t, clamped to the trace ends."""
    if t <= samples[0].t:
        return samples[0].x, samples[0].y
    for a, b in zip(samples, samples[1:]):
        if t <= b.t:
            if b.t == a.t:
                return b.x, b.y
            f = (t - a.t) / (b.t - a.t)
            return a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)
    return samples[-1].x, samples[-1].y


def _arc_length(samples: Sequence[WalkSample], t0: float, t1: float) -> float:
    if t1 <= t0:
        return 0.0
    total = 0.0
    px, py = _interp_at(samples, t0)
    for s in samples:
        if s.t <= t0:
            continue
        if s.t >= t1:
            break
        total += math.hypot(s.x - px, s.y - py)
        px, py = s.x, s.y
    ex, ey = _interp_at(samples, t1)
    total += math.hypot(ex - px, ey - py)
    return total


def score_trial(
    trace: Sequence[WalkSample],
    target: int,
    config: SelectorConfig,
    layout: LaneLayout,
    task_shown_at: float = 0.0,
) -> WalkTrialMetrics:
    """Replay a trace through the automaton and score the trial.

    The automaton runs from the first sample at or after ``task_shown_at``;
    the trial ends at the first selection event or at the end of the track
    (a trace that simply stops counts as running out of track).  A
    stabilizing error is any exit from the target lane after first entering
    it: an overshoot when the exit continues the initial shift direction, a
    swing-back otherwise.
    """
    if not trace:
        raise ValueError("empty trace")
    if trace[0].t > task_shown_at:
        raise ValueError("trace must start at or before task_shown_at")
    if target == 0 or abs(target) > layout.max_lane:
        raise ValueError(f"target must be a non-null lane id, got {target}")

    samples = [s for s in trace if s.t >= task_shown_at]
    if not samples:
        raise ValueError("no samples at or after task_shown_at")

    center = layout.lane_center(target)
    shift_dir = 1.0 if center >= samples[0].x else -1.0

    state = initial_selector_state(layout, samples[0].x)
    entered_target = state.current_lane == target
    stabilizing = False
    error_kind: str | None = None
    end_time = samples[-1].t
    prev_t = samples[0].t
    for s in samples[1:]:
        state, events = selector_step(state, config, layout, s, prev_t)
        prev_t = s.t
        for ev in events:
            if ev.kind == "entered" and ev.lane == target:
                entered_target = True
            elif entered_target and (
                (ev.kind == "left" and ev.lane == target)
                or (ev.kind == "off_track" and state.held_lane == target)
            ):
                if not stabilizing:
                    stabilizing = True
                    side = 1.0 if s.x > center else -1.0
                    error_kind = "overshoot" if side == shift_dir else "swing_back"
        if state.result is not None:
            end_time = s.t
            break

    if isinstance(state.result, Selected):
        lane = state.result.lane
        success = lane == target
        tct = (end_time - task_shown_at) - config.selection_time
        window_end = end_time - config.selection_time
        walked = _arc_length(samples, task_shown_at, window_end)
        x0, y0 = _interp_at(samples, task_shown_at)
        x1, y1 = _interp_at(samples, window_end)
        return WalkTrialMetrics(
            success=success,
            selected_lane=lane,
            tct=max(0.0, tct),
            walked_distance=walked,
            forward_displacement=y1 - y0,
            stabilizing_error=stabilizing,
            error_kind=error_kind,
            failure_reason=None if success else "wrong_lane",
        )

    walked = _arc_length(samples, task_shown_at, end_time)
    x0, y0 = _interp_at(samples, task_shown_at)
    x1, y1 = _interp_at(samples, end_time)
    return WalkTrialMetrics(
        success=False,
        selected_lane=None,
        tct=None,
        walked_distance=walked,
        forward_displacement=y1 - y0,
        stabilizing_error=stabilizing,
        error_kind=error_kind,
        failure_reason="end_of_track",
    )
