"""Semicircular foot-tap grid: geometry, hit-testing and tap classification.

The grid is a frontal semicircular annulus anchored near the standing foot,
divided into radial rows and angular columns; each cell is one selectable
option.  Taps on an invisible (floating) interface are classified with a
radial-kernel one-vs-rest model evaluated by repeated stratified
cross-validation, and per-target scatter is summarized with coverage
ellipses of the sample covariance.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DEFAULT_ROW_HEIGHT = 0.085
DEFAULT_INNER_RADIUS = 0.15


class TrainingFailure(ValueError):
    """The tap data cannot support a classifier (degenerate geometry)."""


class DegenerateData(ValueError):
    """Point set with rank-deficient covariance."""


@dataclass(frozen=True, order=True)
class Cell:
    """Grid cell address: row 1 is the band nearest the feet, col 1 leftmost."""

    row: int
    col: int


@dataclass(frozen=True)
class FootGrid:
    """Semicircular tap grid in the body frame.

    The body frame has +y straight ahead and +x to the right; angles are
    measured from the +x axis, so the grid spans 0..180 degrees.  ``anchor``
    and ``facing`` place the grid in world coordinates; with the defaults
    the world frame and body frame coincide.
    """

    rows: int
    cols: int
    row_height: float = DEFAULT_ROW_HEIGHT
    inner_radius: float = DEFAULT_INNER_RADIUS
    anchor: tuple[float, float] = (0.0, 0.0)
    facing: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid needs at least one row and one column")
        if self.row_height <= 0.0:
            raise ValueError("row_height must be > 0")
        if self.inner_radius < 0.0:
            raise ValueError("inner_radius must be >= 0")
        norm = math.hypot(*self.facing)
        if not math.isclose(norm, 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError("facing must be a unit vector")

    def radius_edges(self) -> tuple[float, ...]:
        return tuple(self.inner_radius + i * self.row_height for i in range(self.rows + 1))

    def theta_edges(self) -> tuple[float, ...]:
        """Ascending angular edges in degrees; edge k = 180*k/cols."""
        return tuple(180.0 * k / self.cols for k in range(self.cols + 1))

    @property
    def outer_radius(self) -> float:
        return self.inner_radius + self.rows * self.row_height

    def cells(self) -> list[Cell]:
        return [Cell(r, c) for r in range(1, self.rows + 1) for c in range(1, self.cols + 1)]

    def to_body_frame(self, point: tuple[float, float]) -> tuple[float, float]:
        vx = point[0] - self.anchor[0]
        vy = point[1] - self.anchor[1]
        fx, fy = self.facing
        # Right of facing is (fy, -fx); facing itself is body +y.
        return vx * fy - vy * fx, vx * fx + vy * fy


def build_grid(
    rows: int,
    cols: int,
    row_height: float = DEFAULT_ROW_HEIGHT,
    inner_radius: float = DEFAULT_INNER_RADIUS,
) -> FootGrid:
    return FootGrid(rows=rows, cols=cols, row_height=row_height, inner_radius=inner_radius)


def cell_bounds(grid: FootGrid, cell: Cell) -> tuple[float, float, float, float]:
    """Polar box of a cell as (r_lo, r_hi, theta_lo, theta_hi) in degrees.

    Radial and angular intervals are half-open: the lower edge belongs to
    the cell, the upper edge to its neighbour.  Column 1 is leftmost, i.e.
    the highest angles.
    """
    if not (1 <= cell.row <= grid.rows and 1 <= cell.col <= grid.cols):
        raise ValueError(f"{cell} outside a {grid.rows}x{grid.cols} grid")
    r_edges = grid.radius_edges()
    t_edges = grid.theta_edges()
    return (
        r_edges[cell.row - 1],
        r_edges[cell.row],
        t_edges[grid.cols - cell.col],
        t_edges[grid.cols - cell.col + 1],
    )


def cell_centroid(grid: FootGrid, cell: Cell) -> tuple[float, float]:
    """Mid-radius / mid-angle point of a cell, in the body frame."""
    r_lo, r_hi, t_lo, t_hi = cell_bounds(grid, cell)
    r = 0.5 * (r_lo + r_hi)
    theta = math.radians(0.5 * (t_lo + t_hi))
    return r * math.cos(theta), r * math.sin(theta)


def hit_test(grid: FootGrid, point: tuple[float, float]) -> Cell | None:
    """The unique cell containing the tap point, or None for a miss."""
    x, y = grid.to_body_frame(point)
    r = math.hypot(x, y)
    theta = math.degrees(math.atan2(y, x))
    if theta < 0.0:
        return None
    r_edges = grid.radius_edges()
    if not (r_edges[0] <= r < r_edges[-1]):
        return None
    row = bisect_right(r_edges, r)  # 1-based row band
    t_edges = grid.theta_edges()
    k = bisect_right(t_edges, theta) - 1
    if k >= grid.cols:  # theta == 180 exactly falls past the last half-open box
        return None
    return Cell(row, grid.cols - k)


@dataclass(frozen=True)
class TapSample:
    point: tuple[float, float]
    label: Cell | None = None

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.point):
            raise ValueError(f"non-finite tap coordinates: {self.point}")


@dataclass(frozen=True)
class TapRecord:
    """One logged tap: position, target cell, and trial bookkeeping."""

    x: float
    y: float
    row: int
    col: int
    condition: str
    participant: str
    t: float

    def sample(self) -> TapSample:
        return TapSample((self.x, self.y), Cell(self.row, self.col))


def write_taps_jsonl(records: Iterable[TapRecord], path: str | Path) -> None:
    """One JSON object per tap: {x, y, row, col, condition, participant, t}."""
    with Path(path).open("w") as fh:
        for r in records:
            fh.write(
                json.dumps(
                    {
                        "x": r.x,
                        "y": r.y,
                        "row": r.row,
                        "col": r.col,
                        "condition": r.condition,
                        "participant": r.participant,
                        "t": r.t,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_taps_jsonl(path: str | Path) -> list[TapRecord]:
    records = []
    with Path(path).open() as fh:
        for line in fh:
            if not line.strip():
                continue
            data = json.loads(line)
            records.append(
                TapRecord(
                    x=data["x"],
                    y=data["y"],
                    row=data["row"],
                    col=data["col"],
                    condition=data["condition"],
                    participant=data["participant"],
                    t=data["t"],
                )
            )
    return records


@dataclass(frozen=True)
class ClassifierParams:
    """Radial-kernel hyperparameters; gamma None means the median heuristic."""

    c: float = 1.0
    gamma: float | None = None

    def __post_init__(self):
        if self.c <= 0.0:
            raise ValueError("c must be > 0")
        if self.gamma is not None and self.gamma <= 0.0:
            raise ValueError("gamma must be > 0")


@dataclass(frozen=True)
class TapClassifier:
    """Radial-kernel one-vs-rest classifier over 2-D tap positions.

    Trained by regularized least squares on +/-1 one-vs-rest targets, which
    keeps training a deterministic linear solve; the whole training set acts
    as the support set with per-class dual weights.
    """

    support_points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    gamma: float
    c: float
    classes: tuple[Cell, ...]

    def decision_values(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        k = _rbf_kernel(points, self.support_points, self.gamma)
        return k @ self.weights

    def predict(self, points) -> list[Cell]:
        scores = self.decision_values(points)
        return [self.classes[i] for i in np.argmax(scores, axis=1)]


def _rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def _median_heuristic_gamma(points: np.ndarray) -> float:
    diff = points[:, None, :] - points[None, :, :]
    sq = np.sum(diff * diff, axis=-1)
    upper = sq[np.triu_indices(len(points), k=1)]
    median = float(np.median(np.sqrt(upper)))
    if median <= 0.0:
        raise TrainingFailure("pairwise tap distances are degenerate")
    return 1.0 / (2.0 * median * median)


def _split_samples(samples: Iterable[TapSample]) -> tuple[np.ndarray, list[Cell]]:
    points, labels = [], []
    for s in samples:
        if s.label is None:
            raise ValueError("training samples must be labeled")
        points.append(s.point)
        labels.append(s.label)
    return np.asarray(points, dtype=float), labels


def train_classifier(
    samples: Iterable[TapSample],
    params: ClassifierParams = ClassifierParams(),
    seed: int = 0,
) -> TapClassifier:
    """Fit the one-vs-rest radial-kernel model.

    Training is a linear solve and therefore deterministic for fixed data;
    ``seed`` is accepted for interface symmetry with the evaluation helpers
    but does not influence the fit.
    """
    del seed
    points, labels = _split_samples(samples)
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    counts = {c: labels.count(c) for c in classes}
    small = [c for c, n in counts.items() if n < 2]
    if small:
        raise ValueError(f"need at least two samples per class, too few for {small}")
    if np.ptp(points, axis=0).max() == 0.0:
        raise TrainingFailure("all training points are identical")

    gamma = params.gamma if params.gamma is not None else _median_heuristic_gamma(points)
    kernel = _rbf_kernel(points, points, gamma)
    targets = np.full((len(points), len(classes)), -1.0)
    index = {c: j for j, c in enumerate(classes)}
    for i, lab in enumerate(labels):
        targets[i, index[lab]] = 1.0
    ridge = kernel + (1.0 / params.c) * np.eye(len(points))
    weights = np.linalg.solve(ridge, targets)
    return TapClassifier(
        support_points=points,
        weights=weights,
        gamma=gamma,
        c=params.c,
        classes=classes,
    )


def _stratified_folds(
    labels: Sequence[Cell], folds: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Deal each class's shuffled indices round-robin over the folds."""
    assignments: list[list[int]] = [[] for _ in range(folds)]
    for cell in sorted(set(labels)):
        idx = np.flatnonzero(np.asarray([lab == cell for lab in labels]))
        rng.shuffle(idx)
        for j, sample_index in enumerate(idx):
            assignments[j % folds].append(int(sample_index))
    return [np.asarray(sorted(fold), dtype=int) for fold in assignments]


def evaluate_cv(
    samples: Sequence[TapSample],
    folds: int = 10,
    repetitions: int = 3,
    seed: int = 0,
    params: ClassifierParams = ClassifierParams(),
) -> float:
    """Mean held-out accuracy over seeded stratified folds x repetitions."""
    points, labels = _split_samples(samples)
    for cell in sorted(set(labels)):
        if labels.count(cell) < folds:
            raise ValueError(f"class {cell} has fewer than {folds} samples")
    rng = np.random.default_rng(seed)
    samples = list(samples)
    accuracies = []
    for _ in range(repetitions):
        for test_idx in _stratified_folds(labels, folds, rng):
            mask = np.zeros(len(samples), dtype=bool)
            mask[test_idx] = True
            train = [s for s, held_out in zip(samples, mask) if not held_out]
            model = train_classifier(train, params)
            predicted = model.predict(points[mask])
            actual = [labels[i] for i in test_idx]
            accuracies.append(
                sum(p == a for p, a in zip(predicted, actual)) / len(actual)
            )
    return float(np.mean(accuracies))


def chi2_quantile_2df(coverage: float) -> float:
    """Chi-square quantile with two degrees of freedom (closed form)."""
    if not (0.0 < coverage < 1.0):
        raise ValueError("coverage must be in (0, 1)")
    return -2.0 * math.log(1.0 - coverage)


@dataclass(frozen=True)
class ProbabilityEllipse:
    """Sample-covariance ellipse scaled to contain ``coverage`` of the mass."""

    center: tuple[float, float]
    eigenvectors: tuple[tuple[float, float], tuple[float, float]]
    eigenvalues: tuple[float, float]
    coverage: float
    semi_axes: tuple[float, float]
    area: float

    def mahalanobis_sq(self, point: tuple[float, float]) -> float:
        ux = point[0] - self.center[0]
        uy = point[1] - self.center[1]
        total = 0.0
        for (vx, vy), lam in zip(self.eigenvectors, self.eigenvalues):
            proj = ux * vx + uy * vy
            total += proj * proj / lam
        return total

    def contains(self, point: tuple[float, float]) -> bool:
        return self.mahalanobis_sq(point) < chi2_quantile_2df(self.coverage)


def probability_ellipse(points, coverage: float = 0.95) -> ProbabilityEllipse:
    """Coverage ellipse of a 2-D point set from its n-1 sample covariance."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise DegenerateData("need at least three 2-D points")
    center = pts.mean(axis=0)
    cov = np.cov(pts.T, ddof=1)
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    if eigenvalues[0] <= 1e-12 * max(eigenvalues[1], 1e-30):
        raise DegenerateData("points are collinear (rank-deficient covariance)")
    q = chi2_quantile_2df(coverage)
    semi_axes = tuple(math.sqrt(q * lam) for lam in eigenvalues)
    area = math.pi * q * math.sqrt(eigenvalues[0] * eigenvalues[1])
    return ProbabilityEllipse(
        center=(float(center[0]), float(center[1])),
        eigenvectors=(
            (float(eigenvectors[0, 0]), float(eigenvectors[1, 0])),
            (float(eigenvectors[0, 1]), float(eigenvectors[1, 1])),
        ),
        eigenvalues=(float(eigenvalues[0]), float(eigenvalues[1])),
        coverage=coverage,
        semi_axes=semi_axes,
        area=area,
    )


def ellipse_overlap(ellipse: ProbabilityEllipse, other_points) -> float:
    """Fraction of ``other_points`` strictly inside the ellipse."""
    pts = np.asarray(other_points, dtype=float)
    if pts.size == 0:
        raise ValueError("other_points must be non-empty")
    pts = np.atleast_2d(pts)
    inside = sum(ellipse.contains((float(p[0]), float(p[1]))) for p in pts)
    return inside / len(pts)
