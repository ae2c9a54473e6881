"""Finite metric spaces, similarity matrices, and magnitude.

The magnitude of a finite metric space with distance matrix d is the sum of
the entries of the inverse of Z = (exp(-d[i][j])). For positive definite Z
this equals sum(w) where w solves Z w = 1, which is how it is computed here:
a symmetric positive-definite factorization with explicit pivot tracking,
followed by two triangular solves. No regularization is ever applied; a
failed factorization is surfaced as `NotPositiveDefinite` because a
regularized value would be a different quantity.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.spatial.distance import cdist

from ._util import DEDUP_TOL, dedup_points
from .errors import ConditionWarning, NotPositiveDefinite, ValidationError

log = logging.getLogger(__name__)

#: Pivots at or below this value count as a factorization failure.
PD_TOL = 1e-12
#: Pivot ratios below this trigger a ConditionWarning / table flag.
CONDITION_RATIO = 1e-10

METRIC_L1 = "l1"
METRIC_L2 = "l2"


def _freeze(obj, name, arr):
    a = np.array(arr, dtype=float)
    a.setflags(write=False)
    object.__setattr__(obj, name, a)


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """A finite metric space given by its symmetric distance matrix.

    Distances must be nonnegative, zero exactly on the diagonal and strictly
    positive off it (duplicate points are rejected: they make the similarity
    matrix singular). The triangle inequality is only checked when
    `validate_triangle=True`; magnitude itself is defined for any symmetric
    matrix input, but file ingestion turns the check on to catch data errors.
    """

    d: np.ndarray
    validate_triangle: bool = field(default=False, compare=False)

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValidationError("distance matrix must be square")
        if d.shape[0] == 0:
            raise ValidationError("a metric space needs at least one point")
        if not np.allclose(d, d.T, rtol=0.0, atol=1e-12):
            raise ValidationError("distance matrix must be symmetric")
        d = 0.5 * (d + d.T)  # enforce exact symmetry after the tolerance check
        if np.abs(np.diag(d)).max() > 1e-15:
            raise ValidationError("diagonal distances must be zero")
        np.fill_diagonal(d, 0.0)
        off = d[~np.eye(d.shape[0], dtype=bool)]
        if off.size and off.min() <= 0.0:
            raise ValidationError(
                "off-diagonal distances must be positive (duplicate points?)"
            )
        if self.validate_triangle:
            _check_triangle(d)
        _freeze(self, "d", d)

    @property
    def n(self) -> int:
        return self.d.shape[0]


def _check_triangle(d: np.ndarray, tol: float = 1e-9) -> None:
    # d[i,k] <= min_j (d[i,j] + d[j,k]) up to tol
    via = (d[:, :, None] + d[None, :, :]).min(axis=1)
    worst = float((d - via).max())
    if worst > tol:
        raise ValidationError(f"triangle inequality violated by {worst:.3g}")


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Matrix Z with Z[i][j] = exp(-d[i][j]); unit diagonal, entries in (0,1]."""

    Z: np.ndarray

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=float)
        if Z.ndim != 2 or Z.shape[0] != Z.shape[1]:
            raise ValidationError("similarity matrix must be square")
        if not np.allclose(Z, Z.T, rtol=0.0, atol=1e-12):
            raise ValidationError("similarity matrix must be symmetric")
        _freeze(self, "Z", 0.5 * (Z + Z.T))

    @property
    def n(self) -> int:
        return self.Z.shape[0]


@dataclass(frozen=True, eq=False)
class Weighting:
    """Weight vector w with Z w = 1; magnitude is the entry sum of w."""

    w: np.ndarray
    magnitude: float
    min_pivot: float
    pivot_ratio: float

    def __post_init__(self):
        _freeze(self, "w", self.w)


@dataclass(frozen=True)
class PDReport:
    """Outcome of a positive-definite factorization attempt."""

    ok: bool
    min_pivot: float
    max_pivot: float

    @property
    def pivot_ratio(self) -> float:
        if self.max_pivot <= 0.0:
            return 0.0
        return self.min_pivot / self.max_pivot


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Points in R^N with a metric tag (l1 or l2).

    The list must be duplicate-free within 1e-12: coincident points make
    every similarity matrix containing them singular, so they are rejected
    at ingestion rather than carried along.
    """

    points: np.ndarray
    metric: str = METRIC_L1

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise ValidationError("points must be a 2-d array")
        if pts.shape[0] == 0:
            raise ValidationError("point cloud must be nonempty")
        if self.metric not in (METRIC_L1, METRIC_L2):
            raise ValidationError(f"unknown metric tag {self.metric!r}")
        if len(dedup_points(pts, DEDUP_TOL)) != len(pts):
            raise ValidationError("point cloud contains duplicate points")
        _freeze(self, "points", pts)

    @property
    def N(self) -> int:
        return self.points.shape[1]

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


def similarity_matrix(space: FiniteMetricSpace) -> SimilarityMatrix:
    """Elementwise exp(-d); the diagonal is set to exactly 1."""
    Z = np.exp(-space.d)
    np.fill_diagonal(Z, 1.0)
    return SimilarityMatrix(Z)


def _cholesky_pivots(a: np.ndarray, tol: float):
    """Row-by-row Cholesky that reports pivots.

    Returns (L, report). L is None when a pivot falls at or below `tol`;
    the failing pivot is then the reported minimum. The loop is plain
    O(n^3) with vectorized inner products, deterministic by construction.
    """
    n = a.shape[0]
    L = np.zeros_like(a)
    min_pivot = np.inf
    max_pivot = -np.inf
    for j in range(n):
        pivot = a[j, j] - L[j, :j] @ L[j, :j]
        min_pivot = min(min_pivot, pivot)
        max_pivot = max(max_pivot, pivot)
        if pivot <= tol:
            return None, PDReport(False, float(min_pivot), float(max_pivot))
        L[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L, PDReport(True, float(min_pivot), float(max_pivot))


def is_positive_definite(Z: SimilarityMatrix | np.ndarray, tol: float = PD_TOL) -> PDReport:
    """Attempt a Cholesky factorization; all pivots must exceed `tol`.

    The report carries the smallest pivot encountered (the failing one if
    the factorization stops early).
    """
    if not isinstance(Z, SimilarityMatrix):
        Z = SimilarityMatrix(np.asarray(Z, dtype=float))
    _, report = _cholesky_pivots(Z.Z, tol)
    return report


def magnitude_finite(space: FiniteMetricSpace, tol: float = PD_TOL) -> Weighting:
    """Magnitude and weighting of a finite metric space.

    Solves Z w = 1 through the positive-definite factorization and returns
    sum(w). Raises NotPositiveDefinite (with the failing pivot) if any pivot
    falls at or below `tol`; warns with ConditionWarning when the pivot
    ratio drops below CONDITION_RATIO.
    """
    Z = similarity_matrix(space)
    L, report = _cholesky_pivots(Z.Z, tol)
    if L is None:
        raise NotPositiveDefinite(
            f"similarity matrix is not positive definite at tol {tol:g} "
            f"(min pivot {report.min_pivot:.3e})",
            report.min_pivot,
        )
    if report.pivot_ratio < CONDITION_RATIO:
        warnings.warn(
            f"near-singular similarity matrix: pivot ratio {report.pivot_ratio:.3e}",
            ConditionWarning,
            stacklevel=2,
        )
    ones = np.ones(space.n)
    y = solve_triangular(L, ones, lower=True)
    w = solve_triangular(L.T, y, lower=False)
    return Weighting(w, float(w.sum()), report.min_pivot, report.pivot_ratio)


def scale_space(space: FiniteMetricSpace, t: float) -> FiniteMetricSpace:
    """The same point set with every distance multiplied by t > 0."""
    if not t > 0.0:
        raise ValidationError("scale factor must be positive")
    return FiniteMetricSpace(space.d * t)


def negative_type_probe(
    space: FiniteMetricSpace,
    scales,
    tol: float = PD_TOL,
) -> dict[float, PDReport]:
    """Positive-definiteness of tX for each requested scale t.

    A single failing scale certifies the space is NOT of negative type.
    All scales passing is evidence only: negative type quantifies over
    every t > 0, which no finite probe can decide.
    """
    scales = [float(t) for t in scales]
    if not scales:
        raise ValidationError("scale list must be nonempty")
    out: dict[float, PDReport] = {}
    for t in scales:
        scaled = scale_space(space, t)
        out[t] = is_positive_definite(similarity_matrix(scaled), tol)
    return out


def l1_product(a: FiniteMetricSpace, b: FiniteMetricSpace) -> FiniteMetricSpace:
    """Cartesian product with the l1-sum metric d((x,y),(x',y')) = d(x,x') + d(y,y').

    Point (i, j) of the product maps to row i * b.n + j.
    """
    d = a.d[:, None, :, None] + b.d[None, :, None, :]
    n = a.n * b.n
    return FiniteMetricSpace(d.reshape(n, n))


def diagonal_embedding(a: FiniteMetricSpace, n: int) -> FiniteMetricSpace:
    """The space nA: all distances multiplied by the integer n >= 1.

    nA is the image of the diagonal map x -> (x, ..., x) into the n-fold
    l1 product, which is why magnitude(nA) <= magnitude(A)**n.
    """
    if int(n) != n or n < 1:
        raise ValidationError("n must be an integer >= 1")
    return scale_space(a, float(n))


def distance_matrix(points: np.ndarray, metric: str) -> np.ndarray:
    if metric == METRIC_L1:
        return cdist(points, points, "cityblock")
    if metric == METRIC_L2:
        return cdist(points, points, "euclidean")
    raise ValidationError(f"unknown metric tag {metric!r}")


def subspace_from_cloud(cloud: PointCloud, indices=None) -> FiniteMetricSpace:
    """Finite metric space on selected cloud points under the cloud's metric.

    `indices=None` takes the whole cloud. Selected points must be pairwise
    distinct: a zero off-diagonal distance is rejected.
    """
    if indices is None:
        idx = np.arange(cloud.n_points)
    else:
        idx = np.asarray(list(indices), dtype=int)
        if idx.size == 0:
            raise ValidationError("index subset must be nonempty")
        if idx.min() < 0 or idx.max() >= cloud.n_points:
            raise ValidationError("index out of range")
        if len(np.unique(idx)) != len(idx):
            raise ValidationError("duplicate indices in subset")
    pts = cloud.points[idx]
    d = distance_matrix(pts, cloud.metric)
    try:
        return FiniteMetricSpace(d)
    except ValidationError as exc:
        raise ValidationError(f"selected subset is degenerate: {exc}") from exc


def space_from_points(points: np.ndarray, metric: str = METRIC_L1) -> FiniteMetricSpace:
    """Convenience: metric space of a raw point array (no dedup)."""
    pts = np.asarray(points, dtype=float)
    return FiniteMetricSpace(distance_matrix(pts, metric))


def nested_magnitudes(d: np.ndarray, tol: float = PD_TOL) -> tuple[list[float], list[int]]:
    """Magnitudes of the nested prefix chain of a distance matrix.

    Grows the factorization one point at a time (bordered Cholesky). A point
    whose pivot falls at or below `tol` (a near-duplicate of the points
    already kept) is skipped and logged; the chain continues without it.
    Returns the magnitudes of the kept prefixes and the kept row indices.
    """
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    L = np.zeros((n, n))
    kept: list[int] = []
    mags: list[float] = []
    for i in range(n):
        k = len(kept)
        z = np.exp(-d[i, kept]) if k else np.empty(0)
        y = solve_triangular(L[:k, :k], z, lower=True) if k else z
        pivot = 1.0 - y @ y
        if pivot <= tol:
            log.warning(
                "skipping point %d in nested chain: pivot %.3e <= tol %.1e",
                i, pivot, tol,
            )
            continue
        L[k, :k] = y
        L[k, k] = np.sqrt(pivot)
        kept.append(i)
        k += 1
        u = solve_triangular(L[:k, :k], np.ones(k), lower=True)
        w = solve_triangular(L[:k, :k].T, u, lower=False)
        mags.append(float(w.sum()))
    return mags, kept
