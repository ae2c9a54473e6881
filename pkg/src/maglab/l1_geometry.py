"""Polytopes in l1^N: coordinate projections, volumes, l1 intrinsic volumes.

The k-th l1 intrinsic volume of a convex body A in R^N is the sum, over all
k-element subsets S of the coordinate axes, of the k-dimensional volume of
the orthogonal projection of A onto the axes in S. These quantities drive
everything else here: the magnitude formula for convex bodies under the
l1 metric (sum of V_k / 2^k, exact for full-dimensional bodies, an upper
bound otherwise), a ladder of inequalities relating them, and a Wills-type
identity expressing the volume of the body fattened by a unit cube.

Exact subset enumeration costs 2^N hull volumes and is capped (default
N <= 12). Boxes and coordinate simplices have closed forms via elementary
symmetric polynomials; a per-k Monte Carlo subset estimator covers the rest.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import nnls
from scipy.spatial import ConvexHull
from scipy.spatial.distance import cdist

from ._util import DEDUP_TOL, dedup_points, pairwise_sum
from .errors import CapExceeded, ValidationError

#: Exact enumeration runs for ambient dimension up to this by default.
DEFAULT_CAP = 12
#: Relative singular-value threshold for affine-rank decisions.
RANK_TOL = 1e-10


@dataclass(eq=False)
class Polytope:
    """Convex hull of a finite vertex list in R^N.

    The list may contain interior (non-extreme) points; hull-sensitive
    quantities (vertex count in diameter bounds, diameter itself) use
    `hull_vertex_indices`, which strips them. Near-duplicate rows are merged
    at construction.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] == 0 or v.shape[1] == 0:
            raise ValidationError("vertices must be a nonempty 2-d array")
        v = dedup_points(v, DEDUP_TOL)
        v.setflags(write=False)
        self.vertices = v

    @property
    def N(self) -> int:
        return self.vertices.shape[1]

    @property
    def m(self) -> int:
        """Number of supplied (deduplicated) vertices, extreme or not."""
        return self.vertices.shape[0]

    @cached_property
    def affine_dimension(self) -> int:
        return _affine_rank(self.vertices)

    @cached_property
    def hull_vertex_indices(self) -> tuple[int, ...]:
        """Indices of the extreme points, in input order."""
        if self.m == 1:
            return (0,)
        keep = []
        for i in range(self.m):
            others = np.delete(self.vertices, i, axis=0)
            if not in_hull(self.vertices[i], others):
                keep.append(i)
        return tuple(keep)

    @property
    def hull_vertex_count(self) -> int:
        return len(self.hull_vertex_indices)

    def hull_vertices(self) -> np.ndarray:
        return self.vertices[list(self.hull_vertex_indices)]

    def diameter_l1(self) -> float:
        """l1 diameter; attained at extreme points, so computed over them."""
        hv = self.hull_vertices()
        if hv.shape[0] == 1:
            return 0.0
        return float(cdist(hv, hv, "cityblock").max())

    def contains(self, point, tol: float = 1e-9) -> bool:
        return in_hull(np.asarray(point, dtype=float), self.vertices, tol)


def _affine_rank(points: np.ndarray) -> int:
    diffs = points[1:] - points[0]
    if diffs.shape[0] == 0:
        return 0
    s = np.linalg.svd(diffs, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int((s > RANK_TOL * s[0]).sum())


def in_hull(point: np.ndarray, vertices: np.ndarray, tol: float = 1e-9) -> bool:
    """Convex-combination membership via nonnegative least squares."""
    m = vertices.shape[0]
    A = np.vstack([vertices.T, np.ones(m)])
    b = np.concatenate([point, [1.0]])
    _, rnorm = nnls(A, b, maxiter=max(100, 10 * m))
    return rnorm <= tol * (1.0 + np.linalg.norm(b))


def scale_polytope(p: Polytope, t: float) -> Polytope:
    if not t > 0.0:
        raise ValidationError("scale factor must be positive")
    return Polytope(p.vertices * t)


def box_polytope(lengths) -> Polytope:
    """Axis-aligned box Prod [0, a_i] as an explicit vertex list (2^N corners)."""
    a = np.asarray(lengths, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ValidationError("box needs a nonempty length list")
    if a.size > 16:
        raise ValidationError("explicit box vertices capped at N=16; use the formulas")
    corners = np.array(list(itertools.product(*[(0.0, ai) for ai in a])))
    return Polytope(corners)


def coordinate_simplex_polytope(a) -> Polytope:
    """conv{a_1 e_1, ..., a_N e_N, 0} in R^N."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or a.size == 0 or (a <= 0).any():
        raise ValidationError("coordinate simplex needs positive lengths")
    return Polytope(np.vstack([np.diag(a), np.zeros(a.size)]))


def project(p: Polytope, coords) -> Polytope:
    """Orthogonal projection onto the listed coordinate axes (0-indexed).

    The image of the hull is the hull of the image, so projecting the
    vertex list is enough; vertices that collide are merged.
    """
    idx = list(coords)
    if len(idx) == 0:
        raise ValidationError("projection needs at least one coordinate")
    if any(int(i) != i for i in idx):
        raise ValidationError("coordinate indices must be integers")
    idx = [int(i) for i in idx]
    if any(i < 0 or i >= p.N for i in idx):
        raise ValidationError(f"coordinate index out of range [0, {p.N})")
    if sorted(set(idx)) != idx:
        raise ValidationError("coordinate indices must be strictly increasing")
    return Polytope(p.vertices[:, idx])


def volume(p: Polytope) -> float:
    """k-dimensional volume of the hull of a polytope living in R^k.

    Degenerate input (affine dimension below k, detected by singular
    values) has volume 0. Otherwise the hull's triangulated facets are
    coned over one hull vertex and the simplex determinants summed.
    """
    k = p.N
    verts = p.vertices
    if _affine_rank(verts) < k:
        return 0.0
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    if k == 1:
        return float(hi[0] - lo[0])
    hull = ConvexHull(verts)
    apex = verts[hull.vertices[0]]
    dets = [abs(np.linalg.det(verts[simplex] - apex)) for simplex in hull.simplices]
    return pairwise_sum(dets) / math.factorial(k)


@dataclass(frozen=True, eq=False)
class IntrinsicVolumeVector:
    """(V_0, ..., V_N); V_k carries units of length^k, V_0 = 1."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __getitem__(self, k: int) -> float:
        return float(self.values[k])

    def __len__(self) -> int:
        return len(self.values)


def intrinsic_volumes(p: Polytope, cap: int = DEFAULT_CAP) -> IntrinsicVolumeVector:
    """All l1 intrinsic volumes by exact subset enumeration.

    Enumerates the 2^N coordinate subsets in lexicographic order, computing
    one projected hull volume each; per-degree sums use pairwise (tree)
    summation so results do not depend on accumulation order tricks.
    Raises CapExceeded for N beyond `cap`.
    """
    N = p.N
    if N > cap:
        raise CapExceeded(
            f"exact enumeration needs 2^{N} subset volumes (cap {cap}); "
            "use the box/coordinate-simplex fast paths or the Monte Carlo "
            "estimator, or raise the cap"
        )
    values = np.zeros(N + 1)
    values[0] = 1.0
    for k in range(1, N + 1):
        vols = [
            volume(project(p, subset))
            for subset in itertools.combinations(range(N), k)
        ]
        values[k] = pairwise_sum(vols)
    return IntrinsicVolumeVector(values)


def intrinsic_volumes_mc(
    p: Polytope,
    n_subsets: int = 256,
    seed: int = 0,
) -> tuple[IntrinsicVolumeVector, np.ndarray]:
    """Monte Carlo estimate of the intrinsic volumes for large N.

    For each degree k the C(N,k) subset volumes are either enumerated
    (when there are at most `n_subsets` of them; standard error 0) or
    sampled uniformly with replacement. Returns the estimate and the
    per-degree standard errors.
    """
    if n_subsets < 2:
        raise ValidationError("need at least 2 subset samples")
    N = p.N
    rng = np.random.default_rng(seed)
    values = np.zeros(N + 1)
    stderr = np.zeros(N + 1)
    values[0] = 1.0
    for k in range(1, N + 1):
        total = math.comb(N, k)
        if total <= n_subsets:
            vols = [
                volume(project(p, s)) for s in itertools.combinations(range(N), k)
            ]
            values[k] = pairwise_sum(vols)
            continue
        vols = np.empty(n_subsets)
        for i in range(n_subsets):
            subset = np.sort(rng.choice(N, size=k, replace=False))
            vols[i] = volume(project(p, subset.tolist()))
        values[k] = total * float(vols.mean())
        stderr[k] = total * float(vols.std(ddof=1)) / math.sqrt(n_subsets)
    return IntrinsicVolumeVector(values), stderr


def elementary_symmetric(a) -> np.ndarray:
    """e_0, ..., e_n of the entries of a, by the product recurrence.

    Appending an entry x updates e_k <- e_k + x * e_{k-1} for k descending;
    all terms are nonnegative for nonnegative input, so no cancellation.
    """
    a = np.asarray(a, dtype=float)
    e = np.zeros(a.size + 1)
    e[0] = 1.0
    for i, x in enumerate(a):
        # RHS is evaluated before assignment, which is the descending-k update
        e[1:i + 2] = e[1:i + 2] + x * e[0:i + 1]
    return e


def box_intrinsic_volumes(lengths) -> IntrinsicVolumeVector:
    """Fast path for the box Prod [0, a_i]: V_k = e_k(a)."""
    a = np.asarray(lengths, dtype=float)
    if (a < 0).any():
        raise ValidationError("box lengths must be nonnegative")
    return IntrinsicVolumeVector(elementary_symmetric(a))


def coordinate_simplex_intrinsic_volumes(a) -> IntrinsicVolumeVector:
    """Fast path for conv{a_i e_i, 0}: V_k = e_k(a) / k!.

    Projections onto k chosen axes are again coordinate simplices, with
    volume (prod of the chosen a_i) / k!, so the subset sum collapses to an
    elementary symmetric polynomial. Agrees with enumeration for small N.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or a.size == 0 or (a <= 0).any():
        raise ValidationError("coordinate simplex needs positive lengths")
    e = elementary_symmetric(a)
    values = np.empty(a.size + 1)
    fact = 1.0
    for k in range(a.size + 1):
        if k > 1:
            fact *= k
        values[k] = e[k] / fact if k > 0 else 1.0
    return IntrinsicVolumeVector(values)


@dataclass(frozen=True, eq=False)
class ConvexMagnitudeResult:
    """Magnitude value of a convex body in l1^N via intrinsic volumes.

    value = sum of V_k / 2^k. `exact` is True when the body is
    full-dimensional in its ambient space (nonempty interior); otherwise
    the value is still a valid upper bound on the magnitude.
    """

    value: float
    exact: bool
    terms: np.ndarray

    def __post_init__(self):
        t = np.array(self.terms, dtype=float)
        t.setflags(write=False)
        object.__setattr__(self, "terms", t)


def _magnitude_from_volumes(values: np.ndarray) -> tuple[float, np.ndarray]:
    terms = np.array([values[k] / 2.0 ** k for k in range(len(values))])
    return pairwise_sum(terms), terms


def convex_magnitude_l1(p: Polytope, cap: int = DEFAULT_CAP) -> ConvexMagnitudeResult:
    """Magnitude of a convex body under the l1 metric, from intrinsic volumes."""
    iv = intrinsic_volumes(p, cap)
    value, terms = _magnitude_from_volumes(iv.values)
    return ConvexMagnitudeResult(value, p.affine_dimension == p.N, terms)


def box_magnitude(lengths) -> float:
    """Magnitude of the box Prod [0, a_i]: the product of (1 + a_i / 2)."""
    a = np.asarray(lengths, dtype=float)
    if a.size and (a < 0).any():
        raise ValidationError("box lengths must be nonnegative")
    out = 1.0
    for ai in a:
        out *= 1.0 + ai / 2.0
    return out


def coordinate_simplex_magnitude(a) -> float:
    """Magnitude of conv{a_i e_i, 0}: sum of e_k(a) / (k! 2^k)."""
    values = coordinate_simplex_intrinsic_volumes(a).values
    return _magnitude_from_volumes(values)[0]


def v1_intrinsic(p: Polytope) -> float:
    """V_1 directly from coordinate extents (no enumeration needed)."""
    verts = p.vertices
    return float((verts.max(axis=0) - verts.min(axis=0)).sum())


# ---------------------------------------------------------------------------
# Inequality ledger. Each check returns both sides; callers assert
# lhs <= rhs + tol. Precomputed intrinsic volumes can be passed to avoid
# re-enumeration in batch drivers.
# ---------------------------------------------------------------------------

def _volumes_of(p: Polytope, vols, cap: int) -> np.ndarray:
    if vols is None:
        return intrinsic_volumes(p, cap).values
    return np.asarray(vols.values if isinstance(vols, IntrinsicVolumeVector) else vols,
                      dtype=float)


def v1_concavity_check(p: Polytope, j: int, k: int, vols=None,
                       cap: int = DEFAULT_CAP) -> tuple[float, float]:
    """Sides of (j+k)! V_{j+k} <= (j! V_j)(k! V_k)."""
    if j < 0 or k < 0 or j + k > p.N:
        raise ValidationError("need j, k >= 0 with j + k <= N")
    v = _volumes_of(p, vols, cap)
    lhs = math.factorial(j + k) * v[j + k]
    rhs = (math.factorial(j) * v[j]) * (math.factorial(k) * v[k])
    return float(lhs), float(rhs)


def mcmullen_bound_check(p: Polytope, vols=None,
                         cap: int = DEFAULT_CAP) -> list[tuple[float, float]]:
    """Per degree k: (V_k, V_1^k / k!)."""
    v = _volumes_of(p, vols, cap)
    return [(float(v[k]), v[1] ** k / math.factorial(k)) for k in range(len(v))]


def exp_magnitude_bound(p: Polytope) -> float:
    """exp(V_1(p) / 2): an upper bound on the convex magnitude value.

    Uses degree-1 homogeneity (V_1 of the half-scaled body is V_1 / 2) and
    needs only coordinate extents, so it works at any ambient dimension.
    """
    return float(np.exp(v1_intrinsic(p) / 2.0))


def polytope_v1_diam_bound(p: Polytope) -> tuple[float, float]:
    """(V_1, 2 (m - 1) diam) with m the extreme-point count and l1 diameter.

    The bound holds for any generating set; using the post-hull count is
    tighter and still valid.
    """
    m = p.hull_vertex_count
    return v1_intrinsic(p), 2.0 * (m - 1) * p.diameter_l1()


def magnitude_diam_bound(p: Polytope) -> float:
    """exp((m - 1) diam): dimension-independent magnitude upper bound."""
    m = p.hull_vertex_count
    return float(np.exp((m - 1) * p.diameter_l1()))


# ---------------------------------------------------------------------------
# Wills-type identity: Vol_N(P + [0,1]^N) equals the sum of all intrinsic
# volumes. The left side has closed forms for boxes and coordinate
# simplices; otherwise it is estimated by Monte Carlo over the bounding box
# of the fattened body, whose facets we get from the Minkowski-sum hull.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WillsCheck:
    lhs: float           # Vol_N(P + unit cube)
    rhs: float           # sum of intrinsic volumes
    stderr: float | None  # standard error of lhs when Monte Carlo was used
    method: str


def _as_box_lengths(p: Polytope) -> np.ndarray | None:
    lo, hi = p.vertices.min(axis=0), p.vertices.max(axis=0)
    corners = dedup_points(
        np.array(list(itertools.product(*[(l, h) for l, h in zip(lo, hi)])))
    ) if p.N <= 16 else None
    if corners is None or corners.shape[0] != p.m:
        return None
    a = np.array(sorted(map(tuple, np.round(corners, 12))))
    b = np.array(sorted(map(tuple, np.round(p.vertices, 12))))
    if a.shape == b.shape and np.allclose(a, b, atol=1e-9):
        return hi - lo
    return None


def _as_coordinate_simplex_lengths(p: Polytope) -> np.ndarray | None:
    if p.m < 2:
        return None
    for base in range(p.m):
        diffs = p.vertices - p.vertices[base]
        axes = []
        ok = True
        for i in range(p.m):
            if i == base:
                continue
            row = diffs[i]
            nz = np.where(np.abs(row) > 1e-12)[0]
            if len(nz) != 1 or row[nz[0]] <= 0:
                ok = False
                break
            axes.append((nz[0], row[nz[0]]))
        if ok and len({ax for ax, _ in axes}) == len(axes):
            return np.array([length for _, length in axes])
    return None


def minkowski_cube_volume_mc(
    p: Polytope,
    n_samples: int = 1_000_000,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte Carlo volume of P + [0,1]^N with its standard error.

    The fattened body is itself a polytope (hull of vertex + corner sums);
    its facet inequalities make membership a vectorized test, so millions
    of samples are cheap.
    """
    if n_samples < 2:
        raise ValidationError("need at least 2 samples")
    if p.N > 12:
        raise CapExceeded("Monte Carlo fattened-body volume capped at N=12")
    corners = np.array(list(itertools.product((0.0, 1.0), repeat=p.N)))
    summed = (p.vertices[:, None, :] + corners[None, :, :]).reshape(-1, p.N)
    hull = ConvexHull(dedup_points(summed))
    A, b = hull.equations[:, :-1], hull.equations[:, -1]
    lo = p.vertices.min(axis=0)
    hi = p.vertices.max(axis=0) + 1.0
    box_vol = float(np.prod(hi - lo))
    rng = np.random.default_rng(seed)
    inside = 0
    remaining = n_samples
    scale_tol = 1e-12 * (1.0 + float(np.abs(summed).max()))
    while remaining > 0:
        batch = min(remaining, 1 << 19)
        x = rng.uniform(lo, hi, size=(batch, p.N))
        inside += int(((x @ A.T + b) <= scale_tol).all(axis=1).sum())
        remaining -= batch
    phat = inside / n_samples
    vol = box_vol * phat
    stderr = box_vol * math.sqrt(max(phat * (1.0 - phat), 0.0) / n_samples)
    return vol, stderr


def wills_identity_check(
    p: Polytope,
    n_samples: int = 1_000_000,
    seed: int = 0,
    cap: int = DEFAULT_CAP,
    force_mc: bool = False,
) -> WillsCheck:
    """Both sides of Vol_N(P + [0,1]^N) = sum_k V_k(P).

    Boxes and coordinate simplices get exact left sides (product formula
    and e_k/k! sum respectively); anything else is estimated by Monte
    Carlo with a reported standard error.
    """
    rhs = float(pairwise_sum(intrinsic_volumes(p, cap).values))
    if not force_mc:
        lengths = _as_box_lengths(p)
        if lengths is not None:
            lhs = 1.0
            for ai in lengths:
                lhs *= ai + 1.0
            return WillsCheck(lhs, rhs, None, "box_exact")
        lengths = _as_coordinate_simplex_lengths(p)
        if lengths is not None:
            e = elementary_symmetric(lengths)
            fact = 1.0
            terms = []
            for k in range(len(e)):
                if k > 1:
                    fact *= k
                terms.append(e[k] / fact)
            return WillsCheck(float(pairwise_sum(terms)), rhs, None, "simplex_exact")
    lhs, stderr = minkowski_cube_volume_mc(p, n_samples, seed)
    return WillsCheck(lhs, rhs, stderr, "monte_carlo")
