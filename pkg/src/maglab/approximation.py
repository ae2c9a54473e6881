"""Finite-sample magnitude bounds and the two headline experiments.

Magnitude of a compact space is the supremum of the magnitudes of its
finite subsets, so every finite sample gives a certified lower bound and
nested samples give nondecreasing chains. This module provides the sample
schemes, the chains, and two sweep drivers: truncated-simplex divergence
tables for sequences with divergent sums, and small-scale sweeps showing
the squeeze 1 <= sample <= formula <= exp bound as a body shrinks to a
point.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._util import dedup_points, format_float, pairwise_sum
from .errors import NotPositiveDefinite, ValidationError
from .l1_geometry import (
    DEFAULT_CAP,
    Polytope,
    convex_magnitude_l1,
    coordinate_simplex_magnitude,
    coordinate_simplex_polytope,
    intrinsic_volumes,
    magnitude_diam_bound,
    mcmullen_bound_check,
    polytope_v1_diam_bound,
    v1_concavity_check,
    v1_intrinsic,
)
from .metric_core import (
    CONDITION_RATIO,
    METRIC_L1,
    PointCloud,
    Weighting,
    distance_matrix,
    magnitude_finite,
    nested_magnitudes,
    space_from_points,
)

SCHEMES = ("vertex_grid", "farthest_point", "random_hull")
#: Relative tie tolerance in the greedy farthest-point rule.
FPS_TIE_TOL = 1e-12


# ---------------------------------------------------------------------------
# Sequence specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SequenceSpec:
    """A positive sequence a_1, a_2, ... truncated at `length`.

    kind is one of "harmonic" (1/i), "power" (i^-p), "geometric" (r^i) or
    "explicit". `divergent` records whether the full series sums to
    infinity (None when unknown, e.g. explicit data without a flag).
    """

    kind: str
    length: int
    exponent: float | None = None
    ratio: float | None = None
    terms: tuple[float, ...] | None = None
    divergent_flag: bool | None = None

    def __post_init__(self):
        if self.length < 1:
            raise ValidationError("sequence length must be >= 1")
        if self.kind == "power" and (self.exponent is None or self.exponent <= 0):
            raise ValidationError("power spec needs a positive exponent")
        if self.kind == "geometric" and (self.ratio is None or self.ratio <= 0):
            raise ValidationError("geometric spec needs a positive ratio")
        if self.kind == "explicit":
            if not self.terms or any(t <= 0 for t in self.terms):
                raise ValidationError("explicit spec needs positive terms")
            object.__setattr__(self, "length", len(self.terms))
        elif self.kind not in ("harmonic", "power", "geometric"):
            raise ValidationError(f"unknown sequence kind {self.kind!r}")

    def values(self, n: int | None = None) -> np.ndarray:
        """First n terms (defaults to the full truncation)."""
        n = self.length if n is None else int(n)
        if n < 1 or n > self.length:
            raise ValidationError(f"need 1 <= n <= {self.length}")
        i = np.arange(1, n + 1, dtype=float)
        if self.kind == "harmonic":
            return 1.0 / i
        if self.kind == "power":
            return i ** (-self.exponent)
        if self.kind == "geometric":
            return self.ratio ** i
        return np.array(self.terms[:n], dtype=float)

    @property
    def divergent(self) -> bool | None:
        if self.kind == "harmonic":
            return True
        if self.kind == "power":
            return self.exponent <= 1.0
        if self.kind == "geometric":
            return self.ratio >= 1.0
        return self.divergent_flag

    def label(self) -> str:
        if self.kind == "power":
            return f"power:{self.exponent:g}"
        if self.kind == "geometric":
            return f"geometric:{self.ratio:g}"
        return self.kind

    @classmethod
    def parse(cls, text: str, length: int) -> "SequenceSpec":
        """Parse CLI syntax: harmonic | power:p | geometric:r."""
        name, _, arg = text.partition(":")
        if name == "harmonic":
            return cls("harmonic", length)
        if name == "power":
            return cls("power", length, exponent=float(arg))
        if name == "geometric":
            return cls("geometric", length, ratio=float(arg))
        raise ValidationError(f"cannot parse sequence spec {text!r}")


def threshold_crossings(
    spec: SequenceSpec,
    thresholds=(2.0, 3.0, 5.0),
    n_max: int = 10_000_000,
) -> dict[float, int | None]:
    """First N at which the analytic lower bound half * sum(a_i) reaches M.

    Computed by direct summation of the sequence, independent of any
    magnitude machinery. None means no crossing within n_max terms (or
    within the explicit data).
    """
    targets = sorted(float(m) for m in thresholds)
    out: dict[float, int | None] = {float(m): None for m in thresholds}
    limit = min(n_max, spec.length) if spec.kind == "explicit" else n_max
    total = 0.0
    n = 0
    ti = 0
    chunk = 1 << 16
    while n < limit and ti < len(targets):
        take = min(chunk, limit - n)
        if spec.kind == "explicit":
            vals = spec.values(n + take)[n:]
        else:
            i = np.arange(n + 1, n + take + 1, dtype=float)
            if spec.kind == "harmonic":
                vals = 1.0 / i
            elif spec.kind == "power":
                vals = i ** (-spec.exponent)
            else:
                vals = spec.ratio ** i
        csum = total + 0.5 * np.cumsum(vals)
        while ti < len(targets):
            hit = np.searchsorted(csum, targets[ti], side="left")
            # cumsum is increasing; searchsorted finds the first index >= target
            if hit < len(csum) and csum[hit] >= targets[ti]:
                out[targets[ti]] = n + int(hit) + 1
                ti += 1
            else:
                break
        total = float(csum[-1])
        n += take
    return out


# ---------------------------------------------------------------------------
# Sweep tables
# ---------------------------------------------------------------------------

CSV_COLUMNS = ("param", "n_points", "sample_magnitude", "formula_value",
               "upper_bound", "flag")


@dataclass
class SweepRow:
    param: float
    n_points: int
    sample_magnitude: float
    formula_value: float
    upper_bound: float
    flag: str = ""
    extras: dict = field(default_factory=dict)


@dataclass
class SweepTable:
    """Rows of (parameter, sample lower bound, formula value, upper bound).

    Serializes to CSV with the fixed column order `param, n_points,
    sample_magnitude, formula_value, upper_bound, flag`; experiment-specific
    extra columns (e.g. the divergence tables' half_sum) are appended after
    `flag`. A JSON twin carries the same rows plus run metadata.
    """

    rows: list[SweepRow]
    meta: dict = field(default_factory=dict)

    @property
    def extra_columns(self) -> tuple[str, ...]:
        return tuple(self.rows[0].extras.keys()) if self.rows else ()

    def validate(self, tol: float = 1e-8) -> list[str]:
        """Violations of 1 <= sample <= formula <= upper within tol."""
        problems = []
        for row in self.rows:
            triple = (row.sample_magnitude, row.formula_value, row.upper_bound)
            if any(math.isnan(x) for x in triple):
                continue
            if row.sample_magnitude < 1.0 - tol:
                problems.append(f"param {row.param:g}: sample below 1")
            if row.sample_magnitude > row.formula_value + tol:
                problems.append(f"param {row.param:g}: sample exceeds formula")
            if row.formula_value > row.upper_bound + tol:
                problems.append(f"param {row.param:g}: formula exceeds upper bound")
        return problems

    def to_csv_text(self) -> str:
        header = ",".join(CSV_COLUMNS + self.extra_columns)
        lines = [header]
        for row in self.rows:
            cells = [
                format_float(row.param),
                str(row.n_points),
                format_float(row.sample_magnitude),
                format_float(row.formula_value),
                format_float(row.upper_bound),
                row.flag,
            ]
            cells += [format_float(row.extras[c]) for c in self.extra_columns]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        cols = CSV_COLUMNS + self.extra_columns
        rows = []
        for row in self.rows:
            rec = {
                "param": row.param,
                "n_points": row.n_points,
                "sample_magnitude": row.sample_magnitude,
                "formula_value": row.formula_value,
                "upper_bound": row.upper_bound,
                "flag": row.flag,
            }
            rec.update(row.extras)
            rows.append(rec)
        return {"meta": dict(self.meta), "columns": list(cols), "rows": rows}

    def write(self, base) -> tuple[Path, Path]:
        """Write CSV and JSON twins next to each other; returns both paths."""
        from ._util import dump_json

        base = Path(base)
        if base.suffix in (".csv", ".json"):
            base = base.with_suffix("")
        csv_path = base.with_suffix(".csv")
        json_path = base.with_suffix(".json")
        csv_path.write_text(self.to_csv_text())
        json_path.write_text(dump_json(self.to_json_dict()) + "\n")
        return csv_path, json_path


# ---------------------------------------------------------------------------
# Sampling schemes
# ---------------------------------------------------------------------------

def _compositions(total: int, parts: int):
    """Weak compositions of `total` into `parts` parts, lexicographic."""
    import itertools

    for dividers in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        comp = []
        for d in dividers:
            comp.append(d - prev - 1)
            prev = d
        comp.append(total + parts - 2 - prev)
        yield comp


def _lattice_points(vertices: np.ndarray, depth: int) -> np.ndarray:
    """Barycentric lattice at one depth: exact duplicates merged, order kept.

    Lattice spacing is far above the dedup tolerance, so exact-row dedup is
    the right (and fast) notion here.
    """
    weights = np.array(list(_compositions(depth, len(vertices))), dtype=float)
    pts = (weights / depth) @ vertices
    _, first = np.unique(pts, axis=0, return_index=True)
    return pts[np.sort(first)]


def _barycentric_lattice(vertices: np.ndarray, min_count: int,
                         max_compositions: int = 2_000_000) -> np.ndarray:
    """Shallowest barycentric lattice with at least min_count distinct points.

    Doubles the subdivision depth until the count is reached, then binary
    searches the depth down; returns the best available lattice if the
    composition count would explode first.
    """
    m = len(vertices)
    if m == 1:
        return vertices.copy()

    def count_at(depth):
        return len(_lattice_points(vertices, depth))

    lo, hi = 0, 1
    while count_at(hi) < min_count:
        lo = hi
        hi *= 2
        if math.comb(hi + m - 1, m - 1) > max_compositions:
            return _lattice_points(vertices, lo)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if count_at(mid) >= min_count:
            hi = mid
        else:
            lo = mid
    return _lattice_points(vertices, hi)


def _greedy_farthest(pool: np.ndarray, n: int) -> np.ndarray:
    """Greedy max-min insertion from pool[0]; near-ties go to the lowest index."""
    sel = [0]
    d = np.abs(pool - pool[0]).sum(axis=1)
    for _ in range(n - 1):
        dmax = float(d.max())
        if dmax <= 0.0:
            raise ValidationError("sample pool exhausted of distinct points")
        i = int(np.argmax(d >= dmax - FPS_TIE_TOL * (1.0 + dmax)))
        sel.append(i)
        d = np.minimum(d, np.abs(pool - pool[i]).sum(axis=1))
    return pool[sel]


def sample_polytope(p: Polytope, scheme: str, n: int, seed: int = 0) -> PointCloud:
    """n points inside the hull of p, under the l1 metric tag.

    vertex_grid: first n points of the barycentric lattice, deepened until
    it holds n distinct points. farthest_point: greedy max-min insertion
    starting from the first vertex, drawn from a lattice pool (vertices
    first) of at least max(4n, 256) candidates. random_hull: seeded uniform
    Dirichlet convex combinations of the vertices.
    """
    if n < 1:
        raise ValidationError("sample size must be >= 1")
    if scheme not in SCHEMES:
        raise ValidationError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    verts = p.vertices
    if scheme == "random_hull":
        rng = np.random.default_rng(seed)
        weights = rng.dirichlet(np.ones(p.m), size=n)
        return PointCloud(weights @ verts, METRIC_L1)
    if scheme == "vertex_grid":
        lattice = _barycentric_lattice(verts, n)
        if len(lattice) < n:
            raise ValidationError(
                f"barycentric lattice holds only {len(lattice)} distinct points"
            )
        return PointCloud(lattice[:n], METRIC_L1)
    # farthest_point: pool has the vertices first so they win ties
    pool = _barycentric_lattice(verts, max(4 * n, 256))
    pool = dedup_points(np.vstack([verts, pool]))
    if len(pool) < n:
        raise ValidationError(f"sample pool holds only {len(pool)} distinct points")
    return PointCloud(_greedy_farthest(pool, n), METRIC_L1)


def magnitude_lower_sequence(
    p: Polytope,
    budget: int,
    scheme: str = "farthest_point",
    seed: int = 0,
) -> list[float]:
    """Magnitudes of the nested prefix chain of a sample of size `budget`.

    Nondecreasing by inclusion monotonicity; every entry is a lower bound
    for the magnitude of the body (hence at most its convex formula value).
    Points whose solve degenerates are skipped and logged.
    """
    cloud = sample_polytope(p, scheme, budget, seed)
    d = distance_matrix(cloud.points, METRIC_L1)
    mags, _ = nested_magnitudes(d)
    return mags


# ---------------------------------------------------------------------------
# Experiment drivers
# ---------------------------------------------------------------------------

def _map_rows(fn, params, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, params))
    return [fn(x) for x in params]


def _sample_weighting(points: np.ndarray) -> tuple[Weighting | None, str]:
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # flags carry the conditioning signal
        try:
            w = magnitude_finite(space_from_points(points, METRIC_L1))
        except NotPositiveDefinite:
            return None, "not_pd"
    return w, ("near_singular" if w.pivot_ratio < CONDITION_RATIO else "")


def divergence_experiment(
    spec: SequenceSpec,
    N_list,
    sample_budget: int = 0,
    seed: int = 0,
    threads: int = 1,
) -> SweepTable:
    """Magnitude growth of truncated simplices conv{a_1 e_1, ..., a_N e_N, 0}.

    Per truncation N the table reports the analytic lower bound
    half * sum(a_i) (the half_sum column), a finite-sample lower bound from
    the vertex set plus optional interior points, the closed-form magnitude
    of the truncation, and the upper bound exp(half * sum(a_i)). Divergent
    sequences make the half_sum column, and with it the magnitude, grow
    without bound.
    """
    N_list = [int(N) for N in N_list]
    if not N_list:
        raise ValidationError("need at least one truncation size")

    def build_row(N: int) -> SweepRow:
        a = spec.values(N)
        half = 0.5 * float(a.sum())
        formula = coordinate_simplex_magnitude(a)
        pts = np.vstack([np.zeros(N), np.diag(a)])
        if sample_budget > len(pts):
            poly = coordinate_simplex_polytope(a)
            extra = sample_polytope(
                poly, "random_hull", sample_budget - len(pts), seed
            ).points
            pts = dedup_points(np.vstack([pts, extra]))
        weighting, flag = _sample_weighting(pts)
        sample = weighting.magnitude if weighting else float("nan")
        return SweepRow(
            param=float(N),
            n_points=len(pts),
            sample_magnitude=sample,
            formula_value=formula,
            upper_bound=float(np.exp(half)),
            flag=flag,
            extras={"half_sum": half},
        )

    rows = _map_rows(build_row, N_list, threads)
    meta = {
        "experiment": "divergence",
        "spec": spec.label(),
        "divergent": spec.divergent,
        "sample_budget": sample_budget,
        "seed": seed,
    }
    return SweepTable(rows, meta)


def one_point_sweep(
    p: Polytope,
    t_list,
    sample_budget: int = 64,
    scheme: str = "farthest_point",
    seed: int = 0,
    cap: int = DEFAULT_CAP,
    threads: int = 1,
) -> SweepTable:
    """Magnitude squeeze for the scaled body tP at each scale t.

    Samples are drawn once on P and rescaled (the schemes commute with
    scaling), the formula column uses degree-k homogeneity of the intrinsic
    volumes, and the upper bound is exp((m-1) t diam) with m the extreme
    vertex count. All three columns tend to 1 as t goes to 0.
    """
    t_list = [float(t) for t in t_list]
    if not t_list or min(t_list) <= 0.0:
        raise ValidationError("scales must be positive")
    base_points = sample_polytope(p, scheme, sample_budget, seed).points
    base_vols = intrinsic_volumes(p, cap).values
    m = p.hull_vertex_count
    diam = p.diameter_l1()

    def build_row(t: float) -> SweepRow:
        weighting, flag = _sample_weighting(base_points * t)
        sample = weighting.magnitude if weighting else float("nan")
        scaled = base_vols * t ** np.arange(len(base_vols))
        formula = pairwise_sum(
            [scaled[k] / 2.0 ** k for k in range(len(scaled))]
        )
        return SweepRow(
            param=t,
            n_points=len(base_points),
            sample_magnitude=sample,
            formula_value=formula,
            upper_bound=float(np.exp((m - 1) * t * diam)),
            flag=flag,
        )

    rows = _map_rows(build_row, t_list, threads)
    meta = {
        "experiment": "one_point_sweep",
        "scheme": scheme,
        "sample_budget": sample_budget,
        "seed": seed,
        "hull_vertex_count": m,
        "diameter_l1": diam,
    }
    return SweepTable(rows, meta)


# ---------------------------------------------------------------------------
# Inequality suite over random polytopes
# ---------------------------------------------------------------------------

@dataclass
class SuiteReport:
    """Outcome of the randomized inequality suite."""

    n_polytopes: int
    n_checks: int
    violations: list[dict]
    seed: int
    tol: float

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json_dict(self) -> dict:
        return {
            "n_polytopes": self.n_polytopes,
            "n_checks": self.n_checks,
            "n_violations": len(self.violations),
            "seed": self.seed,
            "tol": self.tol,
            "violations": self.violations,
        }


def _suite_checks(poly: Polytope, sample_points: np.ndarray, tol: float,
                  cap: int) -> tuple[int, list[dict]]:
    vols = intrinsic_volumes(poly, cap)
    value = pairwise_sum(
        [vols[k] / 2.0 ** k for k in range(len(vols))]
    )
    checks = 0
    bad = []

    def record(name, lhs, rhs):
        nonlocal checks
        checks += 1
        if lhs > rhs + tol:
            bad.append({"check": name, "lhs": lhs, "rhs": rhs})

    for j in range(poly.N + 1):
        for k in range(j, poly.N + 1 - j):
            lhs, rhs = v1_concavity_check(poly, j, k, vols=vols)
            record(f"concavity[{j},{k}]", lhs, rhs)
    for k, (vk, bound) in enumerate(mcmullen_bound_check(poly, vols=vols)):
        record(f"mcmullen[{k}]", vk, bound)
    record("exp_v1_bound", value, float(np.exp(v1_intrinsic(poly) / 2.0)))
    v1, diam_bound = polytope_v1_diam_bound(poly)
    record("v1_diam_bound", v1, diam_bound)
    record("magnitude_diam_bound", value, magnitude_diam_bound(poly))
    weighting, _ = _sample_weighting(sample_points)
    if weighting is not None:
        record("sample_vs_formula", weighting.magnitude, value)
    return checks, bad


def inequality_suite(
    n_polytopes: int = 1000,
    seed: int = 0,
    m_max: int = 8,
    n_max: int = 6,
    tol: float = 1e-8,
    cap: int = DEFAULT_CAP,
    threads: int = 1,
    extra_samples: int = 8,
) -> SuiteReport:
    """Run the full inequality ledger on seeded random polytopes.

    Checks, per polytope: the factorial concavity inequality for all (j, k),
    the V_1^k/k! bounds, the exp(V_1/2) magnitude bound, the vertex-count
    diameter bound on V_1, the exp((m-1) diam) magnitude bound, and that a
    finite sample of the body never exceeds the formula value. All inputs
    are generated up front from one seed, so results are independent of the
    thread count.
    """
    rng = np.random.default_rng(seed)
    jobs = []
    for _ in range(n_polytopes):
        N = int(rng.integers(1, n_max + 1))
        m = int(rng.integers(1, m_max + 1))
        verts = rng.uniform(-1.0, 1.0, size=(m, N))
        child_seed = int(rng.integers(0, 2 ** 63 - 1))
        jobs.append((verts, child_seed))

    def run_one(job):
        verts, child_seed = job
        poly = Polytope(verts)
        pts = poly.vertices
        if extra_samples > 0:
            extra = sample_polytope(poly, "random_hull", extra_samples,
                                    child_seed).points
            pts = dedup_points(np.vstack([pts, extra]))
        return _suite_checks(poly, pts, tol, cap)

    results = _map_rows(run_one, jobs, threads)
    total_checks = 0
    violations: list[dict] = []
    for i, (checks, bad) in enumerate(results):
        total_checks += checks
        for item in bad:
            item = dict(item)
            item["polytope"] = i
            violations.append(item)
    return SuiteReport(n_polytopes, total_checks, violations, seed, tol)


def convex_magnitude_value(p: Polytope, cap: int = DEFAULT_CAP) -> float:
    """Convenience: the convex magnitude formula value of a polytope."""
    return convex_magnitude_l1(p, cap).value
