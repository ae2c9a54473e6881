"""Command-line front end.

Subcommands expose the library operations with file I/O and CSV/JSON table
output for offline analysis. Exit codes are scriptable: 0 success, 1 parse
or validation failure, 2 numerical failure (similarity matrix not positive
definite, or inequality violations in `check`), 3 enumeration cap exceeded.
Every option can also be set through environment variables prefixed
MAGLAB_, e.g. MAGLAB_SWEEP_BUDGET=128.
"""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import click
import numpy as np

from ._util import dump_json
from .approximation import (
    SequenceSpec,
    divergence_experiment,
    inequality_suite,
    one_point_sweep,
    sample_polytope,
    threshold_crossings,
)
from .errors import CapExceeded, MaglabError, NotPositiveDefinite, ValidationError
from .l1_geometry import (
    DEFAULT_CAP,
    Polytope,
    box_intrinsic_volumes,
    box_magnitude,
    box_polytope,
    convex_magnitude_l1,
    coordinate_simplex_intrinsic_volumes,
    coordinate_simplex_magnitude,
    coordinate_simplex_polytope,
    intrinsic_volumes,
    intrinsic_volumes_mc,
)
from .metric_core import (
    PD_TOL,
    FiniteMetricSpace,
    PointCloud,
    magnitude_finite,
    subspace_from_cloud,
)

EXIT_PARSE = 1
EXIT_NUMERICAL = 2
EXIT_CAP = 3


@dataclass
class RunConfig:
    """Everything a command run depends on, JSON round-trippable."""

    command: str
    input: str | None = None
    output: str | None = None
    metric: str = "l1"
    scheme: str = "farthest_point"
    budget: int = 64
    cap: int = DEFAULT_CAP
    seed: int = 0
    threads: int = 1
    t_list: tuple[float, ...] = ()
    n_list: tuple[int, ...] = ()
    spec_text: str | None = None
    thresholds: tuple[float, ...] = (2.0, 3.0, 5.0)
    count: int = 100
    pd_tol: float = PD_TOL
    check_tol: float = 1e-8

    def __post_init__(self):
        if self.pd_tol <= 0 or self.check_tol <= 0:
            raise ValidationError("tolerances must be positive")
        if self.cap < 1:
            raise ValidationError("enumeration cap must be >= 1")
        if self.threads < 1:
            raise ValidationError("thread count must be >= 1")
        if self.budget < 0:
            raise ValidationError("budget must be >= 0")
        self.t_list = tuple(float(t) for t in self.t_list)
        self.n_list = tuple(int(n) for n in self.n_list)
        self.thresholds = tuple(float(m) for m in self.thresholds)

    def to_json(self) -> str:
        return dump_json(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls(**json.loads(text))


# ---------------------------------------------------------------------------
# Input parsing
# ---------------------------------------------------------------------------

def _read_json(path: Path) -> dict:
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    return data


def load_metric_input(path: str, metric_override: str | None = None,
                      validate_triangle: bool = True) -> FiniteMetricSpace:
    """Distance-matrix CSV/JSON or point-cloud JSON -> finite metric space."""
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"input file not found: {p}")
    if p.suffix.lower() == ".csv":
        try:
            d = np.atleast_2d(np.loadtxt(p, delimiter=",", dtype=float))
        except ValueError as exc:
            raise ValidationError(f"{p}: cannot parse CSV ({exc})") from exc
        return FiniteMetricSpace(d, validate_triangle=validate_triangle)
    data = _read_json(p)
    if "points" in data:
        metric = metric_override or data.get("metric", "l1")
        cloud = PointCloud(np.asarray(data["points"], dtype=float), metric)
        return subspace_from_cloud(cloud)
    if "d" in data:
        d = np.asarray(data["d"], dtype=float)
        if "n" in data and int(data["n"]) != d.shape[0]:
            raise ValidationError(f"{p}: 'n' does not match the matrix size")
        return FiniteMetricSpace(d, validate_triangle=validate_triangle)
    raise ValidationError(f"{p}: expected 'points' or 'd' in the JSON object")


def load_polytope_input(path: str) -> tuple[str, object]:
    """Polytope JSON; returns one of ("vertices", Polytope),
    ("box", lengths), ("coordinate_simplex", lengths)."""
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"input file not found: {p}")
    data = _read_json(p)
    if "vertices" in data:
        return "vertices", Polytope(np.asarray(data["vertices"], dtype=float))
    if "box" in data:
        a = np.asarray(data["box"], dtype=float)
        if a.ndim != 1 or (a < 0).any():
            raise ValidationError(f"{p}: box lengths must be nonnegative")
        return "box", a
    if "coordinate_simplex" in data:
        a = np.asarray(data["coordinate_simplex"], dtype=float)
        if a.ndim != 1 or (a <= 0).any():
            raise ValidationError(f"{p}: simplex lengths must be positive")
        return "coordinate_simplex", a
    raise ValidationError(
        f"{p}: expected 'vertices', 'box' or 'coordinate_simplex'"
    )


def _polytope_of(kind: str, payload) -> Polytope:
    if kind == "vertices":
        return payload
    if kind == "box":
        return box_polytope(payload)
    return coordinate_simplex_polytope(payload)


def _parse_float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise ValidationError(f"cannot parse float list {text!r}") from exc


def _parse_int_list(text: str) -> tuple[int, ...]:
    """Comma-separated ints; 'a:b' expands to the inclusive range."""
    out: list[int] = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            if ":" in tok:
                a, b = tok.split(":")
                out.extend(range(int(a), int(b) + 1))
            else:
                out.append(int(tok))
        except ValueError as exc:
            raise ValidationError(f"cannot parse int list {text!r}") from exc
    return tuple(out)


def _load_sequence_spec(text: str, length: int) -> SequenceSpec:
    if text.startswith("file:"):
        data = _read_json(Path(text[5:]))
        if "terms" not in data:
            raise ValidationError("sequence file needs a 'terms' array")
        return SequenceSpec(
            "explicit",
            length=len(data["terms"]),
            terms=tuple(float(x) for x in data["terms"]),
            divergent_flag=data.get("divergent"),
        )
    return SequenceSpec.parse(text, length)


def _emit(payload: dict, output: str | None) -> None:
    text = dump_json(payload) + "\n"
    if output:
        Path(output).write_text(text)
    else:
        click.echo(text, nl=False)


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guarded(fn):
    """Map library errors onto the documented exit codes."""
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except NotPositiveDefinite as exc:
            _fail(str(exc), EXIT_NUMERICAL)
        except CapExceeded as exc:
            _fail(str(exc), EXIT_CAP)
        except (ValidationError, MaglabError) as exc:
            _fail(str(exc), EXIT_PARSE)

    return wrapper


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

@click.group(context_settings={"auto_envvar_prefix": "MAGLAB"})
def main():
    """Magnitude of finite metric spaces and convex bodies in l1^N."""


@main.command("mag")
@click.option("--input", "input_path", required=True, help="Distance-matrix CSV/JSON or point-cloud JSON.")
@click.option("--output", default=None, help="Write the JSON result here instead of stdout.")
@click.option("--metric", type=click.Choice(["l1", "l2"]), default=None,
              help="Override the metric tag of a point-cloud input.")
@click.option("--validate-triangle/--no-validate-triangle", default=True,
              help="Check the triangle inequality on matrix ingestion.")
@click.option("--pd-tol", type=float, default=PD_TOL, show_default=True)
@_guarded
def cmd_mag(input_path, output, metric, validate_triangle, pd_tol):
    """Magnitude and weighting of a finite metric space."""
    space = load_metric_input(input_path, metric, validate_triangle)
    weighting = magnitude_finite(space, tol=pd_tol)
    _emit(
        {
            "magnitude": weighting.magnitude,
            "weighting": list(weighting.w),
            "min_pivot": weighting.min_pivot,
        },
        output,
    )


@main.command("ivol")
@click.option("--input", "input_path", required=True, help="Polytope JSON.")
@click.option("--output", default=None)
@click.option("--cap", type=int, default=DEFAULT_CAP, show_default=True,
              help="Ambient-dimension cap for exact subset enumeration.")
@click.option("--method", type=click.Choice(["auto", "enumeration", "monte_carlo"]),
              default="auto", show_default=True)
@click.option("--mc-subsets", type=int, default=256, show_default=True,
              help="Subset samples per degree in Monte Carlo mode.")
@click.option("--seed", type=int, default=0, show_default=True)
@_guarded
def cmd_ivol(input_path, output, cap, method, mc_subsets, seed):
    """Intrinsic volume vector of a polytope."""
    kind, payload = load_polytope_input(input_path)
    stderr = None
    if method != "monte_carlo" and kind == "box":
        values, used = box_intrinsic_volumes(payload).values, "fast_path"
    elif method != "monte_carlo" and kind == "coordinate_simplex":
        values, used = coordinate_simplex_intrinsic_volumes(payload).values, "fast_path"
    elif method == "monte_carlo":
        iv, err = intrinsic_volumes_mc(_polytope_of(kind, payload), mc_subsets, seed)
        values, used, stderr = iv.values, "monte_carlo", list(err)
    else:
        values, used = intrinsic_volumes(_polytope_of(kind, payload), cap).values, "enumeration"
    result = {"V": list(values), "exact": used != "monte_carlo", "method": used}
    if stderr is not None:
        result["stderr"] = stderr
    _emit(result, output)


@main.command("convex-mag")
@click.option("--input", "input_path", required=True, help="Polytope JSON.")
@click.option("--output", default=None)
@click.option("--cap", type=int, default=DEFAULT_CAP, show_default=True)
@_guarded
def cmd_convex_mag(input_path, output, cap):
    """Magnitude of a convex body in l1^N via intrinsic volumes."""
    kind, payload = load_polytope_input(input_path)
    if kind == "box":
        a = np.asarray(payload, dtype=float)
        values = box_intrinsic_volumes(a).values
        terms = [values[k] / 2.0 ** k for k in range(len(values))]
        result = {
            "value": box_magnitude(a),
            "exact": bool((a > 0).all()),
            "terms": terms,
        }
    elif kind == "coordinate_simplex":
        values = coordinate_simplex_intrinsic_volumes(payload).values
        terms = [values[k] / 2.0 ** k for k in range(len(values))]
        result = {
            "value": coordinate_simplex_magnitude(payload),
            "exact": True,
            "terms": terms,
        }
    else:
        res = convex_magnitude_l1(payload, cap)
        result = {"value": res.value, "exact": res.exact, "terms": list(res.terms)}
    _emit(result, output)


@main.command("sweep")
@click.option("--input", "input_path", required=True, help="Polytope JSON.")
@click.option("--output", "output_base", required=True,
              help="Base path; writes <base>.csv and <base>.json.")
@click.option("--t-list", default="1,0.1,0.01,0.001", show_default=True,
              help="Comma-separated scales.")
@click.option("--budget", type=int, default=64, show_default=True)
@click.option("--scheme", type=click.Choice(["vertex_grid", "farthest_point", "random_hull"]),
              default="farthest_point", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--cap", type=int, default=DEFAULT_CAP, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@_guarded
def cmd_sweep(input_path, output_base, t_list, budget, scheme, seed, cap, threads):
    """Scale sweep of a body: sample magnitude vs formula vs exp bound."""
    cfg = RunConfig(
        command="sweep", input=input_path, output=output_base,
        scheme=scheme, budget=budget, cap=cap, seed=seed, threads=threads,
        t_list=_parse_float_list(t_list),
    )
    kind, payload = load_polytope_input(cfg.input)
    table = one_point_sweep(
        _polytope_of(kind, payload), cfg.t_list, cfg.budget, cfg.scheme,
        cfg.seed, cfg.cap, cfg.threads,
    )
    problems = table.validate()
    csv_path, json_path = table.write(cfg.output)
    click.echo(f"wrote {csv_path} and {json_path} ({len(table.rows)} rows)")
    if problems:
        _fail("; ".join(problems), EXIT_NUMERICAL)


@main.command("diverge")
@click.option("--spec", "spec_text", default="harmonic", show_default=True,
              help="harmonic | power:p | geometric:r | file:PATH.")
@click.option("--n-list", default="1:100", show_default=True,
              help="Truncation sizes; 'a:b' is an inclusive range.")
@click.option("--output", "output_base", required=True,
              help="Base path; writes <base>.csv and <base>.json.")
@click.option("--budget", type=int, default=0, show_default=True,
              help="Total sample size per row; 0 means vertices only.")
@click.option("--thresholds", default="2,3,5", show_default=True,
              help="Report the first N where half the partial sum reaches each value.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@_guarded
def cmd_diverge(spec_text, n_list, output_base, budget, thresholds, seed, threads):
    """Magnitude growth table for truncated simplices of a sequence."""
    cfg = RunConfig(
        command="diverge", output=output_base, budget=budget, seed=seed,
        threads=threads, n_list=_parse_int_list(n_list), spec_text=spec_text,
        thresholds=_parse_float_list(thresholds),
    )
    if not cfg.n_list:
        raise ValidationError("n-list is empty")
    spec = _load_sequence_spec(cfg.spec_text, max(cfg.n_list))
    table = divergence_experiment(spec, cfg.n_list, cfg.budget, cfg.seed,
                                  cfg.threads)
    crossings = threshold_crossings(spec, cfg.thresholds)
    table.meta["threshold_crossings"] = {
        f"{m:g}": crossings[m] for m in sorted(crossings)
    }
    problems = table.validate()
    csv_path, json_path = table.write(cfg.output)
    click.echo(f"wrote {csv_path} and {json_path} ({len(table.rows)} rows)")
    for m in sorted(crossings):
        n_cross = crossings[m]
        where = f"N = {n_cross}" if n_cross is not None else "not reached"
        click.echo(f"half partial sum reaches {m:g} at {where}")
    if problems:
        _fail("; ".join(problems), EXIT_NUMERICAL)


@main.command("check")
@click.option("--count", type=int, default=100, show_default=True,
              help="Number of random polytopes.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--m-max", type=int, default=8, show_default=True)
@click.option("--n-max", type=int, default=6, show_default=True)
@click.option("--tol", type=float, default=1e-8, show_default=True)
@click.option("--cap", type=int, default=DEFAULT_CAP, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--output", default=None, help="Write the JSON report here.")
@_guarded
def cmd_check(count, seed, m_max, n_max, tol, cap, threads, output):
    """Inequality suite over seeded random polytopes; exit 2 on violations."""
    cfg = RunConfig(command="check", seed=seed, cap=cap, threads=threads,
                    count=count, check_tol=tol)
    report = inequality_suite(cfg.count, cfg.seed, m_max, n_max, cfg.check_tol,
                              cfg.cap, cfg.threads)
    if output:
        Path(output).write_text(dump_json(report.to_json_dict()) + "\n")
    click.echo(
        f"{report.n_checks} checks on {report.n_polytopes} polytopes: "
        f"{len(report.violations)} violations"
    )
    if not report.passed:
        for item in report.violations[:10]:
            click.echo(
                f"  polytope {item['polytope']} {item['check']}: "
                f"{item['lhs']!r} > {item['rhs']!r}",
                err=True,
            )
        sys.exit(EXIT_NUMERICAL)


if __name__ == "__main__":
    main()
