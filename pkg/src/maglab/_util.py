"""Small shared helpers: point dedup, deterministic summation, serialization."""

from __future__ import annotations

import numpy as np

#: Points closer than this (in the max norm) are treated as duplicates.
DEDUP_TOL = 1e-12


def dedup_points(points: np.ndarray, tol: float = DEDUP_TOL) -> np.ndarray:
    """Remove duplicate rows within `tol`, keeping first occurrences in order.

    Exact duplicates are removed first (cheap), then near-duplicate pairs
    from a KD-tree range query are merged toward the earlier row.
    """
    from scipy.spatial import cKDTree

    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ValueError("expected a 2-d array of points")
    if pts.shape[0] <= 1:
        return pts.copy()
    _, first_idx = np.unique(pts, axis=0, return_index=True)
    pts = pts[np.sort(first_idx)]
    m = pts.shape[0]
    if m == 1:
        return pts
    pairs = cKDTree(pts).query_pairs(r=tol, p=np.inf, output_type="ndarray")
    if len(pairs) == 0:
        return pts
    keep = np.ones(m, dtype=bool)
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    order = np.argsort(hi, kind="stable")
    for i, j in zip(lo[order], hi[order]):
        if keep[i]:
            keep[j] = False
    return pts[keep]


def pairwise_sum(values) -> float:
    """Sum by recursive halving; deterministic and error-controlled."""
    vals = list(values)
    n = len(vals)
    if n == 0:
        return 0.0
    if n == 1:
        return float(vals[0])
    mid = n // 2
    return pairwise_sum(vals[:mid]) + pairwise_sum(vals[mid:])


def format_float(x: float) -> str:
    """Serialize a float with 17 significant digits (round-trip safe)."""
    return f"{float(x):.17g}"


def dump_json(obj, indent: int = 0) -> str:
    """Serialize a nested dict/list/scalar structure to JSON text.

    Hand-rolled so that every float is written with 17 significant digits
    and output bytes are reproducible. Keys keep insertion order.
    """
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        inner = ",\n".join(
            f'{pad}  "{k}": {dump_json(v, indent + 2)}' for k, v in obj.items()
        )
        return "{\n" + inner + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = [dump_json(v, indent) for v in obj]
        return "[" + ", ".join(items) + "]"
    if isinstance(obj, str):
        return '"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    raise TypeError(f"cannot serialize {type(obj)!r}")
