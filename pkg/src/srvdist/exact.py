"""Exact matching of piecewise-linear curves.

The matching energy of two SRV functions is maximized over monotone lattice
paths through the product of their breakpoint grids.  Every straight edge
between grid nodes is admissible; within a cell the two functions are
constant, so an edge crossing cell ``(r, s)`` with extents ``(dx, dy)``
contributes ``max(<q1_r, q2_s>, 0) * sqrt(dx * dy)``.  Negative cells are
crossed by a horizontal-then-vertical detour, which the generalized
(flat-allowed) reparametrizations permit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .curves import Curve, Reparam, SrvFunction, srv


@dataclass(frozen=True)
class MatchingPath:
    """Monotone node path ``(0, 0) -> (m, n)`` and its matching energy."""

    nodes: np.ndarray
    energy: float

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.int64).reshape(-1, 2)
        steps = np.diff(nodes, axis=0)
        if np.any(steps < 0) or np.any(steps.sum(axis=1) == 0):
            raise ValueError("path must be monotone without repeated nodes")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "energy", float(self.energy))

    @classmethod
    def diagonal(cls, m: int, n: int) -> "MatchingPath":
        return cls(np.array([[0, 0], [m, n]]), 0.0)


@dataclass
class PathEvaluation:
    """Per-cell breakdown of a path for a given pair of SRV functions."""

    r: np.ndarray
    s: np.ndarray
    ex: np.ndarray
    ey: np.ndarray
    ip: np.ndarray = field(repr=False)

    @property
    def weights(self):
        return np.sqrt(self.ex * self.ey)

    def energy(self) -> float:
        return float(np.sum(np.maximum(self.ip, 0.0) * self.weights))


def inner_products(q1: SrvFunction, q2: SrvFunction) -> np.ndarray:
    if q1.d != q2.d:
        raise ValueError(f"dimension mismatch: {q1.d} vs {q2.d}")
    return np.ascontiguousarray(q1.values @ q2.values.T)


def edge_weight(q1: SrvFunction, q2: SrvFunction, a, b) -> float:
    """Positive-part matching weight of the straight edge from node ``a`` to ``b``."""
    (i, j), (k, l) = a, b
    if not (0 <= i <= k <= q1.m and 0 <= j <= l <= q2.m) or (i, j) == (k, l):
        raise ValueError(f"edge {a} -> {b} is not monotone on a {q1.m}x{q2.m} grid")
    if k == i or l == j:
        return 0.0
    ip = inner_products(q1, q2)
    return float(_kernels.edge_weight(q1.breakpoints, q2.breakpoints, ip, i, j, k, l, True, False))


def _backtrack(pred: np.ndarray, m: int, n: int) -> np.ndarray:
    nodes = [(m, n)]
    i, j = m, n
    while (i, j) != (0, 0):
        i, j = pred[i, j]
        nodes.append((int(i), int(j)))
    return np.array(nodes[::-1], dtype=np.int64)


@lru_cache(maxsize=32)
def _templates(m: int, n: int):
    return _kernels.uniform_templates(m, n)


def _is_uniform(b: np.ndarray) -> bool:
    return np.array_equal(b, np.arange(b.size) / (b.size - 1))


def run_longest_path(q1: SrvFunction, q2: SrvFunction, window: int = 0,
                     hv_anywhere: bool = True, prune: bool = True) -> MatchingPath:
    if q1.m == 0 or q2.m == 0:
        raise ValueError("empty SRV function")
    ip = inner_products(q1, q2)
    if prune and _is_uniform(q1.breakpoints) and _is_uniform(q2.breakpoints):
        cum1 = np.concatenate([[0.0], np.cumsum(np.sum(q1.values**2, axis=1) / q1.m)])
        cum2 = np.concatenate([[0.0], np.cumsum(np.sum(q2.values**2, axis=1) / q2.m)])
        best, pred = _kernels.longest_path_uniform(ip, *_templates(q1.m, q2.m), cum1, cum2,
                                                   int(window), bool(hv_anywhere))
    else:
        best, pred = _kernels.longest_path(q1.breakpoints, q2.breakpoints, ip,
                                           int(window), bool(hv_anywhere), bool(prune))
    if not np.isfinite(best[q1.m, q2.m]):
        raise RuntimeError("end node unreachable")
    return MatchingPath(_backtrack(pred, q1.m, q2.m), best[q1.m, q2.m])


def precise_match(q1: SrvFunction, q2: SrvFunction, prune: bool = True) -> MatchingPath:
    """Maximum-energy matching path over all straight node-to-node edges."""
    return run_longest_path(q1, q2, window=0, hv_anywhere=True, prune=prune)


def evaluate_path(path: MatchingPath, q1: SrvFunction, q2: SrvFunction) -> PathEvaluation:
    r, s, ex, ey = _kernels.path_cells(q1.breakpoints, q2.breakpoints, path.nodes)
    ip = np.einsum("ij,ij->i", q1.values[r], q2.values[s])
    return PathEvaluation(r, s, ex, ey, ip)


def path_distance(path: MatchingPath, q1: SrvFunction, q2: SrvFunction) -> float:
    """Distance realized by a path, accumulated from nonnegative per-cell residuals.

    Equals ``sqrt(|q1|^2 + |q2|^2 - 2 E)`` but avoids the cancellation of that
    form when the curves are (nearly) equivalent.
    """
    ev = evaluate_path(path, q1, q2)
    a = q1.values[ev.r]
    b = q2.values[ev.s]
    sx, sy = np.sqrt(ev.ex)[:, None], np.sqrt(ev.ey)[:, None]
    matched = np.sum((a * sx - b * sy) ** 2, axis=1)
    detour = np.sum(a * a, axis=1) * ev.ex + np.sum(b * b, axis=1) * ev.ey
    return float(np.sqrt(np.sum(np.where(ev.ip > 0, matched, detour))))


def path_to_reparams(path: MatchingPath, q1: SrvFunction, q2: SrvFunction) -> tuple[Reparam, Reparam]:
    """Generalized reparametrizations ``(g1, g2)`` encoded by a path.

    Cells with a negative inner product become a horizontal-then-vertical
    detour.  The common parameter is the vertex index of the expanded path
    rescaled to [0, 1]; the realized SRV distance does not depend on it.
    """
    ev = evaluate_path(path, q1, q2)
    dxs, dys = [], []
    for ex, ey, v in zip(ev.ex, ev.ey, ev.ip):
        if ex > 0 and ey > 0 and v <= 0:
            dxs += [ex, 0.0]
            dys += [0.0, ey]
        else:
            dxs.append(ex)
            dys.append(ey)
    xs = np.concatenate([[0.0], np.cumsum(dxs)])
    ys = np.concatenate([[0.0], np.cumsum(dys)])
    xs = np.clip(np.maximum.accumulate(xs / xs[-1]), 0.0, 1.0)
    ys = np.clip(np.maximum.accumulate(ys / ys[-1]), 0.0, 1.0)
    xs[-1] = ys[-1] = 1.0
    u = np.arange(xs.size) / (xs.size - 1)
    return Reparam(u, xs), Reparam(u, ys)


def precise_distance(q1: SrvFunction, q2: SrvFunction) -> tuple[float, MatchingPath]:
    path = precise_match(q1, q2)
    return path_distance(path, q1, q2), path


def exact_distance_open(c1: Curve, c2: Curve, with_rotation: bool = True, **opts):
    """Quotient distance between open PL curves with the exact matcher.

    Keyword options are forwarded to the rotation alternation
    (``seeds``, ``tol``, ``max_iter``).
    """
    from .quotient import ShapeDistanceResult, alternate_rotation_match

    if c1.closed or c2.closed:
        raise ValueError("exact_distance_open needs open curves; use closed_distance")
    if with_rotation and c1.d > 1:
        return alternate_rotation_match(c1, c2, precise_match, method="exact", **opts)
    q1, q2 = srv(c1), srv(c2)
    dist, path = precise_distance(q1, q2)
    return ShapeDistanceResult(distance=dist, rotation=np.eye(c1.d), shift=None, path=path,
                               method="exact", iterations=1, energy=path.energy,
                               energies=[path.energy])
