"""Shape-space distance: optimization over rotations and, for closed curves,
over the seam position, on top of a path matcher."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional

import numpy as np

from .curves import Curve, SrvFunction, apply_shift, normalize_scale, resample_uniform, srv
from .dp import DEFAULT_WINDOW, dp_match
from .exact import MatchingPath, evaluate_path, path_distance, precise_match

log = logging.getLogger(__name__)

Matcher = Callable[[SrvFunction, SrvFunction], MatchingPath]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 50
DEFAULT_SEEDS = 8
SEED_RNG = 20210611
KABSCH_SAMPLES = 64


@dataclass
class ShapeDistanceResult:
    """Outcome of a shape distance computation.

    ``rotation`` acts on the second curve and ``shift`` is the seam index of
    the second curve (closed curves only): the matched pair is
    ``c1`` against ``rotation * apply_shift(c2, shift)``.
    """

    distance: float
    rotation: np.ndarray
    shift: Optional[int]
    path: Optional[MatchingPath]
    method: str
    iterations: int
    energy: float
    energies: list = field(default_factory=list)
    seed_index: int = 0
    degenerate: bool = False


def _procrustes(M: np.ndarray) -> tuple[np.ndarray, bool]:
    d = M.shape[0]
    if d == 1:
        return np.ones((1, 1)), False
    U, S, Vt = np.linalg.svd(M)
    D = np.ones(d)
    D[-1] = np.sign(np.linalg.det(U @ Vt)) or 1.0
    O = (U * D) @ Vt
    degenerate = S[d - 2] <= 1e-12 * max(S[0], 1e-300)
    return O, bool(degenerate)


def optimal_rotation(q1: SrvFunction, q2: SrvFunction, path: MatchingPath, current=None) -> np.ndarray:
    """Proper rotation maximizing the bilinear matching energy along ``path``.

    Without ``current`` every crossed cell is weighted by its raw inner
    product.  With ``current`` (the rotation the path was computed for) only
    cells matched diagonally under that rotation enter the cross matrix; the
    others are realized as detours and carry no energy.
    """
    if q1.d == 1:
        return np.ones((1, 1))
    q2c = q2 if current is None else q2.rotated(current)
    ev = evaluate_path(path, q1, q2c)
    w = ev.weights
    if current is not None:
        w = np.where(ev.ip > 0, w, 0.0)
    M = (q1.values[ev.r] * w[:, None]).T @ q2.values[ev.s]
    O, degenerate = _procrustes(M)
    if degenerate:
        log.debug("rank-deficient cross matrix; returning one of several maximizers")
    return O


def random_rotation(d: int, rng) -> np.ndarray:
    """Haar-distributed element of SO(d)."""
    if d == 1:
        return np.ones((1, 1))
    if d == 2:
        a = rng.uniform(0.0, 2 * np.pi)
        return np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def _planar(angle):
    return np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])


def kabsch_seed(c1: Curve, c2: Curve) -> Optional[np.ndarray]:
    """Rotation aligning arc-length resamplings of the two curves."""
    if c1.length() <= 0 or c2.length() <= 0:
        return None
    a = resample_uniform(c1, KABSCH_SAMPLES).points
    b = resample_uniform(c2, KABSCH_SAMPLES).points
    a = a - a.mean(axis=0)
    b = b - b.mean(axis=0)
    return _procrustes(a.T @ b)[0]


def rotation_seeds(d: int, count: int = DEFAULT_SEEDS, extra=None) -> list:
    """Deterministic starting rotations for the alternation."""
    if d == 1:
        return [np.ones((1, 1))]
    if d == 2:
        seeds = [_planar(2 * np.pi * k / count) for k in range(count)]
    else:
        rng = np.random.default_rng(SEED_RNG)
        seeds = [np.eye(d)] + [random_rotation(d, rng) for _ in range(count - 1)]
    if extra is not None:
        seeds.append(extra)
    return seeds


def _alternate(q1, q2, matcher, start, tol, max_iter):
    O = start
    path = matcher(q1, q2.rotated(O))
    energies = [path.energy]
    while len(energies) < max_iter:
        O_new = optimal_rotation(q1, q2, path, current=O)
        p_new = matcher(q1, q2.rotated(O_new))
        gain = p_new.energy - energies[-1]
        if gain > 0:
            O, path = O_new, p_new
            energies.append(p_new.energy)
        if gain < tol:
            break
    return O, path, energies


def _best_over_seeds(q1, q2, matcher, seeds, tol, max_iter):
    best = None
    for idx, seed in enumerate(seeds):
        O, path, energies = _alternate(q1, q2, matcher, seed, tol, max_iter)
        dist = path_distance(path, q1, q2.rotated(O))
        if best is None or dist < best[0]:
            best = (dist, O, path, energies, idx)
    return best


def alternate_rotation_match(c1: Curve, c2: Curve, matcher: Matcher = precise_match,
                             seeds: int = DEFAULT_SEEDS, tol: float = DEFAULT_TOL,
                             max_iter: int = DEFAULT_MAX_ITER, method: str = "exact",
                             kabsch: bool = True) -> ShapeDistanceResult:
    """Block alternation between path matching and Procrustes rotation.

    Runs from every seed rotation and keeps the smallest distance; the
    energy sequence of each run is nondecreasing.
    """
    if c1.closed or c2.closed:
        raise ValueError("alternate_rotation_match works on open curves")
    q1, q2 = srv(c1), srv(c2)
    extra = kabsch_seed(c1, c2) if kabsch and c1.d > 1 else None
    dist, O, path, energies, idx = _best_over_seeds(
        q1, q2, matcher, rotation_seeds(c1.d, seeds, extra), tol, max_iter)
    return ShapeDistanceResult(distance=dist, rotation=O, shift=None, path=path, method=method,
                               iterations=len(energies), energy=energies[-1],
                               energies=energies, seed_index=idx)


def closed_distance(c1: Curve, c2: Curve, matcher: Matcher = precise_match,
                    seeds: int = DEFAULT_SEEDS, tol: float = DEFAULT_TOL,
                    max_iter: int = DEFAULT_MAX_ITER, method: str = "exact",
                    rotation: bool = True, shifts=None, kabsch: bool = True) -> ShapeDistanceResult:
    """Seam search over the vertices of ``c2`` combined with rotation alternation."""
    if not (c1.closed and c2.closed):
        raise ValueError("closed_distance needs two closed curves")
    q1 = srv(c1)
    best = None
    for k in (range(c2.n) if shifts is None else shifts):
        c2k = apply_shift(c2, k)
        q2k = srv(c2k)
        if rotation and c1.d > 1:
            extra = kabsch_seed(c1, c2k) if kabsch else None
            seed_list = rotation_seeds(c1.d, seeds, extra)
        else:
            seed_list = [np.eye(c1.d)]
        dist, O, path, energies, idx = _best_over_seeds(q1, q2k, matcher, seed_list, tol, max_iter)
        if best is None or dist < best.distance:
            best = ShapeDistanceResult(distance=dist, rotation=O, shift=int(k), path=path,
                                       method=method, iterations=len(energies),
                                       energy=energies[-1], energies=energies, seed_index=idx)
    return best


def make_matcher(method: str, window: int = DEFAULT_WINDOW) -> Matcher:
    if method == "exact":
        return precise_match
    if method == "dp":
        if window < 1:
            raise ValueError(f"window must be >= 1, got {window}")
        return partial(dp_match, window=window)
    raise ValueError(f"unknown method {method!r}; expected 'exact' or 'dp'")


def shape_distance(c1: Curve, c2: Curve, method: str = "exact", rotation: bool = True,
                   seeds: int = DEFAULT_SEEDS, window: int = DEFAULT_WINDOW,
                   tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                   scale: bool = False, shifts=None) -> ShapeDistanceResult:
    """Distance between the shape classes of two curves.

    Open curves: rotation alternation (plain matching when ``d == 1`` or
    ``rotation`` is off).  Closed curves: seam search plus alternation.
    """
    if c1.closed != c2.closed:
        raise ValueError("topology mismatch: both curves must be open or both closed")
    if c1.d != c2.d:
        raise ValueError(f"dimension mismatch: {c1.d} vs {c2.d}")
    if seeds < 1:
        raise ValueError("need at least one rotation seed")
    matcher = make_matcher(method, window)
    if scale:
        c1, c2 = normalize_scale(c1), normalize_scale(c2)
    if c1.closed:
        return closed_distance(c1, c2, matcher, seeds, tol, max_iter, method=method,
                               rotation=rotation, shifts=shifts)
    if rotation and c1.d > 1:
        return alternate_rotation_match(c1, c2, matcher, seeds, tol, max_iter, method=method)
    q1, q2 = srv(c1), srv(c2)
    path = matcher(q1, q2)
    return ShapeDistanceResult(distance=path_distance(path, q1, q2), rotation=np.eye(c1.d),
                               shift=None, path=path, method=method, iterations=1,
                               energy=path.energy, energies=[path.energy])
