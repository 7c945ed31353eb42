"""Synthetic curves, shape-preserving random transformations and labeled pair datasets.

A 1D function modulo reparametrization is determined by the ordered values of
its local extrema.  The generator draws such a sequence and samples a random
reparametrization of its constant-speed representative; resampling keeps every
extremum on a sample ("anchored" resampling) so the shape class, and hence any
distance label, is preserved exactly.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba as nb
import numpy as np

from .curves import Curve, Reparam
from .quotient import random_rotation, shape_distance

log = logging.getLogger(__name__)

WORKERS_ENV = "SRVDIST_WORKERS"

__all__ = [
    "GenParams", "AugmentOptions", "PairRecord", "PairDataset", "draw_extrema",
    "gen_synthetic_function", "split_dataset", "SYNTHETIC_I", "SYNTHETIC_II",
    "random_reparam", "random_rotation", "turning_points", "anchored_resample",
    "resample_reparam", "augment_batch", "augment_curve", "augment_pair", "label_pair", "build_labeled_dataset",
    "random_pairs", "split_curves", "default_workers", "gen_planar_classes", "PLANAR_CLASSES",
]


@dataclass(frozen=True)
class GenParams:
    """Parameters of the random function generator.

    ``mu`` and ``sigma`` describe the (rounded, clamped) normal law of the
    extrema count; ``roughness`` and ``n_knots`` the reparametrization applied
    to the constant-speed representative.
    """

    mu: float
    sigma: float
    n: int
    value_range: tuple = (0.0, 1.0)
    roughness: float = 0.3
    n_knots: int = 10

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if self.n < 3:
            raise ValueError(f"n must be at least 3, got {self.n}")
        lo, hi = self.value_range
        if not hi > lo:
            raise ValueError("value_range must be an increasing interval")
        object.__setattr__(self, "value_range", (float(lo), float(hi)))

    def describe(self) -> dict:
        return {"mu": self.mu, "sigma": self.sigma, "n": self.n,
                "value_range": list(self.value_range), "roughness": self.roughness,
                "n_knots": self.n_knots}


SYNTHETIC_I = dict(mu=18.0, sigma=6.0)
SYNTHETIC_II = dict(mu=30.0, sigma=10.0)


def random_reparam(n_knots: int, roughness: float, rng) -> Reparam:
    """Random element of the generalized reparametrizations.

    Increments over ``n_knots - 1`` equal input intervals are gamma
    distributed with shape ``1 / roughness``; small roughness concentrates at
    the identity, large roughness piles the output mass into a few intervals.
    """
    if n_knots < 2:
        raise ValueError("need at least two knots")
    if not roughness > 0:
        raise ValueError("roughness must be positive")
    out = _reparam_knots(1, n_knots, roughness, rng)[0]
    return Reparam(np.linspace(0.0, 1.0, n_knots), out)


@nb.njit(cache=True)
def _inverse(knots_in, knots_out, a):
    # smallest t with gamma(t) = a
    j = np.searchsorted(knots_out, a)
    if j == 0:
        return knots_in[0]
    if j >= knots_out.size:
        return knots_in[-1]
    lo = knots_out[j - 1]
    span = knots_out[j] - lo
    frac = (a - lo) / span if span > 0 else 0.0
    frac = min(max(frac, 0.0), 1.0)
    return knots_in[j - 1] + frac * (knots_in[j] - knots_in[j - 1])


@nb.njit(cache=True)
def _anchored_positions(anchors, knots_in, knots_out, n):
    k = anchors.size
    t = np.linspace(0.0, 1.0, n)
    s = np.interp(t, knots_in, knots_out)
    idx = np.empty(k, dtype=np.int64)
    for j in range(k):
        idx[j] = int(np.rint(_inverse(knots_in, knots_out, anchors[j]) * (n - 1)))
    idx[0] = 0
    for j in range(1, k):
        idx[j] = max(idx[j], idx[j - 1] + 1)
    idx[k - 1] = n - 1
    for j in range(k - 2, -1, -1):
        idx[j] = min(idx[j], idx[j + 1] - 1)
    pos = np.empty(n)
    for j in range(k - 1):
        a = idx[j]
        b = idx[j + 1]
        span = s[b] - s[a]
        for i in range(a, b + 1):
            frac = (s[i] - s[a]) / span if span > 0 else (i - a) / (b - a)
            pos[i] = anchors[j] + frac * (anchors[j + 1] - anchors[j])
    for j in range(k):
        pos[idx[j]] = anchors[j]
    for i in range(1, n):
        pos[i] = max(pos[i], pos[i - 1])
    return pos


def anchored_positions(anchors: np.ndarray, g: Reparam, n: int) -> np.ndarray:
    """Sample parameters ``g(i/(n-1))`` adjusted so every anchor is hit exactly.

    ``anchors`` are increasing parameters starting at 0 and ending at 1.  Each
    anchor takes the sample closest to it under ``g``; the remaining samples
    between two anchors are mapped affinely into the gap between them, so the
    result is nondecreasing and contains all anchors.
    """
    anchors = np.asarray(anchors, dtype=np.float64)
    if anchors.size > n:
        raise ValueError(f"{anchors.size} anchors do not fit into {n} samples")
    return _anchored_positions(anchors, g.knots_in, g.knots_out, n)


@nb.njit(cache=True)
def _turning_mask(v):
    n = v.size
    mask = np.zeros(n, dtype=np.bool_)
    mask[0] = True
    mask[n - 1] = True
    direction = 0.0
    last = 0
    for i in range(1, n):
        step = np.sign(v[i] - v[i - 1])
        if step == 0:
            continue
        if direction != 0 and step != direction:
            mask[last] = True
        direction = step
        last = i
    return mask


def turning_points(values: np.ndarray) -> np.ndarray:
    """Indices of the endpoints and strict local extrema of a 1D sample sequence.

    A plateau at an extremum is represented by its first sample.
    """
    return np.flatnonzero(_turning_mask(np.asarray(values, dtype=np.float64).ravel()))


@nb.njit(cache=True)
def _resample_batch(pts, knots_in, knots_out, anchored):
    """Rows of ``pts`` (B, m, d), uniformly parametrized, sampled at ``gamma_b``."""
    B, m, d = pts.shape
    params = np.linspace(0.0, 1.0, m)
    out = np.empty_like(pts)
    for b in range(B):
        if anchored:
            mask = _turning_mask(pts[b, :, 0])
            pos = _anchored_positions(params[mask], knots_in, knots_out[b], m)
        else:
            pos = np.interp(params, knots_in, knots_out[b])
        for j in range(d):
            out[b, :, j] = np.interp(pos, params, pts[b, :, j])
    return out


def _reparam_knots(count: int, n_knots: int, roughness, rng) -> np.ndarray:
    """Output knots of ``count`` random reparametrizations (see random_reparam)."""
    shape = 1.0 / np.broadcast_to(np.asarray(roughness, dtype=np.float64), (count,))
    inc = rng.gamma(shape[:, None], 1.0, (count, n_knots - 1))
    tot = inc.sum(axis=1, keepdims=True)
    bad = ~(tot[:, 0] > 0)
    inc[bad] = 1.0
    tot[bad] = n_knots - 1
    out = np.concatenate([np.zeros((count, 1)), np.minimum(np.cumsum(inc, axis=1) / tot, 1.0)], axis=1)
    out[:, -1] = 1.0
    return out


def draw_extrema(p: GenParams, rng) -> np.ndarray:
    """Alternating extrema values (endpoints included) of one random function."""
    k = int(np.clip(np.rint(rng.normal(p.mu, p.sigma)), 2, p.n - 1))
    lo, hi = p.value_range
    vals = np.empty(k)
    vals[0] = rng.uniform(lo, hi)
    up = rng.random() < 0.5
    for j in range(1, k):
        # conditional uniform law: same as redrawing until the order is right
        vals[j] = rng.uniform(vals[j - 1], hi) if up else rng.uniform(lo, vals[j - 1])
        if vals[j] == vals[j - 1]:
            vals[j] = np.nextafter(vals[j - 1], hi if up else lo)
        up = not up
    return vals


def gen_synthetic_function(p: GenParams, rng) -> Curve:
    """Random 1D function with about ``mu`` extrema sampled at ``p.n`` points.

    The drawn extrema are joined at constant speed, the result is composed
    with a random reparametrization and sampled so that every extremum lands
    on a sample.
    """
    vals = draw_extrema(p, rng)
    arc = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(vals)))])
    arc /= arc[-1]
    arc[-1] = 1.0
    g = random_reparam(p.n_knots, p.roughness, rng)
    pos = anchored_positions(arc, g, p.n)
    return Curve(np.interp(pos, arc, vals)[:, None])


PLANAR_CLASSES = ("arc", "s-curve", "hook", "wave")


def _planar_template(kind: str, t: np.ndarray, amp: float, rng) -> np.ndarray:
    if kind == "arc":
        th = np.pi * amp * t
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    if kind == "s-curve":
        return np.stack([t, 0.3 * amp * np.sin(2 * np.pi * t)], axis=1)
    if kind == "hook":
        # straight shaft, then a tight turn over the last third
        th = np.pi * amp * np.clip((t - 2 / 3) * 3, 0, 1)
        shaft = np.minimum(t, 2 / 3)
        r = 0.15
        return np.stack([shaft + r * np.sin(th), r * (1 - np.cos(th))], axis=1)
    if kind == "wave":
        return np.stack([t, 0.08 * amp * np.sin(6 * np.pi * t)], axis=1)
    raise ValueError(f"unknown planar class {kind!r}; expected one of {PLANAR_CLASSES}")


def gen_planar_classes(per_class: int, n: int, rng, classes: Sequence[str] = PLANAR_CLASSES,
                       roughness: float = 0.3, n_knots: int = 10) -> tuple[list, np.ndarray]:
    """Open planar curves from a few shape families, with class indices.

    Each curve is a family template with a random shape amplitude in
    ``[0.8, 1.2]``, sampled at ``n`` points along a random reparametrization,
    rotated, translated and scaled to unit length.
    """
    if per_class < 1 or n < 3:
        raise ValueError("need per_class >= 1 and n >= 3")
    curves, labels = [], []
    for k, kind in enumerate(classes):
        for _ in range(per_class):
            g = random_reparam(n_knots, roughness, rng)
            pts = _planar_template(kind, g(np.linspace(0.0, 1.0, n)), rng.uniform(0.8, 1.2), rng)
            pts = pts @ random_rotation(2, rng).T + rng.normal(0.0, 1.0, 2)
            seg = np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()
            curves.append(Curve(pts / seg))
            labels.append(k)
    return curves, np.array(labels)


def anchored_resample(c: Curve, g: Reparam, anchors: Optional[np.ndarray] = None) -> Curve:
    """``c o g`` resampled at ``c.n`` points, keeping the vertices ``anchors``.

    For closed curves the parameter runs over the unrolled loop and the
    closing point is dropped again.  Without anchors this is plain sampling
    at ``g`` of a uniform grid.
    """
    n = c.n
    pts = c.unrolled()
    params = np.linspace(0.0, 1.0, pts.shape[0])
    m = n + 1 if c.closed else n
    if anchors is None:
        pos = g(np.linspace(0.0, 1.0, m))
    else:
        a = np.union1d(np.asarray(anchors, dtype=np.int64), [0, pts.shape[0] - 1])
        pos = anchored_positions(params[a], g, m)
    new = np.stack([np.interp(pos, params, pts[:, j]) for j in range(c.d)], axis=1)
    return Curve(new[:n] if c.closed else new, closed=c.closed)


def resample_reparam(c: Curve, g: Reparam) -> Curve:
    """Shape-preserving resampling: anchored at turning points for 1D curves."""
    anchors = turning_points(c.points[:, 0]) if c.d == 1 and not c.closed else None
    return anchored_resample(c, g, anchors)


@dataclass(frozen=True)
class AugmentOptions:
    """Random transformation settings for augmentation.

    Roughness is drawn log-uniformly from ``roughness``; ``identity`` disables
    everything (useful for ablations).
    """

    reparam: bool = True
    rotate: bool = True
    shift: bool = True
    roughness: tuple = (0.05, 2.0)
    n_knots: int = 8

    @classmethod
    def identity(cls) -> "AugmentOptions":
        return cls(reparam=False, rotate=False, shift=False)


def augment_batch(points: np.ndarray, rng, opts: AugmentOptions = AugmentOptions(),
                  closed: bool = False) -> np.ndarray:
    """Independent random transformation of every curve in a ``(B, n, d)`` stack.

    1D open curves keep their turning points, so their shape class is
    unchanged; other curves are resampled by plain PL interpolation.
    """
    pts = np.array(points, dtype=np.float64, copy=True)
    B, n, d = pts.shape
    if closed and opts.shift:
        k = rng.integers(n, size=B)
        pts = pts[np.arange(B)[:, None], (np.arange(n)[None, :] + k[:, None]) % n]
    if opts.reparam:
        lo, hi = opts.roughness
        rough = np.exp(rng.uniform(np.log(lo), np.log(hi), B)) if hi > lo else np.full(B, float(lo))
        knots = _reparam_knots(B, opts.n_knots, rough, rng)
        grid = np.linspace(0.0, 1.0, opts.n_knots)
        if closed:
            loop = np.concatenate([pts, pts[:, :1]], axis=1)
            pts = _resample_batch(loop, grid, knots, False)[:, :n]
        else:
            pts = _resample_batch(pts, grid, knots, d == 1)
    if opts.rotate and d > 1:
        rots = np.stack([random_rotation(d, rng) for _ in range(B)])
        pts = np.einsum("bij,bnj->bni", rots, pts)
    return pts


def augment_curve(c: Curve, rng, opts: AugmentOptions = AugmentOptions()) -> Curve:
    return Curve(augment_batch(c.points[None], rng, opts, c.closed)[0], closed=c.closed)


@dataclass(frozen=True)
class PairRecord:
    """Labeled pair; ``ia``/``ib`` index the source curve list (-1 if unknown)."""

    curve_a: Curve
    curve_b: Curve
    label: float
    labeler: str
    ia: int = -1
    ib: int = -1


def augment_pair(r: PairRecord, rng, opts: AugmentOptions = AugmentOptions()) -> PairRecord:
    """Independently transform both curves of a pair; the label is carried over."""
    return PairRecord(augment_curve(r.curve_a, rng, opts), augment_curve(r.curve_b, rng, opts),
                      r.label, r.labeler, r.ia, r.ib)


@dataclass
class PairDataset:
    records: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.records:
            return
        a0 = self.records[0].curve_a
        for r in self.records:
            if not (r.label >= 0 and np.isfinite(r.label)):
                raise ValueError(f"invalid label {r.label}")
            for c in (r.curve_a, r.curve_b):
                if (c.d, c.n, c.closed) != (a0.d, a0.n, a0.closed):
                    raise ValueError("all curves in a dataset must share d, n and topology")
            if r.labeler != self.records[0].labeler:
                raise ValueError("mixed labelers in one dataset")
        self.meta.setdefault("d", a0.d)
        self.meta.setdefault("n", a0.n)
        self.meta.setdefault("topology", a0.topology)
        self.meta.setdefault("labeler", self.records[0].labeler)

    def __len__(self):
        return len(self.records)

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records])

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked curve points ``(N, n, d)`` for the a and b sides."""
        a = np.stack([r.curve_a.points for r in self.records])
        b = np.stack([r.curve_b.points for r in self.records])
        return a, b

    def subset(self, idx) -> "PairDataset":
        return PairDataset([self.records[i] for i in idx], dict(self.meta))


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def label_pair(a: Curve, b: Curve, labeler: str = "exact", **opts) -> float:
    return float(shape_distance(a, b, method=labeler, **opts).distance)


def _label_task(args):
    i, a, b, labeler, opts = args
    try:
        return i, label_pair(a, b, labeler, **opts), None
    except Exception as exc:  # reported and skipped by the caller
        return i, None, f"{type(exc).__name__}: {exc}"


def random_pairs(n_curves: int, count: int, rng) -> list:
    """``count`` distinct unordered index pairs drawn without replacement."""
    total = n_curves * (n_curves - 1) // 2
    if count > total:
        raise ValueError(f"only {total} pairs available, {count} requested")
    iu, ju = np.triu_indices(n_curves, 1)
    pick = np.sort(rng.choice(total, count, replace=False))
    return list(zip(iu[pick].tolist(), ju[pick].tolist()))


def build_labeled_dataset(curves: Sequence[Curve], pairs=None, labeler: str = "exact",
                          workers: Optional[int] = None, meta: Optional[dict] = None,
                          progress=None, known: Optional[dict] = None, on_chunk=None,
                          **opts) -> PairDataset:
    """Label pairs of curves with the chosen matcher.

    ``pairs`` is a list of index pairs into ``curves`` (default: all unordered
    pairs).  Labeling runs in ``workers`` processes with results collected in
    input order, so output never depends on the worker count.  Pairs whose
    labeler raises are logged and skipped.  ``opts`` go to ``shape_distance``
    (``seeds``, ``window``, ``rotation`` ...).  ``progress(done, total)`` is
    called after every chunk.  ``known`` maps pair positions to labels from
    an earlier run (``None`` for a failed pair); those pairs are not
    recomputed.  ``on_chunk(results)`` receives each finished chunk as a list
    of ``(position, label_or_None)``.
    """
    if labeler not in ("exact", "dp"):
        raise ValueError(f"unknown labeler {labeler!r}")
    if pairs is None:
        pairs = [(i, j) for i in range(len(curves)) for j in range(i + 1, len(curves))]
    workers = default_workers() if workers is None else max(1, int(workers))
    known = known or {}
    labels = [known.get(k) for k in range(len(pairs))]
    tasks = [(k, curves[i], curves[j], labeler, opts) for k, (i, j) in enumerate(pairs) if k not in known]
    chunk = 256
    pool = ProcessPoolExecutor(workers) if workers > 1 and len(tasks) > 1 else None
    try:
        for start in range(0, len(tasks), chunk):
            part = tasks[start:start + chunk]
            results = pool.map(_label_task, part, chunksize=8) if pool else map(_label_task, part)
            for k, value, err in results:
                if err is not None:
                    i, j = pairs[k]
                    log.warning("labeling pair (%d, %d) failed: %s; skipped", i, j, err)
                labels[k] = value
            if on_chunk is not None:
                on_chunk([(k, labels[k]) for k, *_ in part])
            if progress is not None:
                progress(len(known) + min(start + chunk, len(tasks)), len(pairs))
    finally:
        if pool is not None:
            pool.shutdown()
    records = [PairRecord(curves[i], curves[j], lab, labeler, i, j)
               for (i, j), lab in zip(pairs, labels) if lab is not None]
    info = dict(meta or {})
    info.update(labeler=labeler, labeler_opts={k: v for k, v in opts.items()},
                skipped=sum(lab is None for lab in labels))
    return PairDataset(records, info)


def split_curves(n_curves: int, test_fraction: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Strict holdout: disjoint train/test curve index sets."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    perm = rng.permutation(n_curves)
    n_test = max(2, int(round(test_fraction * n_curves)))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def split_dataset(ds: PairDataset, test_fraction: float, rng, strict: bool = False):
    """Split a dataset so no test pair appears in training.

    ``strict`` additionally holds out whole curves: a pair goes to the test
    side only if both curves are test curves, to training only if neither
    is; mixed pairs are dropped.
    """
    if not strict:
        perm = rng.permutation(len(ds))
        n_test = max(1, int(round(test_fraction * len(ds))))
        return ds.subset(np.sort(perm[n_test:])), ds.subset(np.sort(perm[:n_test]))
    ids = sorted({r.ia for r in ds.records} | {r.ib for r in ds.records})
    if min(ids) < 0:
        raise ValueError("strict split needs curve indices on every record")
    perm = rng.permutation(ids)
    test_ids = set(perm[:max(2, int(round(test_fraction * len(ids))))].tolist())
    tr = [k for k, r in enumerate(ds.records) if r.ia not in test_ids and r.ib not in test_ids]
    te = [k for k, r in enumerate(ds.records) if r.ia in test_ids and r.ib in test_ids]
    return ds.subset(tr), ds.subset(te)
