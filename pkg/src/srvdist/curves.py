"""Piecewise-linear curves, their square-root-velocity (SRV) transform and
the parametrization-dependent L2 distance between SRV representatives.

Parameter convention: an open curve with ``n`` vertices is parametrized on the
uniform grid ``i / (n - 1)``; a closed curve with ``n`` vertices (first vertex
not repeated) on ``i / n``, the last interval being the closing segment.  The
SRV value on each interval folds in the parameter step so that the squared L2
norm of the transform equals the polyline length, independent of ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Curve:
    """Ordered vertex list in R^d with an open/closed flag.

    ``points`` has shape ``(n, d)``; a 1-D array is read as a function
    (``d = 1``).  Closed curves do not repeat their first vertex.
    """

    points: np.ndarray
    closed: bool = False

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise ValueError(f"points must be (n, d), got shape {pts.shape}")
        n = pts.shape[0]
        if n < (3 if self.closed else 2):
            kind = "closed" if self.closed else "open"
            raise ValueError(f"{kind} curve needs more vertices, got {n}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("curve coordinates must be finite")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "closed", bool(self.closed))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def topology(self) -> str:
        return "closed" if self.closed else "open"

    def segments(self) -> np.ndarray:
        """Segment vectors, including the closing segment for closed curves."""
        p = self.points
        if self.closed:
            return np.roll(p, -1, axis=0) - p
        return np.diff(p, axis=0)

    def params(self) -> np.ndarray:
        """Parameter values of the vertices (plus 1.0 for the closing vertex)."""
        m = self.n if self.closed else self.n - 1
        return np.arange(m + 1) / m

    def unrolled(self) -> np.ndarray:
        """Vertices as an open polyline; closed curves repeat the first vertex."""
        if self.closed:
            return np.vstack([self.points, self.points[:1]])
        return self.points

    def length(self) -> float:
        return float(np.linalg.norm(self.segments(), axis=1).sum())

    def evaluate(self, t) -> np.ndarray:
        """Evaluate the curve at parameters ``t`` in [0, 1] by linear interpolation."""
        t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
        grid = self.params()
        pts = self.unrolled()
        return np.stack([np.interp(t, grid, pts[:, k]) for k in range(self.d)], axis=-1)


@dataclass(frozen=True)
class SrvFunction:
    """Piecewise-constant R^d-valued function on [0, 1]."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if b.ndim != 1 or b.size < 2:
            raise ValueError("need at least two breakpoints")
        if b[0] != 0.0 or b[-1] != 1.0:
            raise ValueError("breakpoints must start at 0 and end at 1")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if v.shape[0] != b.size - 1:
            raise ValueError(
                f"expected {b.size - 1} interval values, got {v.shape[0]}"
            )
        object.__setattr__(self, "breakpoints", _frozen(b))
        object.__setattr__(self, "values", _frozen(v))

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def norm2(self) -> float:
        """Squared L2 norm."""
        return float(np.sum(np.sum(self.values**2, axis=1) * self.widths()))

    def rotated(self, rotation) -> "SrvFunction":
        """Pointwise action ``O . q``; the transform commutes with rotations."""
        R = np.asarray(rotation, dtype=np.float64).reshape(self.d, self.d)
        return SrvFunction(self.breakpoints, self.values @ R.T)

    def shifted(self, k: int) -> "SrvFunction":
        """Cyclic relabelling of the intervals (seam shift of a closed curve)."""
        return SrvFunction(self.breakpoints, np.roll(self.values, -k, axis=0))


@dataclass(frozen=True)
class Reparam:
    """Piecewise-linear, nondecreasing, onto map of [0, 1].

    ``gamma(knots_in[i]) = knots_out[i]``; flat pieces are allowed.
    """

    knots_in: np.ndarray
    knots_out: np.ndarray = field(default=None)

    def __post_init__(self):
        ki = np.asarray(self.knots_in, dtype=np.float64)
        ko = ki if self.knots_out is None else np.asarray(self.knots_out, dtype=np.float64)
        if ki.shape != ko.shape or ki.ndim != 1 or ki.size < 2:
            raise ValueError("knots_in and knots_out must be 1-D of equal length >= 2")
        if ki[0] != 0.0 or ki[-1] != 1.0 or np.any(np.diff(ki) <= 0):
            raise ValueError("knots_in must increase strictly from 0 to 1")
        if ko[0] != 0.0 or ko[-1] != 1.0:
            raise ValueError("reparametrization must be onto [0, 1]")
        if np.any(np.diff(ko) < 0):
            raise ValueError("reparametrization must be nondecreasing")
        object.__setattr__(self, "knots_in", _frozen(ki))
        object.__setattr__(self, "knots_out", _frozen(ko))

    @classmethod
    def identity(cls) -> "Reparam":
        return cls(np.array([0.0, 1.0]))

    def __call__(self, t):
        return np.interp(t, self.knots_in, self.knots_out)

    def inverse(self, s):
        """A right inverse: the smallest ``t`` with ``gamma(t) = s``."""
        s = np.asarray(s, dtype=np.float64)
        ko, ki = self.knots_out, self.knots_in
        idx = np.clip(np.searchsorted(ko, s, side="left"), 1, ko.size - 1)
        lo, hi = ko[idx - 1], ko[idx]
        span = hi - lo
        frac = np.where(span > 0, (s - lo) / np.where(span > 0, span, 1.0), 0.0)
        return ki[idx - 1] + np.clip(frac, 0.0, 1.0) * (ki[idx] - ki[idx - 1])

    def compose(self, inner: "Reparam") -> "Reparam":
        """``self o inner`` as a new piecewise-linear map."""
        knots = [inner.knots_in]
        a, b = inner.knots_in, inner.knots_out
        for lo_t, hi_t, lo_s, hi_s in zip(a[:-1], a[1:], b[:-1], b[1:]):
            if hi_s > lo_s:
                inside = self.knots_in[(self.knots_in > lo_s) & (self.knots_in < hi_s)]
                knots.append(lo_t + (inside - lo_s) / (hi_s - lo_s) * (hi_t - lo_t))
        t = np.unique(np.concatenate(knots))
        out = self(inner(t))
        out[0], out[-1] = 0.0, 1.0
        return Reparam(t, np.maximum.accumulate(out))


def normalize_translation(c: Curve) -> Curve:
    """Translate so that the first vertex sits at the origin."""
    return Curve(c.points - c.points[0], c.closed)


def normalize_scale(c: Curve) -> Curve:
    """Rescale to unit polyline length (optional pre-normalization)."""
    L = c.length()
    if L <= 0:
        raise ValueError("degenerate curve")
    return Curve(c.points / L, c.closed)


def _arclength_params(pts: np.ndarray) -> np.ndarray:
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    return s / s[-1]


def resample_uniform(c: Curve, n: int) -> Curve:
    """Resample ``n`` points equally spaced in arc length along the polyline."""
    if n < 2 or (c.closed and n < 3):
        raise ValueError(f"cannot resample to {n} points")
    if c.length() <= 0:
        raise ValueError("degenerate curve")
    pts = c.unrolled()
    s = _arclength_params(pts)
    targets = np.arange(n) / (n if c.closed else n - 1)
    # zero-length segments make s non-strict; interp keeps the first duplicate
    keep = np.concatenate([[True], np.diff(s) > 0])
    s, pts = s[keep], pts[keep]
    new = np.stack([np.interp(targets, s, pts[:, k]) for k in range(c.d)], axis=-1)
    if not c.closed:
        new[0], new[-1] = c.points[0], c.points[-1]
    else:
        new[0] = c.points[0]
    return Curve(new, c.closed)


def srv(c: Curve) -> SrvFunction:
    """SRV transform of a PL curve; degenerate segments map to zero."""
    seg = c.segments()
    m = seg.shape[0]
    h = 1.0 / m
    lens = np.linalg.norm(seg, axis=1)
    scale = np.sqrt(lens * h)
    vals = np.zeros_like(seg)
    nz = lens > 0
    vals[nz] = seg[nz] / scale[nz, None]
    return SrvFunction(np.arange(m + 1) / m, vals)


def srv_inverse(q: SrvFunction, basepoint=None) -> Curve:
    """Open PL curve with vertices at the breakpoints whose transform is ``q``.

    The transform is reproduced exactly when ``q`` lives on a uniform grid;
    otherwise the result is a reparametrization of the same polyline.
    """
    widths = q.widths()
    mags = np.linalg.norm(q.values, axis=1)
    steps = q.values * (mags * widths)[:, None]
    base = np.zeros(q.d) if basepoint is None else np.asarray(basepoint, dtype=np.float64).reshape(q.d)
    pts = np.vstack([base, base + np.cumsum(steps, axis=0)])
    return Curve(pts)


def l2_distance(q1: SrvFunction, q2: SrvFunction) -> float:
    """Exact L2 distance between piecewise-constant functions on a merged grid."""
    if q1.d != q2.d:
        raise ValueError(f"dimension mismatch: {q1.d} vs {q2.d}")
    grid = np.union1d(q1.breakpoints, q2.breakpoints)
    mid = 0.5 * (grid[:-1] + grid[1:])
    i1 = np.searchsorted(q1.breakpoints, mid, side="right") - 1
    i2 = np.searchsorted(q2.breakpoints, mid, side="right") - 1
    diff = q1.values[i1] - q2.values[i2]
    return float(np.sqrt(np.sum(np.sum(diff**2, axis=1) * np.diff(grid))))


def dq_distance(c1: Curve, c2: Curve) -> float:
    """Pullback L2 distance ``||Q(c1) - Q(c2)||`` between parametrized curves."""
    if c1.closed != c2.closed:
        raise ValueError("cannot compare an open curve with a closed one")
    return l2_distance(srv(c1), srv(c2))


def apply_reparam(c: Curve, g: Reparam, at=None) -> Curve:
    """Sample ``t -> c(g(t))`` at the parameters ``at`` (default: ``g.knots_in``).

    The result is read with the uniform parameter convention, so it is an exact
    composition when ``at`` is a uniform grid on whose cells ``c o g`` is linear.
    """
    if c.closed:
        raise ValueError("apply_reparam expects an open curve; shift closed curves first")
    t = g.knots_in if at is None else np.asarray(at, dtype=np.float64)
    return Curve(c.evaluate(g(t)))


def apply_rotation(c: Curve, rotation) -> Curve:
    R = np.asarray(rotation, dtype=np.float64).reshape(c.d, c.d)
    if not (np.allclose(R.T @ R, np.eye(c.d), atol=1e-10) and abs(np.linalg.det(R) - 1) < 1e-10):
        raise ValueError("rotation must be a proper orthogonal matrix")
    return Curve(c.points @ R.T, c.closed)


def apply_shift(c: Curve, k: int) -> Curve:
    """Move the seam of a closed curve to vertex ``k``."""
    if not c.closed:
        raise ValueError("seam shift is only defined for closed curves")
    return Curve(np.roll(c.points, -int(k), axis=0), True)


def refinement_reparam(c: Curve, counts) -> tuple[Curve, Reparam]:
    """Subdivide segment ``r`` of ``c`` into ``counts[r]`` equal pieces.

    Returns the refined curve (same image, new parametrization) and the
    reparametrization ``g`` with ``refined = c o g``.  Because every original
    vertex is kept and subdivisions are equal, the pair is in the same shape
    class and is matched exactly on the breakpoint grid.
    """
    counts = np.asarray(counts, dtype=int)
    seg = c.segments()
    if counts.shape != (seg.shape[0],) or np.any(counts < 1):
        raise ValueError("need one positive subdivision count per segment")
    pts = c.unrolled()
    pieces = [pts[r] + np.outer(np.arange(counts[r]) / counts[r], seg[r]) for r in range(seg.shape[0])]
    new = np.vstack(pieces)
    if not c.closed:
        new = np.vstack([new, pts[-1:]])
    total = counts.sum()
    knots_in = np.concatenate([[0], np.cumsum(counts)]) / total
    return Curve(new, c.closed), Reparam(knots_in, c.params())


def polyline_hausdorff(a: Curve, b: Curve, samples: int = 2000) -> float:
    """Symmetric Hausdorff distance between densely sampled polyline images."""

    def dense(c):
        return resample_uniform(c, samples).points if c.length() > 0 else c.points

    def one_sided(p, curve):
        pts = curve.unrolled()
        a0, d = pts[:-1], np.diff(pts, axis=0)
        dd = np.maximum(np.sum(d * d, axis=1), 1e-300)
        t = np.clip(np.einsum("kij,ij->ki", p[:, None, :] - a0[None], d) / dd, 0, 1)
        proj = a0[None] + t[..., None] * d[None]
        return np.max(np.min(np.linalg.norm(p[:, None, :] - proj, axis=2), axis=1))

    return float(max(one_sided(dense(a), b), one_sided(dense(b), a)))
