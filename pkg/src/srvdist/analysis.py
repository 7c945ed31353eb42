"""Evaluation metrics, classical multidimensional scaling and timing benchmarks."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .curves import Curve, resample_uniform
from .dp import DEFAULT_WINDOW
from .quotient import DEFAULT_SEEDS, shape_distance

log = logging.getLogger(__name__)

MRE_FLOOR = 1e-6
METHODS = ("exact", "dp", "nn")


def _pair_arrays(labels, preds):
    y = np.asarray(labels, dtype=np.float64).ravel()
    p = np.asarray(preds, dtype=np.float64).ravel()
    if y.shape != p.shape:
        raise ValueError(f"length mismatch: {y.size} labels vs {p.size} predictions")
    if y.size == 0:
        raise ValueError("empty input")
    return y, p


def relative_errors(labels, preds, floor: Optional[float] = None):
    """Per-case ``|p - y| / max(y, eps)`` and the mask of labels below ``eps``.

    ``eps`` defaults to ``1e-6 * max(labels)``.
    """
    y, p = _pair_arrays(labels, preds)
    eps = MRE_FLOOR * float(np.max(y)) if floor is None else float(floor)
    eps = eps if eps > 0 else np.finfo(float).tiny
    below = y < eps
    return np.abs(p - y) / np.maximum(y, eps), below


def mre(labels, preds, floor: Optional[float] = None) -> float:
    """Mean relative error; labels under the floor are divided by the floor."""
    return float(np.mean(relative_errors(labels, preds, floor)[0]))


def pearson(labels, preds) -> float:
    """Sample Pearson correlation coefficient."""
    y, p = _pair_arrays(labels, preds)
    if y.size < 2:
        raise ValueError("undefined correlation: need at least two cases")
    dy, dp = y - y.mean(), p - p.mean()
    sy, sp = np.sqrt(np.sum(dy * dy)), np.sqrt(np.sum(dp * dp))
    if sy == 0 or sp == 0:
        raise ValueError("undefined correlation: zero variance")
    return float(np.clip(np.sum(dy * dp) / (sy * sp), -1.0, 1.0))


@dataclass
class EvalReport:
    """Accuracy of predicted distances against reference labels."""

    mre: float
    pearson: float
    n_cases: int
    labels: np.ndarray
    predictions: np.ndarray
    rel_errors: np.ndarray
    below_floor: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def summary(self) -> str:
        out = f"cases {self.n_cases}  MRE {self.mre:.6g}  pearson {self.pearson:.6g}"
        if self.below_floor.size:
            out += f"  ({self.below_floor.size} labels below the MRE floor)"
        return out

    def table(self) -> str:
        rows = ["index\tlabel\tprediction\trel_error"]
        rows += [f"{i}\t{y:.17g}\t{p:.17g}\t{e:.17g}" for i, (y, p, e) in
                 enumerate(zip(self.labels, self.predictions, self.rel_errors))]
        return "\n".join(rows) + "\n"


def evaluate(labels, preds, floor: Optional[float] = None) -> EvalReport:
    y, p = _pair_arrays(labels, preds)
    rel, below = relative_errors(y, p, floor)
    try:
        rho = pearson(y, p)
    except ValueError:
        rho = float("nan")
    return EvalReport(float(np.mean(rel)), rho, int(y.size), y, p, rel, np.flatnonzero(below))


def cmds(D, k: int = 2) -> np.ndarray:
    """Classical multidimensional scaling of a distance matrix into ``k`` dimensions.

    Axes with a negative eigenvalue of the double-centered Gram matrix come
    out as zero columns.  Each axis is signed so that its first nonzero
    coordinate is positive.
    """
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError(f"distance matrix must be square, got shape {D.shape}")
    N = D.shape[0]
    if not 1 <= k <= N:
        raise ValueError(f"target dimension k={k} must lie in [1, {N}]")
    if not np.all(np.isfinite(D)):
        raise ValueError("distance matrix has non-finite entries")
    scale = max(float(np.max(np.abs(D))), 1e-300)
    if np.max(np.abs(D - D.T)) > 1e-9 * scale:
        raise ValueError("distance matrix is not symmetric")
    if np.max(np.abs(np.diag(D))) > 1e-9 * scale or np.min(D) < 0:
        raise ValueError("distance matrix needs a zero diagonal and nonnegative entries")
    D = 0.5 * (D + D.T)
    J = np.eye(N) - 1.0 / N
    Bm = -0.5 * J @ (D * D) @ J
    vals, vecs = np.linalg.eigh(0.5 * (Bm + Bm.T))
    order = np.argsort(vals)[::-1][:k]
    vals, vecs = vals[order], vecs[:, order]
    tol = 1e-12 * max(float(np.max(np.abs(vals))), 1e-300)
    if not np.any(vals > tol):
        raise ValueError("non-embeddable: no positive eigenvalue")
    X = vecs * np.sqrt(np.clip(vals, 0.0, None))
    for j in range(k):
        nz = np.flatnonzero(np.abs(X[:, j]) > 1e-12 * max(np.max(np.abs(X[:, j])), 1e-300))
        if nz.size and X[nz[0], j] < 0:
            X[:, j] = -X[:, j]
    return X


def pairwise_matrix(values, index_pairs, N: int) -> np.ndarray:
    """Symmetric matrix from values on unordered index pairs (zero diagonal)."""
    D = np.zeros((N, N))
    for (i, j), v in zip(index_pairs, values):
        D[i, j] = D[j, i] = v
    return D


def cluster_separation(X, classes) -> tuple[float, float]:
    """Mean Euclidean distance within classes and across classes."""
    X = np.asarray(X, dtype=np.float64)
    classes = np.asarray(classes)
    dist = np.linalg.norm(X[:, None] - X[None], axis=-1)
    iu = np.triu_indices(len(X), 1)
    same = (classes[:, None] == classes[None])[iu]
    d = dist[iu]
    if not same.any() or same.all():
        raise ValueError("need at least two classes with two members")
    return float(d[same].mean()), float(d[~same].mean())


@dataclass
class BenchReport:
    """Median wall-clock milliseconds per distance for each method."""

    rows: list
    config: dict

    def median(self, method: str) -> float:
        for r in self.rows:
            if r["method"] == method:
                return r["median_ms"]
        raise KeyError(method)

    def speedups(self) -> dict:
        """Ratios ``time(slower) / time(faster)`` for every measured method pair."""
        out = {}
        names = [r["method"] for r in self.rows]
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                out[f"{b} vs {a}"] = self.median(a) / self.median(b)
        return out

    def table(self) -> str:
        d, n = self.config["d"], self.config["n"]
        head = "\t".join(["d", "n"] + [r["method"] + " [ms]" for r in self.rows])
        vals = "\t".join([f"{d}D", str(n)] + [f"{r['median_ms']:.4g}" for r in self.rows])
        lines = [head, vals]
        lines += [f"speedup {k}: {v:.4g}x" for k, v in self.speedups().items()]
        lines.append("config: " + ", ".join(f"{k}={v}" for k, v in sorted(self.config.items())))
        return "\n".join(lines) + "\n"

    def tsv(self) -> str:
        lines = ["method\td\tn\tmedian_ms\treps"]
        lines += [f"{r['method']}\t{self.config['d']}\t{self.config['n']}\t{r['median_ms']:.17g}\t{r['reps']}"
                  for r in self.rows]
        return "\n".join(lines) + "\n"


def _reps_for(reps, method):
    r = reps.get(method, 1) if isinstance(reps, dict) else reps
    if r < 1:
        raise ValueError(f"reps for {method} must be positive")
    return int(r)


def bench(methods: Sequence[str], pairs: Sequence[tuple[Curve, Curve]], reps=5, params=None,
          window: int = DEFAULT_WINDOW, rotation: bool = True, seeds: int = DEFAULT_SEEDS) -> BenchReport:
    """Time one distance computation per method; medians over ``reps`` calls.

    Repetition ``r`` uses pair ``r mod len(pairs)``.  ``exact`` and ``dp`` time
    a full shape distance (rotation and seam search included); ``nn`` times a
    single-pair forward pass of ``params``.  Methods run sequentially in the
    order given, each after a small warm-up call.
    """
    from .nn.model import forward

    methods = list(methods)
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise ValueError(f"methods must be a nonempty subset of {METHODS}, got {methods}")
    if not pairs:
        raise ValueError("no pairs to time")
    if "nn" in methods and params is None:
        raise ValueError("timing the nn method needs a trained checkpoint")
    a0, b0 = pairs[0]
    d, n = a0.d, a0.n

    def call(method, a, b):
        if method == "nn":
            return forward(params, a, b)
        return shape_distance(a, b, method=method, rotation=rotation, seeds=seeds, window=window).distance

    rows = []
    for method in methods:
        small = min(n, 8) if method != "nn" else n
        call(method, resample_uniform(a0, small), resample_uniform(b0, small))  # jit / cache warm-up
        times = []
        for r in range(_reps_for(reps, method)):
            a, b = pairs[r % len(pairs)]
            t0 = time.perf_counter()
            call(method, a, b)
            times.append(1e3 * (time.perf_counter() - t0))
        rows.append({"method": method, "median_ms": float(np.median(times)), "reps": len(times),
                     "times_ms": times})
        log.info("bench %s: median %.4g ms over %d reps", method, rows[-1]["median_ms"], len(times))
    config = {"d": d, "n": n, "topology": a0.topology, "window": window, "rotation": rotation,
              "seeds": seeds}
    return BenchReport(rows, config)
