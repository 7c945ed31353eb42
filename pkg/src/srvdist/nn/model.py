"""Siamese convolutional regressor for shape distances.

Both curves go through one shared convolutional stack (conv, batch norm, ReLU,
max-pool per block).  The two feature vectors are concatenated and passed
through four ReLU dense layers and a linear scalar head.  The head is
evaluated on both concatenation orders and averaged, so the prediction is
symmetric in its arguments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import layers as L

FORMAT_VERSION = "srvdist-net/1"


@dataclass
class NetworkParams:
    """Architecture descriptor, parameter tensors and batch-norm running statistics.

    ``tensors`` maps names to arrays: ``conv{i}.W``/``conv{i}.b``,
    ``bn{i}.gamma``/``bn{i}.beta``, ``dense{j}.W``/``dense{j}.b`` and
    ``head.W``/``head.b``.  The convolutional tensors exist once and serve both
    branches.
    """

    arch: dict
    tensors: dict
    bn_stats: dict
    version: str = FORMAT_VERSION
    config: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.arch["n"])

    @property
    def d(self) -> int:
        return int(self.arch["d"])

    def feature_length(self) -> int:
        length = self.n
        for _ in self.arch["conv_channels"]:
            length //= L.POOL
        return length * self.arch["conv_channels"][-1]

    def copy(self) -> "NetworkParams":
        return NetworkParams(dict(self.arch), {k: v.copy() for k, v in self.tensors.items()},
                             {k: v.copy() for k, v in self.bn_stats.items()}, self.version,
                             dict(self.config))


def make_arch(n: int, d: int, conv_channels=(32, 64, 128), dense_factors=(64, 32, 16, 8),
              bn_momentum: float = 0.9) -> dict:
    length = n
    for _ in conv_channels:
        length //= L.POOL
    if length < 1:
        raise ValueError(f"n={n} is too short for {len(conv_channels)} pooling blocks")
    return {"n": int(n), "d": int(d), "kernel": L.KERNEL, "pool": L.POOL,
            "conv_channels": [int(c) for c in conv_channels],
            "dense_widths": [int(f * d) for f in dense_factors], "bn_momentum": float(bn_momentum)}


def init_params(arch: dict, rng) -> NetworkParams:
    """He-normal weights, unit batch-norm scales and a zero output head."""
    t, stats = {}, {}
    c_in = arch["d"]
    for i, c in enumerate(arch["conv_channels"]):
        t[f"conv{i}.W"] = rng.normal(0.0, np.sqrt(2.0 / (L.KERNEL * c_in)), (L.KERNEL, c_in, c))
        t[f"conv{i}.b"] = np.zeros(c)
        t[f"bn{i}.gamma"] = np.ones(c)
        t[f"bn{i}.beta"] = np.zeros(c)
        stats[f"bn{i}.mean"] = np.zeros(c)
        stats[f"bn{i}.var"] = np.ones(c)
        c_in = c
    p = NetworkParams(arch, t, stats)
    f_in = 2 * p.feature_length()
    for j, w in enumerate(arch["dense_widths"]):
        t[f"dense{j}.W"] = rng.normal(0.0, np.sqrt(2.0 / f_in), (f_in, w))
        t[f"dense{j}.b"] = np.zeros(w)
        f_in = w
    t["head.W"] = np.zeros((f_in, 1))
    t["head.b"] = np.zeros(1)
    return p


def _as_batch(x, p: NetworkParams, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[1:] != (p.n, p.d):
        raise ValueError(f"{name}: expected curves of shape (n={p.n}, d={p.d}), got {x.shape[-2:]}")
    # distances ignore translation; feed every curve starting at the origin
    return x - x[:, :1, :]


def forward_batch(p: NetworkParams, A, B, train: bool = False, cache: bool = False):
    """Predictions for the pairs ``(A[k], B[k])``; arrays of shape ``(batch, n, d)``.

    Inference mode uses running batch-norm statistics and clamps at 0.
    Training mode normalizes with the statistics of the stacked batch
    ``[A; B]``, updates the running statistics and returns raw outputs.
    """
    A, B = _as_batch(A, p, "first curve"), _as_batch(B, p, "second curve")
    if A.shape[0] != B.shape[0]:
        raise ValueError("both sides need the same number of curves")
    nb = A.shape[0]
    t = p.tensors
    h = np.concatenate([A, B])
    caches = []
    for i in range(len(p.arch["conv_channels"])):
        h, c1 = L.conv_forward(h, t[f"conv{i}.W"], t[f"conv{i}.b"])
        h, c2 = L.bn_forward(h, t[f"bn{i}.gamma"], t[f"bn{i}.beta"], p.bn_stats[f"bn{i}.mean"],
                             p.bn_stats[f"bn{i}.var"], train, p.arch["bn_momentum"])
        h, c3 = L.relu_forward(h)
        h, c4 = L.pool_forward(h, cache)
        caches.append((c1, c2, c3, c4))
    feat_shape = h.shape
    f = h.reshape(2 * nb, -1)
    fa, fb = f[:nb], f[nb:]
    z = np.concatenate([np.concatenate([fa, fb], 1), np.concatenate([fb, fa], 1)])
    dcaches = []
    for j in range(len(p.arch["dense_widths"])):
        z, c1 = L.dense_forward(z, t[f"dense{j}.W"], t[f"dense{j}.b"])
        z, c2 = L.relu_forward(z)
        dcaches.append((c1, c2))
    out, hc = L.dense_forward(z, t["head.W"], t["head.b"])
    y = 0.5 * (out[:nb, 0] + out[nb:, 0])
    if not train:
        y = np.maximum(y, 0.0)
    if cache:
        return y, (caches, feat_shape, dcaches, hc, nb)
    return y


def backward_batch(p: NetworkParams, dy, cache) -> dict:
    """Gradients of ``sum(dy * y)`` with respect to every tensor."""
    caches, feat_shape, dcaches, hc, nb = cache
    g = {}
    dout = 0.5 * np.concatenate([dy, dy])[:, None]
    dz, g["head.W"], g["head.b"] = L.dense_backward(dout, hc)
    for j in reversed(range(len(dcaches))):
        c1, c2 = dcaches[j]
        dz = L.relu_backward(dz, c2)
        dz, g[f"dense{j}.W"], g[f"dense{j}.b"] = L.dense_backward(dz, c1)
    F = dz.shape[1] // 2
    # z = [[fa, fb], [fb, fa]]
    dfa = dz[:nb, :F] + dz[nb:, F:]
    dfb = dz[:nb, F:] + dz[nb:, :F]
    dh = np.concatenate([dfa, dfb]).reshape(feat_shape)
    for i in reversed(range(len(caches))):
        c1, c2, c3, c4 = caches[i]
        dh = L.pool_backward(dh, c4)
        dh = L.relu_backward(dh, c3)
        dh, g[f"bn{i}.gamma"], g[f"bn{i}.beta"] = L.bn_backward(dh, c2)
        dh, g[f"conv{i}.W"], g[f"conv{i}.b"] = L.conv_backward(dh, c1)
    return g


def mse_loss_and_grads(p: NetworkParams, A, B, labels):
    """Training-mode MSE loss and its gradients on one batch."""
    y, cache = forward_batch(p, A, B, train=True, cache=True)
    r = y - labels
    loss = float(np.mean(r**2))
    return loss, backward_batch(p, 2.0 * r / r.size, cache)


def forward(p: NetworkParams, a, b, mode: str = "infer") -> float:
    """Predicted distance between two curves (``Curve`` objects or point arrays)."""
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    pa = getattr(a, "points", a)
    pb = getattr(b, "points", b)
    return float(forward_batch(p, pa, pb, train=mode == "train")[0])


def predict_batch(p: NetworkParams, pairs, batch_size: int = 64) -> np.ndarray:
    """Inference-mode predictions for a sequence of ``(a, b)`` pairs or two stacked arrays."""
    if isinstance(pairs, tuple) and len(pairs) == 2 and np.ndim(pairs[0]) == 3:
        A, B = pairs
    else:
        A = np.stack([getattr(a, "points", a) for a, _ in pairs])
        B = np.stack([getattr(b, "points", b) for _, b in pairs])
    out = [forward_batch(p, A[k:k + batch_size], B[k:k + batch_size])
           for k in range(0, len(A), batch_size)]
    return np.concatenate(out) if out else np.zeros(0)
