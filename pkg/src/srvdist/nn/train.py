"""Mini-batch training with shape-preserving augmentation in the loop."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from ..datagen import AugmentOptions, PairDataset, augment_batch, split_dataset
from .model import NetworkParams, init_params, make_arch, mse_loss_and_grads, predict_batch
from .optim import AdamHyper, AdamState, adam_step

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """Training settings.

    ``augment=None`` disables augmentation.  ``lr_decay`` multiplies the
    learning rate after every epoch (1.0 keeps it constant).
    """

    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    augment: Optional[AugmentOptions] = field(default_factory=AugmentOptions)
    seed: int = 0
    holdout_fraction: float = 0.1
    conv_channels: tuple = (32, 64, 128)
    dense_factors: tuple = (64, 32, 16, 8)
    bn_momentum: float = 0.9
    lr_decay: float = 1.0

    def __post_init__(self):
        AdamHyper(self.lr, self.beta1, self.beta2, self.eps)
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if not 0 <= self.holdout_fraction < 1:
            raise ValueError("holdout_fraction must lie in [0, 1)")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["conv_channels"] = list(self.conv_channels)
        out["dense_factors"] = list(self.dense_factors)
        if self.augment is not None:
            out["augment"]["roughness"] = list(self.augment.roughness)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if d.get("augment") is not None:
            aug = dict(d["augment"])
            aug["roughness"] = tuple(aug["roughness"])
            d["augment"] = AugmentOptions(**aug)
        for key in ("conv_channels", "dense_factors"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class TrainHistory:
    train_mse: list = field(default_factory=list)
    test_mse: list = field(default_factory=list)

    @property
    def epochs(self) -> int:
        return len(self.train_mse)


def evaluate_mse(params: NetworkParams, data: PairDataset) -> float:
    if len(data) == 0:
        return float("nan")
    A, B = data.arrays()
    return float(np.mean((predict_batch(params, (A, B)) - data.labels) ** 2))


def train(data: PairDataset, cfg: TrainConfig = TrainConfig(), test: Optional[PairDataset] = None,
          params: Optional[NetworkParams] = None,
          on_epoch: Optional[Callable[[int, float, float], None]] = None):
    """Fit the regressor to the labels of ``data`` by mini-batch MSE with Adam.

    Every batch is freshly augmented (independent random resampling,
    rotations and seam shifts of both curves; labels unchanged).  Without an
    explicit ``test`` set, ``cfg.holdout_fraction`` of the pairs is held out.
    Returns ``(params, history)``; the run is deterministic given ``cfg.seed``.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(cfg.seed)
    if test is None and cfg.holdout_fraction > 0 and len(data) > 1:
        data, test = split_dataset(data, cfg.holdout_fraction, rng)
    d, n = data.meta["d"], data.meta["n"]
    closed = data.meta.get("topology") == "closed"
    if params is None:
        params = init_params(make_arch(n, d, cfg.conv_channels, cfg.dense_factors, cfg.bn_momentum), rng)
    elif (params.n, params.d) != (n, d):
        raise ValueError(f"network expects (n={params.n}, d={params.d}), data has (n={n}, d={d})")
    params.config = cfg.to_dict()
    A, B = data.arrays()
    y = data.labels
    hyper = AdamHyper(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    state = AdamState()
    history = TrainHistory()
    N = len(y)
    for epoch in range(cfg.epochs):
        perm = rng.permutation(N)
        total = 0.0
        for k, start in enumerate(range(0, N, cfg.batch_size)):
            idx = perm[start:start + cfg.batch_size]
            a, b = A[idx], B[idx]
            if cfg.augment is not None:
                a = augment_batch(a, rng, cfg.augment, closed)
                b = augment_batch(b, rng, cfg.augment, closed)
            loss, grads = mse_loss_and_grads(params, a, b, y[idx])
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite training loss at epoch {epoch + 1}, batch {k + 1}; "
                                         f"try a smaller learning rate")
            adam_step(params.tensors, grads, state, hyper)
            total += loss * len(idx)
        history.train_mse.append(total / N)
        history.test_mse.append(evaluate_mse(params, test) if test is not None else float("nan"))
        hyper.lr *= cfg.lr_decay
        log.info("epoch %d: train mse %.5g, test mse %.5g", epoch + 1, history.train_mse[-1],
                 history.test_mse[-1])
        if on_epoch is not None:
            on_epoch(epoch + 1, history.train_mse[-1], history.test_mse[-1])
    return params, history
