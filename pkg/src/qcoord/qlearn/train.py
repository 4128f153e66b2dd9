"""Minibatch Adam training of the quantum surrogate on normalized data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..coordination.data import ResponseDataset
from .model import QTcnLstmModel, Scaling


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 0.01
    epochs: int = 50
    batch_size: int = 32
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    noise_level: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.noise_level <= 1.0:
            raise ValueError("noise_level must lie in [0, 1]")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


def fit_scaling(data: ResponseDataset, price_lo: float = 0.04, price_hi: float = 0.24) -> Scaling:
    """Price bounds plus the dataset's response range (unit width if the responses are constant)."""
    lo, hi = float(data.responses.min()), float(data.responses.max())
    return Scaling(price_lo, price_hi, lo, hi if hi - lo > 1e-12 else lo + 1.0)


def normalized(model: QTcnLstmModel, data: ResponseDataset) -> tuple[np.ndarray, np.ndarray]:
    return model.scaling.price(data.prices), model.scaling.response(data.responses)


def evaluate_mse(model: QTcnLstmModel, data: ResponseDataset, noise_level: float = 0.0, seed: int = 0,
                 batch: int = 256) -> float:
    """Mean squared error on normalized responses; with noise, one readout trajectory per sample."""
    x, z = normalized(model, data)
    rng = np.random.default_rng(seed) if noise_level > 0 else None
    sq = 0.0
    for s in range(0, len(x), batch):
        out = model.predict_normalized(x[s:s + batch], rng, noise_level)
        sq += float(((out - z[s:s + batch]) ** 2).sum())
    return sq / z.size


def train(model: QTcnLstmModel, data: ResponseDataset, config: TrainingConfig = TrainingConfig(),
          test: ResponseDataset | None = None, init_time_bias: bool = True, log=None):
    """Train a copy of ``model``; returns ``(trained model, trace)``.

    ``trace`` holds one row per epoch: ``(epoch, train_loss, test_mse)``
    where ``train_loss`` is the mean minibatch loss seen during the epoch
    and ``test_mse`` is NaN without a test set.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    if data.horizon != model.horizon:
        raise ValueError(f"dataset horizon {data.horizon} differs from model horizon {model.horizon}")
    model = model.copy()
    x, z = normalized(model, data)
    if init_time_bias and model.params["time_bias"].size:
        model.params["time_bias"] = z.mean(axis=0) - model.params["head_b"][0]

    rng = np.random.default_rng(config.seed)
    noise_rng = np.random.default_rng([config.seed, 1]) if config.noise_level > 0 else None
    theta = torch.from_numpy(model.flat()).requires_grad_(False)
    theta.grad = torch.zeros_like(theta)
    opt = torch.optim.Adam([theta], lr=config.learning_rate, betas=config.betas, eps=config.eps)

    trace = []
    n = len(x)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        losses = []
        for s in range(0, n, config.batch_size):
            idx = order[s:s + config.batch_size]
            model.set_flat(theta.detach().numpy())
            loss, grad = model.loss_and_grad(x[idx], z[idx], noise_rng, config.noise_level)
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise TrainingError(f"non-finite loss or gradient at epoch {epoch}, batch starting {s}")
            theta.grad.copy_(torch.from_numpy(grad))
            opt.step()
            losses.append(loss * len(idx))
        model.set_flat(theta.detach().numpy())
        test_mse = evaluate_mse(model, test, config.noise_level, config.seed) if test is not None else float("nan")
        row = (epoch, sum(losses) / n, test_mse)
        trace.append(row)
        if log is not None:
            log(row)
    return model, np.array(trace)
