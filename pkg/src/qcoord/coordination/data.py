"""Incentive-response datasets: random bounded prices paired with EC responses."""
from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ec import EcGroundTruth, ec_respond
from .prices import PriceSampler


@dataclass(frozen=True, eq=False)
class ResponseDataset:
    """``prices`` and ``responses`` of shape ``(n_samples, T)``."""

    prices: np.ndarray
    responses: np.ndarray
    ec_type: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.prices.shape != self.responses.shape or self.prices.ndim != 2:
            raise ValueError("prices and responses must share shape (n_samples, T)")

    def __len__(self) -> int:
        return self.prices.shape[0]

    @property
    def horizon(self) -> int:
        return self.prices.shape[1]

    def split(self, train_fraction: float = 0.8) -> tuple["ResponseDataset", "ResponseDataset"]:
        """Leading rows train, trailing rows test (rows are already i.i.d.)."""
        k = int(round(train_fraction * len(self)))
        return (ResponseDataset(self.prices[:k], self.responses[:k], self.ec_type, self.meta),
                ResponseDataset(self.prices[k:], self.responses[k:], self.ec_type, self.meta))

    def to_csv(self) -> str:
        """Comment lines with metadata, then one row per sample: ``p0..p{T-1}, r0..r{T-1}``."""
        T = self.horizon
        buf = io.StringIO()
        buf.write(f"# ec_type={self.ec_type}\n")
        for k, v in sorted(self.meta.items()):
            buf.write(f"# {k}={v}\n")
        buf.write(",".join([f"p{t}" for t in range(T)] + [f"r{t}" for t in range(T)]) + "\n")
        for p, r in zip(self.prices, self.responses):
            buf.write(",".join(repr(float(v)) for v in np.concatenate([p, r])) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ResponseDataset":
        meta, rows, header = {}, [], None
        for line in text.splitlines():
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k] = v
            elif header is None:
                header = line.split(",")
            elif line.strip():
                rows.append([float(v) for v in line.split(",")])
        data = np.array(rows, dtype=float).reshape(len(rows), len(header))
        T = len(header) // 2
        ec_type = meta.pop("ec_type", "")
        return cls(data[:, :T], data[:, T:], ec_type, meta)

    def save(self, path: str | Path) -> str:
        """Write the CSV and return its SHA-256 digest."""
        text = self.to_csv()
        Path(path).write_text(text)
        return hashlib.sha256(text.encode()).hexdigest()

    @classmethod
    def load(cls, path: str | Path) -> "ResponseDataset":
        return cls.from_csv(Path(path).read_text())


def generate_training_data(
    truth: EcGroundTruth,
    n_samples: int,
    sampler: PriceSampler = PriceSampler(),
    seed: int = 0,
) -> ResponseDataset:
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    T = truth.horizon
    prices = np.array([sampler.sample(rng, T) for _ in range(n_samples)])
    responses = np.array([ec_respond(truth, p) for p in prices])
    return ResponseDataset(prices, responses, truth.ec_type, {"seed": seed, "n_samples": n_samples})
