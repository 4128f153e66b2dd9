"""Bounded, mean-constrained EC price signals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..grid.profiles import hours

MEAN_TOL = 1e-9


@dataclass(frozen=True)
class PriceBounds:
    """Per-step bounds and the required mean (module defaults, scaled currency)."""

    lower: float | np.ndarray = 0.04
    upper: float | np.ndarray = 0.24
    target_mean: float = 0.12

    def arrays(self, T: int) -> tuple[np.ndarray, np.ndarray]:
        lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (T,)).copy()
        hi = np.broadcast_to(np.asarray(self.upper, dtype=float), (T,)).copy()
        if np.any(lo > hi):
            raise ValueError("lower bound above upper bound")
        return lo, hi

    def normalize(self, prices: np.ndarray) -> np.ndarray:
        """Map prices to ``[-1, 1]`` using the bounds."""
        p = np.asarray(prices, dtype=float)
        lo, hi = self.arrays(p.shape[-1])
        return 2.0 * (p - lo) / (hi - lo) - 1.0

    def denormalize_scale(self, T: int) -> np.ndarray:
        """``d(normalized) / d(price)`` per step."""
        lo, hi = self.arrays(T)
        return 2.0 / (hi - lo)


@dataclass(frozen=True)
class PriceSignal:
    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    target_mean: float

    def feasible(self, tol: float = MEAN_TOL) -> bool:
        v = self.values
        return bool(np.all(v >= self.lower) and np.all(v <= self.upper) and abs(v.mean() - self.target_mean) <= tol)


def project_prices(raw, bounds: PriceBounds = PriceBounds()) -> PriceSignal:
    """Clip-and-shift projection onto the box and the mean constraint.

    The fixed point of alternating clip and mean-shift from ``raw`` has the
    form ``clip(raw + mu)``; ``mu`` is found by bisection, which reaches it
    in one pass where plain alternation can stall with many clipped steps.
    The last operation is a clip, so the bounds hold exactly.
    """
    x = np.asarray(raw, dtype=float)
    if x.ndim != 1 or not np.all(np.isfinite(x)):
        raise ValueError("raw prices must be a finite vector")
    lo, hi = bounds.arrays(x.size)
    m = bounds.target_mean
    if not lo.mean() - MEAN_TOL <= m <= hi.mean() + MEAN_TOL:
        raise ValueError(f"target mean {m} infeasible for bounds with means [{lo.mean()}, {hi.mean()}]")
    if np.all(x >= lo) and np.all(x <= hi) and abs(x.mean() - m) <= MEAN_TOL:
        return PriceSignal(x.copy(), lo, hi, m)
    a, b = float((lo - x).min()), float((hi - x).max())
    for _ in range(300):
        mu = 0.5 * (a + b)
        if np.clip(x + mu, lo, hi).mean() < m:
            a = mu
        else:
            b = mu
        if b - a <= 1e-16:
            break
    # pick the end whose mean is closest; the mean is continuous in mu
    cands = [np.clip(x + a, lo, hi), np.clip(x + b, lo, hi)]
    out = min(cands, key=lambda c: abs(c.mean() - m))
    if abs(out.mean() - m) > MEAN_TOL:
        free = (out > lo) & (out < hi)
        out[free] += (m - out.mean()) * x.size / free.sum()
        out = np.clip(out, lo, hi)
    return PriceSignal(out, lo, hi, m)


@dataclass(frozen=True)
class PriceSampler:
    """Random smooth price curves: a few daily harmonics plus noise, then projected."""

    bounds: PriceBounds = PriceBounds()
    harmonics: int = 3
    amplitude: float = 0.08
    noise: float = 0.003

    def sample(self, rng: np.random.Generator, T: int = 96) -> np.ndarray:
        h = hours(T)
        raw = np.full(T, self.bounds.target_mean)
        for k in range(1, self.harmonics + 1):
            amp = rng.uniform(0, self.amplitude) / k
            raw += amp * np.sin(2 * np.pi * k * h / 24 + rng.uniform(0, 2 * np.pi))
        raw += rng.normal(0, self.noise, T)
        return project_prices(raw, self.bounds).values
