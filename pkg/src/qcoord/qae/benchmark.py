"""Rectified over-voltage benchmark and the estimator comparison harness."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate, stats

from .distribution import DiscreteDistribution, TargetFunction
from .estimators import (
    EstimateResult,
    QaeConfig,
    QaeEstimator,
    build_oracle,
    mc_estimate,
    mlqae_estimate,
    canonical_qae_estimate,
)

BENCHMARK_COLUMNS = (
    "method", "variant", "n_or_samples", "estimate", "truth", "rel_error_pct",
    "queries", "depth", "sim_runtime_s", "est_quantum_runtime_us",
)


@dataclass(frozen=True)
class RectifiedVoltageTarget:
    """Voltage ``V ~ N(mean, sigma)`` truncated to ``mean +- width*sigma``;
    ``f(v) = min(1, max(v - limit, 0) / scale)``.

    Bins are equal-width in voltage, take their exact truncated-normal mass,
    and evaluate ``f`` at the bin centre.
    """

    mean: float = 1.115
    sigma: float = 0.02
    limit: float = 1.10
    scale: float = 0.08
    width: float = 3.0

    @property
    def support(self) -> tuple[float, float]:
        return self.mean - self.width * self.sigma, self.mean + self.width * self.sigma

    def _law(self):
        return stats.truncnorm(-self.width, self.width, loc=self.mean, scale=self.sigma)

    def f(self, v):
        return np.minimum(1.0, np.maximum(np.asarray(v, dtype=float) - self.limit, 0.0) / self.scale)

    def grid(self, n: int) -> np.ndarray:
        lo, hi = self.support
        edges = np.linspace(lo, hi, (1 << n) + 1)
        return 0.5 * (edges[1:] + edges[:-1])

    def distribution(self, n: int) -> DiscreteDistribution:
        lo, hi = self.support
        cdf = self._law().cdf(np.linspace(lo, hi, (1 << n) + 1))
        return DiscreteDistribution.from_weights(np.diff(cdf))

    def function(self, n: int) -> TargetFunction:
        return TargetFunction(self.f(self.grid(n)))

    def discrete_value(self, n: int) -> float:
        return self.distribution(n).expectation(self.function(n))

    def truth(self) -> float:
        """Continuous ``E[f(V)]`` by adaptive quadrature."""
        lo, hi = self.support
        law = self._law()
        kinks = [k for k in (self.limit, self.limit + self.scale) if lo < k < hi]
        val, _ = integrate.quad(lambda v: float(self.f(v)) * law.pdf(v), lo, hi, points=kinks or None,
                                epsabs=1e-14, epsrel=1e-12, limit=200)
        return float(val)


def benchmark_qae(
    target: RectifiedVoltageTarget,
    n_values: Iterable[int],
    circuits: Sequence[int] = (1, 2),
    config: QaeConfig = QaeConfig(shots_per_power=None),
) -> list[EstimateResult]:
    truth = target.truth()
    out = []
    for n in n_values:
        dist, f = target.distribution(n), target.function(n)
        for c in circuits:
            oracle = build_oracle(dist, f, c)
            if config.method == "canonical":
                out.append(canonical_qae_estimate(oracle, config, truth))
            else:
                out.append(mlqae_estimate(oracle, config, truth))
    return out


def benchmark_mc(
    target: RectifiedVoltageTarget,
    sample_sizes: Iterable[int],
    seed: int = 0,
    resolution: int = 16,
) -> list[EstimateResult]:
    """Monte Carlo on a fine discretization (its bias is negligible at 2**16 bins)."""
    truth = target.truth()
    dist, f = target.distribution(resolution), target.function(resolution)
    return [mc_estimate(dist, f, int(m), seed=seed + i, truth=truth) for i, m in enumerate(sample_sizes)]


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def mc_convergence(
    target: RectifiedVoltageTarget,
    sample_sizes: Sequence[int] = (10**2, 10**3, 10**4, 10**5, 10**6),
    seeds: int = 20,
    resolution: int = 16,
) -> tuple[np.ndarray, float]:
    """Mean absolute error per sample size over ``seeds`` runs, and the log-log slope.

    Errors are measured against the discretized expectation so that only the
    sampling error enters the slope.
    """
    dist, f = target.distribution(resolution), target.function(resolution)
    exact = dist.expectation(f)
    errs = np.array([
        np.mean([abs(mc_estimate(dist, f, m, seed=1000 * s + i).value - exact) for s in range(seeds)])
        for i, m in enumerate(sample_sizes)
    ])
    return errs, loglog_slope(sample_sizes, errs)


def mlqae_convergence(
    target: RectifiedVoltageTarget,
    n: int = 5,
    max_power_exponents: Sequence[int] = (0, 1, 2, 3, 4, 5, 6),
    shots: int = 100,
    seeds: int = 20,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Mean absolute MLQAE error against the circuit's amplitude for growing schedules.

    Hit probabilities come from one statevector pass; only the binomial
    counts are redrawn per seed.  Returns ``(queries, errors, slope)``.
    """
    from .estimators import ml_theta, mlqae_queries
    from .grover import amplified_probabilities

    oracle = build_oracle(target.distribution(n), target.function(n), 2)
    exact = oracle.good_probability()
    top = QaeConfig.schedule(max(max_power_exponents))
    probs = amplified_probabilities(oracle, top)
    queries, errs = [], []
    for e in max_power_exponents:
        ks = QaeConfig.schedule(e)
        p = np.clip([probs[k] for k in ks], 0.0, 1.0)
        err = []
        for s in range(seeds):
            rng = np.random.default_rng(7919 * s + e)
            hits = rng.binomial(shots, p)
            theta = ml_theta(ks, hits, np.full(len(ks), shots))
            err.append(abs(math.sin(theta) ** 2 - exact))
        queries.append(mlqae_queries(ks, shots))
        errs.append(np.mean(err))
    q, er = np.array(queries), np.array(errs)
    return q, er, loglog_slope(q, er)
