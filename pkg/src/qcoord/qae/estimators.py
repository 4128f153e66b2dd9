"""Amplitude estimation (maximum-likelihood and canonical) and the Monte Carlo baseline."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import xlogy

from ..statevector import Circuit, Gate, StateVector, apply_circuit_to_array, estimate_runtime
from .distribution import DiscreteDistribution, TargetFunction, prepare_distribution
from .grover import amplified_depth, amplified_probabilities, build_grover
from .oracles import RotationOracle, build_circuit1, build_circuit2, fit_linear_approx

MAX_SIM_QUBITS = 22
GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class QaeConfig:
    """Estimator settings.

    ``shots_per_power=None`` replaces sampled hit counts by the exact
    probabilities from the statevector (each power then counts as a single
    query of weight ``2k+1``).
    """

    method: str = "mlqae"
    grover_powers: tuple[int, ...] = (0, 1, 2, 4, 8)
    shots_per_power: int | None = 100
    phase_qubits: int = 5
    seed: int = 0
    grid_points: int = 10_000
    refine_steps: int = 20

    def __post_init__(self) -> None:
        if self.method not in ("mlqae", "canonical"):
            raise ValueError(f"unknown method {self.method!r}")
        ks = tuple(int(k) for k in self.grover_powers)
        if not ks:
            raise ValueError("Grover schedule is empty")
        if ks[0] < 0 or any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("Grover schedule must be non-negative and strictly increasing")
        object.__setattr__(self, "grover_powers", ks)
        if self.shots_per_power is not None and self.shots_per_power < 1:
            raise ValueError("shots_per_power must be >= 1 or None")
        if self.phase_qubits < 1:
            raise ValueError("phase_qubits must be >= 1")

    @staticmethod
    def schedule(m: int) -> tuple[int, ...]:
        """``0, 1, 2, 4, ..., 2**(m-1)``."""
        return (0,) + tuple(1 << j for j in range(m))


@dataclass
class EstimateResult:
    value: float
    oracle_queries: int
    circuit_depth: int
    relative_error_pct: float | None = None
    truth: float | None = None
    method: str = ""
    variant: str = ""
    n_or_samples: int = 0
    sim_runtime_s: float = 0.0
    est_quantum_runtime_us: float = 0.0
    details: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not -1e-12 <= self.value <= 1 + 1e-12:
            raise ValueError(f"estimate {self.value} outside [0, 1]")
        self.value = float(min(max(self.value, 0.0), 1.0))
        if self.truth is not None and self.relative_error_pct is None:
            self.relative_error_pct = relative_error_pct(self.value, self.truth)

    def row(self) -> dict:
        return {
            "method": self.method,
            "variant": self.variant,
            "n_or_samples": self.n_or_samples,
            "estimate": self.value,
            "truth": self.truth,
            "rel_error_pct": self.relative_error_pct,
            "queries": self.oracle_queries,
            "depth": self.circuit_depth,
            "sim_runtime_s": self.sim_runtime_s,
            "est_quantum_runtime_us": self.est_quantum_runtime_us,
        }


def relative_error_pct(estimate: float, truth: float) -> float:
    if truth == 0:
        return 0.0 if estimate == 0 else math.inf
    return abs(estimate - truth) / abs(truth) * 100.0


# --- maximum likelihood --------------------------------------------------------

def _loglik(theta: np.ndarray, ks: np.ndarray, hits: np.ndarray, shots: np.ndarray) -> np.ndarray:
    ang = np.multiply.outer(np.atleast_1d(theta), 2 * ks + 1)
    s2 = np.sin(ang) ** 2
    ll = xlogy(hits, s2) + xlogy(shots - hits, 1.0 - s2)
    return ll.sum(axis=-1)


def ml_theta(
    powers: Sequence[int],
    hits: Sequence[float],
    shots: Sequence[float],
    grid_points: int = 10_000,
    refine_steps: int = 20,
) -> float:
    """Maximize the joint binomial likelihood over ``theta in [0, pi/2]``.

    Dense grid first, then golden-section search on the two neighbouring
    grid cells.  ``hits``/``shots`` may be fractional (exact-probability mode).
    """
    ks = np.asarray(powers, dtype=float)
    h = np.asarray(hits, dtype=float)
    n = np.asarray(shots, dtype=float)
    if ks.size == 0:
        raise ValueError("empty Grover schedule")
    if ks.shape != h.shape or h.shape != n.shape:
        raise ValueError("powers, hits and shots must align")
    if np.any(h < 0) or np.any(h > n):
        raise ValueError("hit counts must lie in [0, shots]")
    grid = np.linspace(0.0, math.pi / 2, grid_points)
    ll = _loglik(grid, ks, h, n)
    best = int(np.argmax(ll))
    if not np.isfinite(ll[best]):
        raise ValueError("likelihood vanishes on the whole grid; inconsistent counts")
    step = grid[1] - grid[0]
    lo, hi = max(grid[best] - step, 0.0), min(grid[best] + step, math.pi / 2)

    def f(t: float) -> float:
        return float(_loglik(t, ks, h, n)[0])

    x1, x2 = hi - GOLDEN * (hi - lo), lo + GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(refine_steps):
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = f(x2)
    cand = [(ll[best], grid[best]), (f1, x1), (f2, x2)]
    return float(max(cand, key=lambda c: c[0])[1])


def mlqae_queries(powers: Sequence[int], shots: int | None) -> int:
    return sum((shots or 1) * (2 * int(k) + 1) for k in powers)


def mlqae_estimate(oracle: RotationOracle, config: QaeConfig = QaeConfig(), truth: float | None = None) -> EstimateResult:
    """Maximum-likelihood amplitude estimation on the oracle's ancilla."""
    if config.method != "mlqae":
        raise ValueError("config.method must be 'mlqae'")
    t0 = time.perf_counter()
    grover = build_grover(oracle)
    ks = config.grover_powers
    probs = amplified_probabilities(oracle, ks, grover)
    p = np.clip(np.array([probs[k] for k in ks]), 0.0, 1.0)
    if config.shots_per_power is None:
        hits, shots = p, np.ones_like(p)
    else:
        rng = np.random.default_rng(config.seed)
        hits = rng.binomial(config.shots_per_power, p).astype(float)
        shots = np.full_like(p, config.shots_per_power)
    theta = ml_theta(ks, hits, shots, config.grid_points, config.refine_steps)
    elapsed = time.perf_counter() - t0
    n_shots = config.shots_per_power or 1
    depths = {k: amplified_depth(oracle, k, grover) for k in ks}
    qruntime = sum(n_shots * estimate_runtime(d) for d in depths.values())
    return EstimateResult(
        value=math.sin(theta) ** 2,
        oracle_queries=mlqae_queries(ks, config.shots_per_power),
        circuit_depth=max(depths.values()),
        truth=truth,
        method="mlqae",
        variant=oracle.label,
        n_or_samples=oracle.n,
        sim_runtime_s=elapsed,
        est_quantum_runtime_us=qruntime * 1e6,
        details={"theta": theta, "powers": list(ks), "p_hit": p.tolist(), "hits": hits.tolist()},
    )


# --- canonical phase estimation ------------------------------------------------

def qft(qubits: Sequence[int], n_qubits: int) -> Circuit:
    """``|y> -> M^{-1/2} sum_z exp(2 pi i y z / M) |z>`` on ``qubits`` (bit j = qubits[j])."""
    m = len(qubits)
    c = Circuit(n_qubits)
    for j in reversed(range(m)):
        c.h(qubits[j])
        for k in reversed(range(j)):
            c.append(Gate("P", qubits[j], ((qubits[k], 1),), math.pi / (1 << (j - k))))
    for i in range(m // 2):
        a, b = qubits[i], qubits[m - 1 - i]
        c.cnot(a, b).cnot(b, a).cnot(a, b)
    return c


def phase_estimation_circuit(oracle: RotationOracle, m: int) -> Circuit:
    w = oracle.n_qubits
    total = w + m
    reg = [w + j for j in range(m)]
    grover = build_grover(oracle).widened(total)
    c = oracle.circuit.widened(total)
    for q in reg:
        c.h(q)
    for j, q in enumerate(reg):
        cq = grover.controlled(q, 1, total)
        for _ in range(1 << j):
            c.extend(cq)
    c.extend(qft(reg, total).inverse())
    return c


def canonical_qae_estimate(oracle: RotationOracle, config: QaeConfig = QaeConfig(method="canonical"), truth: float | None = None) -> EstimateResult:
    """Textbook phase estimation of ``Q``; ``a = sin^2(pi y / 2^m)`` at the modal ``y``."""
    if config.method != "canonical":
        raise ValueError("config.method must be 'canonical'")
    m = config.phase_qubits
    w = oracle.n_qubits
    if w + m > MAX_SIM_QUBITS:
        raise ValueError(f"{m} phase qubits exceed the {MAX_SIM_QUBITS}-qubit simulator budget")
    t0 = time.perf_counter()
    circ = phase_estimation_circuit(oracle, m)
    psi = apply_circuit_to_array(StateVector.zero(w + m).amplitudes, circ)
    py = (np.abs(psi) ** 2).reshape(1 << m, 1 << w).sum(axis=1)
    if config.shots_per_power is None:
        y = int(np.argmax(py))
    else:
        rng = np.random.default_rng(config.seed)
        counts = rng.multinomial(config.shots_per_power, py / py.sum())
        y = int(np.argmax(counts))
    elapsed = time.perf_counter() - t0
    shots = config.shots_per_power or 1
    return EstimateResult(
        value=math.sin(math.pi * y / (1 << m)) ** 2,
        oracle_queries=shots * ((1 << m) - 1),
        circuit_depth=circ.depth,
        truth=truth,
        method="canonical",
        variant=oracle.label,
        n_or_samples=oracle.n,
        sim_runtime_s=elapsed,
        est_quantum_runtime_us=shots * estimate_runtime(circ) * 1e6,
        details={"y": y, "phase_probs": py.tolist()},
    )


# --- Monte Carlo ---------------------------------------------------------------

def mc_estimate(
    dist: DiscreteDistribution,
    f: TargetFunction,
    samples: int,
    seed: int | np.random.Generator | None = 0,
    truth: float | None = None,
) -> EstimateResult:
    """Average of ``f(i)`` over ``samples`` draws ``i ~ dist``.

    Draws are tallied per index with one multinomial call, which has the same
    law as drawing them one by one.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if len(f) != dist.size:
        raise ValueError("target and distribution sizes differ")
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(samples, dist.masses)
    value = float(counts @ f.values) / samples
    return EstimateResult(
        value=value,
        oracle_queries=int(samples),
        circuit_depth=0,
        truth=truth,
        method="mc",
        variant="sampling",
        n_or_samples=int(samples),
        sim_runtime_s=time.perf_counter() - t0,
    )


# --- dispatch --------------------------------------------------------------------

@dataclass(frozen=True)
class MonteCarloEstimator:
    """``samples=None`` gives the exact weighted average."""

    samples: int | None = None
    seed: int = 0


@dataclass(frozen=True)
class QaeEstimator:
    circuit: int = 2
    n: int = 7
    config: QaeConfig = QaeConfig()

    def __post_init__(self) -> None:
        if self.circuit not in (1, 2):
            raise ValueError("circuit must be 1 or 2")


def build_oracle(dist: DiscreteDistribution, f: TargetFunction, circuit: int) -> RotationOracle:
    if circuit not in (1, 2):
        raise ValueError(f"circuit must be 1 or 2, got {circuit}")
    prep = prepare_distribution(dist)
    if circuit == 1:
        a, b = fit_linear_approx(f, dist.n_qubits)
        return build_circuit1(prep, a, b)
    return build_circuit2(prep, f)


def estimate_expectation(
    dist: DiscreteDistribution,
    f: TargetFunction,
    estimator: MonteCarloEstimator | QaeEstimator,
    truth: float | None = None,
) -> EstimateResult:
    """``sum_i p_i f(i)`` by the chosen backend."""
    if len(f) != dist.size:
        raise ValueError(f"target has {len(f)} points but the distribution has {dist.size}")
    if isinstance(estimator, MonteCarloEstimator):
        if estimator.samples is None:
            value = dist.expectation(f)
            return EstimateResult(value=min(max(value, 0.0), 1.0), oracle_queries=0, circuit_depth=0, truth=truth,
                                  method="exact", variant="weighted", n_or_samples=dist.size)
        return mc_estimate(dist, f, estimator.samples, estimator.seed, truth)
    oracle = build_oracle(dist, f, estimator.circuit)
    if estimator.config.method == "canonical":
        return canonical_qae_estimate(oracle, estimator.config, truth)
    return mlqae_estimate(oracle, estimator.config, truth)
