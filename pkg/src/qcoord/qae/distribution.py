"""Discrete distributions over ``2**n`` points and their loading circuits."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..statevector import Circuit, Gate

MASS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Probability masses ``p_0 .. p_{N-1}`` with ``N = 2**n_qubits``."""

    n_qubits: int
    masses: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.masses, dtype=float)
        if self.n_qubits < 1:
            raise ValueError("need at least one qubit")
        if p.shape != (1 << self.n_qubits,):
            raise ValueError(f"expected {1 << self.n_qubits} masses, got shape {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("masses must be finite and non-negative")
        if abs(p.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "masses", p)

    @property
    def size(self) -> int:
        return 1 << self.n_qubits

    @classmethod
    def from_weights(cls, weights: Sequence[float]) -> "DiscreteDistribution":
        w = np.asarray(weights, dtype=float)
        n = int(round(math.log2(w.size)))
        if 1 << n != w.size:
            raise ValueError("number of weights must be a power of two")
        return cls(n, w / w.sum())

    @classmethod
    def uniform(cls, n_qubits: int) -> "DiscreteDistribution":
        return cls(n_qubits, np.full(1 << n_qubits, 1.0 / (1 << n_qubits)))

    @classmethod
    def point_mass(cls, n_qubits: int, index: int) -> "DiscreteDistribution":
        p = np.zeros(1 << n_qubits)
        p[index] = 1.0
        return cls(n_qubits, p)

    @classmethod
    def gaussian(cls, n_qubits: int, mean: float, sigma: float) -> "DiscreteDistribution":
        """Gaussian weights on the index grid, truncated to ``0..N-1`` and renormalized."""
        i = np.arange(1 << n_qubits)
        return cls.from_weights(np.exp(-0.5 * ((i - mean) / sigma) ** 2))

    def expectation(self, values: Sequence[float] | "TargetFunction") -> float:
        v = values.values if isinstance(values, TargetFunction) else np.asarray(values, dtype=float)
        return float(self.masses @ v)


@dataclass(frozen=True, eq=False)
class TargetFunction:
    """``f: {0..N-1} -> [0, 1]`` tabulated at construction."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("target values must be a non-empty vector")
        if not np.all(np.isfinite(v)) or v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("target function must map into [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, fn: Callable[[int], float], size: int) -> "TargetFunction":
        return cls(np.array([fn(i) for i in range(size)], dtype=float))

    @classmethod
    def constant(cls, value: float, size: int) -> "TargetFunction":
        return cls(np.full(size, float(value)))

    def __call__(self, i: int) -> float:
        return float(self.values[i])

    def __len__(self) -> int:
        return self.values.size


def prepare_uniform(n: int) -> Circuit:
    """Hadamard on every qubit: ``p_i = 1/N``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    c = Circuit(n)
    for q in range(n):
        c.h(q)
    return c


def prepare_distribution(dist: DiscreteDistribution) -> Circuit:
    """Binary-tree loader (Grover-Rudolph): conditional RY rotations, MSB first.

    Running the circuit on ``|0...0>`` gives real amplitudes ``sqrt(p_i)``.
    Zero-angle rotations are dropped.
    """
    n = dist.n_qubits
    p = dist.masses
    c = Circuit(n)
    for q in range(n - 1, -1, -1):
        # mass of every (qubit q .. n-1) prefix
        m = p.reshape(1 << (n - q), 1 << q).sum(axis=1)
        for prefix in range(1 << (n - 1 - q)):
            m0, m1 = m[2 * prefix], m[2 * prefix + 1]
            if m1 <= 0.0:
                continue
            theta = 2.0 * math.atan2(math.sqrt(m1), math.sqrt(m0))
            controls = tuple((q + 1 + j, (prefix >> j) & 1) for j in range(n - 1 - q))
            c.append(Gate("RY", q, controls, theta))
    return c
