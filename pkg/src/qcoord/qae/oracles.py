"""Rotation oracles ``F|i>|0> = sqrt(1-f(i))|i>|0> + sqrt(f(i))|i>|1>``.

Two constructions:

* Circuit-1 (linear approximation): the ancilla angle is ``2(a*i + b)``,
  realised by one RY plus one controlled RY per index qubit.  ``n + 1`` qubits.
* Circuit-2 (exact): a reversal register holds the bitwise negation of the
  index register, and ``2**n`` multi-controlled RY gates apply the exact angle
  ``2*arcsin(sqrt(f(i)))`` for each pattern.  ``2n + 1`` qubits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..statevector import Circuit, Gate, StateVector, probability_of, run_circuit
from .distribution import TargetFunction

MAX_EXACT_QUBITS = 10


@dataclass(eq=False)
class RotationOracle:
    """State-preparation ``A = F . P`` with the good state flagged by the ancilla.

    ``rotation`` is ``F`` alone (acting on a basis index register), ``circuit``
    is the full ``A`` including the distribution loader.
    """

    variant: str  # "linear" or "exact"
    n: int
    prep: Circuit
    rotation: Circuit
    circuit: Circuit
    ancilla: int
    a: float | None = None
    b: float | None = None
    target: TargetFunction | None = None

    @property
    def n_qubits(self) -> int:
        return self.circuit.n_qubits

    @property
    def label(self) -> str:
        return "circuit1" if self.variant == "linear" else "circuit2"

    def good_probability(self) -> float:
        """``P(ancilla = 1)`` after ``A|0>``, i.e. the amplitude ``a``."""
        return probability_of(run_circuit(self.circuit), self.ancilla, 1)

    def basis_probability(self, i: int) -> float:
        """``P(ancilla = 1)`` after ``F`` on the index basis state ``|i>``."""
        return probability_of(run_circuit(self.rotation, StateVector.basis(self.n_qubits, i)), self.ancilla, 1)

    def modeled_values(self) -> np.ndarray:
        """Per-index ``P(1|i)`` that the construction is designed to realise."""
        idx = np.arange(1 << self.n)
        if self.variant == "linear":
            return np.sin(self.a * idx + self.b) ** 2
        return self.target.values.copy()


def fit_linear_approx(f: TargetFunction, n: int) -> tuple[float, float]:
    """Ordinary least squares of ``arcsin(sqrt(f(i)))`` on ``i = 0..N-1``."""
    size = 1 << n
    if len(f) != size:
        raise ValueError(f"target has {len(f)} points, expected {size}")
    g = np.arcsin(np.sqrt(f.values))
    i = np.arange(size, dtype=float)
    if size == 1:
        return 0.0, float(g[0])
    ic = i - i.mean()
    a = float(ic @ (g - g.mean()) / (ic @ ic))
    b = float(g.mean() - a * i.mean())
    return a, b


def _widen_prep(prep: Circuit, n: int, width: int) -> Circuit:
    if prep.n_qubits != n:
        raise ValueError(f"loader acts on {prep.n_qubits} qubits, expected {n}")
    return prep.widened(width)


def build_circuit1(prep: Circuit, a: float, b: float) -> RotationOracle:
    """Linear-angle oracle: ``P(1|i) = sin^2(a*i + b)``.

    The angle ``a*i + b`` must stay within ``[-pi/2, pi/2]`` for every index,
    otherwise ``sin^2`` folds back and the construction no longer tracks a
    monotone angle.
    """
    n = prep.n_qubits
    ends = (b, a * ((1 << n) - 1) + b)
    if max(abs(e) for e in ends) > math.pi / 2 + 1e-12:
        raise ValueError(f"angle a*i+b leaves the principal range: endpoints {ends}")
    anc = n
    rot = Circuit(n + 1)
    if b != 0.0:
        rot.ry(anc, 2.0 * b)
    for j in range(n):
        if a != 0.0:
            rot.cry(j, anc, 2.0 * a * (1 << j))
    full = _widen_prep(prep, n, n + 1) + rot
    return RotationOracle("linear", n, prep, rot, full, anc, a=float(a), b=float(b))


def build_circuit2(prep: Circuit, f: TargetFunction, max_qubits: int = MAX_EXACT_QUBITS) -> RotationOracle:
    """Exact oracle with a reversal register.

    Layout: index qubits ``0..n-1``, reversal qubits ``n..2n-1``, ancilla ``2n``.
    Reversal qubits start in ``|1>`` and a CNOT from each index qubit leaves
    them in the negated pattern, so every index ``i`` has a unique joint
    index/reversal pattern on which its rotation is conditioned.
    """
    n = prep.n_qubits
    if n > max_qubits:
        raise ValueError(f"exact oracle capped at n={max_qubits} ({2 * max_qubits + 1} qubits), got n={n}")
    if len(f) != 1 << n:
        raise ValueError(f"target has {len(f)} points, expected {1 << n}")
    width = 2 * n + 1
    anc = 2 * n
    rot = Circuit(width)
    for j in range(n):
        rot.x(n + j)
    for j in range(n):
        rot.cnot(j, n + j)
    angles = 2.0 * np.arcsin(np.sqrt(f.values))
    for i, theta in enumerate(angles):
        if theta == 0.0:
            continue
        controls = []
        for j in range(n):
            bit = (i >> j) & 1
            controls.append((j, bit))
            controls.append((n + j, 1 - bit))
        rot.append(Gate.mcry(controls, anc, float(theta)))
    full = _widen_prep(prep, n, width) + rot
    return RotationOracle("exact", n, prep, rot, full, anc, target=f)
