"""Grover operator ``Q = A S0 A^dagger S_X`` for an ancilla-flagged oracle."""
from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from ..statevector import Circuit, Gate, StateVector, apply_circuit_to_array, stacked_depth
from .oracles import RotationOracle


def _zero_reflection(n: int) -> Circuit:
    """Phase flip on ``|0...0>`` only: X, Z conditioned on all others being 0, X."""
    c = Circuit(n)
    c.x(0)
    c.append(Gate("Z", 0, tuple((q, 0) for q in range(1, n))))
    c.x(0)
    return c


def build_grover(a: Circuit | RotationOracle, ancilla: int | None = None) -> Circuit:
    """Amplification operator for a state-preparation circuit ``A``.

    Gate order is ``S_X``, ``A^dagger``, ``S0``, ``A``, followed by ``RY(2 pi)``
    on the ancilla which equals ``-I``.  The global sign is irrelevant for
    amplitude amplification but makes the controlled version used by phase
    estimation carry the textbook eigenphases ``+-2 theta``.
    """
    if isinstance(a, RotationOracle):
        ancilla = a.ancilla if ancilla is None else ancilla
        a = a.circuit
    if ancilla is None:
        raise ValueError("the good-state ancilla must be designated")
    n = a.n_qubits
    if not 0 <= ancilla < n:
        raise IndexError(f"ancilla {ancilla} outside register of {n}")
    q = Circuit(n)
    q.append(Gate("Z", ancilla))
    q.extend(a.inverse())
    q.extend(_zero_reflection(n))
    q.extend(a)
    q.ry(ancilla, 2 * math.pi)
    return q


def amplified_probabilities(oracle: RotationOracle, powers: Iterable[int], grover: Circuit | None = None) -> dict[int, float]:
    """Exact ``P(ancilla = 1)`` after ``Q^k A |0>`` for every ``k`` in ``powers``.

    Powers are visited in increasing order so each extra ``Q`` is applied once.
    """
    ks = sorted(set(int(k) for k in powers))
    if not ks or ks[0] < 0:
        raise ValueError("powers must be non-negative and non-empty")
    grover = build_grover(oracle) if grover is None else grover
    n, anc = oracle.n_qubits, oracle.ancilla
    psi = apply_circuit_to_array(StateVector.zero(n).amplitudes, oracle.circuit)
    mask = (np.arange(1 << n) >> anc) & 1 == 1
    out: dict[int, float] = {}
    k = 0
    for target in ks:
        while k < target:
            apply_circuit_to_array(psi, grover, copy=False)
            k += 1
        out[target] = float(np.sum(np.abs(psi[mask]) ** 2))
    return out


def amplified_depth(oracle: RotationOracle, k: int, grover: Circuit | None = None) -> int:
    """Depth of ``Q^k A``."""
    grover = build_grover(oracle) if grover is None else grover
    return stacked_depth([oracle.circuit] + [grover] * k)
