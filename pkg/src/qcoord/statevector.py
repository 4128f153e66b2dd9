"""Dense statevector simulator.

Qubit ordering is little-endian: qubit 0 is the least significant bit of the
basis index, so basis index ``i = sum(b_q << q)``.  Amplitudes are stored as
complex128.  Gates are applied in place by compiled kernels that visit only
the amplitude pairs selected by the gate's controls, so multi-controlled
gates on 20+ qubit registers are cheap.

Noise is simulated with stochastic Pauli insertion (quantum trajectories), not
density matrices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numba
import numpy as np

__all__ = [
    "Gate",
    "Circuit",
    "StateVector",
    "Observable",
    "RuntimeModel",
    "apply_gate",
    "apply_circuit_to_array",
    "run_circuit",
    "expectation",
    "z_expectations",
    "probability_of",
    "sample",
    "estimate_runtime",
    "depolarize",
    "draw_pauli_errors",
    "circuit_unitary",
]

NORM_TOL = 1e-10

_SQRT1_2 = 1.0 / math.sqrt(2.0)
_FIXED = {
    "H": np.array([[_SQRT1_2, _SQRT1_2], [_SQRT1_2, -_SQRT1_2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_PARAMETRIC = ("RY", "RZ", "P")
BASE_KINDS = tuple(_FIXED) + _PARAMETRIC


def _rotation(kind: str, theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "RZ":
        return np.array([[complex(c, -s), 0], [0, complex(c, s)]], dtype=complex)
    return np.array([[1, 0], [0, complex(math.cos(theta), math.sin(theta))]], dtype=complex)


@dataclass(frozen=True)
class Gate:
    """A single-target gate with optional (qubit, value) controls.

    ``kind`` is the base operation; CNOT, CRY, MCRY and friends are the
    base kinds X / RY / ... with one or more controls attached.
    """

    kind: str
    target: int
    controls: tuple[tuple[int, int], ...] = ()
    angle: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in BASE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind in _PARAMETRIC:
            if self.angle is None or not math.isfinite(self.angle):
                raise ValueError(f"{self.kind} needs a finite angle, got {self.angle!r}")
        elif self.angle is not None:
            raise ValueError(f"{self.kind} takes no angle")
        qubits = [self.target] + [q for q, _ in self.controls]
        if min(qubits) < 0:
            raise ValueError("negative qubit index")
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"control and target qubits must be distinct: {qubits}")
        if any(v not in (0, 1) for _, v in self.controls):
            raise ValueError("control values must be 0 or 1")

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.target,) + tuple(q for q, _ in self.controls)

    @property
    def name(self) -> str:
        """Conventional name, e.g. ``CNOT`` or ``MCRY``."""
        k = len(self.controls)
        if k == 0:
            return self.kind
        if k == 1 and self.kind == "X":
            return "CNOT"
        return ("C" if k == 1 else "MC") + self.kind

    def matrix(self) -> np.ndarray:
        """The 2x2 matrix applied to the target when all controls match."""
        if self.kind in _FIXED:
            return _FIXED[self.kind]
        return _rotation(self.kind, self.angle)

    def inverse(self) -> "Gate":
        if self.kind in _PARAMETRIC:
            return Gate(self.kind, self.target, self.controls, -self.angle)
        return self

    def with_control(self, qubit: int, value: int = 1) -> "Gate":
        return Gate(self.kind, self.target, self.controls + ((qubit, value),), self.angle)

    # constructors ---------------------------------------------------------
    @staticmethod
    def h(q: int) -> "Gate":
        return Gate("H", q)

    @staticmethod
    def x(q: int) -> "Gate":
        return Gate("X", q)

    @staticmethod
    def ry(q: int, theta: float) -> "Gate":
        return Gate("RY", q, angle=float(theta))

    @staticmethod
    def rz(q: int, theta: float) -> "Gate":
        return Gate("RZ", q, angle=float(theta))

    @staticmethod
    def cnot(control: int, target: int) -> "Gate":
        return Gate("X", target, ((control, 1),))

    @staticmethod
    def cry(control: int, target: int, theta: float) -> "Gate":
        return Gate("RY", target, ((control, 1),), float(theta))

    @staticmethod
    def mcry(controls: Sequence[tuple[int, int]], target: int, theta: float) -> "Gate":
        return Gate("RY", target, tuple((int(q), int(v)) for q, v in controls), float(theta))


# Gate kernels.  ``positions`` holds the sorted qubits a gate touches
# (target and controls); the kernels enumerate only the amplitude pairs whose
# control bits match ``ctrl_bits`` and whose target bit is 0, so controlled
# gates cost proportionally less.  Rows of ``psi`` are independent states.


@numba.njit(cache=True, nogil=True)
def _k_real(psi, positions, ctrl_bits, tbit, u00, u01, u10, u11):
    # psi is the float64 view (re, im interleaved) of complex amplitudes
    dim = psi.shape[1] // 2
    count = dim >> positions.shape[0]
    p0 = positions[0]
    inner = 2 << p0
    for b in range(psi.shape[0]):
        row = psi[b]
        for o in range(count >> p0):
            base = o << p0
            for p in positions:
                base = ((base >> p) << (p + 1)) | (base & ((1 << p) - 1))
            base = 2 * (base | ctrl_bits)
            for l in range(inner):
                i = base + l
                j = i + 2 * tbit
                a = row[i]
                c = row[j]
                row[i] = u00 * a + u01 * c
                row[j] = u10 * a + u11 * c


@numba.njit(cache=True, nogil=True)
def _k_complex(psi, positions, ctrl_bits, tbit, u00, u01, u10, u11):
    count = psi.shape[1] >> positions.shape[0]
    p0 = positions[0]
    inner = 1 << p0
    for b in range(psi.shape[0]):
        row = psi[b]
        for o in range(count >> p0):
            base = o << p0
            for p in positions:
                base = ((base >> p) << (p + 1)) | (base & ((1 << p) - 1))
            base |= ctrl_bits
            for l in range(inner):
                i = base + l
                j = i | tbit
                a = row[i]
                c = row[j]
                row[i] = u00 * a + u01 * c
                row[j] = u10 * a + u11 * c


@numba.njit(cache=True, nogil=True)
def _k_diag(psi, positions, ctrl_bits, tbit, d0, d1):
    count = psi.shape[1] >> positions.shape[0]
    p0 = positions[0]
    inner = 1 << p0
    scale0 = d0 != 1.0
    for b in range(psi.shape[0]):
        row = psi[b]
        for o in range(count >> p0):
            base = o << p0
            for p in positions:
                base = ((base >> p) << (p + 1)) | (base & ((1 << p) - 1))
            base |= ctrl_bits
            for l in range(inner):
                i = base + l
                if scale0:
                    row[i] *= d0
                row[i | tbit] *= d1


@lru_cache(maxsize=65536)
def _layout(gate: "Gate") -> tuple[np.ndarray, int, int]:
    positions = np.array(sorted(gate.qubits), dtype=np.int64)
    ctrl_bits = 0
    for q, v in gate.controls:
        ctrl_bits |= v << q
    return positions, ctrl_bits, 1 << gate.target


def _apply_flat(psi: np.ndarray, n: int, gate: Gate) -> None:
    """Apply ``gate`` in place to a C-contiguous complex array ``(..., 2**n)``."""
    positions, ctrl_bits, tbit = _layout(gate)
    rows = psi.reshape(-1, 1 << n)
    kind = gate.kind
    if kind in ("Z", "RZ", "P"):
        if kind == "Z":
            d0, d1 = 1.0 + 0j, -1.0 + 0j
        elif kind == "P":
            d0, d1 = 1.0 + 0j, complex(math.cos(gate.angle), math.sin(gate.angle))
        else:
            half = gate.angle / 2
            d0 = complex(math.cos(half), -math.sin(half))
            d1 = complex(math.cos(half), math.sin(half))
        _k_diag(rows, positions, ctrl_bits, tbit, d0, d1)
    elif kind == "Y":
        _k_complex(rows, positions, ctrl_bits, tbit, 0j, -1j, 1j, 0j)
    else:
        u = gate.matrix().real
        _k_real(rows.view(np.float64), positions, ctrl_bits, tbit, u[0, 0], u[0, 1], u[1, 0], u[1, 1])


def _check_gate(gate: Gate, n: int) -> None:
    if max(gate.qubits) >= n:
        raise IndexError(f"gate {gate.name} on qubits {gate.qubits} exceeds register of {n}")


class Circuit:
    """Ordered gate list on a fixed register, with greedy-layer depth.

    Gates acting on disjoint qubits share a layer; depth is the number of
    layers, i.e. the longest dependency chain.
    """

    def __init__(self, n_qubits: int, gates: Iterable[Gate] = ()):
        if n_qubits < 1:
            raise ValueError("a circuit needs at least one qubit")
        self.n_qubits = int(n_qubits)
        self._gates: list[Gate] = []
        self._levels = [0] * self.n_qubits
        self._depth = 0
        for g in gates:
            self.append(g)

    @property
    def gates(self) -> tuple[Gate, ...]:
        return tuple(self._gates)

    @property
    def depth(self) -> int:
        return self._depth

    def __len__(self) -> int:
        return len(self._gates)

    def __iter__(self) -> Iterator[Gate]:
        return iter(self._gates)

    def __add__(self, other: "Circuit") -> "Circuit":
        return self.compose(other)

    def __repr__(self) -> str:
        return f"Circuit(n_qubits={self.n_qubits}, gates={len(self)}, depth={self.depth})"

    def append(self, gate: Gate) -> "Circuit":
        _check_gate(gate, self.n_qubits)
        qs = gate.qubits
        level = max(self._levels[q] for q in qs) + 1
        for q in qs:
            self._levels[q] = level
        self._depth = max(self._depth, level)
        self._gates.append(gate)
        return self

    def extend(self, gates: Iterable[Gate]) -> "Circuit":
        for g in gates:
            self.append(g)
        return self

    # shorthand builders
    def h(self, q: int) -> "Circuit":
        return self.append(Gate.h(q))

    def x(self, q: int) -> "Circuit":
        return self.append(Gate.x(q))

    def ry(self, q: int, theta: float) -> "Circuit":
        return self.append(Gate.ry(q, theta))

    def rz(self, q: int, theta: float) -> "Circuit":
        return self.append(Gate.rz(q, theta))

    def cnot(self, control: int, target: int) -> "Circuit":
        return self.append(Gate.cnot(control, target))

    def cry(self, control: int, target: int, theta: float) -> "Circuit":
        return self.append(Gate.cry(control, target, theta))

    def compose(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise ValueError("cannot compose circuits on different registers")
        return Circuit(self.n_qubits, self._gates + other._gates)

    def widened(self, n_qubits: int) -> "Circuit":
        """Same gates on a larger register (extra qubits appended on top)."""
        if n_qubits < self.n_qubits:
            raise ValueError("can only widen a circuit")
        return Circuit(n_qubits, self._gates)

    def inverse(self) -> "Circuit":
        return Circuit(self.n_qubits, (g.inverse() for g in reversed(self._gates)))

    def controlled(self, qubit: int, value: int = 1, n_qubits: int | None = None) -> "Circuit":
        """Every gate gains the control ``(qubit, value)``."""
        n = n_qubits or max(self.n_qubits, qubit + 1)
        return Circuit(n, (g.with_control(qubit, value) for g in self._gates))

    def count_ops(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for g in self._gates:
            out[g.name] = out.get(g.name, 0) + 1
        return out

    # text format: one gate per line, ``KIND target [controls...] [angle]``
    def to_text(self) -> str:
        lines = [f"# qubits {self.n_qubits}"]
        for g in self._gates:
            toks = [g.name, str(g.target)]
            toks += [str(q) if v == 1 else f"~{q}" for q, v in g.controls]
            if g.angle is not None:
                toks.append(repr(g.angle))
            lines.append(" ".join(toks))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Circuit":
        n = None
        gates = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "qubits":
                    n = int(parts[1])
                continue
            toks = line.split()
            name = toks[0]
            if name == "CNOT":
                kind = "X"
            elif name.startswith("MC"):
                kind = name[2:]
            elif name.startswith("C") and name[1:] in BASE_KINDS:
                kind = name[1:]
            else:
                kind = name
            angle = float(toks[-1]) if kind in _PARAMETRIC else None
            ctl_toks = toks[2:-1] if angle is not None else toks[2:]
            controls = tuple((int(t[1:]), 0) if t.startswith("~") else (int(t), 1) for t in ctl_toks)
            gates.append(Gate(kind, int(toks[1]), controls, angle))
        if n is None:
            n = 1 + max((max(g.qubits) for g in gates), default=0)
        return cls(n, gates)


@dataclass
class StateVector:
    """Normalized amplitudes over ``2**n_qubits`` basis states."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size != 1 << self.n_qubits:
            raise ValueError(f"expected {1 << self.n_qubits} amplitudes, got shape {amps.shape}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("non-finite amplitude")
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm={norm!r})")
        self.amplitudes = amps

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def from_amplitudes(cls, amplitudes: Sequence[complex], normalize: bool = False) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex)
        n = int(round(math.log2(amps.size))) if amps.size else -1
        if n < 0 or 1 << n != amps.size:
            raise ValueError("amplitude count must be a power of two")
        if normalize:
            amps = amps / np.linalg.norm(amps)
        return cls(n, amps)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """Return ``U @ state`` for a single gate; the input is left untouched."""
    _check_gate(gate, state.n_qubits)
    psi = state.amplitudes.copy()
    _apply_flat(psi, state.n_qubits, gate)
    return StateVector(state.n_qubits, psi)


def apply_circuit_to_array(psi: np.ndarray, circuit: Circuit, copy: bool = True) -> np.ndarray:
    """Apply a circuit to raw amplitudes of shape ``(..., 2**n)``.

    No normalization is checked, so this also serves batched and unnormalized
    inputs (linearity tests, unitary construction).
    """
    n = circuit.n_qubits
    out = np.array(psi, dtype=complex, copy=copy, order="C")
    if out.shape[-1] != 1 << n:
        raise ValueError(f"amplitude axis has length {out.shape[-1]}, expected {1 << n}")
    for g in circuit:
        _apply_flat(out, n, g)
    return out


def run_circuit(circuit: Circuit, initial: StateVector | None = None) -> StateVector:
    """Apply every gate of ``circuit`` in order, starting from ``initial``
    (default ``|0...0>``)."""
    if initial is None:
        initial = StateVector.zero(circuit.n_qubits)
    if initial.n_qubits != circuit.n_qubits:
        raise ValueError(
            f"circuit acts on {circuit.n_qubits} qubits but the state has {initial.n_qubits}"
        )
    return StateVector(circuit.n_qubits, apply_circuit_to_array(initial.amplitudes, circuit))


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Dense unitary of a small circuit, column ``j`` being ``U|j>``."""
    dim = 1 << circuit.n_qubits
    cols = apply_circuit_to_array(np.eye(dim, dtype=complex), circuit, copy=False)
    return cols.T


@dataclass(frozen=True)
class Observable:
    """Weighted sum of single-qubit Pauli-Z terms."""

    terms: tuple[tuple[int, float], ...]

    @classmethod
    def z(cls, qubit: int, weight: float = 1.0) -> "Observable":
        return cls(((qubit, float(weight)),))

    @property
    def bound(self) -> float:
        return sum(abs(w) for _, w in self.terms)


def z_expectations(probs: np.ndarray, n: int, qubits: Sequence[int] | None = None) -> np.ndarray:
    """``<Z_q>`` for each requested qubit from basis probabilities of shape ``(..., 2**n)``."""
    qubits = range(n) if qubits is None else qubits
    t = probs.reshape(probs.shape[:-1] + (2,) * n)
    lead = probs.ndim - 1
    out = []
    for q in qubits:
        ax = lead + n - 1 - q
        other = tuple(a for a in range(lead, lead + n) if a != ax)
        marg = t.sum(axis=other)
        out.append(marg[..., 0] - marg[..., 1])
    return np.stack(out, axis=-1)


def expectation(state: StateVector, obs: Observable) -> float:
    """``<psi|O|psi>`` for a Pauli-Z observable."""
    n = state.n_qubits
    for q, _ in obs.terms:
        if not 0 <= q < n:
            raise IndexError(f"observable qubit {q} outside register of {n}")
    if not obs.terms:
        return 0.0
    zs = z_expectations(state.probabilities(), n, [q for q, _ in obs.terms])
    return float(np.dot(zs, [w for _, w in obs.terms]))


def probability_of(state: StateVector, qubit: int, value: int) -> float:
    """Marginal probability that ``qubit`` measures ``value``."""
    n = state.n_qubits
    if not 0 <= qubit < n:
        raise IndexError(f"qubit {qubit} outside register of {n}")
    if value not in (0, 1):
        raise ValueError("value must be 0 or 1")
    t = state.probabilities().reshape((2,) * n)
    idx: list = [slice(None)] * n
    idx[n - 1 - qubit] = value
    return float(t[tuple(idx)].sum())


def sample(state: StateVector, shots: int, seed: int | None = None) -> dict[int, int]:
    """Multinomial measurement histogram ``{basis index: count}`` (nonzero bins only)."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = state.probabilities()
    p = p / p.sum()
    counts = np.random.default_rng(seed).multinomial(shots, p)
    nz = np.flatnonzero(counts)
    return {int(i): int(counts[i]) for i in nz}


@dataclass(frozen=True)
class RuntimeModel:
    """Ideal-hardware timing constants, in seconds."""

    t_prep_plus_meas: float = 1e-6
    t_gate: float = 10e-9

    def __post_init__(self) -> None:
        if not (self.t_prep_plus_meas > 0 and self.t_gate > 0):
            raise ValueError("runtime constants must be strictly positive")


def estimate_runtime(circuit: Circuit | int, model: RuntimeModel = RuntimeModel()) -> float:
    """Single-execution runtime ``T_prep + T_meas + T_gate * depth`` in seconds."""
    depth = circuit if isinstance(circuit, int) else circuit.depth
    return model.t_prep_plus_meas + model.t_gate * depth


_PAULI_KINDS = (None, "X", "Y", "Z")


def draw_pauli_errors(rng: np.random.Generator, level: float, n_qubits: int, size: tuple = ()) -> np.ndarray:
    """Per-qubit Pauli error codes: 0 none, 1 X, 2 Y, 3 Z.

    Each qubit is hit with probability ``level``; the Pauli is uniform over
    X, Y, Z.
    """
    if not 0.0 <= level <= 1.0:
        raise ValueError(f"noise level must lie in [0, 1], got {level}")
    shape = tuple(size) + (n_qubits,)
    hit = rng.random(shape) < level
    which = rng.integers(1, 4, size=shape)
    return np.where(hit, which, 0)


def depolarize(state: StateVector, level: float, seed: int | np.random.Generator | None = None) -> StateVector:
    """One depolarizing trajectory: random Paulis inserted per qubit."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    codes = draw_pauli_errors(rng, level, state.n_qubits)
    out = state
    for q, code in enumerate(codes):
        if code:
            out = apply_gate(out, Gate(_PAULI_KINDS[code], q))
    return out


def stacked_depth(parts: Iterable[Circuit]) -> int:
    """Greedy-layer depth of the concatenation of ``parts`` without building it."""
    levels: list[int] | None = None
    depth = 0
    for c in parts:
        if levels is None:
            levels = [0] * c.n_qubits
        for g in c:
            qs = g.qubits
            level = max(levels[q] for q in qs) + 1
            for q in qs:
                levels[q] = level
            depth = max(depth, level)
    return depth
