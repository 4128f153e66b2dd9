"""Variational quantum circuits: angle encoding, layered rotations, Z readout.

Two evaluation paths share one circuit definition:

* reference path (:func:`vqc_forward`, :func:`parameter_shift_grad`) runs the
  full encoded circuit on the statevector simulator;
* :class:`VqcEngine` builds the variational unitary once per parameter value,
  applies it to batches of encoded product states, and returns parameter-shift
  derivatives for parameters and inputs in bulk.  It is what training uses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..statevector import Circuit, circuit_unitary, draw_pauli_errors, run_circuit, z_expectations

SHIFT = math.pi / 2
ENTANGLERS = ("ring", "skip", "none")


@dataclass(frozen=True)
class VqcSpec:
    """``n_layers`` blocks of one rotation per qubit followed by a CNOT pattern.

    ``rotation_axes`` holds one axis per layer (``"Y"`` by default).
    ``ring``: CNOT k -> k+1, closed by n-1 -> 0 when n > 2.
    ``skip``: CNOT k -> k+2 (mod n); falls back to ``ring`` below 3 qubits.
    """

    n_qubits: int
    n_layers: int = 1
    rotation_axes: tuple[str, ...] | None = None
    entanglement: str = "ring"
    n_outputs: int | None = None

    def __post_init__(self) -> None:
        if self.n_qubits < 1 or self.n_layers < 1:
            raise ValueError("need n_qubits >= 1 and n_layers >= 1")
        axes = self.rotation_axes or ("Y",) * self.n_layers
        if len(axes) != self.n_layers or any(a not in ("X", "Y", "Z") for a in axes):
            raise ValueError("rotation_axes needs one of X/Y/Z per layer")
        object.__setattr__(self, "rotation_axes", tuple(axes))
        if self.entanglement not in ENTANGLERS:
            raise ValueError(f"entanglement must be one of {ENTANGLERS}")
        n_out = self.n_qubits if self.n_outputs is None else self.n_outputs
        if not 1 <= n_out <= self.n_qubits:
            raise ValueError("n_outputs must lie in 1..n_qubits")
        object.__setattr__(self, "n_outputs", n_out)

    @property
    def n_params(self) -> int:
        return self.n_layers * self.n_qubits

    def entangler_pairs(self) -> list[tuple[int, int]]:
        n = self.n_qubits
        if self.entanglement == "none" or n == 1:
            return []
        if self.entanglement == "skip" and n >= 3:
            return [(k, (k + 2) % n) for k in range(n)]
        pairs = [(k, k + 1) for k in range(n - 1)]
        if n > 2:
            pairs.append((n - 1, 0))
        return pairs

    @property
    def is_real(self) -> bool:
        """No complex amplitudes appear (RY rotations and CNOTs only)."""
        return all(a == "Y" for a in self.rotation_axes)


def _check_theta(spec: VqcSpec, theta) -> np.ndarray:
    th = np.asarray(theta, dtype=float).ravel()
    if th.size != spec.n_params:
        raise ValueError(f"expected {spec.n_params} parameters, got {th.size}")
    if not np.all(np.isfinite(th)):
        raise ValueError("parameters must be finite")
    return th


def encode_angles(window: Sequence[float]) -> Circuit:
    """One ``RY(pi * x_k)`` per qubit; inputs must lie in ``[0, 1]``."""
    x = np.asarray(window, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("window must be a non-empty vector")
    if np.any(x < 0) or np.any(x > 1) or not np.all(np.isfinite(x)):
        raise ValueError("encoded values must lie in [0, 1]")
    c = Circuit(x.size)
    for k, v in enumerate(x):
        c.ry(k, math.pi * float(v))
    return c


def variational_circuit(spec: VqcSpec, theta) -> Circuit:
    """Variational block alone; X rotations are written as H-RZ-H."""
    th = _check_theta(spec, theta).reshape(spec.n_layers, spec.n_qubits)
    c = Circuit(spec.n_qubits)
    for layer, axis in enumerate(spec.rotation_axes):
        for k in range(spec.n_qubits):
            angle = float(th[layer, k])
            if axis == "Y":
                c.ry(k, angle)
            elif axis == "Z":
                c.rz(k, angle)
            else:
                c.h(k).rz(k, angle).h(k)
        for a, b in spec.entangler_pairs():
            c.cnot(a, b)
    return c


def build_vqc(spec: VqcSpec, theta, inputs: Sequence[float]) -> Circuit:
    """Encoding followed by the variational block."""
    if len(inputs) != spec.n_qubits:
        raise ValueError(f"input length {len(inputs)} differs from n_qubits={spec.n_qubits}")
    return encode_angles(inputs) + variational_circuit(spec, theta)


def vqc_forward(spec: VqcSpec, theta, inputs: Sequence[float]) -> np.ndarray:
    """``<Z_k>`` for the first ``n_outputs`` qubits."""
    state = run_circuit(build_vqc(spec, theta, inputs))
    return z_expectations(state.probabilities(), spec.n_qubits, range(spec.n_outputs))


def parameter_shift_grad(spec: VqcSpec, theta, inputs: Sequence[float], output_index: int = 0) -> np.ndarray:
    """``d<Z_k>/d theta_j = (f(theta_j + pi/2) - f(theta_j - pi/2)) / 2``."""
    th = _check_theta(spec, theta)
    if not 0 <= output_index < spec.n_outputs:
        raise IndexError("output_index out of range")
    grad = np.empty(th.size)
    for j in range(th.size):
        plus, minus = th.copy(), th.copy()
        plus[j] += SHIFT
        minus[j] -= SHIFT
        grad[j] = 0.5 * (vqc_forward(spec, plus, inputs)[output_index] - vqc_forward(spec, minus, inputs)[output_index])
    return grad


# --- batched engine -------------------------------------------------------------------

def product_states(angles: np.ndarray) -> np.ndarray:
    """``RY(a_k)|0>`` tensor products for angles ``(B, n)`` -> amplitudes ``(B, 2**n)``."""
    B, n = angles.shape
    c, s = np.cos(angles / 2), np.sin(angles / 2)
    psi = np.ones((B, 1))
    for k in range(n):
        f = np.stack([c[:, k], s[:, k]], axis=1)
        psi = (f[:, :, None] * psi[:, None, :]).reshape(B, -1)
    return psi


def _z_signs(n: int, n_out: int) -> np.ndarray:
    idx = np.arange(1 << n)
    return np.stack([1.0 - 2.0 * ((idx >> k) & 1) for k in range(n_out)], axis=1)


class VqcEngine:
    """Batched evaluation of one VQC at fixed parameters.

    ``flips`` (same shape as the outputs, entries +-1) model the readout
    effect of depolarizing noise: an X or Y error before measuring qubit k
    negates ``<Z_k>``.  The same flips are reused for every shifted circuit.
    """

    def __init__(self, spec: VqcSpec, theta, need_param_grad: bool = True):
        self.spec = spec
        self.theta = _check_theta(spec, theta)
        n = spec.n_qubits
        self.zs = _z_signs(n, spec.n_outputs)
        self.U = self._unitary(self.theta)
        self.Ushift = None
        if need_param_grad:
            shifted = []
            for j in range(self.theta.size):
                for sgn in (1.0, -1.0):
                    th = self.theta.copy()
                    th[j] += sgn * SHIFT
                    shifted.append(self._unitary(th))
            self.Ushift = np.stack(shifted)  # (2P, dim, dim), order (+,-) per parameter

    def _unitary(self, theta) -> np.ndarray:
        u = circuit_unitary(variational_circuit(self.spec, theta))
        if self.spec.is_real:
            return np.ascontiguousarray(u.real)
        return u

    def _expect(self, psi: np.ndarray, u: np.ndarray) -> np.ndarray:
        amp = psi @ u.T
        probs = amp.real**2 + amp.imag**2 if np.iscomplexobj(amp) else amp * amp
        return probs @ self.zs

    def forward(self, x: np.ndarray, flips: np.ndarray | None = None) -> np.ndarray:
        """Outputs ``(B, n_outputs)`` for inputs ``(B, n_qubits)`` in ``[0, 1]``."""
        out = self._expect(product_states(np.pi * x), self.U)
        return out if flips is None else out * flips

    def param_grad(self, x: np.ndarray, grad_out: np.ndarray, flips: np.ndarray | None = None) -> np.ndarray:
        """``sum_b grad_out[b] . d out[b] / d theta`` by parameter shift over all rows at once."""
        if self.Ushift is None:
            raise RuntimeError("engine built without parameter-gradient unitaries")
        g = grad_out if flips is None else grad_out * flips
        B, n = x.shape
        P, dim = self.theta.size, 1 << n
        g_theta = np.zeros(P)
        psi = product_states(np.pi * x)
        # chunk the batch to bound memory (rows x 2P x dim amplitudes)
        step = max(1, 2_000_000 // (2 * P * dim))
        flat_u = self.Ushift.reshape(2 * P * dim, dim).T
        for s in range(0, B, step):
            amp = (psi[s:s + step] @ flat_u).reshape(-1, 2 * P, dim)
            probs = amp.real**2 + amp.imag**2 if np.iscomplexobj(amp) else amp * amp
            out = (probs @ self.zs).reshape(-1, P, 2, self.spec.n_outputs)
            g_theta += 0.5 * np.einsum("bpk,bk->p", out[:, :, 0] - out[:, :, 1], g[s:s + step])
        return g_theta

    def input_jacobian(self, x: np.ndarray, flips: np.ndarray | None = None) -> np.ndarray:
        """``d out / d x`` of shape ``(B, n_outputs, n_qubits)``.

        Each input enters as one rotation angle ``pi * x_k``, so the shift
        rule applies to it as well (times ``pi`` for the chain rule).
        """
        B, n = x.shape
        angles = np.pi * x
        jac = np.empty((B, self.spec.n_outputs, n))
        for k in range(n):
            a = angles.copy()
            a[:, k] += SHIFT
            plus = self._expect(product_states(a), self.U)
            a[:, k] -= 2 * SHIFT
            minus = self._expect(product_states(a), self.U)
            jac[:, :, k] = 0.5 * np.pi * (plus - minus)
        if flips is not None:
            jac *= flips[:, :, None]
        return jac


def readout_flips(rng: np.random.Generator | None, level: float, shape: tuple) -> np.ndarray | None:
    """Sign flips from single-qubit depolarizing errors drawn before measurement."""
    if rng is None or level <= 0:
        return None
    codes = draw_pauli_errors(rng, level, shape[-1], shape[:-1])
    return np.where((codes == 1) | (codes == 2), -1.0, 1.0)
