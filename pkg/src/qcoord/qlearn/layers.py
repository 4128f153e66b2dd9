"""Quantum temporal-convolution and quantum LSTM building blocks.

Values entering a VQC are encoded as rotation angles, so they must lie in
``[0, 1]``.  Signals living in ``[-1, 1]`` (VQC outputs, hidden states) are
mapped with ``(v + 1) / 2``.  Unused qubits are left in ``|0>`` (encoded 0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .vqc import VqcEngine, VqcSpec, vqc_forward


def to_unit(v: np.ndarray) -> np.ndarray:
    return 0.5 * (np.asarray(v, dtype=float) + 1.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass(frozen=True)
class QTcnLayerSpec:
    """Causal sliding window of ``kernel_size`` taps fed to one VQC."""

    vqc: VqcSpec
    kernel_size: int = 4
    dilation: int = 1
    stride: int = 1

    def __post_init__(self) -> None:
        if self.kernel_size != self.vqc.n_qubits:
            raise ValueError("kernel_size must equal the VQC qubit count")
        if self.dilation < 1 or self.stride < 1:
            raise ValueError("dilation and stride must be >= 1")

    def output_length(self, T: int) -> int:
        return math.ceil(T / self.stride)

    def window_index(self, T: int) -> np.ndarray:
        """Series index per (position, tap); ``-1`` marks left padding.

        Position ``s`` ends at time ``s * stride``; tap ``k`` reads
        ``s * stride - (K - 1 - k) * dilation``.
        """
        ends = np.arange(self.output_length(T)) * self.stride
        offs = (np.arange(self.kernel_size) - (self.kernel_size - 1)) * self.dilation
        idx = ends[:, None] + offs[None, :]
        return np.where(idx >= 0, idx, -1)

    def windows(self, series: np.ndarray) -> np.ndarray:
        """``(..., T)`` -> ``(..., positions, K)`` zero-padded windows."""
        x = np.asarray(series, dtype=float)
        idx = self.window_index(x.shape[-1])
        padded = np.concatenate([x, np.zeros(x.shape[:-1] + (1,))], axis=-1)
        return padded[..., idx]  # index -1 hits the appended zero


def qtcn_forward(layer: QTcnLayerSpec, params, series) -> np.ndarray:
    """Feature vectors ``(ceil(T/stride), n_outputs)`` for a series in ``[0, 1]``."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("series must be a non-empty vector")
    if x.size < layer.kernel_size:
        raise ValueError("series shorter than the kernel")
    return np.array([vqc_forward(layer.vqc, params, w) for w in layer.windows(x)])


@dataclass(frozen=True)
class QLstmCellSpec:
    """Six VQCs over ``hidden_size + input_size`` qubits.

    VQC1..VQC4 produce the forget, input, candidate and output gates, VQC5
    the hidden state and VQC6 the cell output ``y``.
    """

    hidden_size: int
    input_size: int
    vqcs: tuple[VqcSpec, ...]

    def __post_init__(self) -> None:
        if len(self.vqcs) != 6:
            raise ValueError("a quantum LSTM cell holds exactly six VQCs")
        n = self.hidden_size + self.input_size
        for k, spec in enumerate(self.vqcs):
            if spec.n_qubits != n:
                raise ValueError(f"VQC{k + 1} must act on hidden_size + input_size = {n} qubits")
            if k < 5 and spec.n_outputs != self.hidden_size:
                raise ValueError(f"VQC{k + 1} must return hidden_size outputs")

    @classmethod
    def build(cls, hidden_size: int, input_size: int, n_layers: int = 2, entanglement: str = "ring",
              output_size: int | None = None) -> "QLstmCellSpec":
        n = hidden_size + input_size
        gate = VqcSpec(n, n_layers, entanglement=entanglement, n_outputs=hidden_size)
        out = VqcSpec(n, n_layers, entanglement=entanglement, n_outputs=output_size or hidden_size)
        return cls(hidden_size, input_size, (gate,) * 5 + (out,))

    @property
    def output_size(self) -> int:
        return self.vqcs[5].n_outputs

    @property
    def n_params(self) -> int:
        return sum(s.n_params for s in self.vqcs)

    def pad(self, v: np.ndarray) -> np.ndarray:
        """Place a hidden-size encoded vector on the first qubits; the rest stay at 0."""
        out = np.zeros(v.shape[:-1] + (self.hidden_size + self.input_size,))
        out[..., : v.shape[-1]] = v
        return out


def qlstm_step(cell: QLstmCellSpec, params, x_t, h_prev, c_prev):
    """One reference step on the statevector simulator.

    ``x_t`` and ``h_prev`` lie in ``[-1, 1]``.  Returns ``(h_t, c_t, y_t)``.
    """
    x_t, h_prev, c_prev = (np.asarray(a, dtype=float) for a in (x_t, h_prev, c_prev))
    H = cell.hidden_size
    if x_t.shape != (cell.input_size,) or h_prev.shape != (H,) or c_prev.shape != (H,):
        raise ValueError("dimension mismatch with the cell spec")
    if len(params) != 6:
        raise ValueError("need one parameter vector per VQC")
    v = to_unit(np.concatenate([h_prev, x_t]))
    a = [vqc_forward(cell.vqcs[j], params[j], v) for j in range(4)]
    f, i, o = sigmoid(a[0]), sigmoid(a[1]), sigmoid(a[3])
    c = f * c_prev + i * np.tanh(a[2])
    h = vqc_forward(cell.vqcs[4], params[4], cell.pad(to_unit(o * np.tanh(c))))
    y = vqc_forward(cell.vqcs[5], params[5], cell.pad(to_unit(h)))
    return h, c, y


class QLstmRunner:
    """Batched unroll of a quantum LSTM cell with cached activations for BPTT."""

    def __init__(self, cell: QLstmCellSpec, params, need_param_grad: bool = True):
        self.cell = cell
        self.engines = [VqcEngine(s, p, need_param_grad) for s, p in zip(cell.vqcs, params)]

    def forward(self, xs: np.ndarray, flip_fn=None) -> np.ndarray:
        """``xs`` of shape ``(B, S, input_size)`` in ``[-1, 1]`` -> ``y`` of shape ``(B, S, output_size)``.

        ``flip_fn(shape)`` supplies readout sign flips (noise) or ``None``.
        """
        B, S, _ = xs.shape
        H = self.cell.hidden_size
        flips = flip_fn or (lambda shape: None)
        h, c = np.zeros((B, H)), np.zeros((B, H))
        cache = {k: [] for k in ("v", "z", "hh", "f", "i", "cc", "o", "c_prev", "c", "fl")}
        ys = np.empty((B, S, self.cell.output_size))
        for s in range(S):
            v = to_unit(np.concatenate([h, xs[:, s]], axis=1))
            fl = [flips((B, H)) for _ in range(5)] + [flips((B, self.cell.output_size))]
            a = [self.engines[j].forward(v, fl[j]) for j in range(4)]
            f, i, o, cc = sigmoid(a[0]), sigmoid(a[1]), sigmoid(a[3]), np.tanh(a[2])
            c_prev = c
            c = f * c_prev + i * cc
            z = self.cell.pad(to_unit(o * np.tanh(c)))
            h = self.engines[4].forward(z, fl[4])
            hh = self.cell.pad(to_unit(h))
            ys[:, s] = self.engines[5].forward(hh, fl[5])
            for k, val in (("v", v), ("z", z), ("hh", hh), ("f", f), ("i", i), ("cc", cc), ("o", o),
                           ("c_prev", c_prev), ("c", c), ("fl", fl)):
                cache[k].append(val)
        self.cache = cache
        return ys

    def backward(self, g_y: np.ndarray, need_param_grad: bool = True):
        """Backpropagation through time.

        Returns ``(param_grads, g_x)``: one gradient per VQC and the gradient
        with respect to the cell inputs, shape ``(B, S, input_size)``.
        """
        cache, H = self.cache, self.cell.hidden_size
        B, S, _ = g_y.shape
        stack = lambda k: np.concatenate(cache[k], axis=0)  # noqa: E731  (S*B, ...) time-major
        fl = [None if cache["fl"][0][j] is None else np.concatenate([f[j] for f in cache["fl"]]) for j in range(6)]
        V, Z, HH = stack("v"), stack("z"), stack("hh")
        jv = [self.engines[j].input_jacobian(V, fl[j]).reshape(S, B, H, -1) for j in range(4)]
        jz = self.engines[4].input_jacobian(Z, fl[4]).reshape(S, B, H, -1)[..., :H]
        jh = self.engines[5].input_jacobian(HH, fl[5]).reshape(S, B, -1, HH.shape[1])[..., :H]

        g_a = [np.empty((S, B, H)) for _ in range(5)]
        g_x = np.empty((B, S, self.cell.input_size))
        g_h_next = np.zeros((B, H))
        g_c_next = np.zeros((B, H))
        for s in range(S - 1, -1, -1):
            f, i, cc, o, c_prev, c = (cache[k][s] for k in ("f", "i", "cc", "o", "c_prev", "c"))
            g_a[4][s] = g_h_next + 0.5 * np.einsum("bk,bkj->bj", g_y[:, s], jh[s])
            g_zu = 0.5 * np.einsum("bk,bkj->bj", g_a[4][s], jz[s])
            tc = np.tanh(c)
            g_o = g_zu * tc
            g_c = g_c_next + g_zu * o * (1 - tc * tc)
            g_a[0][s] = g_c * c_prev * f * (1 - f)
            g_a[1][s] = g_c * cc * i * (1 - i)
            g_a[2][s] = g_c * i * (1 - cc * cc)
            g_a[3][s] = g_o * o * (1 - o)
            g_v = 0.5 * sum(np.einsum("bk,bkj->bj", g_a[j][s], jv[j][s]) for j in range(4))
            g_h_next, g_x[:, s] = g_v[:, :H], g_v[:, H:]
            g_c_next = g_c * f
        grads = None
        if need_param_grad:
            ins = [V, V, V, V, Z]
            grads = [self.engines[j].param_grad(ins[j], g_a[j].reshape(S * B, H), fl[j]) for j in range(5)]
            grads.append(self.engines[5].param_grad(HH, np.transpose(g_y, (1, 0, 2)).reshape(S * B, -1), fl[5]))
        return grads, g_x
