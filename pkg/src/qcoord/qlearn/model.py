"""Hybrid Q-TCN-LSTM surrogate mapping an EC price series to its response."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .layers import QLstmCellSpec, QLstmRunner, QTcnLayerSpec
from .vqc import VqcEngine, VqcSpec, readout_flips

FORMAT_VERSION = 1


@dataclass(frozen=True)
class Scaling:
    """Affine maps to the unit interval: prices by their bounds, responses by dataset range."""

    price_lo: float = 0.04
    price_hi: float = 0.24
    resp_lo: float = 0.0
    resp_hi: float = 1.0

    def __post_init__(self) -> None:
        if not (self.price_hi > self.price_lo and self.resp_hi > self.resp_lo):
            raise ValueError("scaling ranges must be non-degenerate")

    def price(self, p: np.ndarray) -> np.ndarray:
        return (np.asarray(p, dtype=float) - self.price_lo) / (self.price_hi - self.price_lo)

    def response(self, r: np.ndarray) -> np.ndarray:
        return (np.asarray(r, dtype=float) - self.resp_lo) / (self.resp_hi - self.resp_lo)

    def unresponse(self, z: np.ndarray) -> np.ndarray:
        return self.resp_lo + (self.resp_hi - self.resp_lo) * np.asarray(z, dtype=float)


@dataclass(eq=False)
class QTcnLstmModel:
    """Q-TCN features -> quantum LSTM unroll -> affine head plus a per-step bias.

    All trainable values sit in ``params``, keyed ``tcn``, ``lstm0``..``lstm5``,
    ``head_w``, ``head_b`` and ``time_bias`` (the latter may be empty).
    """

    tcn: QTcnLayerSpec
    cell: QLstmCellSpec
    horizon: int
    params: dict[str, np.ndarray]
    scaling: Scaling = field(default_factory=Scaling)
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.cell.input_size != self.tcn.vqc.n_outputs:
            raise ValueError("LSTM input size must equal the Q-TCN feature count")
        if self.horizon < self.tcn.kernel_size:
            raise ValueError("horizon shorter than the Q-TCN kernel")
        expect = self._shapes()
        for k, shape in expect.items():
            v = np.asarray(self.params.get(k, np.zeros(0 if k == "time_bias" else shape)), dtype=float)
            if k == "time_bias" and v.size == 0:
                v = np.zeros(0)
            elif v.shape != shape:
                raise ValueError(f"parameter {k!r} has shape {v.shape}, expected {shape}")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"parameter {k!r} is not finite")
            self.params[k] = v
        extra = set(self.params) - set(expect)
        if extra:
            raise ValueError(f"unknown parameters {sorted(extra)}")

    def _shapes(self) -> dict[str, tuple]:
        shapes = {"tcn": (self.tcn.vqc.n_params,)}
        for j, s in enumerate(self.cell.vqcs):
            shapes[f"lstm{j}"] = (s.n_params,)
        shapes["head_w"] = (self.cell.output_size,)
        shapes["head_b"] = (1,)
        shapes["time_bias"] = (self.horizon,)
        return shapes

    @classmethod
    def default(cls, horizon: int = 96, seed: int = 0, scaling: Scaling | None = None,
                tcn_outputs: int = 2, hidden_size: int = 3, time_bias: bool = True) -> "QTcnLstmModel":
        """4-qubit 3-layer ``skip`` Q-TCN, 2-layer ``ring`` LSTM VQCs."""
        tcn = QTcnLayerSpec(VqcSpec(4, 3, entanglement="skip", n_outputs=tcn_outputs), kernel_size=4)
        cell = QLstmCellSpec.build(hidden_size, tcn_outputs, n_layers=2, entanglement="ring")
        rng = np.random.default_rng(seed)
        params = {"tcn": rng.normal(0, 0.3, tcn.vqc.n_params)}
        for j, s in enumerate(cell.vqcs):
            params[f"lstm{j}"] = rng.normal(0, 0.3, s.n_params)
        params["head_w"] = rng.normal(0, 0.1, cell.output_size)
        params["head_b"] = np.zeros(1)
        params["time_bias"] = np.zeros(horizon if time_bias else 0)
        return cls(tcn, cell, horizon, params, scaling or Scaling())

    # --- flat parameter view ----------------------------------------------------

    @property
    def keys(self) -> list[str]:
        return list(self._shapes())

    def flat(self) -> np.ndarray:
        return np.concatenate([self.params[k] for k in self.keys])

    def set_flat(self, vec: np.ndarray) -> None:
        pos = 0
        for k in self.keys:
            n = self.params[k].size
            self.params[k] = np.array(vec[pos:pos + n], dtype=float)
            pos += n
        if pos != vec.size:
            raise ValueError("flat vector length mismatch")

    def copy(self) -> "QTcnLstmModel":
        return replace(self, params={k: v.copy() for k, v in self.params.items()}, meta=dict(self.meta))

    # --- forward / backward -------------------------------------------------------

    def _check_prices(self, prices) -> np.ndarray:
        p = np.atleast_2d(np.asarray(prices, dtype=float))
        if p.shape[-1] != self.horizon:
            raise ValueError(f"price series must have length {self.horizon}")
        if not np.all(np.isfinite(p)):
            raise ValueError("prices must be finite")
        return p

    def _run(self, x: np.ndarray, rng=None, noise: float = 0.0, need_param_grad: bool = False):
        """Normalized forward pass.  ``x`` is ``(B, T)`` in ``[0, 1]``."""
        if np.any(x < -1e-12) or np.any(x > 1 + 1e-12):
            raise ValueError("normalized prices must lie in [0, 1]; check the price bounds")
        x = np.clip(x, 0.0, 1.0)
        B, T = x.shape
        flip_fn = (lambda shape: readout_flips(rng, noise, shape)) if noise > 0 and rng is not None else None
        tcn_engine = VqcEngine(self.tcn.vqc, self.params["tcn"], need_param_grad)
        win = self.tcn.windows(x)  # (B, S, K)
        S = win.shape[1]
        wflat = win.reshape(B * S, -1)
        tflip = flip_fn((B * S, self.tcn.vqc.n_outputs)) if flip_fn else None
        feats = tcn_engine.forward(wflat, tflip).reshape(B, S, -1)
        runner = QLstmRunner(self.cell, [self.params[f"lstm{j}"] for j in range(6)], need_param_grad)
        ys = runner.forward(feats, flip_fn)
        pos = np.arange(T) // self.tcn.stride  # latest position ending at or before t
        y_t = ys[:, pos]  # (B, T, out)
        out = y_t @ self.params["head_w"] + self.params["head_b"][0]
        if self.params["time_bias"].size:
            out = out + self.params["time_bias"][None, :]
        state = dict(tcn_engine=tcn_engine, wflat=wflat, tflip=tflip, runner=runner, y_t=y_t, pos=pos, S=S)
        return out, state

    def _backward(self, state, g_out: np.ndarray, need_param_grad: bool = True, need_input_grad: bool = False):
        B, T = g_out.shape
        S = state["S"]
        w = self.params["head_w"]
        grads = {}
        if need_param_grad:
            grads["head_w"] = np.einsum("bt,btk->k", g_out, state["y_t"])
            grads["head_b"] = np.array([g_out.sum()])
            grads["time_bias"] = g_out.sum(axis=0) if self.params["time_bias"].size else np.zeros(0)
        g_ys = np.zeros((B, S, w.size))
        np.add.at(g_ys, (slice(None), state["pos"]), g_out[:, :, None] * w[None, None, :])
        lstm_grads, g_feat = state["runner"].backward(g_ys, need_param_grad)
        g_feat = g_feat.reshape(B * S, -1)
        eng = state["tcn_engine"]
        if need_param_grad:
            grads["tcn"] = eng.param_grad(state["wflat"], g_feat, state["tflip"])
            for j, g in enumerate(lstm_grads):
                grads[f"lstm{j}"] = g
        g_x = None
        if need_input_grad:
            jac = eng.input_jacobian(state["wflat"], state["tflip"])  # (B*S, m, K)
            g_win = np.einsum("nm,nmk->nk", g_feat, jac).reshape(B, S, -1)
            idx = self.tcn.window_index(T)
            g_x = np.zeros((B, T + 1))
            np.add.at(g_x, (slice(None), idx), g_win)
            g_x = g_x[:, :T]  # drop the padding slot
        return grads, g_x

    def loss_and_grad(self, x: np.ndarray, z: np.ndarray, rng=None, noise: float = 0.0):
        """Mean squared error over batch and horizon on normalized data, with its gradient."""
        out, state = self._run(x, rng, noise, need_param_grad=True)
        err = out - z
        loss = float(np.mean(err * err))
        grads, _ = self._backward(state, 2.0 * err / err.size)
        return loss, np.concatenate([grads[k] for k in self.keys])

    def predict_normalized(self, x: np.ndarray, rng=None, noise: float = 0.0) -> np.ndarray:
        return self._run(np.atleast_2d(x), rng, noise)[0]

    def forward(self, prices, rng=None, noise: float = 0.0) -> np.ndarray:
        """Responses (physical units) for one price series ``(T,)`` or a batch ``(B, T)``."""
        p = np.asarray(prices, dtype=float)
        out = self.scaling.unresponse(self.predict_normalized(self.scaling.price(self._check_prices(p)), rng, noise))
        return out[0] if p.ndim == 1 else out

    def jacobian(self, prices) -> np.ndarray:
        """``d response_t / d price_tau`` as a ``(T, T)`` matrix (noise-free)."""
        p = self._check_prices(prices)[0]
        T = self.horizon
        x = np.repeat(self.scaling.price(p)[None, :], T, axis=0)
        _, state = self._run(x)
        _, g_x = self._backward(state, np.eye(T), need_param_grad=False, need_input_grad=True)
        scale = (self.scaling.resp_hi - self.scaling.resp_lo) / (self.scaling.price_hi - self.scaling.price_lo)
        return g_x * scale

    # --- persistence --------------------------------------------------------------

    def to_dict(self) -> dict:
        def spec(v: VqcSpec) -> dict:
            return {"n_qubits": v.n_qubits, "n_layers": v.n_layers, "rotation_axes": list(v.rotation_axes),
                    "entanglement": v.entanglement, "n_outputs": v.n_outputs}
        return {
            "format_version": FORMAT_VERSION,
            "kind": "qtcn_lstm",
            "horizon": self.horizon,
            "tcn": {"kernel_size": self.tcn.kernel_size, "dilation": self.tcn.dilation, "stride": self.tcn.stride,
                    "vqc": spec(self.tcn.vqc)},
            "lstm": {"hidden_size": self.cell.hidden_size, "input_size": self.cell.input_size,
                     "vqcs": [spec(v) for v in self.cell.vqcs]},
            "scaling": vars(self.scaling),
            "params": {k: self.params[k].tolist() for k in self.keys},
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QTcnLstmModel":
        if d.get("format_version") != FORMAT_VERSION or d.get("kind") != "qtcn_lstm":
            raise ValueError(f"unsupported model document (version {d.get('format_version')!r})")

        def spec(v: dict) -> VqcSpec:
            return VqcSpec(v["n_qubits"], v["n_layers"], tuple(v["rotation_axes"]), v["entanglement"], v["n_outputs"])
        t = d["tcn"]
        tcn = QTcnLayerSpec(spec(t["vqc"]), t["kernel_size"], t["dilation"], t["stride"])
        ls = d["lstm"]
        cell = QLstmCellSpec(ls["hidden_size"], ls["input_size"], tuple(spec(v) for v in ls["vqcs"]))
        params = {k: np.asarray(v, dtype=float) for k, v in d["params"].items()}
        return cls(tcn, cell, d["horizon"], params, Scaling(**d["scaling"]), dict(d.get("meta", {})))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "QTcnLstmModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def count_parameters(model) -> int:
    """Trainable parameter count of a quantum model or a torch baseline."""
    if isinstance(model, QTcnLstmModel):
        return int(sum(model.params[k].size for k in model.keys))
    if hasattr(model, "parameters"):
        return int(sum(p.numel() for p in model.parameters() if p.requires_grad))
    if isinstance(model, VqcSpec):
        return model.n_params
    raise TypeError(f"cannot count parameters of {type(model).__name__}")
