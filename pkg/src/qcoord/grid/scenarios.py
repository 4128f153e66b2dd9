"""Discrete RES/load scenarios around nominal daily profiles."""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .network import NetworkCase
from .profiles import RES_SHAPES, load_shape


@dataclass(frozen=True)
class ScenarioSpec:
    """Multiplicative truncated-Gaussian factors (mean 1, cut at +-3 sigma).

    One factor per scenario and RES unit, and per scenario and uncertain-load
    bus, held for the whole horizon.
    """

    horizon: int = 96
    sigma_res: float = 0.25
    sigma_load: float = 0.1
    load_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.sigma_res < 0 or self.sigma_load < 0 or self.sigma_res >= 1 / 3 or self.sigma_load >= 1 / 3:
            raise ValueError("sigmas must lie in [0, 1/3) so factors stay positive")
        if self.load_scale <= 0:
            raise ValueError("load_scale must be positive")


@dataclass(frozen=True)
class Scenario:
    probability: float
    res_power: np.ndarray  # (n_res, T)
    load_p: np.ndarray  # (n_bus, T)
    load_q: np.ndarray


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    """Stacked scenarios; arrays are indexed ``[scenario, unit/bus, t]``."""

    probabilities: np.ndarray
    res_buses: tuple[int, ...]
    res_power: np.ndarray
    load_p: np.ndarray
    load_q: np.ndarray

    def __post_init__(self) -> None:
        g = np.asarray(self.probabilities, dtype=float)
        s = g.size
        if s < 1 or np.any(g < 0) or abs(g.sum() - 1.0) > 1e-12:
            raise ValueError("scenario probabilities must be non-negative and sum to 1")
        if self.res_power.shape[0] != s or self.load_p.shape[0] != s or self.load_q.shape != self.load_p.shape:
            raise ValueError("scenario arrays disagree on the scenario count")
        if self.res_power.shape[1] != len(self.res_buses):
            raise ValueError("one RES series per RES bus required")
        if self.res_power.shape[2] != self.load_p.shape[2]:
            raise ValueError("all series must share the horizon length")
        object.__setattr__(self, "probabilities", g)

    def __len__(self) -> int:
        return self.probabilities.size

    def __getitem__(self, s: int) -> Scenario:
        return Scenario(float(self.probabilities[s]), self.res_power[s], self.load_p[s], self.load_q[s])

    @property
    def horizon(self) -> int:
        return self.load_p.shape[2]

    def subset(self, idx) -> "ScenarioSet":
        idx = np.asarray(idx)
        g = self.probabilities[idx]
        return ScenarioSet(g / g.sum(), self.res_buses, self.res_power[idx], self.load_p[idx], self.load_q[idx])

    # --- delimited persistence -------------------------------------------------

    def to_csv(self) -> str:
        """Rows ``kind,scenario,bus,v_0..v_{T-1}``; kind in {prob, res, load_p, load_q}."""
        T = self.horizon
        buf = io.StringIO()
        buf.write("kind,scenario,bus," + ",".join(f"v{t}" for t in range(T)) + "\n")
        for s in range(len(self)):
            buf.write(f"prob,{s},0,{float(self.probabilities[s])!r}" + ",0.0" * (T - 1) + "\n")
            for r, b in enumerate(self.res_buses):
                buf.write(f"res,{s},{b}," + ",".join(repr(float(v)) for v in self.res_power[s, r]) + "\n")
            for kind, arr in (("load_p", self.load_p), ("load_q", self.load_q)):
                for j in range(arr.shape[1]):
                    buf.write(f"{kind},{s},{j}," + ",".join(repr(float(v)) for v in arr[s, j]) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ScenarioSet":
        lines = text.strip().splitlines()
        T = len(lines[0].split(",")) - 3
        probs, res, lp, lq = {}, {}, {}, {}
        res_buses: list[int] = []
        for line in lines[1:]:
            parts = line.split(",")
            kind, s, b = parts[0], int(parts[1]), int(parts[2])
            vals = np.array([float(v) for v in parts[3:]])
            if kind == "prob":
                probs[s] = vals[0]
            elif kind == "res":
                res.setdefault(s, []).append(vals)
                if s == 0:
                    res_buses.append(b)
            elif kind == "load_p":
                lp.setdefault(s, []).append(vals)
            elif kind == "load_q":
                lq.setdefault(s, []).append(vals)
            else:
                raise ValueError(f"unknown row kind {kind!r}")
        S = len(probs)
        return cls(
            np.array([probs[s] for s in range(S)]),
            tuple(res_buses),
            np.array([res.get(s, np.zeros((0, T))) for s in range(S)]).reshape(S, len(res_buses), T),
            np.array([lp[s] for s in range(S)]),
            np.array([lq[s] for s in range(S)]),
        )


def _factors(rng: np.random.Generator, sigma: float, size: tuple) -> np.ndarray:
    if sigma == 0:
        return np.ones(size)
    return stats.truncnorm.rvs(-3.0, 3.0, loc=1.0, scale=sigma, size=size, random_state=rng)


def generate_scenarios(case: NetworkCase, count: int = 256, spec: ScenarioSpec = ScenarioSpec(), seed: int = 0) -> ScenarioSet:
    """Equiprobable scenarios, deterministic in ``(spec, seed)``."""
    if count < 1:
        raise ValueError("need at least one scenario")
    rng = np.random.default_rng(seed)
    T = spec.horizon
    res_atts = case.attached("res")
    unc = case.positions([a.bus for a in case.attached("uncertain_load")])
    for a in res_atts:
        if a.label not in RES_SHAPES:
            raise ValueError(f"no nominal profile for RES type {a.label!r}")
    f_res = _factors(rng, spec.sigma_res, (count, len(res_atts)))
    f_load = _factors(rng, spec.sigma_load, (count, unc.size))

    res = np.empty((count, len(res_atts), T))
    for r, a in enumerate(res_atts):
        res[:, r, :] = a.capacity * RES_SHAPES[a.label](T)[None, :] * f_res[:, r, None]
    mult = np.ones((count, case.n_buses))
    mult[:, unc] = f_load
    shape = spec.load_scale * load_shape(T)
    load_p = mult[:, :, None] * case.p_load[None, :, None] * shape[None, None, :]
    load_q = mult[:, :, None] * case.q_load[None, :, None] * shape[None, None, :]
    return ScenarioSet(np.full(count, 1.0 / count), tuple(a.bus for a in res_atts), res, load_p, load_q)
