"""Synthetic energy-community (EC) price response used as hidden ground truth."""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from ..grid.profiles import hours

EC_TYPES = ("residential", "commercial", "industrial")


@dataclass(frozen=True)
class Battery:
    """Energy cap in p.u.-hours, power cap in p.u., charge efficiency in (0, 1]."""

    energy_cap: float = 0.0
    power_cap: float = 0.0
    efficiency: float = 0.95

    def __post_init__(self) -> None:
        if self.energy_cap < 0 or self.power_cap < 0:
            raise ValueError("battery caps must be non-negative")
        if not 0 < self.efficiency <= 1:
            raise ValueError("efficiency must lie in (0, 1]")


@dataclass(frozen=True)
class ShiftableLoad:
    """Energy pool with a preferred schedule that can move in time.

    ``elasticity`` is the share of the mean preferred load moved per unit of
    relative price deviation; ``cap`` bounds the load at every step.
    """

    preferred: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cap: float = 0.0
    elasticity: float = 0.0

    def __post_init__(self) -> None:
        pref = np.asarray(self.preferred, dtype=float)
        if np.any(pref < 0) or (pref.size and np.any(pref > self.cap + 1e-15)):
            raise ValueError("preferred schedule must lie within [0, cap]")
        if self.elasticity < 0:
            raise ValueError("elasticity must be non-negative")
        object.__setattr__(self, "preferred", pref)

    @property
    def total(self) -> float:
        return float(self.preferred.sum())


@dataclass(frozen=True)
class EcGroundTruth:
    """Deterministic response ``P^EX = base + shifted + charge - discharge``."""

    ec_type: str
    base_load: np.ndarray
    battery: Battery
    shiftable: ShiftableLoad
    flexibility: float
    reference_price: float = 0.12
    dt: float = 0.25

    def __post_init__(self) -> None:
        if self.ec_type not in EC_TYPES:
            raise ValueError(f"unknown EC type {self.ec_type!r}")
        base = np.asarray(self.base_load, dtype=float)
        object.__setattr__(self, "base_load", base)
        if self.shiftable.preferred.size not in (0, base.size):
            raise ValueError("shiftable schedule length differs from the base load")
        if self.shiftable.preferred.size and self.shiftable.total > self.shiftable.cap * base.size + 1e-12:
            raise ValueError("shiftable energy exceeds what the per-step cap allows")

    @property
    def horizon(self) -> int:
        return self.base_load.size

    @property
    def nominal(self) -> np.ndarray:
        """Response under a flat price."""
        pref = self.shiftable.preferred
        return self.base_load + (pref if pref.size else 0.0)


@numba.njit(cache=True)
def _battery_greedy(prices, power_cap, energy_cap, eff, dt):
    T = prices.size
    charge = np.zeros(T)
    discharge = np.zeros(T)
    soc = np.zeros(T + 1)
    n_pairs = T * (T - 1) // 2
    gain = np.empty(n_pairs)
    ii = np.empty(n_pairs, np.int64)
    jj = np.empty(n_pairs, np.int64)
    k = 0
    for i in range(T):
        for j in range(i + 1, T):
            gain[k] = eff * prices[j] - prices[i]
            ii[k] = i
            jj[k] = j
            k += 1
    order = np.argsort(-gain, kind="mergesort")
    for idx in order:
        if gain[idx] <= 1e-12:
            break
        i, j = ii[idx], jj[idx]
        if discharge[i] > 0.0 or charge[j] > 0.0:
            continue
        amount = min(power_cap - charge[i], (power_cap - discharge[j]) / eff)
        if amount <= 0.0:
            continue
        room = energy_cap
        for t in range(i + 1, j + 1):
            room = min(room, energy_cap - soc[t])
        amount = min(amount, room / (eff * dt))
        if amount <= 1e-15:
            continue
        charge[i] += amount
        discharge[j] += eff * amount
        for t in range(i + 1, j + 1):
            soc[t] += eff * amount * dt
    return charge, discharge, soc


def battery_dispatch(battery: Battery, prices: np.ndarray, dt: float = 0.25) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Single-pass greedy arbitrage: price pairs ``(i < j)`` in order of
    ``eff*pi_j - pi_i``, each filled up to power and state-of-charge limits.

    Returns charge power, discharge power and the state of charge (``T+1``
    points, starting and ending empty).
    """
    p = np.ascontiguousarray(prices, dtype=float)
    if battery.power_cap == 0 or battery.energy_cap == 0:
        z = np.zeros(p.size)
        return z, z.copy(), np.zeros(p.size + 1)
    return _battery_greedy(p, battery.power_cap, battery.energy_cap, battery.efficiency, dt)


def shift_load(load: ShiftableLoad, prices: np.ndarray, reference_price: float) -> np.ndarray:
    """``s_t = clip(f_t + e * mean(f) * (mu - pi_t) / pi_ref, 0, cap)`` with ``mu``
    set so that ``sum s = sum f``."""
    f = load.preferred
    if f.size == 0:
        return np.zeros(np.asarray(prices).size)
    p = np.asarray(prices, dtype=float)
    slope = load.elasticity * f.mean() / reference_price
    if slope == 0 or f.sum() == 0:
        return f.copy()

    def sched(mu):
        return np.clip(f + slope * (mu - p), 0.0, load.cap)

    target = f.sum()
    lo = p.min() - (load.cap + f.max()) / slope - 1.0
    hi = p.max() + (load.cap + f.max()) / slope + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if sched(mid).sum() < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(mid)):
            break
    s = sched(0.5 * (lo + hi))
    # remove the last rounding residue on the unclipped steps
    free = (s > 0) & (s < load.cap)
    if free.any():
        s[free] += (target - s.sum()) / free.sum()
    return s


def ec_respond(truth: EcGroundTruth, prices) -> np.ndarray:
    """Net active exchange of the EC for a price series (p.u.)."""
    p = np.asarray(prices, dtype=float)
    if p.shape != truth.base_load.shape:
        raise ValueError(f"price series must have length {truth.horizon}")
    if not np.all(np.isfinite(p)):
        raise ValueError("prices must be finite")
    charge, discharge, _ = battery_dispatch(truth.battery, p, truth.dt)
    return truth.base_load + shift_load(truth.shiftable, p, truth.reference_price) + charge - discharge


# --- default communities ----------------------------------------------------------

def _bump(h, center, width):
    return np.exp(-(((h - center) / width) ** 2))


def demand_profile(ec_type: str, T: int = 96) -> np.ndarray:
    """Normalized (peak 1) total demand shape per EC type."""
    h = hours(T)
    if ec_type == "industrial":
        shape = 0.45 + 0.55 * (1 / (1 + np.exp(-(h - 7.5) * 2)) - 1 / (1 + np.exp(-(h - 20.5) * 2)))
    elif ec_type == "commercial":
        shape = 0.3 + 0.55 * _bump(h, 13.5, 4.0) + 0.35 * _bump(h, 19.0, 2.0)
    elif ec_type == "residential":
        shape = 0.3 + 0.25 * _bump(h, 8.0, 1.8) + 0.75 * _bump(h, 19.5, 2.2)
    else:
        raise ValueError(f"unknown EC type {ec_type!r}")
    return shape / shape.max()


# peak demand (p.u.), flexibility share, elasticity, battery (energy, power)
EC_DEFAULTS = {
    "industrial": (0.05, 0.40, 3.0, (0.024, 0.006)),
    "commercial": (0.035, 0.30, 2.5, (0.012, 0.003)),
    "residential": (0.03, 0.20, 2.0, (0.006, 0.0015)),
}


def default_ec(ec_type: str, T: int = 96, dt: float = 0.25, reference_price: float = 0.12) -> EcGroundTruth:
    """Default community of each type; flexibility ranks industrial > commercial > residential."""
    peak, flex, elasticity, (energy, power) = EC_DEFAULTS[ec_type]
    total = peak * demand_profile(ec_type, T)
    pref = flex * total
    return EcGroundTruth(
        ec_type,
        base_load=(1 - flex) * total,
        battery=Battery(energy, power, 0.95),
        shiftable=ShiftableLoad(pref, cap=2.0 * pref.max(), elasticity=elasticity),
        flexibility=flex,
        reference_price=reference_price,
        dt=dt,
    )


def zero_flex_ec(ec_type: str, T: int = 96, dt: float = 0.25) -> EcGroundTruth:
    """Same demand as :func:`default_ec` but with no battery and nothing shiftable."""
    peak = EC_DEFAULTS[ec_type][0]
    return EcGroundTruth(ec_type, peak * demand_profile(ec_type, T), Battery(), ShiftableLoad(), 0.0, dt=dt)
