"""Per-scenario operating cost and the CVaR objective.

Units: powers in p.u., prices in scaled currency per p.u.-hour, ``dt`` in hours.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..qae import DiscreteDistribution
from .network import NetworkCase, bulk_flows, bulk_voltage_sq
from .profiles import default_price_dn
from .scenarios import Scenario, ScenarioSet


@dataclass(frozen=True)
class CostConfig:
    """Objective weights.

    ``beta1``/``beta2`` (voltage/flow penalty weights) and ``reactive_ratio``
    (EC reactive exchange per unit of active exchange) are module defaults,
    not published values.
    """

    alpha: float = 0.95
    lam: float = 1.0
    beta1: float = 100.0
    beta2: float = 100.0
    price_dn: np.ndarray = field(default_factory=lambda: default_price_dn(96))
    dt: float = 0.25
    reactive_ratio: float = 0.33

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.lam < 0 or self.beta1 < 0 or self.beta2 < 0:
            raise ValueError("lam, beta1 and beta2 must be non-negative")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "price_dn", np.asarray(self.price_dn, dtype=float))


@dataclass(frozen=True)
class CostBreakdown:
    """Per-scenario components, each of shape ``(S,)``."""

    ec_revenue: np.ndarray  # -sum pi^EC P^EX,EC dt (identical across scenarios)
    upstream: np.ndarray
    voltage_penalty: np.ndarray
    flow_penalty: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.ec_revenue + self.upstream + self.voltage_penalty + self.flow_penalty


def net_loads(case: NetworkCase, scenarios: ScenarioSet, ec_exchange: np.ndarray, config: CostConfig) -> tuple[np.ndarray, np.ndarray]:
    """Net active/reactive load per bus, shape ``(S, n_bus, T)``."""
    T = scenarios.horizon
    ec = np.asarray(ec_exchange, dtype=float)
    if ec.shape != (len(case.ec_buses), T):
        raise ValueError(f"EC exchange must have shape ({len(case.ec_buses)}, {T}), got {ec.shape}")
    p = scenarios.load_p.copy()
    q = scenarios.load_q.copy()
    res_pos = case.positions(scenarios.res_buses)
    np.add.at(p, (slice(None), res_pos), -scenarios.res_power)
    ec_pos = case.positions(case.ec_buses)
    p[:, ec_pos, :] += ec[None]
    q[:, ec_pos, :] += config.reactive_ratio * ec[None]
    return p, q


def rectified_violations(v: np.ndarray, v_min: np.ndarray, v_max: np.ndarray) -> np.ndarray:
    """``[V - V_max]_+ + [V_min - V]_+`` for voltages ``(..., n_bus, T)``."""
    return np.maximum(v - v_max[:, None], 0.0) + np.maximum(v_min[:, None] - v, 0.0)


def cost_breakdown(
    case: NetworkCase,
    scenarios: ScenarioSet,
    prices: np.ndarray,
    ec_exchange: np.ndarray,
    config: CostConfig = CostConfig(),
) -> CostBreakdown:
    T = scenarios.horizon
    prices = np.asarray(prices, dtype=float)
    if prices.shape != (T,) or config.price_dn.shape != (T,):
        raise ValueError(f"price series must have length {T}")
    p, q = net_loads(case, scenarios, ec_exchange, config)
    dt = config.dt
    revenue = -dt * float(np.sum(prices * np.asarray(ec_exchange).sum(axis=0)))
    upstream = dt * (p.sum(axis=1) @ config.price_dn)
    v = np.sqrt(bulk_voltage_sq(case, p, q))
    vpen = config.beta1 * dt * rectified_violations(v, case.v_min, case.v_max).sum(axis=(1, 2))
    flows = bulk_flows(case, p)
    fviol = np.maximum(flows - case.p_max[:, None], 0.0) + np.maximum(case.p_min[:, None] - flows, 0.0)
    fpen = config.beta2 * dt * fviol.sum(axis=(1, 2))
    S = len(scenarios)
    return CostBreakdown(np.full(S, revenue), upstream, vpen, fpen)


def scenario_costs(case, scenarios, prices, ec_exchange, config: CostConfig = CostConfig()) -> np.ndarray:
    return cost_breakdown(case, scenarios, prices, ec_exchange, config).total


def scenario_cost(case: NetworkCase, scenario: Scenario | ScenarioSet, prices, ec_exchange, config: CostConfig = CostConfig()) -> float:
    """``C_s`` for a single scenario."""
    if isinstance(scenario, Scenario):
        scenario = ScenarioSet(
            np.ones(1), case.res_buses, scenario.res_power[None], scenario.load_p[None], scenario.load_q[None]
        )
    if len(scenario) != 1:
        raise ValueError("expected a single scenario")
    return float(scenario_costs(case, scenario, prices, ec_exchange, config)[0])


def cvar_objective(costs, probabilities, v_alpha: float, config: CostConfig = CostConfig()) -> float:
    """``sum g C + lam (v + sum g [C - v]_+ / (1 - alpha))``."""
    c = np.asarray(costs, dtype=float)
    g = np.asarray(probabilities, dtype=float)
    if c.shape != g.shape or abs(g.sum() - 1.0) > 1e-12 or np.any(g < 0):
        raise ValueError("invalid scenario probabilities")
    tail = float(g @ np.maximum(c - v_alpha, 0.0))
    return float(g @ c) + config.lam * (v_alpha + tail / (1.0 - config.alpha))


def optimal_var(costs, probabilities, alpha: float) -> float:
    """Smallest cost level ``v`` with ``P(C > v) <= 1 - alpha`` (the alpha-quantile)."""
    c = np.asarray(costs, dtype=float)
    g = np.asarray(probabilities, dtype=float)
    if c.size == 0:
        raise ValueError("no costs")
    order = np.argsort(c, kind="stable")
    cum = np.cumsum(g[order])
    k = int(np.searchsorted(cum, alpha - 1e-12, side="left"))
    return float(c[order][min(k, c.size - 1)])


@dataclass(frozen=True, eq=False)
class BinnedVoltage:
    """Scenario voltages at one (bus, t) binned into ``2**n`` equal-width bins."""

    dist: DiscreteDistribution
    centers: np.ndarray
    edges: np.ndarray
    bin_index: np.ndarray
    weights: np.ndarray  # normalized scenario weights

    def bin_average(self, values: np.ndarray) -> np.ndarray:
        """Weighted within-bin mean of a per-scenario quantity (0 for empty bins)."""
        num = np.bincount(self.bin_index, weights=self.weights * np.asarray(values, float), minlength=self.dist.size)
        den = np.bincount(self.bin_index, weights=self.weights, minlength=self.dist.size)
        return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def bin_values(values: np.ndarray, weights: np.ndarray, n: int, max_qubits: int = 16) -> BinnedVoltage:
    """Bin arbitrary per-scenario values over ``[min, max]``; zero width gives a point mass."""
    if not 1 <= n <= max_qubits:
        raise ValueError(f"n must lie in 1..{max_qubits}")
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    N = 1 << n
    lo, hi = float(v.min()), float(v.max())
    if hi - lo <= 1e-15 * max(1.0, abs(lo)):
        idx = np.zeros(v.size, dtype=int)
        edges = np.full(N + 1, lo)
        centers = np.full(N, lo)
    else:
        edges = np.linspace(lo, hi, N + 1)
        idx = np.minimum(((v - lo) / (hi - lo) * N).astype(int), N - 1)
        centers = 0.5 * (edges[1:] + edges[:-1])
    masses = np.bincount(idx, weights=w, minlength=N)
    masses = masses / masses.sum()
    return BinnedVoltage(DiscreteDistribution(n, masses), centers, edges, idx, w)


def scenario_voltages(case: NetworkCase, scenarios: ScenarioSet, ec_exchange, config: CostConfig = CostConfig()) -> np.ndarray:
    """Voltage magnitudes ``(S, n_bus, T)``."""
    p, q = net_loads(case, scenarios, ec_exchange, config)
    return np.sqrt(bulk_voltage_sq(case, p, q))


def voltage_distribution(
    case: NetworkCase,
    scenarios: ScenarioSet,
    ec_exchange,
    bus: int,
    t: int,
    n: int,
    weights: np.ndarray | None = None,
    config: CostConfig = CostConfig(),
) -> BinnedVoltage:
    """Distribution of ``V`` at ``(bus, t)`` over scenarios as ``2**n`` bins."""
    v = scenario_voltages(case, scenarios, ec_exchange, config)[:, case.pos[bus], t]
    return bin_values(v, scenarios.probabilities if weights is None else weights, n)
