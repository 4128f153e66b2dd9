"""CVaR-objective gradients with respect to EC prices, and the projected descent loop.

Chain used for one scenario ``s``::

    dC_s/dpi_tau = sum_{i,t} dC_s/dP_{i,t} * dP_{i,t}/dpi_tau - dt * sum_i P_{i,tau}

    dC_s/dP_{i,t} = dt * ( -pi_t + pi^DN_t
                           + beta1 * sum_j (1[V>Vmax] - 1[V<Vmin]) / (2V) * dVsq_j/dP_i
                           + beta2 * sum_l (1[F>Fmax] - 1[F<Fmin]) * path[l, k_i] )

with ``dVsq_j/dP_i = -2 (R_{j,k_i} + rho X_{j,k_i})`` from the linear power
flow.  The scenario expectations of the indicator terms are what the
estimator backends compute; everything else is deterministic.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from ..grid.cost import CostConfig, bin_values, cvar_objective, optimal_var, rectified_violations
from ..grid.cost import cost_breakdown, net_loads
from ..grid.network import NetworkCase, bulk_flows, bulk_voltage_sq
from ..grid.scenarios import ScenarioSet
from ..qae import MonteCarloEstimator, QaeEstimator, TargetFunction, estimate_expectation
from .ec import EcGroundTruth, ec_respond
from .prices import PriceBounds, PriceSignal, project_prices

Estimator = MonteCarloEstimator | QaeEstimator


class Surrogate(Protocol):
    """Anything mapping a price series to an EC exchange series, with its Jacobian."""

    def forward(self, prices: np.ndarray) -> np.ndarray: ...

    def jacobian(self, prices: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class LinearSurrogate:
    """``P = base + M (pi - pi0)``; smooth stand-in for oracle tests."""

    base: np.ndarray
    matrix: np.ndarray
    pi0: float | np.ndarray = 0.12

    def forward(self, prices):
        return self.base + self.matrix @ (np.asarray(prices, dtype=float) - self.pi0)

    def jacobian(self, prices):
        return np.array(self.matrix, dtype=float)


@dataclass(frozen=True)
class GroundTruthSurrogate:
    """The hidden EC model itself; the Jacobian uses central differences of size ``h``."""

    truth: EcGroundTruth
    h: float = 1e-6

    def forward(self, prices):
        return ec_respond(self.truth, prices)

    def jacobian(self, prices):
        p = np.asarray(prices, dtype=float)
        cols = []
        for tau in range(p.size):
            e = np.zeros(p.size)
            e[tau] = self.h
            cols.append((ec_respond(self.truth, p + e) - ec_respond(self.truth, p - e)) / (2 * self.h))
        return np.array(cols).T


@dataclass(frozen=True)
class CoordinationConfig:
    cost: CostConfig = field(default_factory=CostConfig)
    bounds: PriceBounds = PriceBounds()
    eta: float = 0.05
    max_iter: int = 30
    tol: float = 1e-6
    max_halvings: int = 6

    def __post_init__(self) -> None:
        if self.eta <= 0 or self.max_iter < 0 or self.tol < 0:
            raise ValueError("eta must be positive, max_iter and tol non-negative")


class DivergenceError(RuntimeError):
    pass


# --- grid state -----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GridState:
    """Everything the gradient needs at one price point."""

    prices: np.ndarray
    exchange: np.ndarray  # (n_ec, T)
    jacobians: np.ndarray  # (n_ec, T, T)
    voltage: np.ndarray  # (S, n_bus, T)
    flows: np.ndarray  # (S, n_lines, T)
    costs: np.ndarray  # (S,)


def evaluate_surrogates(surrogates: Sequence[Surrogate], prices, need_jacobian: bool = True):
    p = np.asarray(prices, dtype=float)
    ex = np.array([s.forward(p) for s in surrogates])
    jac = np.array([s.jacobian(p) for s in surrogates]) if need_jacobian else None
    if jac is not None and not np.all(np.isfinite(jac)):
        raise ValueError("surrogate Jacobian contains non-finite values")
    return ex, jac


def grid_state(case: NetworkCase, scenarios: ScenarioSet, prices, surrogates: Sequence[Surrogate],
               config: CostConfig = CostConfig(), need_jacobian: bool = True) -> GridState:
    if len(surrogates) != len(case.ec_buses):
        raise ValueError(f"need one surrogate per EC ({len(case.ec_buses)}), got {len(surrogates)}")
    p = np.asarray(prices, dtype=float)
    ex, jac = evaluate_surrogates(surrogates, p, need_jacobian)
    lp, lq = net_loads(case, scenarios, ex, config)
    v = np.sqrt(bulk_voltage_sq(case, lp, lq))
    f = bulk_flows(case, lp)
    costs = cost_breakdown(case, scenarios, p, ex, config).total
    return GridState(p, ex, jac, v, f, costs)


def ec_voltage_sensitivity(case: NetworkCase, config: CostConfig = CostConfig()) -> np.ndarray:
    """``dVsq_j / dP_i`` for every bus ``j`` and EC ``i``, shape ``(n_bus, n_ec)``."""
    k = case.positions(case.ec_buses)
    return -2.0 * (case.sens_r[:, k] + config.reactive_ratio * case.sens_x[:, k])


def ec_flow_sensitivity(case: NetworkCase) -> np.ndarray:
    """``dF_l / dP_i``, shape ``(n_lines, n_ec)``."""
    return case.path[:, case.positions(case.ec_buses)]


def tail_weights(costs, probabilities, v_alpha: float, config: CostConfig = CostConfig()) -> np.ndarray:
    """``gamma_s (1 + lam/(1-alpha) 1[C_s > v])``: the CVaR-tilted scenario weights."""
    g = np.asarray(probabilities, dtype=float)
    return g * (1.0 + config.lam / (1.0 - config.alpha) * (np.asarray(costs) > v_alpha))


# --- penalty terms --------------------------------------------------------------------

@dataclass(frozen=True)
class PenaltyTerm:
    """One rectified-penalty expectation and its effect on the EC exchanges.

    ``expectation`` is ``sum_s w_s g_s`` for the (unnormalized) weights
    used; ``sensitivity`` maps it onto ``dC/dP_{i,t}`` per EC (before
    ``beta * dt``); ``gradient`` is the price gradient it contributes.
    """

    kind: str
    element: int
    t: int
    side: str
    expectation: float
    sensitivity: np.ndarray
    gradient: np.ndarray
    queries: int = 0


def _term_values(state: GridState, kind: str, element: int, t: int, side: str, case: NetworkCase) -> np.ndarray:
    """Per-scenario ``g_s``: the signed violation indicator times the inner derivative."""
    if kind == "voltage":
        v = state.voltage[:, element, t]
        if side == "upper":
            return (v > case.v_max[element]) / (2.0 * v)
        return (v < case.v_min[element]) / (2.0 * v)
    if kind == "flow":
        f = state.flows[:, element, t]
        return (f > case.p_max[element]) * 1.0 if side == "upper" else (f < case.p_min[element]) * 1.0
    raise ValueError(f"unknown penalty kind {kind!r}")


def weighted_expectation(values: np.ndarray, weights: np.ndarray, estimator: Estimator, n_queries: list | None = None,
                         term_seed: int = 0) -> float:
    """``sum_s w_s g_s`` for non-negative ``g`` by the chosen backend.

    Monte Carlo draws scenarios directly (or averages exactly when
    ``samples`` is None).  QAE bins the values into ``2**n`` bins, loads the
    bin masses, and uses the within-bin mean of ``g / max g`` as the target.
    """
    g = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    total = float(w.sum())
    scale = float(g.max(initial=0.0))
    if scale <= 0 or total <= 0:
        return 0.0
    p = w / total
    if isinstance(estimator, MonteCarloEstimator):
        if estimator.samples is None:
            return total * float(p @ g)
        rng = np.random.default_rng([estimator.seed, term_seed])
        counts = rng.multinomial(estimator.samples, p)
        if n_queries is not None:
            n_queries.append(estimator.samples)
        return total * float(counts @ g) / estimator.samples
    binned = bin_values(g, p, estimator.n)
    f = np.clip(binned.bin_average(g / scale), 0.0, 1.0)
    res = estimate_expectation(binned.dist, TargetFunction(f), estimator)
    if n_queries is not None:
        n_queries.append(res.oracle_queries)
    return total * scale * res.value


def active_terms(state: GridState, case: NetworkCase) -> list[tuple[str, int, int, str]]:
    """``(kind, element, t, side)`` for every penalty with at least one violating scenario."""
    out = []
    for kind, arr, hi, lo in (("voltage", state.voltage, case.v_max, case.v_min),
                              ("flow", state.flows, case.p_max, case.p_min)):
        up = np.argwhere((arr > hi[None, :, None]).any(axis=0))
        dn = np.argwhere((arr < lo[None, :, None]).any(axis=0))
        out += [(kind, int(j), int(t), "upper") for j, t in up]
        out += [(kind, int(j), int(t), "lower") for j, t in dn]
    return out


def estimate_penalty_gradient(
    case: NetworkCase,
    scenarios: ScenarioSet,
    prices,
    surrogates: Sequence[Surrogate],
    element: int,
    t: int,
    estimator: Estimator = MonteCarloEstimator(),
    kind: str = "voltage",
    side: str = "upper",
    weights: np.ndarray | None = None,
    config: CostConfig = CostConfig(),
    state: GridState | None = None,
) -> PenaltyTerm:
    """Gradient of ``sum_s w_s [V_{j,s,t} - Vmax]_+`` (or the other sides/kinds) w.r.t. prices.

    ``element`` is a bus id for voltages and a line position for flows.
    ``weights`` default to the scenario probabilities.
    """
    state = state or grid_state(case, scenarios, prices, surrogates, config)
    j = case.pos[element] if kind == "voltage" else element
    w = scenarios.probabilities if weights is None else np.asarray(weights, dtype=float)
    queries: list = []
    e = weighted_expectation(_term_values(state, kind, j, t, side, case), w, estimator, queries, term_seed=j * 100003 + t)
    sens = ec_voltage_sensitivity(case, config)[j] if kind == "voltage" else ec_flow_sensitivity(case)[j]
    sign = 1.0 if side == "upper" else -1.0
    dC_dP = sign * e * sens  # per EC, at step t
    grad = dC_dP @ state.jacobians[:, t, :]
    return PenaltyTerm(kind, element, t, side, e, sign * sens, grad, int(sum(queries)))


# --- full gradient --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GradientResult:
    grad_prices: np.ndarray
    grad_v: float
    objective: float
    expected_cost: float
    cvar_term: float
    costs: np.ndarray
    queries: int
    n_terms: int
    state: GridState


def cvar_gradient(
    prices,
    v_alpha: float,
    case: NetworkCase,
    scenarios: ScenarioSet,
    surrogates: Sequence[Surrogate],
    estimator: Estimator = MonteCarloEstimator(),
    config: CostConfig = CostConfig(),
    state: GridState | None = None,
) -> GradientResult:
    """``(dC/dpi, dC/dv_alpha)`` of the CVaR objective with subgradient 0 at kinks."""
    state = state or grid_state(case, scenarios, prices, surrogates, config)
    dt = config.dt
    T = state.prices.size
    gam = scenarios.probabilities
    w = tail_weights(state.costs, gam, v_alpha, config)
    W = float(w.sum())

    # energy terms: dC_s/dP_{i,t} = dt (pi^DN_t - pi_t), same for every scenario
    dC_dP = np.tile(dt * (config.price_dn - state.prices), (state.exchange.shape[0], 1)) * W
    queries = []
    n_terms = 0
    if isinstance(estimator, MonteCarloEstimator) and estimator.samples is None:
        # exact scenario averages for every term at once
        v, f = state.voltage, state.flows
        sig_v = ((v > case.v_max[None, :, None]) * 1.0 - (v < case.v_min[None, :, None])) / (2.0 * v)
        sig_f = (f > case.p_max[None, :, None]) * 1.0 - (f < case.p_min[None, :, None])
        ev = np.einsum("s,sjt->jt", w, sig_v)
        ef = np.einsum("s,slt->lt", w, sig_f)
        dC_dP += dt * (config.beta1 * ec_voltage_sensitivity(case, config).T @ ev
                       + config.beta2 * ec_flow_sensitivity(case).T @ ef)
        n_terms = len(active_terms(state, case))
    else:
        sens_v, sens_f = ec_voltage_sensitivity(case, config), ec_flow_sensitivity(case)
        for kind, j, t, side in active_terms(state, case):
            e = weighted_expectation(_term_values(state, kind, j, t, side, case), w, estimator, queries,
                                     term_seed=(j * 100003 + t) * 2 + (side == "upper"))
            sign = 1.0 if side == "upper" else -1.0
            if kind == "voltage":
                dC_dP[:, t] += dt * config.beta1 * sign * e * sens_v[j]
            else:
                dC_dP[:, t] += dt * config.beta2 * sign * e * sens_f[j]
            n_terms += 1
    grad = np.einsum("it,itk->k", dC_dP, state.jacobians) - dt * W * state.exchange.sum(axis=0)
    tail_prob = float(gam @ (state.costs > v_alpha))
    grad_v = config.lam * (1.0 - tail_prob / (1.0 - config.alpha))
    obj = cvar_objective(state.costs, gam, v_alpha, config)
    exp_cost = float(gam @ state.costs)
    return GradientResult(grad, grad_v, obj, exp_cost, obj - exp_cost, state.costs, int(sum(queries)), n_terms, state)


# --- descent loop ---------------------------------------------------------------------

LOG_COLUMNS = ("iteration", "objective", "expected_cost", "cvar_term", "v_alpha", "max_violation",
               "mean_voltage_penalty", "grad_norm", "step", "queries", "wall_s")


@dataclass
class IterationLog:
    """Append-only per-iteration record."""

    rows: list[dict] = field(default_factory=list)

    def append(self, **row) -> None:
        missing = set(LOG_COLUMNS) - set(row)
        if missing:
            raise ValueError(f"log row lacks {sorted(missing)}")
        self.rows.append({k: row[k] for k in LOG_COLUMNS})

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)


@dataclass(frozen=True, eq=False)
class CoordinationResult:
    prices: PriceSignal
    v_alpha: float
    log: IterationLog
    exchange: np.ndarray


def mean_voltage_penalty(case: NetworkCase, scenarios: ScenarioSet, exchange, config: CostConfig = CostConfig()) -> float:
    """Probability-weighted voltage-violation penalty ``beta1 dt sum [.]_+``."""
    lp, lq = net_loads(case, scenarios, exchange, config)
    v = np.sqrt(bulk_voltage_sq(case, lp, lq))
    pen = config.beta1 * config.dt * rectified_violations(v, case.v_min, case.v_max).sum(axis=(1, 2))
    return float(scenarios.probabilities @ pen)


def flat_prices(bounds: PriceBounds, T: int) -> np.ndarray:
    return project_prices(np.full(T, bounds.target_mean), bounds).values


def run_coordination(
    case: NetworkCase,
    scenarios: ScenarioSet,
    surrogates: Sequence[Surrogate],
    config: CoordinationConfig = CoordinationConfig(),
    estimator: Estimator = MonteCarloEstimator(),
    initial_prices=None,
    log_fn=None,
) -> CoordinationResult:
    """Projected gradient descent on prices with ``v_alpha`` refreshed to the optimal VaR.

    Steps are taken on normalized prices ``x = 2 (pi - lo)/(hi - lo) - 1``
    with ``x <- x - eta * g / max|g|``; a step that raises the objective is
    halved up to ``max_halvings`` times, after which the loop stops.
    """
    cost = config.cost
    T = scenarios.horizon
    lo, hi = config.bounds.arrays(T)
    half_range = 0.5 * (hi - lo)
    prices = project_prices(flat_prices(config.bounds, T) if initial_prices is None else initial_prices,
                            config.bounds).values
    log = IterationLog()
    state = grid_state(case, scenarios, prices, surrogates, cost)
    v_alpha = optimal_var(state.costs, scenarios.probabilities, cost.alpha)
    eta = config.eta
    t0 = time.perf_counter()
    for it in range(config.max_iter + 1):
        res = cvar_gradient(prices, v_alpha, case, scenarios, surrogates, estimator, cost, state)
        if not np.isfinite(res.objective) or not np.all(np.isfinite(res.grad_prices)):
            raise DivergenceError(f"non-finite objective or gradient at iteration {it}")
        g_x = res.grad_prices * half_range  # gradient in normalized coordinates
        gnorm = float(np.linalg.norm(g_x))
        vmax = float(np.max(rectified_violations(state.voltage, case.v_min, case.v_max), initial=0.0))
        row = dict(iteration=it, objective=res.objective, expected_cost=res.expected_cost, cvar_term=res.cvar_term,
                   v_alpha=v_alpha, max_violation=vmax,
                   mean_voltage_penalty=mean_voltage_penalty(case, scenarios, state.exchange, cost),
                   grad_norm=gnorm, step=eta, queries=res.queries, wall_s=time.perf_counter() - t0)
        log.append(**row)
        if log_fn is not None:
            log_fn(row)
        if it == config.max_iter or gnorm < config.tol:
            break
        direction = g_x / np.max(np.abs(g_x))
        accepted = False
        for _ in range(config.max_halvings + 1):
            x = (prices - lo) / half_range - 1.0 - eta * direction
            trial = project_prices(lo + (x + 1.0) * half_range, config.bounds).values
            trial_state = grid_state(case, scenarios, trial, surrogates, cost)
            trial_v = optimal_var(trial_state.costs, scenarios.probabilities, cost.alpha)
            trial_obj = cvar_objective(trial_state.costs, scenarios.probabilities, trial_v, cost)
            if not np.isfinite(trial_obj):
                raise DivergenceError(f"objective became non-finite at iteration {it}")
            if trial_obj <= res.objective:
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            break
        prices, state, v_alpha = trial, trial_state, trial_v
    signal = project_prices(prices, config.bounds)
    return CoordinationResult(signal, v_alpha, log, state.exchange)
