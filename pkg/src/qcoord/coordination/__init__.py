"""EC ground truth, price signals, response datasets and the CVaR price-coordination loop."""
from ..qae import MonteCarloEstimator, QaeEstimator
from .data import ResponseDataset, generate_training_data
from .ec import (
    EC_DEFAULTS,
    EC_TYPES,
    Battery,
    EcGroundTruth,
    ShiftableLoad,
    battery_dispatch,
    default_ec,
    demand_profile,
    ec_respond,
    shift_load,
    zero_flex_ec,
)
from .gradient import (
    LOG_COLUMNS,
    CoordinationConfig,
    CoordinationResult,
    DivergenceError,
    GradientResult,
    GridState,
    GroundTruthSurrogate,
    IterationLog,
    LinearSurrogate,
    PenaltyTerm,
    Surrogate,
    active_terms,
    cvar_gradient,
    ec_flow_sensitivity,
    ec_voltage_sensitivity,
    estimate_penalty_gradient,
    flat_prices,
    grid_state,
    mean_voltage_penalty,
    run_coordination,
    tail_weights,
    weighted_expectation,
)
from .prices import PriceBounds, PriceSampler, PriceSignal, project_prices

__all__ = [n for n in dir() if not n.startswith("_")]
