"""Distribution loading, rotation oracles, Grover amplification and amplitude estimation."""
from .benchmark import (
    BENCHMARK_COLUMNS,
    RectifiedVoltageTarget,
    benchmark_mc,
    benchmark_qae,
    loglog_slope,
    mc_convergence,
    mlqae_convergence,
)
from .distribution import DiscreteDistribution, TargetFunction, prepare_distribution, prepare_uniform
from .estimators import (
    EstimateResult,
    MonteCarloEstimator,
    QaeConfig,
    QaeEstimator,
    build_oracle,
    canonical_qae_estimate,
    estimate_expectation,
    mc_estimate,
    ml_theta,
    mlqae_estimate,
    phase_estimation_circuit,
    qft,
)
from .grover import amplified_depth, amplified_probabilities, build_grover
from .oracles import RotationOracle, build_circuit1, build_circuit2, fit_linear_approx

__all__ = [name for name in dir() if not name.startswith("_")]
