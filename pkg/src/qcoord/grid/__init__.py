"""Radial distribution network, scenarios, per-scenario cost and CVaR."""
from .cost import (
    BinnedVoltage,
    CostBreakdown,
    CostConfig,
    bin_values,
    cost_breakdown,
    cvar_objective,
    net_loads,
    optimal_var,
    rectified_violations,
    scenario_cost,
    scenario_costs,
    scenario_voltages,
    voltage_distribution,
)
from .network import (
    Attachment,
    Bus,
    Line,
    NetworkCase,
    OperatingPoint,
    balance_residual,
    bulk_flows,
    bulk_voltage_sq,
    solve_lindistflow,
)
from .profiles import default_price_dn, load_shape, pv_shape, wind_shape
from .scenarios import Scenario, ScenarioSet, ScenarioSpec, generate_scenarios

__all__ = [name for name in dir() if not name.startswith("_")]
