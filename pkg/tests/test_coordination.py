import itertools

import numpy as np
import pytest

from qcoord.coordination import (
    Battery,
    CoordinationConfig,
    EcGroundTruth,
    GroundTruthSurrogate,
    IterationLog,
    LinearSurrogate,
    MonteCarloEstimator,
    PriceBounds,
    PriceSampler,
    QaeEstimator,
    ResponseDataset,
    ShiftableLoad,
    battery_dispatch,
    cvar_gradient,
    default_ec,
    ec_respond,
    estimate_penalty_gradient,
    generate_training_data,
    grid_state,
    project_prices,
    run_coordination,
    zero_flex_ec,
)
from qcoord.grid import CostConfig, NetworkCase, ScenarioSpec, cvar_objective, generate_scenarios, optimal_var


# --- prices ---------------------------------------------------------------------------

def test_project_feasible_unchanged():
    x = np.array([0.1, 0.14, 0.12, 0.12])
    assert np.array_equal(project_prices(x).values, x)


def test_project_constant_goes_to_target():
    out = project_prices(np.full(6, 5.0)).values
    assert np.allclose(out, 0.12, atol=1e-12)


def test_project_hand_trace():
    out = project_prices([2, 2, -1, -1], PriceBounds(0.0, 1.0, 0.5)).values
    assert np.allclose(out, [1, 1, 0, 0], atol=1e-12)


def test_project_infeasible_mean():
    with pytest.raises(ValueError):
        project_prices(np.zeros(4), PriceBounds(0.0, 1.0, 1.5))


def test_project_random_constraints():
    rng = np.random.default_rng(0)
    lo, hi = np.full(48, 0.04), np.full(48, 0.24)
    lo[10:20] = 0.08
    b = PriceBounds(lo, hi, 0.12)
    for _ in range(200):
        sig = project_prices(rng.normal(0.12, 0.2, 48), b)
        assert np.all(sig.values >= lo) and np.all(sig.values <= hi)
        assert abs(sig.values.mean() - 0.12) <= 1e-9
        assert sig.feasible()


# --- EC ground truth -------------------------------------------------------------------

def test_flat_price_gives_nominal_response():
    for kind in ("residential", "commercial", "industrial"):
        ec = default_ec(kind)
        ch, dis, _ = battery_dispatch(ec.battery, np.full(96, 0.12))
        assert not ch.any() and not dis.any()
        assert np.allclose(ec_respond(ec, np.full(96, 0.12)), ec.nominal, atol=1e-12)


def test_two_step_battery():
    ch, dis, soc = battery_dispatch(Battery(energy_cap=0.25, power_cap=1.0, efficiency=1.0), np.array([1.0, 2.0]))
    assert np.allclose(ch, [1, 0]) and np.allclose(dis, [0, 1]) and np.allclose(soc, [0, 0.25, 0])


def test_battery_respects_limits():
    rng = np.random.default_rng(1)
    bat = Battery(0.05, 0.02, 0.9)
    for _ in range(10):
        ch, dis, soc = battery_dispatch(bat, rng.uniform(0.04, 0.24, 96))
        assert np.all(ch <= 0.02 + 1e-15) and np.all(dis <= 0.02 + 1e-15)
        assert np.all(soc >= -1e-15) and np.all(soc <= 0.05 + 1e-15)
        assert np.allclose(soc[1:], np.cumsum(0.9 * ch - dis) * 0.25, atol=1e-15)


def test_energy_conserved_under_permutation():
    pref = np.array([0.2, 0.5, 0.1, 0.3, 0.4, 0.2])
    ec = EcGroundTruth("commercial", np.full(6, 0.1), Battery(0.2, 0.3, 1.0), ShiftableLoad(pref, 0.8, 2.0), 0.5)
    p = np.array([0.05, 0.2, 0.1, 0.15, 0.08, 0.13])
    totals = [ec_respond(ec, p[list(perm)]).sum() for perm in itertools.islice(itertools.permutations(range(6)), 0, 720, 37)]
    assert np.ptp(totals) < 1e-9
    assert abs(totals[0] - ec.nominal.sum()) < 1e-9


def test_shiftable_caps_and_direction():
    ec = default_ec("industrial")
    p = np.full(96, 0.12)
    p[:48], p[48:] = 0.08, 0.16
    r = ec_respond(ec, p) - ec.base_load
    assert r[:48].sum() > ec.nominal[:48].sum() - ec.base_load[:48].sum()
    assert np.all(r >= -ec.battery.power_cap - 1e-12)


def test_ec_errors():
    with pytest.raises(ValueError):
        ec_respond(default_ec("residential"), np.full(10, 0.12))
    with pytest.raises(ValueError):
        Battery(-1, 1)
    with pytest.raises(ValueError):
        EcGroundTruth("farm", np.zeros(3), Battery(), ShiftableLoad(), 0.0)


def test_generate_training_data(tmp_path):
    d = generate_training_data(default_ec("residential"), 12, PriceSampler(), seed=3)
    assert len(d) == 12
    assert np.all(d.prices >= 0.04 - 1e-15) and np.all(d.prices <= 0.24 + 1e-15)
    assert np.allclose(d.prices.mean(axis=1), 0.12, atol=1e-9)
    h1 = d.save(tmp_path / "a.csv")
    h2 = generate_training_data(default_ec("residential"), 12, PriceSampler(), seed=3).save(tmp_path / "b.csv")
    assert h1 == h2
    back = ResponseDataset.load(tmp_path / "a.csv")
    assert back.ec_type == "residential" and np.array_equal(back.prices, d.prices)


# --- gradients ------------------------------------------------------------------------

@pytest.fixture(scope="module")
def case():
    return NetworkCase.default()


@pytest.fixture(scope="module")
def scenarios(case):
    return generate_scenarios(case, 100, seed=1)


def linear_surrogates(case, seed=0, gain=-0.05):
    rng = np.random.default_rng(seed)
    return [LinearSurrogate(default_ec(t).nominal, gain * np.eye(96) + 0.002 * rng.normal(size=(96, 96)))
            for t in case.ec_types]


def test_gradient_matches_finite_differences(case, scenarios):
    surs = linear_surrogates(case)
    cfg = CostConfig()
    p = 0.12 + 0.03 * np.sin(np.arange(96) / 5)
    state = grid_state(case, scenarios, p, surs, cfg)
    v = optimal_var(state.costs, scenarios.probabilities, cfg.alpha) * 0.999
    g = cvar_gradient(p, v, case, scenarios, surs, config=cfg).grad_prices

    def obj(x):
        s = grid_state(case, scenarios, x, surs, cfg, need_jacobian=False)
        return cvar_objective(s.costs, scenarios.probabilities, v, cfg)
    h = 1e-4
    for tau in range(0, 96, 5):
        e = np.zeros(96)
        e[tau] = h
        fd = (obj(p + e) - obj(p - e)) / (2 * h)
        assert abs(fd - g[tau]) <= 1e-3 * abs(fd)


def test_gradient_without_penalties_is_energy_only(case):
    sc = generate_scenarios(case, 10, ScenarioSpec(load_scale=0.3), seed=0)
    surs = linear_surrogates(case)
    cfg = CostConfig(lam=0.0)
    p = np.full(96, 0.12)
    res = cvar_gradient(p, 0.0, case, sc, surs, config=cfg)
    assert res.n_terms == 0
    ex = np.array([s.forward(p) for s in surs])
    dC_dP = cfg.dt * (cfg.price_dn - p)
    expect = sum(dC_dP @ s.jacobian(p) for s in surs) - cfg.dt * ex.sum(axis=0)
    assert np.allclose(res.grad_prices, expect, atol=1e-12)


def test_v_alpha_stationary_at_optimal_var(case, scenarios):
    surs = linear_surrogates(case)
    p = np.full(96, 0.12)
    state = grid_state(case, scenarios, p, surs)
    v = optimal_var(state.costs, scenarios.probabilities, 0.95)
    assert abs(cvar_gradient(p, v, case, scenarios, surs, state=state).grad_v) < 1e-6


def test_penalty_gradient_zero_without_violations(case):
    sc = generate_scenarios(case, 20, ScenarioSpec(load_scale=0.3), seed=0)
    surs = linear_surrogates(case)
    for est in (MonteCarloEstimator(), MonteCarloEstimator(1000), QaeEstimator(2, 4)):
        term = estimate_penalty_gradient(case, sc, np.full(96, 0.12), surs, 18, 76, est, side="lower")
        assert term.expectation == 0 and not term.gradient.any()


def test_penalty_gradient_saturated_agrees(case):
    sc = generate_scenarios(case, 50, ScenarioSpec(load_scale=1.6), seed=2)
    surs = linear_surrogates(case)
    p = np.full(96, 0.12)
    state = grid_state(case, sc, p, surs)
    assert np.all(state.voltage[:, case.pos[18], 76] < case.v_min[case.pos[18]])
    exact = estimate_penalty_gradient(case, sc, p, surs, 18, 76, side="lower", state=state)
    qae = estimate_penalty_gradient(case, sc, p, surs, 18, 76, QaeEstimator(2, 5), side="lower", state=state)
    # every scenario violates: the weighted indicator sums to 1 before the 1/(2V) factor
    v = state.voltage[:, case.pos[18], 76]
    assert exact.expectation == pytest.approx(float(sc.probabilities @ (1 / (2 * v))), rel=1e-12)
    assert abs(qae.expectation / exact.expectation - 1) < 0.01
    assert np.allclose(qae.gradient, exact.gradient, rtol=0.01, atol=1e-12)


def test_penalty_gradient_mixed_qae_vs_exact(case, scenarios):
    surs = linear_surrogates(case)
    p = np.full(96, 0.12)
    state = grid_state(case, scenarios, p, surs)
    v = state.voltage[:, case.pos[18], :]
    t = int(np.argmin(np.abs((v < case.v_min[case.pos[18]]).mean(axis=0) - 0.5)))
    frac = (v[:, t] < case.v_min[case.pos[18]]).mean()
    assert 0 < frac < 1
    exact = estimate_penalty_gradient(case, scenarios, p, surs, 18, t, side="lower", state=state)
    qae = estimate_penalty_gradient(case, scenarios, p, surs, 18, t, QaeEstimator(2, 7), side="lower", state=state)
    assert abs(qae.expectation / exact.expectation - 1) <= 0.01
    assert qae.queries > 0


# --- descent loop ---------------------------------------------------------------------

def test_zero_flex_coordination(case, scenarios):
    truths = [zero_flex_ec(t) for t in case.ec_types]
    res = run_coordination(case, scenarios, [GroundTruthSurrogate(t) for t in truths], CoordinationConfig(max_iter=3))
    assert res.prices.feasible()
    for ex, tr in zip(res.exchange, truths):
        assert np.allclose(ex, tr.base_load)
    # nothing responds, so only the direct revenue term moves: the penalty part is untouched
    pen = res.log.column("mean_voltage_penalty")
    assert np.ptp(pen) < 1e-12


def test_descent_monotone_and_log(case, scenarios):
    res = run_coordination(case, scenarios, linear_surrogates(case), CoordinationConfig(max_iter=8))
    obj = res.log.column("objective")
    assert np.all(np.diff(obj) <= 1e-12)
    assert obj[-1] < obj[0]
    assert len(res.log) == 9 and res.prices.feasible()
    with pytest.raises(ValueError):
        IterationLog().append(iteration=0)


def test_large_lambda_weakly_smaller_cvar(case):
    # 24-step day keeps the paired runs long enough to settle
    from qcoord.grid.profiles import default_price_dn
    sc = generate_scenarios(case, 40, ScenarioSpec(horizon=24), seed=1)
    rng = np.random.default_rng(0)
    surs = [LinearSurrogate(default_ec(t, T=24).nominal, -0.05 * np.eye(24) + 0.002 * rng.normal(size=(24, 24)))
            for t in case.ec_types]
    tail = {}
    for lam in (0.0, 10.0):
        cost = CostConfig(lam=lam, price_dn=default_price_dn(24), dt=1.0)
        res = run_coordination(case, sc, surs, CoordinationConfig(cost=cost, max_iter=150))
        c = np.sort(grid_state(case, sc, res.prices.values, surs, cost, need_jacobian=False).costs)
        tail[lam] = c[-2:].mean()  # CVaR at 0.95 of 40 equiprobable scenarios
    assert tail[10.0] <= tail[0.0] + 1e-9
