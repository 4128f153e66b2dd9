import math

import numpy as np
import pytest

from qcoord.qae import (
    DiscreteDistribution,
    MonteCarloEstimator,
    QaeConfig,
    QaeEstimator,
    RectifiedVoltageTarget,
    TargetFunction,
    amplified_probabilities,
    build_circuit1,
    build_circuit2,
    build_grover,
    canonical_qae_estimate,
    estimate_expectation,
    fit_linear_approx,
    mc_estimate,
    ml_theta,
    mlqae_estimate,
    prepare_distribution,
    prepare_uniform,
    qft,
)
from qcoord.statevector import Circuit, StateVector, circuit_unitary, run_circuit


def oracle_with_amplitude(a):
    """One index qubit left at |0>, ancilla rotated so that P(1) = a."""
    return build_circuit1(Circuit(1), 0.0, math.asin(math.sqrt(a)))


# --- distributions -----------------------------------------------------------------

def test_distribution_validation():
    with pytest.raises(ValueError):
        DiscreteDistribution(1, [0.5, 0.6])
    with pytest.raises(ValueError):
        DiscreteDistribution(1, [1.1, -0.1])
    with pytest.raises(ValueError):
        DiscreteDistribution(2, [0.5, 0.5])
    with pytest.raises(ValueError):
        TargetFunction([0.2, 1.2])


@pytest.mark.parametrize("n", [1, 3])
def test_prepare_uniform(n):
    c = prepare_uniform(n)
    np.testing.assert_allclose(run_circuit(c).probabilities(), np.full(1 << n, 1 / (1 << n)), atol=1e-12)
    assert c.depth == 1
    with pytest.raises(ValueError):
        prepare_uniform(0)


def test_prepare_distribution_examples():
    p = run_circuit(prepare_distribution(DiscreteDistribution.point_mass(3, 0))).probabilities()
    assert p[0] == 1.0
    flat = prepare_distribution(DiscreteDistribution(2, [0.25] * 4))
    np.testing.assert_allclose(run_circuit(flat).probabilities(), run_circuit(prepare_uniform(2)).probabilities(), atol=1e-12)
    g = DiscreteDistribution.gaussian(5, 16, 4)
    out = run_circuit(prepare_distribution(g))
    assert np.max(np.abs(out.probabilities() - g.masses)) <= 1e-10
    assert np.max(np.abs(out.amplitudes.imag)) <= 1e-12


def test_prepare_distribution_random_sparse():
    rng = np.random.default_rng(0)
    w = rng.random(16) * (rng.random(16) > 0.4)
    d = DiscreteDistribution.from_weights(w)
    assert np.max(np.abs(run_circuit(prepare_distribution(d)).probabilities() - d.masses)) <= 1e-10


# --- linear fit ----------------------------------------------------------------------

def test_fit_recovers_sin_squared():
    n, a, b = 4, 0.03, 0.1
    f = TargetFunction(np.sin(a * np.arange(16) + b) ** 2)
    fa, fb = fit_linear_approx(f, n)
    assert fa == pytest.approx(a, abs=1e-9) and fb == pytest.approx(b, abs=1e-9)


def test_fit_constant_and_closed_form():
    a, b = fit_linear_approx(TargetFunction.constant(0.3, 8), 3)
    assert a == pytest.approx(0.0, abs=1e-15) and b == pytest.approx(math.asin(math.sqrt(0.3)))
    i = np.arange(8.0)
    g = np.arcsin(np.sqrt(i / 7))
    x = np.column_stack([i, np.ones(8)])
    sol = np.linalg.solve(x.T @ x, x.T @ g)
    fa, fb = fit_linear_approx(TargetFunction(i / 7), 3)
    assert fa == pytest.approx(sol[0], abs=1e-12) and fb == pytest.approx(sol[1], abs=1e-12)
    with pytest.raises(ValueError):
        fit_linear_approx(TargetFunction(i / 7), 2)


# --- oracles ------------------------------------------------------------------------

def test_circuit1_examples():
    prep = prepare_uniform(2)
    zero = build_circuit1(prep, 0.0, 0.0)
    assert all(zero.basis_probability(i) == 0.0 for i in range(4))
    quarter = build_circuit1(prep, 0.0, math.pi / 6)
    for i in range(4):
        assert quarter.basis_probability(i) == pytest.approx(0.25, abs=1e-12)
    o = build_circuit1(prep, 0.1, 0.05)
    assert o.basis_probability(3) == pytest.approx(math.sin(0.35) ** 2, abs=1e-12)
    assert o.n_qubits == 3
    with pytest.raises(ValueError):
        build_circuit1(prep, 0.6, 0.0)


def test_circuit1_per_basis_sweep():
    n = 5
    o = build_circuit1(prepare_uniform(n), -0.04, 1.3)
    for i in range(1 << n):
        assert abs(o.basis_probability(i) - math.sin(-0.04 * i + 1.3) ** 2) <= 1e-10


def test_circuit2_examples():
    prep = prepare_uniform(2)
    zero = build_circuit2(prep, TargetFunction.constant(0.0, 4))
    assert all(zero.basis_probability(i) == 0.0 for i in range(4))
    f = TargetFunction([0.0, 0.0, 0.7, 0.0])
    o = build_circuit2(prep, f)
    assert sum(1 for g in o.rotation if g.kind == "RY") == 1
    # index 2 = |10>; the reversal pair then reads |01> and only theta_2 fires
    out = run_circuit(o.rotation, StateVector.basis(5, 2))
    p = out.probabilities()
    rev = 0b01 << 2
    assert p[2 | rev] == pytest.approx(0.3, abs=1e-12)
    assert p[2 | rev | (1 << 4)] == pytest.approx(0.7, abs=1e-12)


def test_circuit2_gate_count_and_cap():
    rng = np.random.default_rng(4)
    o = build_circuit2(prepare_uniform(4), TargetFunction(rng.uniform(0.01, 1, 16)))
    assert o.rotation.count_ops().get("MCRY", 0) + o.rotation.count_ops().get("CRY", 0) == 16
    assert o.n_qubits == 9
    with pytest.raises(ValueError):
        build_circuit2(prepare_uniform(11), TargetFunction.constant(0.1, 2048))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_circuit2_exhaustive(n):
    rng = np.random.default_rng(n)
    f = TargetFunction(rng.random(1 << n))
    o = build_circuit2(prepare_uniform(n), f)
    for i in range(1 << n):
        assert abs(o.basis_probability(i) - f(i)) <= 1e-12


# --- Grover --------------------------------------------------------------------------

def test_grover_examples():
    assert amplified_probabilities(oracle_with_amplitude(0.5), [0])[0] == pytest.approx(0.5, abs=1e-12)
    o = oracle_with_amplitude(math.sin(math.pi / 12) ** 2)
    assert amplified_probabilities(o, [1])[1] == pytest.approx(0.5, abs=1e-12)
    # with k = floor(pi / (4 theta)) the angle (2k+1) theta lies within theta of pi/2,
    # so P(1) >= cos^2 theta = 1 - a; that is >= 0.9 only while a <= 0.1
    for a in np.linspace(0.01, 0.25, 25):
        th = math.asin(math.sqrt(a))
        k = int(math.pi / (4 * th))
        p = amplified_probabilities(oracle_with_amplitude(a), [k])[k]
        assert p >= 1 - a - 1e-12
        if a <= 0.1:
            assert p >= 0.9


def test_grover_identity_on_benchmark_oracle():
    t = RectifiedVoltageTarget()
    o = build_circuit2(prepare_distribution(t.distribution(3)), t.function(3))
    a = o.good_probability()
    th = math.asin(math.sqrt(a))
    probs = amplified_probabilities(o, range(9))
    for k, p in probs.items():
        assert abs(p - math.sin((2 * k + 1) * th) ** 2) <= 1e-9


def test_grover_requires_ancilla():
    with pytest.raises(ValueError):
        build_grover(Circuit(2))


# --- estimators ------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        QaeConfig(grover_powers=())
    with pytest.raises(ValueError):
        QaeConfig(grover_powers=(0, 2, 2))
    with pytest.raises(ValueError):
        QaeConfig(method="iterative")
    assert QaeConfig.schedule(3) == (0, 1, 2, 4)


def test_mlqae_zero_and_small_uniform():
    prep = prepare_uniform(2)
    r = mlqae_estimate(build_circuit2(prep, TargetFunction.constant(0.0, 4)))
    assert r.value <= (math.pi / 2 / 9999) ** 2
    o = build_circuit2(prep, TargetFunction(np.arange(4) / 3))
    r = mlqae_estimate(o, QaeConfig(seed=3), truth=0.5)
    assert abs(r.value - 0.5) <= 0.01
    assert r.oracle_queries == 100 * sum(2 * k + 1 for k in (0, 1, 2, 4, 8))
    assert r.relative_error_pct == pytest.approx(abs(r.value - 0.5) / 0.5 * 100)


def test_mlqae_inconsistent_counts():
    with pytest.raises(ValueError):
        ml_theta([0, 1], [11, 0], [10, 10])
    with pytest.raises(ValueError):
        ml_theta([], [], [])


def test_mlqae_consistency_many_shots():
    a = 0.2
    o = oracle_with_amplitude(a)
    shots = 10_000
    r = mlqae_estimate(o, QaeConfig(shots_per_power=shots, seed=1))
    # Fisher information of the schedule bounds the standard error of theta
    ks = np.array((0, 1, 2, 4, 8))
    fisher = shots * np.sum(4 * (2 * ks + 1) ** 2)
    sd_a = math.sin(2 * math.asin(math.sqrt(a))) / math.sqrt(fisher)
    assert abs(r.value - a) <= 3 * max(sd_a, 1e-6) + 1e-6


def test_qft_matches_dft():
    m = 3
    u = circuit_unitary(qft(list(range(m)), m))
    mm = 1 << m
    dft = np.exp(2j * np.pi * np.outer(np.arange(mm), np.arange(mm)) / mm) / math.sqrt(mm)
    np.testing.assert_allclose(u, dft, atol=1e-12)


def test_canonical_examples():
    cfg = QaeConfig(method="canonical", phase_qubits=3, shots_per_power=None)
    assert canonical_qae_estimate(oracle_with_amplitude(0.0), cfg).details["y"] == 0
    assert canonical_qae_estimate(oracle_with_amplitude(0.5), cfg).value == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValueError):
        canonical_qae_estimate(oracle_with_amplitude(0.5), QaeConfig(method="canonical", phase_qubits=30))


@pytest.mark.parametrize("m", [2, 3, 4])
def test_canonical_error_bound(m):
    cfg = QaeConfig(method="canonical", phase_qubits=m, shots_per_power=None)
    for a in np.linspace(0.02, 0.98, 9):
        est = canonical_qae_estimate(oracle_with_amplitude(a), cfg).value
        assert abs(est - a) <= math.pi / (1 << m) + (math.pi / (1 << m)) ** 2


def test_mc_point_mass_and_accounting():
    d = DiscreteDistribution.point_mass(3, 5)
    f = TargetFunction(np.linspace(0, 1, 8))
    for m in (1, 17, 1000):
        r = mc_estimate(d, f, m, seed=m)
        assert r.value == f(5) and r.oracle_queries == m
    with pytest.raises(ValueError):
        mc_estimate(d, f, 0)


def test_estimate_expectation_backends_agree():
    t = RectifiedVoltageTarget()
    d, f = t.distribution(5), t.function(5)
    exact = d.expectation(f)
    mc = estimate_expectation(d, f, MonteCarloEstimator(200_000, seed=2))
    assert abs(mc.value - exact) <= 4 * math.sqrt(exact * (1 - exact) / 200_000)
    q2 = estimate_expectation(d, f, QaeEstimator(2, 5, QaeConfig(shots_per_power=None)), truth=exact)
    q1 = estimate_expectation(d, f, QaeEstimator(1, 5, QaeConfig(shots_per_power=None)), truth=exact)
    assert q2.relative_error_pct <= 1e-6
    assert q1.relative_error_pct > q2.relative_error_pct
    assert estimate_expectation(d, f, MonteCarloEstimator()).value == pytest.approx(exact, abs=1e-15)
    const = TargetFunction.constant(0.4, 32)
    assert estimate_expectation(d, const, QaeEstimator(2, 5, QaeConfig(shots_per_power=None))).value == pytest.approx(0.4, abs=1e-8)
    assert estimate_expectation(d, const, MonteCarloEstimator(10)).value == pytest.approx(0.4, abs=1e-12)
    with pytest.raises(ValueError):
        estimate_expectation(t.distribution(4), f, MonteCarloEstimator())


def test_benchmark_target_truth():
    t = RectifiedVoltageTarget()
    # independent check by dense midpoint rule on the truncated normal
    v = np.linspace(*t.support, 2_000_001)
    pdf = np.exp(-0.5 * ((v - t.mean) / t.sigma) ** 2)
    w = pdf / np.trapezoid(pdf, v)
    assert t.truth() == pytest.approx(np.trapezoid(w * t.f(v), v), rel=1e-7)
