import math

import numpy as np
import pytest

from qcoord.coordination.data import ResponseDataset
from qcoord.qlearn import (
    QLstmCellSpec,
    QLstmRunner,
    QTcnLayerSpec,
    QTcnLstmModel,
    TrainingConfig,
    TrainingError,
    VqcEngine,
    VqcSpec,
    count_parameters,
    encode_angles,
    make_baseline,
    parameter_shift_grad,
    qlstm_step,
    qtcn_forward,
    readout_flips,
    sigmoid,
    train,
    vqc_forward,
)
from qcoord.statevector import run_circuit, z_expectations


# --- encoding and VQCs ---------------------------------------------------------------

def test_encode_zero_window_is_identity():
    c = encode_angles([0, 0, 0, 0])
    assert c.depth == 1
    assert abs(run_circuit(c).probabilities()[0] - 1) < 1e-15


def test_encode_one_flips_qubit():
    z = z_expectations(run_circuit(encode_angles([1, 0, 0, 0])).probabilities(), 4)
    assert z[0] == pytest.approx(-1, abs=1e-15)
    assert np.allclose(z[1:], 1)


def test_encode_half_is_equator():
    z = z_expectations(run_circuit(encode_angles([0.5, 0.5])).probabilities(), 2)
    assert np.all(np.abs(z) < 1e-10)


def test_encode_rejects_out_of_range():
    with pytest.raises(ValueError):
        encode_angles([0.2, 1.2])


def test_vqc_spec_counts():
    assert VqcSpec(4, 3).n_params == 12
    with pytest.raises(ValueError):
        VqcSpec(2, 1, n_outputs=3)
    with pytest.raises(ValueError):
        VqcSpec(2, 0)


def test_entangler_patterns():
    assert VqcSpec(4, entanglement="ring").entangler_pairs() == [(0, 1), (1, 2), (2, 3), (3, 0)]
    assert VqcSpec(4, entanglement="skip").entangler_pairs() == [(0, 2), (1, 3), (2, 0), (3, 1)]
    assert VqcSpec(2, entanglement="ring").entangler_pairs() == [(0, 1)]
    assert VqcSpec(2, entanglement="skip").entangler_pairs() == [(0, 1)]


def test_vqc_zero_params_zero_input_all_plus_one():
    spec = VqcSpec(4, 2, entanglement="skip")
    assert np.allclose(vqc_forward(spec, np.zeros(8), [0, 0, 0, 0]), 1.0)


def test_vqc_two_qubit_hand_oracle():
    spec = VqcSpec(2, 1, entanglement="ring")
    out = vqc_forward(spec, [math.pi / 2, 0.0], [0, 0])
    # little-endian: index = q0 + 2 q1
    ry = lambda t: np.array([[math.cos(t / 2), -math.sin(t / 2)], [math.sin(t / 2), math.cos(t / 2)]])  # noqa: E731
    u_rot = np.kron(ry(0.0), ry(math.pi / 2))  # q1 (x) q0
    cnot01 = np.eye(4)[:, [0, 3, 2, 1]]  # |q0=1> toggles q1
    psi = cnot01 @ u_rot @ np.array([1, 0, 0, 0.0])
    p = psi**2
    z0 = p[0] + p[2] - p[1] - p[3]
    z1 = p[0] + p[1] - p[2] - p[3]
    assert out[0] == pytest.approx(0, abs=1e-12)
    assert np.allclose(out, [z0, z1], atol=1e-12)


def test_vqc_outputs_bounded_and_length_checked():
    rng = np.random.default_rng(0)
    spec = VqcSpec(3, 2, ("X", "Y"), "ring", 2)
    for _ in range(20):
        out = vqc_forward(spec, rng.uniform(-4, 4, 6), rng.random(3))
        assert out.shape == (2,) and np.all(np.abs(out) <= 1 + 1e-12)
    with pytest.raises(ValueError):
        vqc_forward(spec, np.zeros(5), [0, 0, 0])
    with pytest.raises(ValueError):
        vqc_forward(spec, [np.nan] * 6, [0, 0, 0])


def test_parameter_shift_single_qubit_analytic():
    spec = VqcSpec(1, 1)
    for th in np.linspace(-3, 3, 7):
        assert vqc_forward(spec, [th], [0])[0] == pytest.approx(math.cos(th), abs=1e-12)
        assert parameter_shift_grad(spec, [th], [0])[0] == pytest.approx(-math.sin(th), abs=1e-12)


def test_parameter_shift_unused_parameter_zero():
    # an RZ layer acting on |0...0> only adds a phase
    spec = VqcSpec(2, 2, ("Z", "Y"), "ring")
    g = parameter_shift_grad(spec, [0.4, -0.7, 0.3, 0.2], [0, 0])
    assert np.all(np.abs(g[:2]) < 1e-12)


def test_parameter_shift_matches_finite_differences():
    rng = np.random.default_rng(5)
    h = 1e-4
    for _ in range(5):
        spec = VqcSpec(4, int(rng.integers(1, 4)), entanglement=str(rng.choice(["ring", "skip"])))
        th, x = rng.uniform(-np.pi, np.pi, spec.n_params), rng.random(4)
        k = int(rng.integers(4))
        g = parameter_shift_grad(spec, th, x, k)
        fd = np.array([(vqc_forward(spec, th + h * e, x)[k] - vqc_forward(spec, th - h * e, x)[k]) / (2 * h)
                       for e in np.eye(th.size)])
        assert np.max(np.abs(g - fd)) < 1e-6


def test_engine_matches_reference():
    rng = np.random.default_rng(2)
    spec = VqcSpec(3, 2, ("Y", "X"), "skip", 2)
    th, x, g = rng.normal(size=6), rng.random((4, 3)), rng.normal(size=(4, 2))
    eng = VqcEngine(spec, th)
    ref = np.array([vqc_forward(spec, th, xi) for xi in x])
    assert np.allclose(eng.forward(x), ref, atol=1e-13)
    ps = sum(g[b] @ np.array([parameter_shift_grad(spec, th, x[b], k) for k in range(2)]) for b in range(4))
    assert np.allclose(eng.param_grad(x, g), ps, atol=1e-12)


def test_readout_flips_rates():
    rng = np.random.default_rng(0)
    assert readout_flips(rng, 0.0, (10, 2)) is None
    f = readout_flips(rng, 0.3, (20000, 3))
    assert set(np.unique(f)) <= {-1.0, 1.0}
    # X or Y among the three Paulis
    assert np.mean(f == -1) == pytest.approx(0.2, abs=0.01)


# --- layers ---------------------------------------------------------------------------

def tcn_layer(stride=1, dilation=1):
    return QTcnLayerSpec(VqcSpec(4, 3, entanglement="skip", n_outputs=2), 4, dilation, stride)


def test_qtcn_stride_one_length():
    assert qtcn_forward(tcn_layer(), np.zeros(12), np.random.default_rng(0).random(10)).shape == (10, 2)


def test_qtcn_zero_everything_plus_one():
    assert np.allclose(qtcn_forward(tcn_layer(), np.zeros(12), np.zeros(9)), 1.0)


def test_qtcn_windows_stride_two():
    layer = tcn_layer(stride=2)
    rng = np.random.default_rng(1)
    th, x = rng.normal(size=12), rng.random(8)
    out = qtcn_forward(layer, th, x)
    assert out.shape == (4, 2)
    padded = np.concatenate([np.zeros(3), x])
    for s in range(4):
        t = 2 * s
        assert np.allclose(out[s], vqc_forward(layer.vqc, th, padded[t:t + 4]), atol=1e-13)


def test_qtcn_causal():
    layer = tcn_layer(dilation=2)
    rng = np.random.default_rng(3)
    th, x = rng.normal(size=12), rng.random(16)
    base = qtcn_forward(layer, th, x)
    x2 = x.copy()
    x2[9] = 1 - x2[9]
    moved = qtcn_forward(layer, th, x2)
    assert np.array_equal(base[:9], moved[:9])
    assert not np.allclose(base[9:], moved[9:])


def test_qtcn_errors():
    with pytest.raises(ValueError):
        qtcn_forward(tcn_layer(), np.zeros(12), [])
    with pytest.raises(ValueError):
        qtcn_forward(tcn_layer(), np.zeros(12), [0.1, 0.2])
    with pytest.raises(ValueError):
        QTcnLayerSpec(VqcSpec(3), kernel_size=4)


def test_qlstm_gates_in_open_interval():
    cell = QLstmCellSpec.build(2, 1)
    rng = np.random.default_rng(4)
    params = [rng.uniform(-3, 3, s.n_params) for s in cell.vqcs]
    h, c = np.zeros(2), np.zeros(2)
    runner = QLstmRunner(cell, params, need_param_grad=False)
    runner.forward(rng.uniform(-1, 1, (5, 6, 1)))
    for k in ("f", "i", "o"):
        g = np.array(runner.cache[k])
        assert np.all((g > 0) & (g < 1))
    for _ in range(5):
        h, c, y = qlstm_step(cell, params, rng.uniform(-1, 1, 1), h, c)
        assert np.all(np.abs(h) <= 1) and np.all(np.abs(y) <= 1)


def test_qlstm_zero_candidate_keeps_cell_empty():
    gate = VqcSpec(3, 1, entanglement="none", n_outputs=2)
    cell = QLstmCellSpec(2, 1, (gate,) * 6)
    params = [np.zeros(3)] * 6
    # h = x = 0 encode to angle pi/2 on every qubit: <Z> = 0 without entanglers
    h, c, _ = qlstm_step(cell, params, [0.0], [0.0, 0.0], [0.0, 0.0])
    assert np.all(np.abs(c) < 1e-15)


def test_qlstm_step_hand_composition():
    cell = QLstmCellSpec.build(2, 1, n_layers=1)
    zero = [np.zeros(3)] * 6
    x, h0, c0 = np.array([0.3]), np.array([-0.2, 0.6]), np.array([0.1, -0.4])
    v = (np.concatenate([h0, x]) + 1) / 2
    spec = cell.vqcs[0]
    a = vqc_forward(spec, zero[0], v)  # all gate VQCs identical at theta = 0
    f = i = o = 1 / (1 + np.exp(-a))
    c = f * c0 + i * np.tanh(a)
    z = np.concatenate([(o * np.tanh(c) + 1) / 2, [0.0]])
    h = vqc_forward(spec, zero[4], z)
    y = vqc_forward(cell.vqcs[5], zero[5], np.concatenate([(h + 1) / 2, [0.0]]))
    h1, c1, y1 = qlstm_step(cell, zero, x, h0, c0)
    assert np.allclose(c1, c, atol=1e-14) and np.allclose(h1, h, atol=1e-14) and np.allclose(y1, y, atol=1e-14)


def test_qlstm_runner_matches_steps():
    cell = QLstmCellSpec.build(2, 2)
    rng = np.random.default_rng(6)
    params = [rng.normal(size=s.n_params) for s in cell.vqcs]
    xs = rng.uniform(-1, 1, (3, 5, 2))
    ys = QLstmRunner(cell, params).forward(xs)
    for b in range(3):
        h, c = np.zeros(2), np.zeros(2)
        for s in range(5):
            h, c, y = qlstm_step(cell, params, xs[b, s], h, c)
            assert np.allclose(ys[b, s], y, atol=1e-13)


def test_qlstm_dimension_errors():
    cell = QLstmCellSpec.build(2, 1)
    params = [np.zeros(s.n_params) for s in cell.vqcs]
    with pytest.raises(ValueError):
        qlstm_step(cell, params, [0.0, 0.0], [0.0, 0.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        QLstmCellSpec(2, 1, (VqcSpec(4),) * 6)


def test_sigmoid_stable():
    assert np.all(np.isfinite(sigmoid(np.array([-1e4, 0.0, 1e4]))))


# --- model ----------------------------------------------------------------------------

def small_model(seed=0, T=12):
    return QTcnLstmModel.default(horizon=T, seed=seed)


def test_model_output_length_and_determinism():
    m = small_model()
    p = np.full(12, 0.12)
    r1, r2 = m.forward(p), m.forward(p.copy())
    assert r1.shape == (12,)
    assert np.array_equal(r1, r2)
    with pytest.raises(ValueError):
        m.forward(np.full(11, 0.12))


def test_model_gradients_match_finite_differences():
    m = small_model(seed=3)
    rng = np.random.default_rng(0)
    x, z = rng.random((3, 12)), rng.random((3, 12))
    _, g = m.loss_and_grad(x, z)
    th, h = m.flat(), 1e-5
    for i in rng.choice(th.size, 12, replace=False):
        vals = []
        for d in (h, -h):
            t = th.copy()
            t[i] += d
            m.set_flat(t)
            vals.append(m.loss_and_grad(x, z)[0])
        assert abs((vals[0] - vals[1]) / (2 * h) - g[i]) < 1e-8
    m.set_flat(th)


def test_model_price_jacobian_causal_and_exact():
    m = small_model(seed=1)
    p = 0.04 + 0.2 * np.random.default_rng(2).random(12)
    J = m.jacobian(p)
    h = 1e-6
    fd = np.array([(m.forward(p + h * e) - m.forward(p - h * e)) / (2 * h) for e in np.eye(12)]).T
    assert np.allclose(J, fd, atol=1e-8)
    assert np.all(np.triu(J, 1) == 0)


def test_model_save_load_roundtrip(tmp_path):
    m = small_model(seed=7)
    path = tmp_path / "m.json"
    m.save(path)
    m2 = QTcnLstmModel.load(path)
    p = np.linspace(0.05, 0.2, 12)
    assert np.array_equal(m.forward(p), m2.forward(p))
    doc = path.read_text()
    assert '"format_version": 1' in doc


def test_count_parameters():
    assert count_parameters(VqcSpec(4, 3)) == 12
    m = QTcnLstmModel.default(horizon=96)
    parts = 12 + 6 * 10 + 3 + 1 + 96
    assert count_parameters(m) == parts
    assert count_parameters(QTcnLstmModel.default(horizon=96, time_bias=False)) == parts - 96
    assert count_parameters(m) / count_parameters(make_baseline("tcn_lstm")) <= 0.01


# --- training -------------------------------------------------------------------------

def tiny_dataset(T=12, n=24, const=None, seed=0):
    rng = np.random.default_rng(seed)
    prices = 0.04 + 0.2 * rng.random((n, T))
    resp = np.full((n, T), const) if const is not None else 0.5 - prices + 0.05 * np.sin(np.arange(T))
    return ResponseDataset(prices, resp, "commercial")


def test_training_constant_target_reaches_zero():
    data = tiny_dataset(const=0.3)
    m = small_model()
    from qcoord.qlearn import fit_scaling
    m.scaling = fit_scaling(data)
    trained, trace = train(m, data, TrainingConfig(epochs=50, batch_size=24, learning_rate=0.05), init_time_bias=False)
    assert trace.shape == (50, 3)
    assert trace[-1, 1] < 1e-4 < trace[0, 1]


def test_training_deterministic_with_seed():
    data = tiny_dataset()
    cfg = TrainingConfig(epochs=3, batch_size=8, noise_level=0.1, seed=4)
    _, a = train(small_model(), data, cfg)
    _, b = train(small_model(), data, cfg)
    assert np.array_equal(a, b, equal_nan=True)


def test_training_errors(monkeypatch):
    with pytest.raises(ValueError):
        train(small_model(), tiny_dataset(T=10), TrainingConfig(epochs=1))
    with pytest.raises(ValueError):
        TrainingConfig(noise_level=1.5)
    monkeypatch.setattr(QTcnLstmModel, "loss_and_grad", lambda self, *a, **k: (float("nan"), np.zeros(1)))
    with pytest.raises(TrainingError):
        train(small_model(), tiny_dataset(), TrainingConfig(epochs=1))
