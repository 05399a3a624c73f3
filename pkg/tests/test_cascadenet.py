import numpy as np
import pytest

import oracles
from windrelief.cascadenet import (
    CascadeNetwork,
    TrainConfig,
    forward,
    gradients,
    init_network,
    model_from_json,
    model_to_json,
    sensitivity_sweep,
    split_validation,
    train,
)
from windrelief.errors import EmptyBatch, InsufficientData, InvalidShape, ShapeMismatch, TrialFailed


def loss(net, X, y):
    r = net.predict(X) - y
    return 0.5 * float(np.mean(r * r))


def fd_gradient(net, X, y, h=1e-6):
    theta = net.flat()
    g = np.zeros_like(theta)
    for i in range(len(theta)):
        up, dn = theta.copy(), theta.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (loss(CascadeNetwork.from_flat(up, net.n_in, net.n_hidden), X, y)
                - loss(CascadeNetwork.from_flat(dn, net.n_in, net.n_hidden), X, y)) / (2 * h)
    return g


def max_rel_error(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a) + np.abs(b))))


# -- construction --------------------------------------------------------------


def test_parameter_count():
    net = init_network(3, 10, seed=0)
    assert net.n_params == 54 == len(net.flat())


def test_init_deterministic_and_bounded():
    a, b = init_network(4, 6, seed=7), init_network(4, 6, seed=7)
    assert a.flat().tobytes() == b.flat().tobytes()
    assert np.all(np.abs(a.flat()) <= 0.5)
    assert not np.array_equal(a.flat(), init_network(4, 6, seed=8).flat())


def test_init_invalid():
    with pytest.raises(InvalidShape):
        init_network(0, 3)
    with pytest.raises(InvalidShape):
        init_network(2, -1)


def test_linear_degenerate():
    net = init_network(3, 0, seed=1)
    x = np.array([0.2, -1.0, 3.0])
    assert forward(net, x) == float(net.W_io @ x + net.b_o)


# -- forward -------------------------------------------------------------------


def test_forward_zero_network():
    net = CascadeNetwork.from_flat(np.zeros(init_network(3, 4).n_params), 3, 4)
    assert forward(net, [1.0, -2.0, 5.0]) == 0.0


def test_forward_linear_path_isolation():
    net = init_network(3, 5, seed=2)
    net.W_ih[:] = 0
    net.b_h[:] = 0
    x = np.array([0.3, 0.7, -0.1])
    assert forward(net, x) == pytest.approx(float(net.W_io @ x + net.b_o), abs=1e-15)


def test_forward_matches_straight_line_oracle():
    rng = np.random.default_rng(0)
    for t in range(100):
        n_in, h = int(rng.integers(1, 6)), int(rng.integers(0, 12))
        net = init_network(n_in, h, seed=t)
        x = rng.normal(size=n_in) * 3
        ref = oracles.cascade_forward(net.W_ih.tolist(), net.b_h.tolist(), net.W_ho.tolist(),
                                      net.W_io.tolist(), net.b_o, x.tolist())
        assert abs(forward(net, x) - ref) < 1e-12


def test_forward_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        forward(init_network(3, 2), [1.0, 2.0])


def test_forward_finite_for_large_inputs():
    net = init_network(2, 8, seed=3)
    assert np.all(np.isfinite(net.predict(np.array([[1e300, -1e300], [1e8, 1e8]]) * 1e-10)))


# -- gradients -----------------------------------------------------------------


def test_zero_residual_zero_gradient():
    net = init_network(3, 4, seed=5)
    X = np.random.default_rng(1).normal(size=(7, 3))
    np.testing.assert_array_equal(gradients(net, X, net.predict(X)), 0.0)


@pytest.mark.parametrize("seed", range(20))
def test_gradient_finite_differences(seed):
    rng = np.random.default_rng(seed)
    n_in, h = int(rng.integers(1, 5)), int(rng.choice([0, 1, 5, 15]))
    net = init_network(n_in, h, seed=seed)
    X, y = rng.uniform(size=(int(rng.integers(1, 12)), n_in)), rng.uniform(size=1)
    y = np.resize(y, X.shape[0]) + rng.normal(size=X.shape[0])
    assert max_rel_error(gradients(net, X, y), fd_gradient(net, X, y)) < 1e-5


def test_linear_single_sample_gradient():
    net = init_network(3, 0, seed=4)
    x, t = np.array([0.5, -2.0, 1.5]), 0.25
    residual = forward(net, x) - t
    g = gradients(net, x[None, :], np.array([t]))
    np.testing.assert_allclose(g[:3], residual * x, rtol=0, atol=1e-15)
    assert g[3] == pytest.approx(residual)


def test_empty_batch():
    with pytest.raises(EmptyBatch):
        gradients(init_network(2, 2), np.zeros((0, 2)), np.zeros(0))


# -- training ------------------------------------------------------------------


def linear_data(n=60, seed=0):
    x = np.random.default_rng(seed).uniform(size=(n, 1))
    return x, 2 * x[:, 0] + 1


def test_train_noise_free_linear():
    X, y = linear_data()
    rep = train(init_network(1, 1, seed=0), X, y, TrainConfig(seed=0, max_epochs=500, n_hidden=1))
    assert rep.train_mse[rep.best_epoch] < 1e-3
    assert rep.epochs <= 500


def test_best_epoch_is_validation_minimum():
    rng = np.random.default_rng(4)
    X = rng.uniform(size=(80, 3))
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2 + 0.2 * rng.normal(size=80)
    for seed in range(5):
        rep = train(init_network(3, 8, seed=seed), X, y, TrainConfig(seed=seed))
        assert rep.validation_mse[rep.best_epoch] == min(rep.validation_mse)
        assert len(rep.train_mse) == len(rep.validation_mse)
        net = rep.network
        vr = net.predict(X[rep.validation_rows]) - y[rep.validation_rows]
        assert float(vr @ vr) / len(vr) == rep.validation_mse[rep.best_epoch]


def test_lm_train_mse_never_increases():
    rng = np.random.default_rng(9)
    X = rng.uniform(size=(60, 2))
    y = X[:, 0] * X[:, 1] + 0.1 * rng.normal(size=60)
    rep = train(init_network(2, 6, seed=1), X, y, TrainConfig(seed=2, patience=1000,
                                                               max_epochs=60))
    assert np.all(np.diff(rep.train_mse) <= 0)


def test_train_deterministic():
    rng = np.random.default_rng(6)
    X = rng.uniform(size=(50, 3))
    y = X @ [1.0, -2.0, 0.5] + 0.1 * rng.normal(size=50)
    test = (X[:10], y[:10])
    reps = [train(init_network(3, 5, seed=3), X, y, TrainConfig(seed=3), test=test)
            for _ in range(2)]
    assert reps[0].to_dict() == reps[1].to_dict()
    assert reps[0].network.flat().tobytes() == reps[1].network.flat().tobytes()
    assert len(reps[0].test_mse) == len(reps[0].train_mse)


def test_stop_reasons():
    rng = np.random.default_rng(2)
    X = rng.uniform(size=(40, 2))
    y = rng.normal(size=40)  # pure noise: validation stops improving quickly
    rep = train(init_network(2, 10, seed=0), X, y, TrainConfig(seed=0, patience=2))
    assert rep.stop_reason == "patience"
    rep = train(init_network(2, 3, seed=0), X, y, TrainConfig(seed=0, max_epochs=1,
                                                              patience=50))
    assert rep.stop_reason == "max_epochs" and rep.epochs == 1
    Xl, yl = linear_data(30)
    rep = train(init_network(1, 0, seed=0), Xl, yl, TrainConfig(seed=0, patience=10_000))
    assert rep.stop_reason == "mu_overflow"


def test_gdm_fallback_reduces_loss():
    X, y = linear_data()
    rep = train(init_network(1, 2, seed=0), X, y,
                TrainConfig(seed=0, optimizer="gdm", max_epochs=400, patience=400))
    assert min(rep.train_mse) < rep.train_mse[0] / 10


def test_validation_split():
    tr, va = split_validation(40, 0.15, seed=1)
    assert len(va) == 6 and len(tr) == 34
    assert sorted(np.concatenate([tr, va]).tolist()) == list(range(40))


def test_train_insufficient():
    with pytest.raises(InsufficientData):
        train(init_network(1, 1), np.zeros((9, 1)), np.zeros(9))


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(validation_fraction=1.0)
    with pytest.raises(ValueError):
        TrainConfig(max_epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(patience=-1)


# -- sweep -----------------------------------------------------------------------


def test_sweep_enumeration_and_selection():
    rng = np.random.default_rng(3)
    X = rng.uniform(size=(80, 2))
    y = 0.5 + 0.3 * X[:, 0] - 0.2 * X[:, 1]
    rows = sensitivity_sweep(10, 5, X[:60], y[:60], X[60:], y[60:],
                             TrainConfig(seed=1, max_epochs=50))
    assert [r.n_hidden for r in rows] == list(range(5, 16))
    assert sum(r.selected for r in rows) == 1
    best = min(rows, key=lambda r: r.mape)
    assert best.selected
    assert len({r.seed for r in rows}) == 11
    mapes = [r.mape for r in rows]
    assert max(mapes) - min(mapes) < 1.0


def test_sweep_parallel_matches_serial():
    rng = np.random.default_rng(5)
    X = rng.uniform(size=(50, 2))
    y = 1 + X[:, 0] ** 2
    cfg = TrainConfig(seed=2, max_epochs=30)
    a = sensitivity_sweep(3, 2, X[:40], y[:40], X[40:], y[40:], cfg)
    b = sensitivity_sweep(3, 2, X[:40], y[:40], X[40:], y[40:], cfg, workers=4)
    assert a == b


def test_sweep_trial_errors_annotated():
    X = np.random.default_rng(0).uniform(size=(12, 2))
    with pytest.raises(TrialFailed) as info:
        sensitivity_sweep(1, 1, X[:5], X[:5, 0], X[5:], X[5:, 0])
    assert info.value.n_hidden == 0


def test_sweep_rejects_negative_sizes():
    with pytest.raises(ValueError):
        sensitivity_sweep(2, 3, np.zeros((20, 1)), np.zeros(20), np.zeros((5, 1)), np.ones(5))


# -- model files -----------------------------------------------------------------


def test_model_json_roundtrip_bit_identical():
    net = init_network(3, 7, seed=11)
    text = model_to_json(net, feature_names=["a", "b", "c"], normalization={"x": 1},
                         config=TrainConfig())
    back, doc = model_from_json(text)
    X = np.random.default_rng(0).normal(size=(25, 3))
    assert back.predict(X).tobytes() == net.predict(X).tobytes()
    assert doc["schema_version"] == 1 and doc["feature_names"] == ["a", "b", "c"]
    assert doc["train_config"]["n_hidden"] == 10
