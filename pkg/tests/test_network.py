import numpy as np
import pytest

from aefrc.errors import DataError, NumericalError
from aefrc.network import AEConfig, Network, ae_cost_grad, corrupt, flatten_params, forward, \
    init_network, kl_bernoulli, load_network, param_count, save_network, stack, \
    target_cost_grad, train_ae, unflatten_params, _ae_cost_grad_flat, _target_cost_grad_flat
from aefrc.optim import OptimizerConfig
from aefrc.seeding import rng_for


def numeric_gradient(f, x, h=1e-5):
    """Central finite differences of a scalar function, the reference oracle."""
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def relative_error(a, b):
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return np.linalg.norm(a - b) / denom


class TestGradientOracle:
    def test_ae_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        for trial in range(20):
            n = int(rng.integers(2, 7))
            hidden = int(rng.integers(2, 7))
            m = int(rng.integers(2, 11))
            cfg = AEConfig(rho=float(rng.uniform(0.05, 0.95)),
                           beta_sparse=float(rng.uniform(0.0, 4.0)),
                           weight_decay=float(rng.uniform(0.0, 0.01)),
                           denoise_snr_db=None)
            sizes = (n, hidden, n)
            vec = flatten_params(init_network(sizes, rng))
            X = rng.uniform(0.05, 0.95, (m, n))
            O = rng.uniform(0.05, 0.95, (m, n))
            _, analytic = _ae_cost_grad_flat(vec, sizes, X, O, cfg)
            numeric = numeric_gradient(
                lambda v: _ae_cost_grad_flat(v, sizes, X, O, cfg)[0], vec)
            assert relative_error(analytic, numeric) < 1e-6, f"trial {trial}"

    def test_target_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(8)
        for trial in range(10):
            sizes = (3, int(rng.integers(2, 5)), int(rng.integers(2, 5)))
            vec = flatten_params(init_network(sizes, rng))
            m = int(rng.integers(2, 9))
            X = rng.uniform(0, 1, (m, 3))
            T = rng.uniform(0, 1, (m, sizes[-1]))
            _, analytic = _target_cost_grad_flat(vec, sizes, X, T)
            numeric = numeric_gradient(
                lambda v: _target_cost_grad_flat(v, sizes, X, T)[0], vec)
            assert relative_error(analytic, numeric) < 1e-6, f"trial {trial}"


class TestKL:
    def test_non_negative_on_grid(self):
        rhos = np.linspace(0.05, 0.95, 19)
        hats = np.linspace(1e-6, 1 - 1e-6, 201)
        for rho in rhos:
            vals = kl_bernoulli(float(rho), hats)
            assert (vals >= -1e-15).all()
            # equality only where the observed activation equals the target
            at_rho = kl_bernoulli(float(rho), np.array([rho]))
            assert abs(at_rho[0]) < 1e-12

    def test_clamp_keeps_kl_finite(self):
        vals = kl_bernoulli(0.1, np.array([0.0, 1.0]))
        assert np.isfinite(vals).all()


class TestForward:
    def test_activations_strictly_inside_unit_interval(self):
        rng = np.random.default_rng(0)
        net = init_network((4, 3, 2), rng)
        acts = forward(net, rng.uniform(-5, 5, (20, 4)))
        assert len(acts) == 3
        for a in acts[1:]:
            assert (a > 0).all() and (a < 1).all()

    def test_forward_checks_width(self):
        net = init_network((4, 3, 2), np.random.default_rng(0))
        with pytest.raises(DataError):
            forward(net, np.zeros((5, 3)))


class TestParamPacking:
    def test_round_trip(self):
        rng = np.random.default_rng(1)
        net = init_network((5, 4, 3), rng)
        vec = flatten_params(net)
        assert vec.size == param_count((5, 4, 3))
        back = unflatten_params((5, 4, 3), vec)
        for W1, W2 in zip(net.weights, back.weights):
            assert (W1 == W2).all()
        for b1, b2 in zip(net.biases, back.biases):
            assert (b1 == b2).all()


class TestCorrupt:
    def test_snr_is_respected(self):
        rng = rng_for(0, "x")
        X = rng.normal(2.0, 1.0, (20_000, 3))
        noisy = corrupt(X, snr_db=10.0, seed=123)
        noise = noisy - X
        power = (X ** 2).mean(axis=0)
        noise_var = noise.var(axis=0)
        expected = power / 10.0           # 10 dB means a factor of 10
        assert np.allclose(noise_var, expected, rtol=0.05)

    def test_deterministic(self):
        X = np.ones((5, 2))
        assert (corrupt(X, 10.0, seed=7) == corrupt(X, 10.0, seed=7)).all()
        assert (corrupt(X, 10.0, seed=7) != corrupt(X, 10.0, seed=8)).any()


class TestTraining:
    def test_train_ae_reduces_cost(self):
        rng = np.random.default_rng(5)
        X = rng.uniform(0.1, 0.9, (40, 6))
        cfg = AEConfig(rho=0.2, denoise_snr_db=None)
        ae = train_ae(X, 4, cfg, OptimizerConfig(max_iters=80), seed=3)
        assert ae.layer_sizes == (6, 4, 6)
        init = init_network((6, 4, 6), rng_for(3, "init"))
        start, _ = ae_cost_grad(init, X, X, cfg)
        end, _ = ae_cost_grad(ae, X, X, cfg)
        assert end < start

    def test_stack_shapes_and_determinism(self):
        rng = np.random.default_rng(6)
        X = rng.uniform(0, 1, (30, 5))
        cfg = AEConfig(rho=0.3)
        net1 = stack(X, (4, 3), cfg, OptimizerConfig(max_iters=40), seed=11)
        assert net1.layer_sizes == (5, 4, 3)
        codes = forward(net1, X)[-1]
        assert codes.shape == (30, 3)
        net2 = stack(X, (4, 3), cfg, OptimizerConfig(max_iters=40), seed=11)
        for W1, W2 in zip(net1.weights, net2.weights):
            assert (W1 == W2).all()       # bit-identical per seed
        net3 = stack(X, (4, 3), cfg, OptimizerConfig(max_iters=40), seed=12)
        assert any((a != b).any() for a, b in zip(net1.weights, net3.weights))

    def test_denoising_changes_training_but_not_target(self):
        rng = np.random.default_rng(9)
        X = rng.uniform(0.2, 0.8, (25, 4))
        clean = train_ae(X, 3, AEConfig(denoise_snr_db=None),
                         OptimizerConfig(max_iters=30), seed=2)
        noisy = train_ae(X, 3, AEConfig(denoise_snr_db=10.0),
                         OptimizerConfig(max_iters=30), seed=2)
        assert any((a != b).any() for a, b in zip(clean.weights, noisy.weights))


def test_network_serialization_round_trip(tmp_path):
    net = init_network((4, 3, 2), np.random.default_rng(3))
    p = tmp_path / "net.json"
    save_network(net, str(p))
    back = load_network(str(p))
    assert back.layer_sizes == net.layer_sizes
    for W1, W2 in zip(net.weights, back.weights):
        assert (W1 == W2).all()           # 17 significant digits: bit-exact
    for b1, b2 in zip(net.biases, back.biases):
        assert (b1 == b2).all()


def test_init_bounds():
    rng = np.random.default_rng(0)
    net = init_network((10, 6, 10), rng)
    r1 = np.sqrt(6.0 / (10 + 6))
    assert np.abs(net.weights[0]).max() <= r1
    assert (net.biases[0] == 0).all() and (net.biases[1] == 0).all()


def test_cost_grad_rejects_wrong_shapes():
    net = init_network((4, 3, 4), np.random.default_rng(0))
    with pytest.raises(DataError):
        ae_cost_grad(net, np.zeros((5, 3)), np.zeros((5, 4)), AEConfig())
    deep = init_network((4, 3, 3, 4), np.random.default_rng(0))
    with pytest.raises(DataError):
        ae_cost_grad(deep, np.zeros((5, 4)), np.zeros((5, 4)), AEConfig())


def test_target_cost_no_decay():
    # the deep target cost is pure mean squared error: zero at a perfect fit
    rng = np.random.default_rng(4)
    net = init_network((3, 2), rng)
    X = rng.uniform(0, 1, (6, 3))
    T = forward(net, X)[-1]
    cost, grad = target_cost_grad(net, X, T)
    assert cost == 0.0
    assert np.allclose(grad, 0.0)
