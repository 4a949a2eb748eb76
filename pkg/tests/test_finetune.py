import math
import warnings

import numpy as np
import pytest

from aefrc import make_dataset
from aefrc.errors import NumericalError
from aefrc.finetune import ConvergencePoints, FitnessReport, FtIvConfig, \
    class_targets_mean, class_targets_median, converge_to_targets, frc_fitness, ft1, ft2, \
    ft3, ft4, ft4_targets, separation_cost_grad
from aefrc.mf import fit_ramp_spec, preprocess
from aefrc.network import AEConfig, forward, stack
from aefrc.optim import CmaesConfig, OptimizerConfig


def numeric_gradient(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def oracle_separation_cost(C, H, labels, P, beta, zeta):
    """Loop transcription: pull to class means, push unordered pairs apart, shrink."""
    pull = 0.0
    for j in range(1, P + 1):
        members = H[labels == j]
        pull += 0.5 * np.sum((members - C[j - 1]) ** 2) / len(members)
    push = 0.0
    for j in range(P):
        for l in range(j + 1, P):
            push += np.sum((C[j] - C[l]) ** 2)
    push *= -beta / (2.0 * (P - 1)) if P > 1 else 0.0
    shrink = zeta / (2.0 * P) * np.sum(C ** 2)
    return pull + push + shrink


class TestSeparationCost:
    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            P = int(rng.integers(2, 5))
            d = int(rng.integers(1, 5))
            m = int(rng.integers(P, 20))
            labels = np.concatenate([np.arange(1, P + 1),
                                     rng.integers(1, P + 1, m - P)])
            H = rng.uniform(0, 1, (m, d))
            C = rng.normal(0, 1, (P, d))
            beta = float(rng.uniform(0.1, 1.0))
            zeta = float(rng.uniform(0.0, 0.2))
            cost, _ = separation_cost_grad(C.ravel(), H, labels, P, beta, zeta)
            want = oracle_separation_cost(C, H, labels, P, beta, zeta)
            assert math.isclose(cost, want, rel_tol=1e-12)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        for trial in range(20):
            P = int(rng.integers(2, 5))
            d = int(rng.integers(1, 4))
            m = int(rng.integers(P, 15))
            labels = np.concatenate([np.arange(1, P + 1),
                                     rng.integers(1, P + 1, m - P)])
            H = rng.uniform(0, 1, (m, d))
            vec = rng.normal(0, 1, P * d)
            beta = float(rng.uniform(0.1, 1.0))
            zeta = float(rng.uniform(0.0, 0.2))
            _, analytic = separation_cost_grad(vec, H, labels, P, beta, zeta)
            numeric = numeric_gradient(
                lambda v: separation_cost_grad(v, H, labels, P, beta, zeta)[0], vec)
            denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
            assert np.linalg.norm(analytic - numeric) / denom < 1e-6, f"trial {trial}"

    def test_single_class_skips_push(self):
        H = np.array([[0.2], [0.4]])
        labels = np.array([1, 1])
        C = np.array([0.0])
        cost, grad = separation_cost_grad(C, H, labels, 1, beta=5.0, zeta=0.0)
        # only the pull term: mean of squared distances to 0.3... times half
        want = 0.5 * ((0.2 ** 2 + 0.4 ** 2)) / 2
        assert math.isclose(cost, want, rel_tol=1e-12)


class TestClassTargets:
    def test_median_and_mean(self):
        H = np.array([[0.1, 1.0], [0.2, 2.0], [0.9, 3.0], [0.4, 8.0]])
        labels = np.array([1, 1, 1, 2])
        med = class_targets_median(H, labels, 2)
        assert (med.values[0] == np.array([0.2, 2.0])).all()
        assert (med.values[1] == np.array([0.4, 8.0])).all()
        mean = class_targets_mean(H, labels, 2)
        assert np.allclose(mean.values[0], [0.4, 2.0])

    def test_validation(self):
        with pytest.raises(NumericalError):
            ConvergencePoints(np.array([[np.nan]]))


class TestFitness:
    def test_identity_enforced(self):
        r = FitnessReport(t_acc=0.9, g_d=4, p_consequent=2, m=30, class_count=3,
                          fitness=-0.9 + 4 / 30 - 2 / 3)
        assert r.fitness == pytest.approx(-0.9 + 4 / 30 - 2 / 3)
        with pytest.raises(NumericalError):
            FitnessReport(t_acc=0.9, g_d=4, p_consequent=2, m=30, class_count=3,
                          fitness=0.0)

    def test_frc_fitness_on_separable_data(self, blobs3):
        spec = fit_ramp_spec(blobs3)
        xp = preprocess(blobs3, spec)
        net = stack(xp.samples, (3,), AEConfig(), OptimizerConfig(max_iters=40), seed=0)
        rep = frc_fitness(net, xp)
        assert 0.0 <= rep.t_acc <= 1.0
        assert rep.g_d >= rep.p_consequent
        assert rep.fitness == pytest.approx(
            -rep.t_acc + rep.g_d / xp.sample_count - rep.p_consequent / 3)


def _pretrained(blobs3, hidden=(3,), seed=0, iters=60):
    spec = fit_ramp_spec(blobs3)
    xp = preprocess(blobs3, spec)
    net = stack(xp.samples, hidden, AEConfig(), OptimizerConfig(max_iters=iters), seed=seed)
    return xp, net


class TestFt1:
    def test_moves_codes_toward_class_medians(self, blobs3):
        xp, net = _pretrained(blobs3)
        tuned = ft1(net, xp, OptimizerConfig(max_iters=80))
        H0 = forward(net, xp.samples)[-1]
        H1 = forward(tuned, xp.samples)[-1]
        t = class_targets_median(H0, xp.labels, 3).values[xp.labels - 1]
        assert np.sum((H1 - t) ** 2) < np.sum((H0 - t) ** 2)

    def test_mean_variant_differs(self, blobs3):
        xp, net = _pretrained(blobs3)
        a = ft1(net, xp, OptimizerConfig(max_iters=30), stat="median")
        b = ft1(net, xp, OptimizerConfig(max_iters=30), stat="mean")
        assert any((w1 != w2).any() for w1, w2 in zip(a.weights, b.weights))

    def test_original_network_untouched(self, blobs3):
        xp, net = _pretrained(blobs3)
        before = [w.copy() for w in net.weights]
        ft1(net, xp, OptimizerConfig(max_iters=20))
        assert all((w == b).all() for w, b in zip(net.weights, before))


class TestFt2:
    def test_fitness_never_worse_than_pretrained(self, blobs3):
        xp, net = _pretrained(blobs3)
        base = frc_fitness(net, xp).fitness
        tuned, res = ft2(net, xp, CmaesConfig(sigma0=None, max_evals=300, seed=3))
        assert res.fitness <= base + 1e-12
        assert frc_fitness(tuned, xp).fitness == pytest.approx(res.fitness)

    def test_search_dimension_is_param_count(self, blobs3):
        xp, net = _pretrained(blobs3)
        _, res = ft2(net, xp, CmaesConfig(sigma0=None, max_evals=120, seed=0))
        n_params = sum(w.size for w in net.weights) + sum(b.size for b in net.biases)
        assert res.x.size == n_params


class TestFt3:
    def test_returns_points_and_respects_budget(self, blobs3):
        xp, net = _pretrained(blobs3)
        tuned, points, res = ft3(net, xp, CmaesConfig(sigma0=None, max_evals=60, seed=1),
                                 OptimizerConfig(max_iters=10), inner_max_iters=8)
        assert points.values.shape == (3, 3)
        assert res.n_candidate_evals + 1 <= 60
        H = forward(tuned, xp.samples)[-1]
        assert H.shape == (90, 3)

    def test_candidate_dimension_is_points_size(self, blobs3):
        xp, net = _pretrained(blobs3)
        _, points, res = ft3(net, xp, CmaesConfig(sigma0=None, max_evals=40, seed=2),
                             OptimizerConfig(max_iters=5), inner_max_iters=5)
        assert res.x.size == points.values.size == 9


class TestFt4:
    def test_grid_scan_picks_largest_bounded_beta(self, blobs3):
        xp, net = _pretrained(blobs3)
        H = forward(net, xp.samples)[-1]
        cfg = FtIvConfig()
        pts, beta = ft4_targets(H, xp.labels, 3, cfg, OptimizerConfig())
        assert beta in cfg.beta_grid
        assert np.abs(pts.values).max() <= cfg.c_abs_cap
        # every larger beta in the grid must violate the cap (first-fit order)
        from aefrc.optim import minimize
        for b in cfg.beta_grid:
            if b <= beta:
                continue
            res = minimize(lambda v: separation_cost_grad(
                v, H, xp.labels, 3, b, cfg.zeta),
                class_targets_median(H, xp.labels, 3).values.ravel(),
                OptimizerConfig())
            assert np.abs(res.x).max() > cfg.c_abs_cap

    def test_fallback_warns_when_nothing_fits(self, blobs3):
        xp, net = _pretrained(blobs3)
        H = forward(net, xp.samples)[-1]
        cfg = FtIvConfig(beta_grid=(5.0, 8.0), c_abs_cap=0.05)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            pts, beta = ft4_targets(H, xp.labels, 3, cfg, OptimizerConfig(max_iters=50))
        assert beta == 5.0
        assert any("cap" in str(w.message).lower() or "fallback" in str(w.message).lower()
                   or "exceed" in str(w.message).lower() for w in caught)

    def test_end_to_end_returns_network_and_points(self, blobs3):
        xp, net = _pretrained(blobs3)
        tuned, pts = ft4(net, xp, FtIvConfig(), OptimizerConfig(max_iters=100))
        assert tuned.layer_sizes == net.layer_sizes
        assert pts.values.shape == (3, 3)


def test_converge_to_targets_reduces_distance(blobs3=None):
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 1, (20, 4))
    labels = np.array([1] * 10 + [2] * 10)
    ds = make_dataset(X, labels)
    net = stack(X, (2,), AEConfig(), OptimizerConfig(max_iters=30), seed=5)
    points = ConvergencePoints(np.array([[0.9, 0.1], [0.1, 0.9]]))
    tuned = converge_to_targets(net, X, labels, points, OptimizerConfig(max_iters=60))
    H0 = forward(net, X)[-1]
    H1 = forward(tuned, X)[-1]
    t = points.values[labels - 1]
    assert np.sum((H1 - t) ** 2) < np.sum((H0 - t) ** 2)
