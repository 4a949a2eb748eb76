import numpy as np
import pytest

from aefrc.errors import NumericalError
from aefrc.optim import CmaesConfig, OptimizerConfig, cmaes, default_population, minimize


def quadratic(A, b):
    def f(x):
        r = A @ x - b
        return 0.5 * float(r @ r), A.T @ r
    return f


def rosenbrock(v):
    x, y = v
    f = (1 - x) ** 2 + 100 * (y - x * x) ** 2
    g = np.array([-2 * (1 - x) - 400 * x * (y - x * x), 200 * (y - x * x)])
    return f, g


class TestMinimize:
    def test_quadratic_to_machine_precision(self):
        rng = np.random.default_rng(0)
        M = rng.normal(size=(6, 6))
        A = M @ M.T + 6 * np.eye(6)
        b = rng.normal(size=6)
        res = minimize(quadratic(A, b), np.zeros(6), OptimizerConfig(tol=1e-12))
        x_star = np.linalg.solve(A, b)
        assert res.cost < 1e-10
        assert np.allclose(res.x, x_star, atol=1e-5)
        assert res.converged

    def test_rosenbrock(self):
        res = minimize(rosenbrock, np.array([-1.2, 1.0]),
                       OptimizerConfig(max_iters=400, tol=1e-12))
        assert res.cost < 1e-8
        assert np.allclose(res.x, [1.0, 1.0], atol=1e-3)

    def test_trace_monotone_non_increasing(self):
        res = minimize(rosenbrock, np.array([-1.2, 1.0]), OptimizerConfig())
        assert (np.diff(res.trace) <= 1e-15).all()
        assert res.trace[0] == rosenbrock(np.array([-1.2, 1.0]))[0]

    def test_never_worse_than_start(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            x0 = rng.normal(size=4)
            f = quadratic(np.eye(4), rng.normal(size=4))
            res = minimize(f, x0, OptimizerConfig(max_iters=3))
            assert res.cost <= f(x0)[0] + 1e-15

    def test_non_finite_start_raises(self):
        def f(x):
            return np.inf, np.zeros_like(x)
        with pytest.raises(NumericalError):
            minimize(f, np.zeros(2), OptimizerConfig())

    def test_deterministic(self):
        a = minimize(rosenbrock, np.array([-1.2, 1.0]), OptimizerConfig())
        b = minimize(rosenbrock, np.array([-1.2, 1.0]), OptimizerConfig())
        assert (a.x == b.x).all() and a.cost == b.cost and a.n_evals == b.n_evals

    def test_config_validation(self):
        with pytest.raises(NumericalError):
            OptimizerConfig(max_iters=0)
        with pytest.raises(NumericalError):
            OptimizerConfig(tol=0.0)


def sphere(x):
    return float(np.sum(x * x))


class TestCmaes:
    def test_population_default(self):
        assert default_population(10) == 4 + int(3 * np.log(10))

    def test_sphere_10d(self):
        res = cmaes(sphere, np.full(10, 2.0),
                    CmaesConfig(sigma0=0.5, max_evals=10_000, tol_fitness=None, seed=4))
        assert res.fitness < 1e-8

    def test_best_ever_beats_start(self):
        x0 = np.full(5, 3.0)
        res = cmaes(sphere, x0, CmaesConfig(sigma0=0.3, max_evals=300, seed=1))
        assert res.fitness <= sphere(x0)

    def test_eval_budget_respected(self):
        calls = []
        def counting(x):
            calls.append(1)
            return sphere(x)
        cfg = CmaesConfig(sigma0=0.3, max_evals=200, seed=2)
        res = cmaes(counting, np.ones(8), cfg)
        assert len(calls) <= 200
        lam = default_population(8)
        assert res.n_candidate_evals == res.n_generations * lam
        # plus the one initial-point evaluation
        assert len(calls) == res.n_candidate_evals + 1

    def test_tolerance_stop(self):
        res = cmaes(sphere, np.full(3, 0.01),
                    CmaesConfig(sigma0=0.01, max_evals=100_000, tol_fitness=1e-4, seed=0))
        assert res.status == "tol"
        assert res.fitness <= 1e-4

    def test_deterministic_per_seed(self):
        cfg = CmaesConfig(sigma0=0.4, max_evals=400, seed=9)
        a = cmaes(sphere, np.ones(4), cfg)
        b = cmaes(sphere, np.ones(4), cfg)
        assert (a.x == b.x).all() and a.fitness == b.fitness
        c = cmaes(sphere, np.ones(4), CmaesConfig(sigma0=0.4, max_evals=400, seed=10))
        assert (a.x != c.x).any()

    def test_all_non_finite_aborts(self):
        def bad(x):
            return np.nan
        res = cmaes(bad, np.ones(3), CmaesConfig(sigma0=0.1, max_evals=10_000, seed=0))
        assert res.aborted

    def test_rejects_missing_sigma(self):
        with pytest.raises(NumericalError):
            cmaes(sphere, np.ones(3), CmaesConfig(sigma0=None, max_evals=100, seed=0))
