"""Deterministic numerical optimizers.

Two workhorses, both pure numpy and bit-reproducible for a fixed seed:

* minimize: limited-memory BFGS with a strong-Wolfe line search. The
  trace of accepted costs is monotone non-increasing and the returned
  point never costs more than the starting point. Line-search failure
  degrades to returning the best point found, flagged in the status.

* cmaes: standard (mu/mu_w, lambda) covariance matrix adaptation
  evolution strategy. Candidate ranking breaks fitness ties by candidate
  index, the best-ever candidate is tracked across generations (the
  start point counts, so the result is never worse than it), and three
  consecutive generations of all-non-finite fitness abort the run.

Objectives are callables returning (cost, gradient) for minimize and a
bare fitness value for cmaes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 400
    tol: float = 1e-6
    history: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise NumericalError("max_iters must be positive")
        if not self.tol > 0:
            raise NumericalError("tol must be positive")
        if self.history < 1:
            raise NumericalError("history must be positive")


@dataclass
class MinimizeResult:
    x: np.ndarray
    cost: float
    trace: np.ndarray          # accepted costs, trace[0] is the start
    status: str                # gtol | ftol | max_iters | line_search
    n_evals: int

    @property
    def converged(self) -> bool:
        return self.status in ("gtol", "ftol")


def _cubic_step(a0, f0, g0, a1, f1, g1):
    """Minimizer of the cubic interpolant through two (point, value, slope) triples."""
    try:
        with np.errstate(all="ignore"):
            d1 = g0 + g1 - 3.0 * (f0 - f1) / (a0 - a1)
            rad = d1 * d1 - g0 * g1
            if not np.isfinite(rad) or rad < 0:
                return None
            d2 = math.copysign(math.sqrt(rad), a1 - a0)
            t = a1 - (a1 - a0) * (g1 + d2 - d1) / (g1 - g0 + 2.0 * d2)
    except (OverflowError, ZeroDivisionError):
        return None
    if not np.isfinite(t):
        return None
    return t


class _LineEval:
    """Caches the latest full evaluation along x + a*d."""

    def __init__(self, f, x, d):
        self.f, self.x, self.d = f, x, d
        self.n_evals = 0

    def __call__(self, a):
        # trial steps may wander into overflow territory; the caller treats
        # non-finite values as a bracket edge, so suppress the noise here
        with np.errstate(all="ignore"):
            fx, g = self.f(self.x + a * self.d)
            self.n_evals += 1
            slope = float(np.dot(g, self.d)) if np.all(np.isfinite(g)) else np.nan
        return float(fx), g, slope


def _wolfe_search(ev: _LineEval, f0: float, slope0: float, a_init: float,
                  c1: float = 1e-4, c2: float = 0.9, max_steps: int = 25):
    """Strong-Wolfe line search (bracket then zoom with safeguarded cubic steps).

    Returns (alpha, f, g, ok). ok is True when a point satisfying at least
    the sufficient-decrease condition was accepted.
    """
    a_prev, f_prev, s_prev = 0.0, f0, slope0
    a = a_init
    bracket = None
    fa = ga = sa = None
    for _ in range(max_steps):
        fa, ga, sa = ev(a)
        if not np.isfinite(fa):
            # step overshot into garbage; pull back toward the last good point
            bracket = (a_prev, f_prev, s_prev, a, fa, sa)
            break
        if fa > f0 + c1 * a * slope0 or (a_prev > 0.0 and fa >= f_prev):
            bracket = (a_prev, f_prev, s_prev, a, fa, sa)
            break
        if abs(sa) <= -c2 * slope0:
            return a, fa, ga, True
        if sa >= 0.0:
            bracket = (a, fa, sa, a_prev, f_prev, s_prev)
            break
        a_prev, f_prev, s_prev = a, fa, sa
        a = min(a * 2.0, 1e10)
    if bracket is None:
        # ran out of expansion steps while still descending
        return (a_prev, f_prev, None, a_prev > 0.0)

    lo, f_lo, s_lo, hi, f_hi, s_hi = bracket
    g_lo = None
    for _ in range(max_steps):
        if not np.isfinite(f_hi):
            trial = lo + 0.5 * (hi - lo)
        else:
            trial = _cubic_step(lo, f_lo, s_lo, hi, f_hi, s_hi if np.isfinite(s_hi) else 0.0)
            span = abs(hi - lo)
            if (trial is None
                    or not (min(lo, hi) + 0.1 * span <= trial <= max(lo, hi) - 0.1 * span)):
                trial = lo + 0.5 * (hi - lo)
        ft, gt, st = ev(trial)
        if not np.isfinite(ft) or ft > f0 + c1 * trial * slope0 or ft >= f_lo:
            hi, f_hi, s_hi = trial, ft, st
        else:
            if abs(st) <= -c2 * slope0:
                return trial, ft, gt, True
            if st * (hi - lo) >= 0.0:
                hi, f_hi, s_hi = lo, f_lo, s_lo
            lo, f_lo, s_lo, g_lo = trial, ft, st, gt
        if abs(hi - lo) < 1e-18:
            break
    if g_lo is not None and f_lo < f0:
        return lo, f_lo, g_lo, True   # decrease without curvature; caller guards the update
    return 0.0, f0, None, False


def minimize(f, x0, cfg: OptimizerConfig) -> MinimizeResult:
    """Minimize a smooth function given its value-and-gradient callable.

    Stops on gradient infinity norm below tol, relative cost change below
    tol, or the iteration cap. Raises NumericalError when the cost or
    gradient at the start is non-finite.
    """
    x = np.asarray(x0, dtype=float).copy()
    fx, g = f(x)
    fx = float(fx)
    g = np.asarray(g, dtype=float)
    n_evals = 1
    if not np.isfinite(fx) or not np.all(np.isfinite(g)):
        raise NumericalError("objective is non-finite at the starting point")
    trace = [fx]
    if np.max(np.abs(g)) < cfg.tol:
        return MinimizeResult(x, fx, np.array(trace), "gtol", n_evals)

    s_mem: list[np.ndarray] = []
    y_mem: list[np.ndarray] = []
    rho_mem: list[float] = []
    status = "max_iters"

    for it in range(cfg.max_iters):
        # two-loop recursion over the stored curvature pairs
        q = g.copy()
        alphas = []
        for s, y, r in zip(reversed(s_mem), reversed(y_mem), reversed(rho_mem)):
            a = r * np.dot(s, q)
            alphas.append(a)
            q -= a * y
        if s_mem:
            gamma = np.dot(s_mem[-1], y_mem[-1]) / np.dot(y_mem[-1], y_mem[-1])
            q *= gamma
        for (s, y, r), a in zip(zip(s_mem, y_mem, rho_mem), reversed(alphas)):
            b = r * np.dot(y, q)
            q += (a - b) * s
        d = -q
        slope = float(np.dot(g, d))
        if slope >= 0.0 or not np.all(np.isfinite(d)):
            d = -g                       # memory gave a non-descent direction; restart
            slope = float(np.dot(g, d))
            s_mem.clear(); y_mem.clear(); rho_mem.clear()

        a_init = 1.0 if s_mem else min(1.0, 1.0 / max(np.sum(np.abs(g)), 1e-12))
        ev = _LineEval(f, x, d)
        alpha, f_new, g_new, ok = _wolfe_search(ev, fx, slope, a_init)
        n_evals += ev.n_evals
        if not ok or alpha == 0.0:
            if np.array_equal(d, -g):
                status = "line_search"
                break
            # retry once along steepest descent before giving up
            s_mem.clear(); y_mem.clear(); rho_mem.clear()
            d = -g
            slope = float(np.dot(g, d))
            ev = _LineEval(f, x, d)
            alpha, f_new, g_new, ok = _wolfe_search(
                ev, fx, slope, min(1.0, 1.0 / max(np.sum(np.abs(g)), 1e-12)))
            n_evals += ev.n_evals
            if not ok or alpha == 0.0:
                status = "line_search"
                break
        if g_new is None:
            f_new, g_new = f(x + alpha * d)
            n_evals += 1
        x_new = x + alpha * d
        s = x_new - x
        y = np.asarray(g_new, dtype=float) - g
        ys = float(np.dot(y, s))
        if ys > 1e-10 * float(np.linalg.norm(y)) * float(np.linalg.norm(s)):
            s_mem.append(s); y_mem.append(y); rho_mem.append(1.0 / ys)
            if len(s_mem) > cfg.history:
                s_mem.pop(0); y_mem.pop(0); rho_mem.pop(0)
        # relative to the cost scale itself, so small-magnitude objectives
        # (target-convergence costs sit around 1e-3) are not cut off early
        # by what would effectively be an absolute threshold
        rel = abs(fx - float(f_new)) / max(abs(fx), abs(float(f_new)),
                                           np.finfo(float).tiny)
        x, fx, g = x_new, float(f_new), np.asarray(g_new, dtype=float)
        trace.append(fx)
        if np.max(np.abs(g)) < cfg.tol:
            status = "gtol"
            break
        if rel < cfg.tol:
            status = "ftol"
            break

    return MinimizeResult(x, fx, np.array(trace), status, n_evals)


@dataclass(frozen=True)
class CmaesConfig:
    sigma0: float | None = 0.3
    population: int | None = None    # default 4 + floor(3 ln d)
    max_evals: int = 10000
    tol_fitness: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.sigma0 is not None and not self.sigma0 > 0:
            raise NumericalError("sigma0 must be positive")
        if self.population is not None and self.population < 4:
            raise NumericalError("population must be at least 4")
        if self.max_evals < 1:
            raise NumericalError("max_evals must be positive")


@dataclass
class CmaesResult:
    x: np.ndarray
    fitness: float
    n_generations: int
    n_candidate_evals: int      # generations * population; the start-point probe is extra
    status: str                 # max_evals | tol | abort

    @property
    def aborted(self) -> bool:
        return self.status == "abort"


def default_population(dim: int) -> int:
    return 4 + int(3 * math.log(dim))


def cmaes(f, x0, cfg: CmaesConfig) -> CmaesResult:
    """Covariance matrix adaptation evolution strategy, rank-one plus rank-mu.

    Uses the standard parameter schedule: log-decreasing recombination
    weights over the better half of the population, cumulation paths for
    sigma and for the covariance, and damped step-size adaptation. The
    covariance is eigendecomposed every generation, which is cheap at the
    dimensions this package works at and keeps sampling deterministic.
    """
    x0 = np.asarray(x0, dtype=float)
    dim = x0.size
    if dim < 1:
        raise NumericalError("cmaes needs at least one dimension")
    if cfg.sigma0 is None:
        raise NumericalError("cmaes requires an explicit sigma0")
    lam = cfg.population if cfg.population is not None else default_population(dim)
    mu = lam // 2
    w = np.log((lam + 1) / 2.0) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mueff = 1.0 / np.sum(w * w)

    cc = (4.0 + mueff / dim) / (dim + 4.0 + 2.0 * mueff / dim)
    cs = (mueff + 2.0) / (dim + mueff + 5.0)
    c1 = 2.0 / ((dim + 1.3) ** 2 + mueff)
    cmu = min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((dim + 2.0) ** 2 + mueff))
    damps = 1.0 + 2.0 * max(0.0, math.sqrt((mueff - 1.0) / (dim + 1.0)) - 1.0) + cs
    chi_n = math.sqrt(dim) * (1.0 - 1.0 / (4.0 * dim) + 1.0 / (21.0 * dim * dim))

    rng = np.random.default_rng(cfg.seed)
    xmean = x0.copy()
    sigma = float(cfg.sigma0)
    pc = np.zeros(dim)
    ps = np.zeros(dim)
    C = np.eye(dim)

    f0 = float(f(x0))
    best_x = x0.copy()
    best_f = f0 if np.isfinite(f0) else np.inf
    total_evals = 1

    n_gens = 0
    n_cand = 0
    bad_gens = 0
    status = "max_evals"
    while total_evals + lam <= cfg.max_evals:
        if cfg.tol_fitness is not None and best_f <= cfg.tol_fitness:
            status = "tol"
            break
        Csym = np.triu(C) + np.triu(C, 1).T
        evals_d, B = np.linalg.eigh(Csym)
        evals_d = np.sqrt(np.maximum(evals_d, 1e-30))
        Z = rng.standard_normal((lam, dim))
        Y = Z @ (B * evals_d).T              # y_k = B diag(d) z_k
        X = xmean + sigma * Y
        fit = np.empty(lam)
        for k in range(lam):
            fk = float(f(X[k]))
            fit[k] = fk if np.isfinite(fk) else np.inf
        n_gens += 1
        n_cand += lam
        total_evals += lam

        if not np.any(np.isfinite(fit)):
            bad_gens += 1
            if bad_gens >= 3:
                status = "abort"
                break
            continue
        bad_gens = 0

        order = np.argsort(fit, kind="stable")   # ties fall to the lower candidate index
        if fit[order[0]] < best_f:
            best_f = float(fit[order[0]])
            best_x = X[order[0]].copy()

        xold = xmean
        sel = order[:mu]
        xmean = w @ X[sel]
        y_w = (xmean - xold) / sigma

        inv_sqrt = (B / evals_d) @ B.T
        ps = (1.0 - cs) * ps + math.sqrt(cs * (2.0 - cs) * mueff) * (inv_sqrt @ y_w)
        hsig = (np.linalg.norm(ps)
                / math.sqrt(1.0 - (1.0 - cs) ** (2.0 * n_cand / lam)) / chi_n
                < 1.4 + 2.0 / (dim + 1.0))
        pc = (1.0 - cc) * pc + hsig * math.sqrt(cc * (2.0 - cc) * mueff) * y_w

        art = (X[sel] - xold) / sigma
        C = ((1.0 - c1 - cmu) * C
             + c1 * (np.outer(pc, pc) + (0.0 if hsig else cc * (2.0 - cc)) * C)
             + cmu * (art.T * w) @ art)
        sigma *= math.exp((cs / damps) * (np.linalg.norm(ps) / chi_n - 1.0))
        if not (np.isfinite(sigma) and np.all(np.isfinite(C)) and np.all(np.isfinite(xmean))):
            status = "abort"
            break

    if cfg.tol_fitness is not None and best_f <= cfg.tol_fitness:
        status = "tol"
    return CmaesResult(best_x, best_f, n_gens, n_cand, status)
