"""Fine-tuning strategies that couple a pretrained encoder to the rule classifier.

Four strategies, increasingly indirect about what they optimize:

* ft1 drives every encoder parameter so each sample's deepest code
  lands on its class's target point (the per-class median by default,
  mean as a variant). Pure backprop, no decay.
* ft2 hands the flattened encoder parameters to CMA-ES with a fitness
  that trades training accuracy against rule count and consequent
  diversity, so the classifier itself steers the representation.
* ft3 keeps the encoder fixed-by-retraining: CMA-ES searches over the
  class target points, and each candidate is scored by resetting the
  encoder to its pretrained state, converging it onto the candidate
  targets, and evaluating the same fitness.
* ft4 skips the search and optimizes the target points directly with a
  smooth cost that pulls each point to its class while pushing classes
  apart, then converges the encoder onto the optimized points.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .dataset import Dataset
from .errors import DataError, NumericalError
from .frc import classify_batch, fit_mf_bank, generate_rules
from .network import Network, flatten_params, forward, \
    _target_cost_grad_flat, unflatten_params
from .optim import CmaesConfig, CmaesResult, OptimizerConfig, cmaes, minimize

log = logging.getLogger(__name__)


@dataclass
class ConvergencePoints:
    """One target vector per class in the deepest code space."""

    values: np.ndarray   # (class_count, code_width)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise DataError("convergence points must form a (class, width) matrix")
        if not np.all(np.isfinite(self.values)):
            raise NumericalError("convergence points contain non-finite values")

    @property
    def class_count(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def _class_targets(H: np.ndarray, labels: np.ndarray, class_count: int, stat: str):
    H = np.asarray(H, dtype=float)
    out = np.empty((class_count, H.shape[1]))
    for p in range(1, class_count + 1):
        rows = H[labels == p]
        if rows.shape[0] == 0:
            raise DataError(f"class {p} has no samples to derive a target from")
        out[p - 1] = np.median(rows, axis=0) if stat == "median" else rows.mean(axis=0)
    return ConvergencePoints(out)


def class_targets_median(H: np.ndarray, labels: np.ndarray, class_count: int) -> ConvergencePoints:
    """Per-class, per-unit median of the deepest codes."""
    return _class_targets(H, labels, class_count, "median")


def class_targets_mean(H: np.ndarray, labels: np.ndarray, class_count: int) -> ConvergencePoints:
    return _class_targets(H, labels, class_count, "mean")


def _targets_for(labels: np.ndarray, points: ConvergencePoints) -> np.ndarray:
    return points.values[labels - 1]


def converge_to_targets(net: Network, Xp: np.ndarray, labels: np.ndarray,
                        points: ConvergencePoints, opt: OptimizerConfig) -> Network:
    """Backprop the whole encoder so codes approach their class target."""
    Xp = np.asarray(Xp, dtype=float)
    if points.width != net.layer_sizes[-1]:
        raise DataError("convergence points do not match the code width")
    if points.class_count < int(labels.max()):
        raise DataError("convergence points cover fewer classes than the labels")
    T = _targets_for(np.asarray(labels), points)
    res = minimize(lambda v: _target_cost_grad_flat(v, net.layer_sizes, Xp, T),
                   flatten_params(net), opt)
    return unflatten_params(net.layer_sizes, res.x)


def ft1(net: Network, train: Dataset, opt: OptimizerConfig, stat: str = "median") -> Network:
    """Target-driven fine-tuning toward per-class medians (or means)."""
    if stat not in ("median", "mean"):
        raise DataError("stat must be 'median' or 'mean'")
    H = forward(net, train.samples)[-1]
    points = _class_targets(H, train.labels, train.class_count, stat)
    return converge_to_targets(net, train.samples, train.labels, points, opt)


@dataclass
class FitnessReport:
    """Training-set fitness of a network under the rule classifier.

    fitness is exactly -t_acc + g_d / m - p_consequent / class_count;
    the constructor enforces the identity so no caller can drift.
    """

    t_acc: float
    g_d: int
    p_consequent: int
    m: int
    class_count: int
    fitness: float

    def __post_init__(self):
        expected = -self.t_acc + self.g_d / self.m - self.p_consequent / self.class_count
        if abs(self.fitness - expected) > 1e-12:
            raise NumericalError(
                f"fitness {self.fitness} violates its defining identity {expected}"
            )


def frc_fitness(net: Network, train: Dataset) -> FitnessReport:
    """Grow a rule base on the deepest codes and score it on the same data."""
    H = forward(net, train.samples)[-1]
    hidden = train.with_samples(H)
    rb = generate_rules(hidden, fit_mf_bank(hidden))
    predicted, _, _ = classify_batch(rb, H)
    t_acc = float(np.mean(predicted == train.labels))
    g_d = rb.rule_count
    p_consequent = len({r.consequent for r in rb.rules})
    m = train.sample_count
    fitness = -t_acc + g_d / m - p_consequent / train.class_count
    return FitnessReport(t_acc, g_d, p_consequent, m, train.class_count, fitness)


def ft2(net: Network, train: Dataset, cma: CmaesConfig) -> tuple[Network, CmaesResult]:
    """Evolve all encoder parameters against the rule-classifier fitness.

    The step size defaults to a tenth of the RMS of the pretrained
    parameters when the config leaves sigma0 unset. A CMA-ES abort
    returns the pretrained network unchanged, with a warning.
    """
    x0 = flatten_params(net)
    if cma.sigma0 is None:
        rms = float(np.sqrt(np.mean(x0 * x0)))
        cma = replace(cma, sigma0=0.1 * rms if rms > 0 else 0.1)

    def fitness(v):
        try:
            return frc_fitness(unflatten_params(net.layer_sizes, v), train).fitness
        except (NumericalError, DataError):
            return np.inf

    res = cmaes(fitness, x0, cma)
    if res.aborted:
        warnings.warn("parameter evolution aborted; keeping the pretrained network")
        return net.copy(), res
    return unflatten_params(net.layer_sizes, res.x), res


def ft3(net: Network, train: Dataset, cma: CmaesConfig, opt: OptimizerConfig,
        inner_max_iters: int = 100) -> tuple[Network, ConvergencePoints, CmaesResult]:
    """Evolve the class target points; retrain the encoder per candidate.

    Every candidate evaluation starts from the same pretrained
    parameters, so candidates are comparable and the final network is
    reproducible from the best points alone.
    """
    H = forward(net, train.samples)[-1]
    medians = class_targets_median(H, train.labels, train.class_count)
    shape = medians.values.shape
    inner_opt = replace(opt, max_iters=inner_max_iters)
    if cma.sigma0 is None:
        cma = replace(cma, sigma0=0.1)

    def fitness(v):
        pts = ConvergencePoints(v.reshape(shape))
        try:
            tuned = converge_to_targets(net, train.samples, train.labels, pts, inner_opt)
            return frc_fitness(tuned, train).fitness
        except (NumericalError, DataError):
            return np.inf

    res = cmaes(fitness, medians.values.ravel(), cma)
    if res.aborted:
        warnings.warn("target-point evolution aborted; converging onto the medians")
    best = ConvergencePoints(res.x.reshape(shape))
    tuned = converge_to_targets(net, train.samples, train.labels, best, inner_opt)
    return tuned, best, res


@dataclass(frozen=True)
class FtIvConfig:
    """Settings for the smooth convergence-point optimization.

    beta_grid, when non-empty, is scanned from the largest separation
    weight downward; the first weight whose optimized points all stay
    within c_abs_cap in absolute value wins. An empty grid uses beta_sep
    directly with no cap check.
    """

    beta_sep: float = 1.0
    zeta: float = 0.05
    beta_grid: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    c_abs_cap: float = 10.0

    def __post_init__(self):
        if not self.beta_sep > 0:
            raise NumericalError("separation weight must be positive")
        if self.zeta < 0:
            raise NumericalError("shrinkage weight must be non-negative")
        if any(b <= 0 for b in self.beta_grid):
            raise NumericalError("grid separation weights must be positive")
        if not self.c_abs_cap > 0:
            raise NumericalError("magnitude cap must be positive")


def separation_cost_grad(C_flat: np.ndarray, H: np.ndarray, labels: np.ndarray,
                         class_count: int, beta: float, zeta: float):
    """Cost and gradient of the class-target objective.

    Three terms: mean squared pull of each point toward its class's
    codes (per-class averaged), a pairwise push that rewards distance
    between points (each unordered pair counted once, weighted
    beta / (2 (P - 1))), and a shrinkage term zeta / (2 P) times the
    total squared magnitude that keeps points from escaping to infinity.
    """
    H = np.asarray(H, dtype=float)
    labels = np.asarray(labels)
    P = class_count
    C = np.asarray(C_flat, dtype=float).reshape(P, H.shape[1])
    cost = 0.0
    grad = np.zeros_like(C)
    for p in range(1, P + 1):
        rows = H[labels == p]
        if rows.shape[0] == 0:
            raise DataError(f"class {p} has no samples")
        diff = rows - C[p - 1]
        cost += 0.5 * float(np.sum(diff * diff)) / rows.shape[0]
        grad[p - 1] = C[p - 1] - rows.mean(axis=0)
    if P > 1:
        total = C.sum(axis=0)
        sq = float(np.sum(C * C))
        pair_sq = P * sq - float(np.dot(total, total))   # sum over unordered pairs, each once
        cost -= beta / (2.0 * (P - 1)) * pair_sq
        grad -= beta / (P - 1) * (P * C - total)
    cost += zeta / (2.0 * P) * float(np.sum(C * C))
    grad += zeta / P * C
    return cost, grad.ravel()


def ft4_targets(H: np.ndarray, labels: np.ndarray, class_count: int,
                cfg: FtIvConfig, opt: OptimizerConfig) -> tuple[ConvergencePoints, float]:
    """Optimize class target points; pick the separation weight by the cap rule.

    Scans beta_grid descending and returns the first solution whose
    points all satisfy |c| <= c_abs_cap. When every weight violates the
    cap, the smallest weight's solution is returned under a warning:
    stronger separation only drives points further out, so the smallest
    weight is the least-bad choice.
    """
    H = np.asarray(H, dtype=float)
    means = _class_targets(H, labels, class_count, "mean").values
    grid = sorted(cfg.beta_grid, reverse=True) if cfg.beta_grid else [cfg.beta_sep]
    points = None
    chosen = grid[-1]
    for beta in grid:
        res = minimize(
            lambda v: separation_cost_grad(v, H, labels, class_count, beta, cfg.zeta),
            means.ravel(), opt)
        points = ConvergencePoints(res.x.reshape(means.shape))
        if not cfg.beta_grid or np.max(np.abs(points.values)) <= cfg.c_abs_cap:
            return points, float(beta)
    warnings.warn(
        "every separation weight pushed some target beyond the cap; "
        f"keeping the smallest weight {chosen}"
    )
    return points, float(chosen)


def ft4(net: Network, train: Dataset, cfg: FtIvConfig,
        opt: OptimizerConfig) -> tuple[Network, ConvergencePoints]:
    """Optimize target points smoothly, then converge the encoder onto them."""
    H = forward(net, train.samples)[-1]
    points, beta = ft4_targets(H, train.labels, train.class_count, cfg, opt)
    log.debug("separation weight %.3g selected", beta)
    tuned = converge_to_targets(net, train.samples, train.labels, points, opt)
    return tuned, points
