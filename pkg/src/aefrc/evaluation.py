"""Experiment harness and comparison statistics.

The harness side runs the full pipeline (fuzzify, pretrain, fine-tune,
grow rules) under stratified cross-validation. Preprocessing is fitted
on the training folds only; the test fold is mapped through the fitted
spec, so no test statistics leak into training. Every stochastic stage
derives its seed from the experiment's root seed and the fold index,
which makes whole experiments reproducible bit-for-bit. A fold that
fails numerically is recorded with its error and excluded from the
aggregates instead of killing the run.

The statistics side ranks methods across datasets (ties averaged,
missing cells omitted), computes the Friedman chi-square over the
average ranks, the Bonferroni-Dunn critical difference for comparisons
against a control, and a paired sign test with exact binomial cutoffs.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import rankdata

from .dataset import Dataset, FoldPlan, split, stratified_kfold
from .errors import AefrcError, ConfigError, DataError, NumericalError
from .finetune import FtIvConfig, frc_fitness, ft1, ft2, ft3, ft4
from .frc import RuleBase, classify_batch, fit_mf_bank, generate_rules
from .mf import ExpertRule, PreprocSpec, append_expert, expand_expert_samples, \
    fit_ramp_spec, preprocess, preprocess_array
from .network import AEConfig, Network, forward, stack
from .optim import CmaesConfig, OptimizerConfig
from .seeding import spawn_seed
from .serialize import dump_document, load_document

STRATEGIES = ("none", "ft1", "ft2", "ft3", "ft4")

RHO_GRID_DEFAULT = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one training run needs besides the data and a seed."""

    hidden_sizes: tuple[int, ...]
    ae: AEConfig = AEConfig()
    strategy: str = "ft1"
    opt: OptimizerConfig = OptimizerConfig()
    cmaes: CmaesConfig = CmaesConfig(sigma0=None, max_evals=2000)
    ft4: FtIvConfig = FtIvConfig()
    target_stat: str | None = None      # None: median, or mean when expert rows are in play
    match_mode: str = "product"
    ft3_inner_iters: int = 100
    expert: tuple[PreprocSpec, tuple[ExpertRule, ...]] | None = None
    expert_dont_care: str = "zeros"

    def __post_init__(self):
        problems = self.validate()
        if problems:
            raise ConfigError(problems)

    def validate(self) -> list[str]:
        problems = []
        if not self.hidden_sizes or any(int(h) < 1 for h in self.hidden_sizes):
            problems.append("hidden_sizes must be a non-empty tuple of positive widths")
        if self.strategy not in STRATEGIES:
            problems.append(f"strategy must be one of {STRATEGIES}, not '{self.strategy}'")
        if self.match_mode not in ("product", "sum"):
            problems.append(f"match_mode must be 'product' or 'sum', not '{self.match_mode}'")
        if self.target_stat not in (None, "median", "mean"):
            problems.append(f"target_stat must be 'median' or 'mean', not '{self.target_stat}'")
        if self.ft3_inner_iters < 1:
            problems.append("ft3_inner_iters must be positive")
        if self.expert_dont_care not in ("zeros", "uniform"):
            problems.append("expert_dont_care must be 'zeros' or 'uniform'")
        return problems

    def resolved_target_stat(self) -> str:
        if self.target_stat is not None:
            return self.target_stat
        return "mean" if self.expert is not None else "median"

    def echo(self) -> dict:
        """Fully resolved settings; a rerun from this echo reproduces the run."""
        d = {
            "hidden_sizes": list(self.hidden_sizes),
            "strategy": self.strategy,
            "ae": {
                "rho": self.ae.rho,
                "beta_sparse": self.ae.beta_sparse,
                "weight_decay": self.ae.weight_decay,
                "denoise_snr_db": self.ae.denoise_snr_db,
            },
            "optimizer": {
                "max_iters": self.opt.max_iters,
                "tol": self.opt.tol,
                "history": self.opt.history,
            },
            "cmaes": {
                "sigma0": self.cmaes.sigma0,
                "population": self.cmaes.population,
                "max_evals": self.cmaes.max_evals,
                "tol_fitness": self.cmaes.tol_fitness,
            },
            "ft4": {
                "beta_sep": self.ft4.beta_sep,
                "zeta": self.ft4.zeta,
                "beta_grid": list(self.ft4.beta_grid),
                "c_abs_cap": self.ft4.c_abs_cap,
            },
            "target_stat": self.resolved_target_stat(),
            "match_mode": self.match_mode,
            "ft3_inner_iters": self.ft3_inner_iters,
            "expert": self.expert is not None,
            "expert_dont_care": self.expert_dont_care,
        }
        return d


@dataclass
class FittedPipeline:
    """A trained preprocess-encode-classify chain plus its provenance."""

    preproc: PreprocSpec
    net: Network
    rulebase: RuleBase
    label_names: tuple[str, ...]
    train_accuracy: float
    seed: int
    extras: dict = field(default_factory=dict)

    def predict_array(self, X: np.ndarray):
        """Labels, per-class scores, and tie flags for raw feature rows."""
        Xp = preprocess_array(np.asarray(X, dtype=float), self.preproc)
        H = forward(self.net, Xp)[-1]
        return classify_batch(self.rulebase, H)

    def accuracy(self, ds: Dataset) -> float:
        labels, _, _ = self.predict_array(ds.samples)
        return float(np.mean(labels == ds.labels))


def train_pipeline(train: Dataset, cfg: PipelineConfig, seed: int) -> FittedPipeline:
    """Run the full training chain on one training set."""
    if cfg.expert is not None:
        spec, rules = cfg.expert
        xp = preprocess(train, spec)
        xe = expand_expert_samples(rules, spec, train.label_names, cfg.expert_dont_care)
        xp = append_expert(xp, xe)
    else:
        spec = fit_ramp_spec(train)
        xp = preprocess(train, spec)

    net = stack(xp.samples, cfg.hidden_sizes, cfg.ae, cfg.opt, spawn_seed(seed, "stack"))
    extras: dict = {}
    if cfg.strategy == "ft1":
        net = ft1(net, xp, cfg.opt, cfg.resolved_target_stat())
    elif cfg.strategy == "ft2":
        extras["pretrain_fitness"] = frc_fitness(net, xp).fitness
        cma = replace(cfg.cmaes, seed=spawn_seed(seed, "cma"))
        net, res = ft2(net, xp, cma)
        extras.update(final_fitness=res.fitness, cma_status=res.status,
                      cma_candidate_evals=res.n_candidate_evals)
    elif cfg.strategy == "ft3":
        extras["pretrain_fitness"] = frc_fitness(net, xp).fitness
        cma = replace(cfg.cmaes, seed=spawn_seed(seed, "cma"))
        net, _, res = ft3(net, xp, cma, cfg.opt, cfg.ft3_inner_iters)
        extras.update(final_fitness=res.fitness, cma_status=res.status,
                      cma_candidate_evals=res.n_candidate_evals)
    elif cfg.strategy == "ft4":
        net, _ = ft4(net, xp, cfg.ft4, cfg.opt)

    H = forward(net, xp.samples)[-1]
    hidden = xp.with_samples(H)
    rb = generate_rules(hidden, fit_mf_bank(hidden), cfg.match_mode)
    predicted, _, _ = classify_batch(rb, H)
    train_acc = float(np.mean(predicted == xp.labels))
    return FittedPipeline(spec, net, rb, train.label_names, train_acc, seed, extras)


@dataclass
class FoldResult:
    fold: int
    seed: int
    accuracy: float | None
    rule_count: int | None
    train_accuracy: float | None
    elapsed: float
    error: str | None = None
    preproc: dict | None = None
    extras: dict = field(default_factory=dict)
    pipeline: FittedPipeline | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class ExperimentReport:
    config: dict
    k: int
    seed: int
    folds: list[FoldResult]
    mean_accuracy: float
    std_accuracy: float
    mean_rule_count: float
    valid_folds: int
    elapsed: float

    @property
    def rho(self) -> float:
        return self.config["ae"]["rho"]


def _aggregate(config: dict, k: int, seed: int, folds: list[FoldResult],
               elapsed: float) -> ExperimentReport:
    good = [f for f in folds if f.ok]
    if good:
        accs = np.array([f.accuracy for f in good])
        counts = np.array([f.rule_count for f in good], dtype=float)
        mean_acc, std_acc = float(accs.mean()), float(accs.std())
        mean_rules = float(counts.mean())
    else:
        mean_acc = std_acc = mean_rules = float("nan")
    return ExperimentReport(config, k, seed, folds, mean_acc, std_acc,
                            mean_rules, len(good), elapsed)


def run_fold(ds: Dataset, cfg: PipelineConfig, plan: FoldPlan, fold: int,
             seed: int) -> FoldResult:
    """Train on everything outside the fold, test on the fold."""
    train, test = split(ds, plan, fold)
    fold_seed = spawn_seed(seed, "fold", fold)
    t0 = time.perf_counter()
    try:
        fp = train_pipeline(train, cfg, fold_seed)
        acc = fp.accuracy(test)
    except (NumericalError, DataError) as exc:
        return FoldResult(fold, fold_seed, None, None, None,
                          time.perf_counter() - t0, error=str(exc))
    return FoldResult(fold, fold_seed, acc, fp.rulebase.rule_count, fp.train_accuracy,
                      time.perf_counter() - t0, preproc=fp.preproc.to_dict(),
                      extras=dict(fp.extras), pipeline=fp)


def _fold_cell(args):
    return run_fold(*args)


def _map_cells(cells, jobs):
    if jobs <= 1 or len(cells) <= 1:
        return [_fold_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_fold_cell, cells))


def run_cv(ds: Dataset, cfg: PipelineConfig, k: int = 10, seed: int = 0,
           plan: FoldPlan | None = None, jobs: int = 1) -> ExperimentReport:
    """Stratified k-fold evaluation of one configuration."""
    if plan is None:
        plan = stratified_kfold(ds, k, spawn_seed(seed, "plan"))
    elif plan.sample_count != ds.sample_count:
        raise DataError("fold plan does not match dataset size")
    t0 = time.perf_counter()
    cells = [(ds, cfg, plan, f, seed) for f in range(plan.k)]
    folds = _map_cells(cells, jobs)
    return _aggregate(cfg.echo(), plan.k, seed, folds, time.perf_counter() - t0)


@dataclass
class SweepResult:
    best_rho: float
    best: ExperimentReport
    reports: dict[float, ExperimentReport]


def sweep_rho(ds: Dataset, cfg: PipelineConfig, rho_grid=RHO_GRID_DEFAULT,
              k: int = 10, seed: int = 0, plan: FoldPlan | None = None,
              jobs: int = 1) -> SweepResult:
    """Evaluate every sparsity target on the same folds; pick the best mean accuracy.

    Exact ties go to the smaller rho.
    """
    grid = tuple(float(r) for r in rho_grid)
    if not grid:
        raise ConfigError("rho grid must not be empty")
    if plan is None:
        plan = stratified_kfold(ds, k, spawn_seed(seed, "plan"))
    cells = []
    for rho in grid:
        cell_cfg = replace(cfg, ae=replace(cfg.ae, rho=rho))
        for f in range(plan.k):
            cells.append((ds, cell_cfg, plan, f, seed))
    t0 = time.perf_counter()
    results = _map_cells(cells, jobs)
    elapsed = time.perf_counter() - t0

    reports: dict[float, ExperimentReport] = {}
    per_rho = plan.k
    for i, rho in enumerate(grid):
        folds = results[i * per_rho:(i + 1) * per_rho]
        cell_cfg = replace(cfg, ae=replace(cfg.ae, rho=rho))
        reports[rho] = _aggregate(cell_cfg.echo(), plan.k, seed, folds, elapsed / len(grid))

    best_rho = None
    for rho in sorted(grid):
        r = reports[rho]
        if math.isnan(r.mean_accuracy):
            continue
        if best_rho is None or r.mean_accuracy > reports[best_rho].mean_accuracy:
            best_rho = rho
    if best_rho is None:
        raise NumericalError("every sweep cell failed; nothing to select")
    return SweepResult(best_rho, reports[best_rho], reports)


REPORT_FORMAT = "aefrc-report"
REPORT_VERSION = 1


def report_to_dict(report: ExperimentReport) -> dict:
    folds = [
        {
            "fold": f.fold, "seed": f.seed, "accuracy": f.accuracy,
            "rule_count": f.rule_count, "train_accuracy": f.train_accuracy,
            "elapsed": f.elapsed, "error": f.error, "preproc": f.preproc,
            "extras": f.extras,
        }
        for f in report.folds
    ]
    return {
        "config": report.config,
        "k": report.k,
        "seed": report.seed,
        "folds": folds,
        "aggregates": {
            "mean_accuracy": report.mean_accuracy,
            "std_accuracy": report.std_accuracy,
            "mean_rule_count": report.mean_rule_count,
            "valid_folds": report.valid_folds,
        },
        "elapsed": report.elapsed,
    }


def save_report(report: ExperimentReport, path: str) -> None:
    """Serialize a report, re-deriving the aggregates as a consistency check."""
    doc = report_to_dict(report)
    good = [f for f in doc["folds"] if f["error"] is None]
    agg = doc["aggregates"]
    if good:
        accs = np.array([f["accuracy"] for f in good])
        drift = max(abs(float(accs.mean()) - agg["mean_accuracy"]),
                    abs(float(accs.std()) - agg["std_accuracy"]))
        if drift > 1e-12 or agg["valid_folds"] != len(good):
            raise NumericalError("report aggregates do not match their per-fold values")
    dump_document(doc, path, REPORT_FORMAT, REPORT_VERSION)


def load_report(path: str) -> dict:
    return load_document(path, REPORT_FORMAT, REPORT_VERSION)


# --- comparison statistics over published error tables ---------------------


@dataclass
class RankTable:
    """Per-dataset ranks of competing methods, lower error is better.

    errors and ranks are (dataset, method) matrices with NaN marking
    cells a method has no entry for; such cells are omitted from that
    method's rank sum and average.
    """

    methods: tuple[str, ...]
    datasets: tuple[str, ...]
    errors: np.ndarray
    ranks: np.ndarray

    @property
    def rank_sums(self) -> np.ndarray:
        return np.nansum(self.ranks, axis=0)

    @property
    def entry_counts(self) -> np.ndarray:
        return np.sum(np.isfinite(self.ranks), axis=0)

    @property
    def average_ranks(self) -> np.ndarray:
        return self.rank_sums / self.entry_counts


def rank(errors: np.ndarray, methods=None, datasets=None) -> RankTable:
    """Rank methods within each dataset row, ascending error, ties averaged."""
    errors = np.asarray(errors, dtype=float)
    if errors.ndim != 2:
        raise DataError("error matrix must be 2-D (datasets by methods)")
    D, L = errors.shape
    methods = tuple(methods) if methods else tuple(f"m{j + 1}" for j in range(L))
    datasets = tuple(datasets) if datasets else tuple(f"d{i + 1}" for i in range(D))
    if len(methods) != L or len(datasets) != D:
        raise DataError("method/dataset names do not match the matrix shape")
    ranks = np.full_like(errors, np.nan)
    for i in range(D):
        present = np.isfinite(errors[i])
        if present.sum() < 2:
            raise DataError(f"dataset row '{datasets[i]}' has fewer than 2 entries to rank")
        ranks[i, present] = rankdata(errors[i, present], method="average")
    return RankTable(methods, datasets, errors, ranks)


@dataclass
class FriedmanResult:
    chi2: float
    df: int
    n_datasets: int


def friedman(rt: RankTable) -> FriedmanResult:
    """Friedman chi-square over the table's average ranks.

    Average ranks are rounded to 2 decimals before entering the formula,
    the convention under which published rank tables report and combine
    them; N is the number of dataset rows in the table.
    """
    l = len(rt.methods)
    n = len(rt.datasets)
    if l < 2:
        raise DataError("need at least 2 methods")
    R = np.round(rt.average_ranks, 2)
    chi2 = 12.0 * n / (l * (l + 1)) * (float(np.sum(R * R)) - l * (l + 1) ** 2 / 4.0)
    return FriedmanResult(float(chi2), l - 1, n)


# Two-sided critical values for comparisons against a control, keyed by
# the number of comparison degrees of freedom the published analyses use.
DUNN_Q = {
    0.05: {2: 1.960, 3: 2.241, 4: 2.394, 5: 2.498, 6: 2.576,
           7: 2.638, 8: 2.690, 9: 2.724, 10: 2.773},
    0.10: {2: 1.645, 3: 1.960, 4: 2.128, 5: 2.241, 6: 2.326,
           7: 2.394, 8: 2.450, 9: 2.498, 10: 2.539},
}


def dunn_q(l: int, alpha: float = 0.05) -> float:
    """Tabulated critical value for l methods, looked up at df = l - 1."""
    try:
        table = DUNN_Q[alpha]
    except KeyError:
        raise DataError(f"no critical values tabulated for alpha={alpha}") from None
    key = max(l - 1, 2)
    if key not in table:
        raise DataError(f"critical value not tabulated for {l} methods at alpha={alpha}")
    return table[key]


def bonferroni_dunn_cd(l: int, n_datasets: int, q_alpha: float | None = None,
                       alpha: float = 0.05) -> float:
    """Critical difference between average ranks for control comparisons."""
    if l < 2 or n_datasets < 1:
        raise DataError("need at least 2 methods and 1 dataset")
    if q_alpha is None:
        q_alpha = dunn_q(l, alpha)
    return q_alpha * math.sqrt(l * (l + 1) / (6.0 * n_datasets))


@dataclass
class SignTestResult:
    wins_a: int
    wins_b: int
    ties: int
    n: int
    cutoff: int
    significant: bool    # the larger win count reaches the cutoff


def sign_test_cutoff(n: int, alpha: float = 0.05) -> int:
    """Smallest win count w with P(X >= w) <= alpha for X ~ Binomial(n, 1/2)."""
    total = 2 ** n
    tail = 0
    for w in range(n, -1, -1):
        tail += math.comb(n, w)
        if tail / total > alpha:
            return w + 1
    return 0


def wilcoxon_sign(errors_a, errors_b, alpha: float = 0.05) -> SignTestResult:
    """Paired sign test on error vectors; lower error wins the pair.

    Pairs where either side is missing (NaN) are dropped before counting.
    """
    a = np.asarray(errors_a, dtype=float)
    b = np.asarray(errors_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError("error vectors must be 1-D and of equal length")
    keep = np.isfinite(a) & np.isfinite(b)
    a, b = a[keep], b[keep]
    n = a.size
    if n < 5:
        raise DataError(f"sign test needs at least 5 comparable pairs, found {n}")
    wins_a = int(np.sum(a < b))
    wins_b = int(np.sum(b < a))
    ties = n - wins_a - wins_b
    cutoff = sign_test_cutoff(n, alpha)
    return SignTestResult(wins_a, wins_b, ties, n, cutoff, max(wins_a, wins_b) >= cutoff)


def load_rank_table(path: str) -> RankTable:
    """Read a delimited error matrix: header of method names, one dataset per row.

    The first column holds dataset names; 'NA' (any case) or an empty
    field marks a missing entry.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise DataError(f"cannot read rank table {path}: {exc}") from exc
    if len(rows) < 2 or len(rows[0]) < 3:
        raise DataError(f"{path}: need a header row and at least 2 method columns")
    methods = tuple(c.strip() for c in rows[0][1:])
    datasets = []
    errors = np.full((len(rows) - 1, len(methods)), np.nan)
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != len(methods) + 1:
            raise DataError(f"{path} line {i + 1}: expected {len(methods) + 1} fields")
        datasets.append(row[0].strip())
        for j, cell in enumerate(row[1:]):
            cell = cell.strip()
            if cell and cell.upper() not in ("NA", "NAN"):
                try:
                    errors[i - 1, j] = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path} line {i + 1}: cannot parse '{cell}' as an error value"
                    ) from None
    return rank(errors, methods, datasets)
