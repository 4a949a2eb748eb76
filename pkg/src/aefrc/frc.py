"""Certainty-graded fuzzy rule classifier.

One Gaussian membership function per (feature, class) pair is fitted
from class-conditional statistics. Each training sample nominates an
antecedent by picking, per feature, the membership function it fits
best; samples sharing an antecedent pool their membership products into
per-class strengths. The pooled strengths decide the rule's consequent
and its certainty grade: the winning strength minus the average of the
competing ones, normalized by the total. Inference scores a probe
against every rule and accumulates certainty-weighted match degrees per
class.

Everything here is deterministic: argmax ties resolve to the lowest
index, and generated rules are ordered canonically by antecedent, so
the rule base is independent of sample order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import DataError
from .serialize import dump_document, fmt_float, fmt_vector, load_document, parse_vector

STD_FLOOR_FRACTION = 0.01   # of the training range of the feature
STD_FLOOR_MIN = 1e-6


@dataclass
class FeatureMFBank:
    """Per-feature, per-class Gaussian membership functions.

    means and stds have shape (feature_count, class_count); membership
    function index coincides with class index at fitting time, but rules
    refer to functions purely by index.
    """

    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=float)
        self.stds = np.asarray(self.stds, dtype=float)
        if self.means.shape != self.stds.shape or self.means.ndim != 2:
            raise DataError("means and stds must share a 2-D shape")
        if not np.all(self.stds > 0):
            raise DataError("membership sigmas must be positive")

    @property
    def feature_count(self) -> int:
        return self.means.shape[0]

    @property
    def mf_count(self) -> int:
        return self.means.shape[1]

    def memberships(self, X: np.ndarray) -> np.ndarray:
        """All membership values of X, shape (m, feature_count, mf_count)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        z = (X[:, :, None] - self.means[None]) / self.stds[None]
        return np.maximum(np.exp(-0.5 * z * z), np.finfo(float).tiny)


def fit_mf_bank(train: Dataset) -> FeatureMFBank:
    """Fit class-conditional Gaussians per feature.

    Population statistics; the standard deviation is floored at
    STD_FLOOR_FRACTION of the feature's training range (at least
    STD_FLOOR_MIN) so single-sample and constant classes stay usable.
    """
    sizes = train.class_sizes()
    empty = [p + 1 for p, s in enumerate(sizes) if s == 0]
    if empty:
        raise DataError(f"classes {empty} have no training samples")
    n, P = train.feature_count, train.class_count
    means = np.empty((n, P))
    stds = np.empty((n, P))
    spread = train.samples.max(axis=0) - train.samples.min(axis=0)
    floor = np.maximum(STD_FLOOR_FRACTION * spread, STD_FLOOR_MIN)
    for p in range(1, P + 1):
        Xp = train.samples[train.labels == p]
        means[:, p - 1] = Xp.mean(axis=0)
        stds[:, p - 1] = np.maximum(Xp.std(axis=0), floor)
    return FeatureMFBank(means, stds)


@dataclass(frozen=True)
class Rule:
    antecedent: tuple[int, ...]   # 0-based membership index per feature
    consequent: int               # class label in 1..P
    cf: float                     # certainty grade; <= 0 marks an untrustworthy rule

    @property
    def degenerate(self) -> bool:
        return self.cf <= 0.0


@dataclass
class RuleBase:
    rules: tuple[Rule, ...]
    bank: FeatureMFBank
    class_count: int
    match_mode: str = "product"   # how feature memberships combine at inference

    def __post_init__(self):
        if self.match_mode not in ("product", "sum"):
            raise DataError("match_mode must be 'product' or 'sum'")

    @property
    def rule_count(self) -> int:
        return len(self.rules)


def _antecedents_of(bank: FeatureMFBank, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample antecedent (argmax membership per feature) and its product."""
    mem = bank.memberships(X)
    ant = mem.argmax(axis=2)                      # first maximum wins ties
    picked = np.take_along_axis(mem, ant[:, :, None], axis=2)[:, :, 0]
    return ant, picked.prod(axis=1)


def generate_rules(train: Dataset, bank: FeatureMFBank,
                   match_mode: str = "product") -> RuleBase:
    """Build the rule base that the training samples nominate.

    Consequent ties resolve to the lowest class index. Rules whose
    certainty is non-positive are kept, flagged by Rule.degenerate;
    their weight in inference is zero or adversarial, never helpful.
    """
    if train.feature_count != bank.feature_count:
        raise DataError("membership bank width does not match the data")
    ant, strength = _antecedents_of(bank, train.samples)
    dead = strength <= 0.0            # total underflow; floored MFs make this rare
    if dead.any():
        warnings.warn(f"{int(dead.sum())} samples with zero membership product "
                      "were skipped during rule generation", stacklevel=2)
        ant, strength = ant[~dead], strength[~dead]
        labels = train.labels[~dead]
    else:
        labels = train.labels
    if ant.shape[0] == 0:
        return RuleBase((), bank, train.class_count, match_mode)
    keys, inverse = np.unique(ant, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    G = keys.shape[0]
    beta = np.zeros((G, train.class_count))
    np.add.at(beta, (inverse, labels - 1), strength)

    rules = []
    for g in range(G):
        b = beta[g]
        total = float(b.sum())
        winner = int(b.argmax())
        active = int(np.count_nonzero(b > 0))
        if active > 1:
            mean_rest = (total - b[winner]) / (active - 1)
        else:
            mean_rest = 0.0
        cf = (float(b[winner]) - mean_rest) / total
        rules.append(Rule(tuple(int(a) for a in keys[g]), winner + 1, cf))
    return RuleBase(tuple(rules), bank, train.class_count, match_mode)


@dataclass
class ClassifyResult:
    label: int
    scores: np.ndarray   # per-class accumulated evidence
    tie: bool


def _rule_match(rb: RuleBase, X: np.ndarray) -> np.ndarray:
    """Match degree of every sample against every rule, shape (m, R)."""
    A = np.array([r.antecedent for r in rb.rules])
    cols = np.arange(rb.bank.feature_count)
    mu = np.maximum(np.exp(-0.5 * ((X[:, None, :] - rb.bank.means[cols, A][None]) /
                                   rb.bank.stds[cols, A][None]) ** 2),
                    np.finfo(float).tiny)
    if rb.match_mode == "product":
        return mu.prod(axis=2)
    return mu.sum(axis=2)


def classify_batch(rb: RuleBase, X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Labels, per-class scores, and tie flags for a matrix of probes."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != rb.bank.feature_count:
        raise DataError("probe width does not match the rule base")
    if not rb.rules:
        scores = np.zeros((X.shape[0], rb.class_count))
        return (np.ones(X.shape[0], dtype=np.int64), scores,
                np.ones(X.shape[0], dtype=bool))
    match = _rule_match(rb, X)
    weight = np.zeros((len(rb.rules), rb.class_count))
    for r, rule in enumerate(rb.rules):
        weight[r, rule.consequent - 1] = rule.cf
    scores = match @ weight
    labels = scores.argmax(axis=1) + 1
    top = scores.max(axis=1, keepdims=True)
    ties = (scores == top).sum(axis=1) > 1
    return labels.astype(np.int64), scores, ties


def classify(rb: RuleBase, x: np.ndarray) -> ClassifyResult:
    """Score one probe; ties resolve to the smallest class index and are reported."""
    labels, scores, ties = classify_batch(rb, np.atleast_2d(x))
    return ClassifyResult(int(labels[0]), scores[0], bool(ties[0]))


RULEBASE_FORMAT = "aefrc-rulebase"
RULEBASE_VERSION = 1


def rulebase_to_dict(rb: RuleBase) -> dict:
    return {
        "match_mode": rb.match_mode,
        "class_count": rb.class_count,
        "bank": {
            "means": fmt_vector(rb.bank.means),
            "stds": fmt_vector(rb.bank.stds),
            "shape": list(rb.bank.means.shape),
        },
        "rules": [
            {"antecedent": list(r.antecedent), "consequent": r.consequent, "cf": fmt_float(r.cf)}
            for r in rb.rules
        ],
    }


def rulebase_from_dict(d: dict) -> RuleBase:
    try:
        shape = tuple(int(s) for s in d["bank"]["shape"])
        bank = FeatureMFBank(
            parse_vector(d["bank"]["means"], shape[0] * shape[1]).reshape(shape),
            parse_vector(d["bank"]["stds"], shape[0] * shape[1]).reshape(shape),
        )
        rules = tuple(
            Rule(tuple(int(a) for a in r["antecedent"]), int(r["consequent"]), float(r["cf"]))
            for r in d["rules"]
        )
        return RuleBase(rules, bank, int(d["class_count"]), d.get("match_mode", "product"))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise DataError(f"malformed rule base document: {exc}") from exc


def save_rulebase(rb: RuleBase, path: str) -> None:
    dump_document(rulebase_to_dict(rb), path, RULEBASE_FORMAT, RULEBASE_VERSION)


def load_rulebase(path: str) -> RuleBase:
    return rulebase_from_dict(load_document(path, RULEBASE_FORMAT, RULEBASE_VERSION))


def rules_to_text(rb: RuleBase, label_names=None) -> str:
    """Human-readable rule listing, one rule per line."""
    names = tuple(label_names) if label_names else tuple(
        str(p) for p in range(1, rb.class_count + 1))
    lines = []
    for i, r in enumerate(rb.rules, start=1):
        parts = []
        for j, a in enumerate(r.antecedent):
            parts.append(
                f"x{j + 1} is mf{a + 1}"
                f"(m={rb.bank.means[j, a]:.4f}, s={rb.bank.stds[j, a]:.4f})"
            )
        flag = "  [degenerate]" if r.degenerate else ""
        lines.append(
            f"rule {i}: IF " + " AND ".join(parts)
            + f" THEN class {names[r.consequent - 1]} (CF={r.cf:.4f}){flag}"
        )
    return "\n".join(lines) + "\n"
