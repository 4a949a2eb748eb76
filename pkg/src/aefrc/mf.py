"""Membership functions, input fuzzification, and expert-knowledge encoding.

Raw features are mapped through per-feature membership functions before
any network sees them, so the whole pipeline operates on values in
[0, 1]. The default preprocessing fits one ramp per feature from the
training minimum to the training maximum. Domain knowledge enters as an
alternative bank of hand-specified membership functions together with
linguistic rules; each rule is expanded into sparse binary training rows
that activate exactly the membership columns the rule calls.

Fuzzified matrices are laid out feature-major: feature j with K_j
membership functions occupies K_j adjacent columns, and the global
column of (feature j, function l) is sum of K_{j'} for j' < j, plus l
(1-based).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import DataError
from .serialize import fmt_float, load_document, dump_document


@dataclass(frozen=True)
class GaussianMF:
    mean: float
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0 and np.isfinite(self.sigma) and np.isfinite(self.mean)):
            raise DataError("gaussian membership needs finite mean and positive sigma")

    def evaluate(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.sigma
        # clamp at the smallest normal float so far-away probes keep a
        # strictly positive membership instead of underflowing to 0
        return np.maximum(np.exp(-0.5 * z * z), np.finfo(float).tiny)


@dataclass(frozen=True)
class RampMF:
    """0 below lo, 1 above hi, linear in between."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo < self.hi):
            raise DataError("ramp membership needs finite lo < hi")

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0)


@dataclass(frozen=True)
class ConstantMF:
    """Degenerate features (no spread in training data) map to a constant."""

    value: float = 0.5

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        return np.full_like(x, self.value)


MF = GaussianMF | RampMF | ConstantMF


def mf_to_dict(mf: MF) -> dict:
    if isinstance(mf, GaussianMF):
        return {"type": "gaussian", "mean": fmt_float(mf.mean), "sigma": fmt_float(mf.sigma)}
    if isinstance(mf, RampMF):
        return {"type": "ramp", "lo": fmt_float(mf.lo), "hi": fmt_float(mf.hi)}
    if isinstance(mf, ConstantMF):
        return {"type": "constant", "value": fmt_float(mf.value)}
    raise DataError(f"unknown membership function {mf!r}")


def mf_from_dict(d: dict) -> MF:
    try:
        kind = d["type"]
        if kind == "gaussian":
            return GaussianMF(float(d["mean"]), float(d["sigma"]))
        if kind == "ramp":
            return RampMF(float(d["lo"]), float(d["hi"]))
        if kind == "constant":
            return ConstantMF(float(d["value"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed membership function entry {d!r}: {exc}") from exc
    raise DataError(f"unknown membership function type '{kind}'")


@dataclass(frozen=True)
class PreprocSpec:
    """Ordered membership functions per input feature."""

    feature_mfs: tuple[tuple[MF, ...], ...]

    def __post_init__(self):
        if not self.feature_mfs or any(len(ms) == 0 for ms in self.feature_mfs):
            raise DataError("every feature needs at least one membership function")

    @property
    def feature_count(self) -> int:
        return len(self.feature_mfs)

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(len(ms) for ms in self.feature_mfs)

    @property
    def total_width(self) -> int:
        return sum(self.widths)

    def column_of(self, feature: int, mf_index: int) -> int:
        """0-based global column of (feature, mf_index), both 0-based."""
        return sum(self.widths[:feature]) + mf_index

    def to_dict(self) -> dict:
        return {"features": [[mf_to_dict(mf) for mf in ms] for ms in self.feature_mfs]}

    @staticmethod
    def from_dict(d: dict) -> "PreprocSpec":
        try:
            feats = d["features"]
        except (KeyError, TypeError) as exc:
            raise DataError("preprocessing spec lacks a 'features' list") from exc
        return PreprocSpec(tuple(tuple(mf_from_dict(m) for m in ms) for ms in feats))


def fit_ramp_spec(train: Dataset) -> PreprocSpec:
    """One ramp per feature spanning the training range.

    A feature that is constant on the training data carries no ordering
    information; it maps to the constant 0.5 instead of a ramp.
    """
    lo = train.samples.min(axis=0)
    hi = train.samples.max(axis=0)
    mfs = []
    for j in range(train.feature_count):
        if hi[j] > lo[j]:
            mfs.append((RampMF(float(lo[j]), float(hi[j])),))
        else:
            mfs.append((ConstantMF(0.5),))
    return PreprocSpec(tuple(mfs))


def preprocess_array(X: np.ndarray, spec: PreprocSpec) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != spec.feature_count:
        raise DataError(
            f"input width {X.shape[1] if X.ndim == 2 else '?'} does not match "
            f"spec with {spec.feature_count} features"
        )
    out = np.empty((X.shape[0], spec.total_width), dtype=float)
    col = 0
    for j, ms in enumerate(spec.feature_mfs):
        for mf in ms:
            out[:, col] = mf.evaluate(X[:, j])
            col += 1
    return out


def preprocess(ds: Dataset, spec: PreprocSpec) -> Dataset:
    """Fuzzify a dataset; labels and label space are untouched."""
    return ds.with_samples(preprocess_array(ds.samples, spec))


@dataclass(frozen=True)
class ExpertRule:
    """A linguistic rule: one membership choice per feature, or None to skip it.

    mf_choice holds 1-based indices into the feature's membership list.
    tau is the number of identical training rows the rule is expanded to.
    """

    mf_choice: tuple[int | None, ...]
    consequent: str
    tau: int = 1

    def __post_init__(self):
        if self.tau < 1:
            raise DataError("rule weight tau must be a positive integer")
        if all(c is None for c in self.mf_choice):
            raise DataError("a rule must reference at least one feature")


def make_expert_samples(rules, spec: PreprocSpec, label_names) -> Dataset:
    """Expand rules into binary training rows in the fuzzified space.

    Each rule becomes tau identical rows with a 1 in the global column of
    every membership function it calls. Columns of features the rule does
    not mention stay 0, matching how such rules are published; pass
    dont_care="uniform" from expand_expert_samples for the alternative
    1/K_j spread.
    """
    return expand_expert_samples(rules, spec, label_names, dont_care="zeros")


def expand_expert_samples(rules, spec: PreprocSpec, label_names,
                          dont_care: str = "zeros") -> Dataset:
    if dont_care not in ("zeros", "uniform"):
        raise DataError("dont_care must be 'zeros' or 'uniform'")
    label_names = tuple(label_names)
    if not rules:
        raise DataError("no rules to expand")
    widths = spec.widths
    rows = []
    labels = []
    for r, rule in enumerate(rules):
        if len(rule.mf_choice) != spec.feature_count:
            raise DataError(
                f"rule {r + 1} names {len(rule.mf_choice)} features, spec has {spec.feature_count}"
            )
        if rule.consequent not in label_names:
            raise DataError(
                f"rule {r + 1} consequent '{rule.consequent}' is not a known class label"
            )
        row = np.zeros(spec.total_width, dtype=float)
        for j, choice in enumerate(rule.mf_choice):
            if choice is None:
                if dont_care == "uniform":
                    start = spec.column_of(j, 0)
                    row[start:start + widths[j]] = 1.0 / widths[j]
                continue
            if not 1 <= choice <= widths[j]:
                raise DataError(
                    f"rule {r + 1} asks for membership {choice} of feature {j + 1}, "
                    f"which has only {widths[j]}"
                )
            row[spec.column_of(j, choice - 1)] = 1.0
        label = label_names.index(rule.consequent) + 1
        for _ in range(rule.tau):
            rows.append(row)
            labels.append(label)
    return Dataset(np.array(rows), np.array(labels), len(label_names), label_names)


def append_expert(fuzzified: Dataset, expert: Dataset) -> Dataset:
    """Stack expert rows under the fuzzified training rows."""
    if fuzzified.feature_count != expert.feature_count:
        raise DataError(
            f"width mismatch: data rows have {fuzzified.feature_count} columns, "
            f"expert rows have {expert.feature_count}"
        )
    if fuzzified.class_count != expert.class_count or fuzzified.label_names != expert.label_names:
        raise DataError("expert rows use a different label space than the data")
    return Dataset(
        np.vstack([fuzzified.samples, expert.samples]),
        np.concatenate([fuzzified.labels, expert.labels]),
        fuzzified.class_count,
        fuzzified.label_names,
    )


EXPERT_FORMAT = "aefrc-expert"
EXPERT_VERSION = 1


def save_expert_file(path: str, spec: PreprocSpec, rules, feature_names=None) -> None:
    doc = {
        "feature_names": list(feature_names) if feature_names
        else [f"f{j + 1}" for j in range(spec.feature_count)],
        "features": spec.to_dict()["features"],
        "rules": [
            {
                "mf_choice": [c if c is not None else None for c in rule.mf_choice],
                "consequent": rule.consequent,
                "tau": rule.tau,
            }
            for rule in rules
        ],
    }
    dump_document(doc, path, EXPERT_FORMAT, EXPERT_VERSION)


def load_expert_file(path: str) -> tuple[PreprocSpec, tuple[ExpertRule, ...]]:
    doc = load_document(path, EXPERT_FORMAT, EXPERT_VERSION)
    spec = PreprocSpec.from_dict(doc)
    try:
        raw_rules = doc["rules"]
    except KeyError as exc:
        raise DataError(f"{path}: expert file lacks a 'rules' list") from exc
    rules = []
    for r, d in enumerate(raw_rules):
        try:
            choice = tuple(None if c is None else int(c) for c in d["mf_choice"])
            rules.append(ExpertRule(choice, str(d["consequent"]), int(d.get("tau", 1))))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: malformed rule {r + 1}: {exc}") from exc
    if not rules:
        raise DataError(f"{path}: expert file defines no rules")
    return spec, tuple(rules)
