"""Tabular dataset ingestion and deterministic cross-validation splits.

Datasets are dense float matrices with one integer class label per row.
Labels are remapped to the contiguous range 1..P in order of first
appearance in the source file, and the original label strings are kept
so that predictions can be reported in the caller's vocabulary.

Loading is strict: missing fields, non-numeric features, and non-finite
values are hard errors that name the offending row and column. Lines
starting with "@" are treated as metadata headers of the KEEL exchange
format and skipped.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .serialize import fmt_float
from .seeding import rng_for


@dataclass(frozen=True)
class CsvSchema:
    """Column layout of a CSV source.

    label identifies the class column, by header name or 0-based index.
    When header is False, label must be an index.
    """

    label: str | int = -1
    delimiter: str = ","
    header: bool = True


@dataclass
class Dataset:
    samples: np.ndarray                  # (m, n) float64
    labels: np.ndarray                   # (m,) int64, values in 1..class_count
    class_count: int
    label_names: tuple[str, ...] = ()    # position p-1 holds the original label of class p

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.samples.ndim != 2:
            raise DataError("samples must be a 2-D matrix")
        if self.labels.shape != (self.samples.shape[0],):
            raise DataError("labels length must match sample count")
        if self.samples.shape[0] == 0:
            raise DataError("dataset has no samples")
        if not np.all(np.isfinite(self.samples)):
            raise DataError("samples contain non-finite values")
        if self.class_count < 1:
            raise DataError("class_count must be at least 1")
        if self.labels.size and (self.labels.min() < 1 or self.labels.max() > self.class_count):
            raise DataError("labels must lie in 1..class_count")
        if not self.label_names:
            self.label_names = tuple(str(p) for p in range(1, self.class_count + 1))
        if len(self.label_names) != self.class_count:
            raise DataError("label_names length must equal class_count")

    @property
    def sample_count(self) -> int:
        return self.samples.shape[0]

    @property
    def feature_count(self) -> int:
        return self.samples.shape[1]

    def class_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count + 1)[1:]

    def with_samples(self, samples: np.ndarray) -> "Dataset":
        """Same rows and label space, different feature matrix."""
        return Dataset(samples, self.labels.copy(), self.class_count, self.label_names)

    def subset(self, idx) -> "Dataset":
        """Row subset. The label space is inherited, so a subset may miss classes."""
        return Dataset(self.samples[idx], self.labels[idx], self.class_count, self.label_names)


def make_dataset(samples, labels, label_names=None) -> Dataset:
    """Construct a freshly ingested dataset: every class 1..P must occur."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise DataError("dataset has no samples")
    class_count = int(labels.max()) if labels.size else 0
    ds = Dataset(np.asarray(samples, dtype=float), labels, class_count,
                 tuple(label_names) if label_names else ())
    present = np.unique(ds.labels)
    missing = sorted(set(range(1, class_count + 1)) - set(present.tolist()))
    if missing:
        raise DataError(f"classes {missing} have no samples")
    return ds


def _is_metadata(line: str) -> bool:
    return line.lstrip().startswith("@")


def load_csv(path: str, schema: CsvSchema) -> Dataset:
    """Read a delimited text file into a Dataset.

    Raises DataError naming the file line and column on any malformed
    field, so ingestion failures are diagnosable without opening the file.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw_lines = fh.readlines()
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc

    rows: list[tuple[int, list[str]]] = []  # (1-based file line, fields)
    for lineno, line in enumerate(raw_lines, start=1):
        if not line.strip() or _is_metadata(line):
            continue
        fields = next(csv.reader(io.StringIO(line), delimiter=schema.delimiter))
        rows.append((lineno, [f.strip() for f in fields]))

    if not rows:
        raise DataError(f"{path}: no data rows")

    header: list[str] | None = None
    if schema.header:
        header = rows[0][1]
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: header present but no data rows")

    width = len(rows[0][1])
    if isinstance(schema.label, str):
        if header is None:
            raise DataError("label column given by name but schema says no header")
        if schema.label not in header:
            raise DataError(f"{path}: label column '{schema.label}' not in header {header}")
        label_col = header.index(schema.label)
    else:
        label_col = schema.label if schema.label >= 0 else width + schema.label
        if not 0 <= label_col < width:
            raise DataError(f"{path}: label column index {schema.label} out of range for width {width}")

    feature_cols = [c for c in range(width) if c != label_col]
    if not feature_cols:
        raise DataError(f"{path}: no feature columns besides the label")

    samples = np.empty((len(rows), len(feature_cols)), dtype=float)
    raw_labels: list[str] = []
    for r, (lineno, fields) in enumerate(rows):
        if len(fields) != width:
            raise DataError(f"{path} line {lineno}: expected {width} fields, found {len(fields)}")
        for k, c in enumerate(feature_cols):
            try:
                v = float(fields[c])
            except ValueError:
                raise DataError(
                    f"{path} line {lineno}, column {c + 1}: cannot parse '{fields[c]}' as a number"
                ) from None
            if not np.isfinite(v):
                raise DataError(f"{path} line {lineno}, column {c + 1}: non-finite value '{fields[c]}'")
            samples[r, k] = v
        raw_labels.append(fields[label_col])

    # first-appearance order defines the class numbering
    names: list[str] = []
    index: dict[str, int] = {}
    labels = np.empty(len(raw_labels), dtype=np.int64)
    for r, lab in enumerate(raw_labels):
        if lab not in index:
            names.append(lab)
            index[lab] = len(names)
        labels[r] = index[lab]

    return make_dataset(samples, labels, names)


def save_csv(ds: Dataset, path: str) -> None:
    """Write a Dataset so that load_csv reads it back bit-exactly."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{j + 1}" for j in range(ds.feature_count)] + ["label"])
        for i in range(ds.sample_count):
            row = [fmt_float(v) for v in ds.samples[i]]
            row.append(ds.label_names[ds.labels[i] - 1])
            writer.writerow(row)


def default_schema() -> CsvSchema:
    """Schema matching save_csv output: header row, label in the last column."""
    return CsvSchema(label="label", delimiter=",", header=True)


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of each sample to one of k folds."""

    k: int
    assignment: np.ndarray  # (m,) ints in 0..k-1
    seed: int | None = None

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        object.__setattr__(self, "assignment", a)
        if self.k < 2:
            raise DataError("fold count must be at least 2")
        if a.ndim != 1 or a.size == 0:
            raise DataError("fold assignment must be a non-empty vector")
        if a.min() < 0 or a.max() >= self.k:
            raise DataError("fold indices must lie in 0..k-1")

    @property
    def sample_count(self) -> int:
        return self.assignment.size


def stratified_kfold(ds: Dataset, k: int, seed: int, best_effort: bool = False) -> FoldPlan:
    """Deterministic stratified k-fold assignment.

    Per class, indices are shuffled with the seeded generator and dealt
    round-robin onto folds; the deal continues across classes so overall
    fold sizes stay within one sample of each other. Classes smaller
    than k cannot appear in every fold; that is rejected unless the
    caller opts into best-effort stratification.
    """
    if k < 2:
        raise DataError("fold count must be at least 2")
    if k > ds.sample_count:
        raise DataError(f"fold count {k} exceeds sample count {ds.sample_count}")
    sizes = ds.class_sizes()
    if not best_effort:
        small = [p + 1 for p, s in enumerate(sizes) if 0 < s < k]
        if small:
            raise DataError(
                f"classes {small} have fewer than {k} samples; "
                "pass best_effort=True to stratify anyway"
            )
    rng = rng_for(seed, "folds")
    assignment = np.empty(ds.sample_count, dtype=np.int64)
    cursor = 0
    for p in range(1, ds.class_count + 1):
        idx = np.flatnonzero(ds.labels == p)
        idx = idx[rng.permutation(idx.size)]
        for i in idx:
            assignment[i] = cursor % k
            cursor += 1
    return FoldPlan(k=k, assignment=assignment, seed=seed)


def split(ds: Dataset, plan: FoldPlan, fold: int) -> tuple[Dataset, Dataset]:
    """Return (train, test) for one fold of the plan."""
    if plan.sample_count != ds.sample_count:
        raise DataError("fold plan does not match dataset size")
    if not 0 <= fold < plan.k:
        raise DataError(f"fold {fold} out of range for k={plan.k}")
    mask = plan.assignment == fold
    return ds.subset(~mask), ds.subset(mask)


def export_folds(plan: FoldPlan, path: str) -> None:
    """One line per sample: the sample's integer fold index."""
    with open(path, "w", encoding="utf-8") as fh:
        for a in plan.assignment:
            fh.write(f"{int(a)}\n")


def import_folds(path: str, expected_samples: int | None = None) -> FoldPlan:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise DataError(f"cannot read fold file {path}: {exc}") from exc
    try:
        assignment = np.array([int(ln) for ln in lines], dtype=np.int64)
    except ValueError as exc:
        raise DataError(f"{path}: fold file must contain one integer per line ({exc})") from exc
    if assignment.size == 0:
        raise DataError(f"{path}: empty fold file")
    if expected_samples is not None and assignment.size != expected_samples:
        raise DataError(
            f"{path}: fold file has {assignment.size} rows, dataset has {expected_samples}"
        )
    k = int(assignment.max()) + 1
    if k < 2:
        raise DataError(f"{path}: fold file defines fewer than 2 folds")
    return FoldPlan(k=k, assignment=assignment, seed=None)


def resolve_data_path(path: str, env_var: str = "AEFRC_DATA_DIR") -> str:
    """Resolve a dataset path, falling back to $AEFRC_DATA_DIR for relative names."""
    if os.path.exists(path):
        return path
    base = os.environ.get(env_var)
    if base and not os.path.isabs(path):
        candidate = os.path.join(base, path)
        if os.path.exists(candidate):
            return candidate
    return path
