"""Choice data ingestion: CSV loading, z-scoring, splits and k-folds.

A dataset pairs a z-scored feature matrix with a one-hot choice matrix.
Normalization statistics travel with the dataset so that the original
values can always be recovered and so that a trained model can re-apply
identical scaling to new data.
"""

import csv
import warnings
from dataclasses import dataclass

import numpy as np


class SchemaError(ValueError):
    """A required column is missing or the header is malformed."""


class RowParseError(ValueError):
    """A cell could not be parsed as a number; message carries the row index."""


class ChoiceDomainError(ValueError):
    """A choice value falls outside the valid 1..I range."""


@dataclass(frozen=True)
class NormStats:
    """Per-column mean/std used for z-scoring; constant columns are flagged."""

    means: np.ndarray
    stds: np.ndarray
    constant: np.ndarray  # bool per column: pre-normalization std was zero

    def __post_init__(self):
        for name in ("means", "stds", "constant"):
            arr = np.asarray(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def fit(cls, x: np.ndarray) -> "NormStats":
        means = x.mean(axis=0)
        stds = x.std(axis=0)
        constant = stds == 0.0
        if np.any(constant):
            warnings.warn(
                f"{int(constant.sum())} constant feature column(s) map to zero "
                "after normalization")
        return cls(means=means, stds=stds, constant=constant)

    def apply(self, x: np.ndarray) -> np.ndarray:
        safe = np.where(self.constant, 1.0, self.stds)
        return (x - self.means) / safe

    def invert(self, x: np.ndarray) -> np.ndarray:
        safe = np.where(self.constant, 1.0, self.stds)
        return x * safe + self.means


@dataclass(frozen=True)
class ChoiceDataset:
    """N x K z-scored features plus N x I one-hot choices."""

    x: np.ndarray
    y: np.ndarray
    feature_names: tuple
    alternative_names: tuple
    norm_stats: NormStats

    def __post_init__(self):
        for name in ("x", "y"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "alternative_names", tuple(self.alternative_names))
        self.validate()

    @property
    def n_rows(self) -> int:
        return self.x.shape[0]

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    @property
    def n_alternatives(self) -> int:
        return self.y.shape[1]

    def validate(self):
        n, k = self.x.shape
        if n < 1:
            raise ValueError("dataset has no rows")
        if self.n_alternatives < 2:
            raise ValueError("need at least 2 alternatives")
        if self.y.shape[0] != n:
            raise ValueError("x and y disagree on row count")
        if len(self.feature_names) != k:
            raise ValueError("feature name count != feature columns")
        if len(self.alternative_names) != self.n_alternatives:
            raise ValueError("alternative name count != choice columns")
        if not np.all(np.isfinite(self.x)):
            raise ValueError("non-finite feature values")
        ok = np.all((self.y == 0) | (self.y == 1)) and np.all(self.y.sum(axis=1) == 1)
        if not ok:
            raise ValueError("y rows are not one-hot")

    def choice_indices(self) -> np.ndarray:
        """0-based chosen alternative per row."""
        return self.y.argmax(axis=1)

    def take(self, rows: np.ndarray) -> "ChoiceDataset":
        return ChoiceDataset(
            x=self.x[rows], y=self.y[rows],
            feature_names=self.feature_names,
            alternative_names=self.alternative_names,
            norm_stats=self.norm_stats)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.70
    folds: int = 2
    seed: int = 0

    def validate(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction {self.train_fraction} not in (0, 1)")
        if self.folds < 1:
            raise ValueError("folds must be positive")


def one_hot(indices: np.ndarray, n_alternatives: int) -> np.ndarray:
    out = np.zeros((len(indices), n_alternatives))
    out[np.arange(len(indices)), indices] = 1.0
    return out


def from_arrays(x_raw, choice_idx, n_alternatives=None, feature_names=None,
                alternative_names=None) -> ChoiceDataset:
    """Build a dataset from a raw feature matrix and 0-based choice indices.

    Features are z-scored with their own statistics.  Unlike the CSV path,
    zero feature columns are allowed (bias-only models).
    """
    x_raw = np.asarray(x_raw, dtype=np.float64)
    choice_idx = np.asarray(choice_idx, dtype=np.int64)
    if x_raw.ndim != 2 or x_raw.shape[0] != len(choice_idx):
        raise ValueError("x_raw must be 2-d with one row per choice")
    if n_alternatives is None:
        n_alternatives = int(choice_idx.max()) + 1
    if choice_idx.min() < 0 or choice_idx.max() >= n_alternatives:
        raise ChoiceDomainError("choice index outside 0..I-1")
    k = x_raw.shape[1]
    stats = NormStats.fit(x_raw) if k else NormStats(
        means=np.zeros(0), stds=np.ones(0), constant=np.zeros(0, dtype=bool))
    if feature_names is None:
        feature_names = tuple(f"f{j + 1}" for j in range(k))
    if alternative_names is None:
        alternative_names = tuple(f"alt{i + 1}" for i in range(n_alternatives))
    return ChoiceDataset(
        x=stats.apply(x_raw), y=one_hot(choice_idx, n_alternatives),
        feature_names=feature_names, alternative_names=alternative_names,
        norm_stats=stats)


def load_csv(path, choice_column: str, feature_columns=None, n_alternatives=None,
             norm_stats: NormStats | None = None) -> ChoiceDataset:
    """Load a UTF-8 comma-separated file with a header row.

    The choice column holds 1-based integer alternative indices; every other
    requested column must be numeric.  Features are z-scored with the file's
    own statistics unless `norm_stats` (e.g. from a saved model) is given.
    Rows with missing or non-numeric cells are rejected with the row index.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, no header row") from None
        header = [h.strip() for h in header]
        if choice_column not in header:
            raise SchemaError(f"missing choice column {choice_column!r}")
        if feature_columns is None:
            feature_columns = [h for h in header if h != choice_column]
        for col in feature_columns:
            if col not in header:
                raise SchemaError(f"missing feature column {col!r}")
        if not feature_columns:
            raise SchemaError("no feature columns")
        choice_pos = header.index(choice_column)
        feat_pos = [header.index(c) for c in feature_columns]

        rows, choices = [], []
        for ridx, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise RowParseError(
                    f"row {ridx}: expected {len(header)} cells, got {len(row)}")
            try:
                c = int(row[choice_pos])
            except ValueError:
                raise RowParseError(
                    f"row {ridx}: choice cell {row[choice_pos]!r} is not an "
                    "integer") from None
            vals = []
            for col, pos in zip(feature_columns, feat_pos):
                try:
                    v = float(row[pos])
                except ValueError:
                    raise RowParseError(
                        f"row {ridx}: cell {row[pos]!r} in column {col!r} is "
                        "not numeric") from None
                if not np.isfinite(v):
                    raise RowParseError(
                        f"row {ridx}: missing or non-finite value in column "
                        f"{col!r}")
                vals.append(v)
            rows.append(vals)
            choices.append(c)

    if not rows:
        raise SchemaError(f"{path}: no data rows")
    choices = np.asarray(choices, dtype=np.int64)
    if n_alternatives is None:
        n_alternatives = int(choices.max())
    if choices.min() < 1 or choices.max() > n_alternatives:
        bad = choices.min() if choices.min() < 1 else choices.max()
        raise ChoiceDomainError(
            f"choice value {bad} outside 1..{n_alternatives}")
    x_raw = np.asarray(rows, dtype=np.float64)
    stats = norm_stats if norm_stats is not None else NormStats.fit(x_raw)
    return ChoiceDataset(
        x=stats.apply(x_raw), y=one_hot(choices - 1, n_alternatives),
        feature_names=tuple(feature_columns),
        alternative_names=tuple(f"alt{i + 1}" for i in range(n_alternatives)),
        norm_stats=stats)


def load_features_csv(path, feature_names, norm_stats: NormStats) -> np.ndarray:
    """Load only the named feature columns, scaled with the given statistics.

    Used at prediction time, where a choice column may be absent.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file, no header row") from None
        for col in feature_names:
            if col not in header:
                raise SchemaError(f"missing feature column {col!r}")
        pos = [header.index(c) for c in feature_names]
        rows = []
        for ridx, row in enumerate(reader, start=1):
            try:
                vals = [float(row[p]) for p in pos]
            except (ValueError, IndexError):
                raise RowParseError(f"row {ridx}: non-numeric feature cell") from None
            if not all(np.isfinite(v) for v in vals):
                raise RowParseError(f"row {ridx}: missing or non-finite value")
            rows.append(vals)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return norm_stats.apply(np.asarray(rows, dtype=np.float64))


def split(ds: ChoiceDataset, spec: SplitSpec):
    """Seeded row-disjoint partition into (train, valid).

    Train receives floor(train_fraction * N) rows; the permutation depends
    only on the seed.
    """
    spec.validate()
    if ds.n_rows < 2:
        raise ValueError("need at least 2 rows to split")
    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(ds.n_rows)
    n_train = int(np.floor(spec.train_fraction * ds.n_rows))
    n_train = max(1, min(n_train, ds.n_rows - 1))
    return ds.take(perm[:n_train]), ds.take(perm[n_train:])


def kfold(ds: ChoiceDataset, folds: int, seed: int):
    """Seeded k-fold partition: validation sets cover every row exactly once."""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if folds > ds.n_rows:
        raise ValueError(f"folds {folds} exceeds row count {ds.n_rows}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(ds.n_rows)
    pairs = []
    for chunk in np.array_split(perm, folds):
        mask = np.ones(ds.n_rows, dtype=bool)
        mask[chunk] = False
        pairs.append((ds.take(np.flatnonzero(mask)), ds.take(np.sort(chunk))))
    return pairs


def refit_normalization(train: ChoiceDataset, valid: ChoiceDataset):
    """Re-scale both partitions with statistics fitted on the train rows only.

    Call after `split` so held-out rows never leak into the scaling.  The
    returned validation set carries the train statistics, which makes
    prediction-time scaling identical to training.
    """
    raw_train = train.norm_stats.invert(train.x)
    raw_valid = valid.norm_stats.invert(valid.x)
    stats = NormStats.fit(raw_train) if train.n_features else train.norm_stats
    rebuilt = []
    for ds, raw in ((train, raw_train), (valid, raw_valid)):
        rebuilt.append(ChoiceDataset(
            x=stats.apply(raw), y=ds.y, feature_names=ds.feature_names,
            alternative_names=ds.alternative_names, norm_stats=stats))
    return tuple(rebuilt)
