"""Tabular ingestion and leak-free preprocessing.

Pipeline order: load, drop rows with missing values, label-encode
categoricals, standardize (population sigma), PCA down to the qubit
count, stratified split. Every fitted statistic derives from the
training split only; `audit_leak_free` re-derives them and asserts
equality.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .util import stratified_split_indices

MISSING_TOKENS = {"", "nan", "NaN", "NA", "?"}


@dataclass
class RawTable:
    """Typed columns straight from a delimited file; cells still raw strings."""

    columns: list[str]
    kinds: dict[str, str]  # column -> "numeric" | "categorical"
    cells: dict[str, list[str]]
    n_rows: int


def _parses_as_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def load_csv(
    path: str | Path,
    categorical_columns: tuple[str, ...] = (),
    numeric_columns: tuple[str, ...] = (),
) -> RawTable:
    """Read a headered CSV and infer column kinds.

    Hinted columns keep their declared kind (bad cells in a hinted numeric
    column become missing values); unhinted columns are numeric only when
    every non-missing cell parses as a float.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"cannot read dataset file {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"dataset file {path} is empty") from None
        seen = set()
        for name in header:
            if name in seen:
                raise DataError(f"duplicate header column {name!r}")
            seen.add(name)
        cells: dict[str, list[str]] = {name: [] for name in header}
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"ragged row at line {line_no}: {len(row)} cells, expected {len(header)}")
            for name, cell in zip(header, row):
                cells[name].append(cell.strip())
    n_rows = len(cells[header[0]]) if header else 0

    kinds = {}
    for name in header:
        if name in categorical_columns:
            kinds[name] = "categorical"
        elif name in numeric_columns:
            kinds[name] = "numeric"
        else:
            non_missing = [c for c in cells[name] if c not in MISSING_TOKENS]
            kinds[name] = "numeric" if non_missing and all(map(_parses_as_float, non_missing)) else "categorical"
    return RawTable(columns=header, kinds=kinds, cells=cells, n_rows=n_rows)


@dataclass
class LabelEncoder:
    mapping: dict[str, int]

    @classmethod
    def fit(cls, column: list[str]) -> "LabelEncoder":
        return cls({cat: i for i, cat in enumerate(sorted(set(column)))})

    def transform(self, column: list[str]) -> np.ndarray:
        out = np.empty(len(column), dtype=np.float64)
        for i, cell in enumerate(column):
            if cell not in self.mapping:
                raise DataError(f"unseen category {cell!r}; known: {sorted(self.mapping)}")
            out[i] = self.mapping[cell]
        return out


def label_encode(column: list[str]) -> tuple[np.ndarray, LabelEncoder]:
    """Lexicographic category -> integer encoding; mapping kept for reuse."""
    encoder = LabelEncoder.fit(column)
    return encoder.transform(column), encoder


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    sample_ids: np.ndarray
    feature_columns: list[str]
    kinds: dict[str, str]
    encoders: dict[str, LabelEncoder]
    n_dropped: int


def build_dataset(
    table: RawTable, label_column: str, positive_label: str = "1"
) -> Dataset:
    """Drop rows with missing cells, encode categoricals, binarize the label."""
    if label_column not in table.columns:
        raise ConfigError(f"label column {label_column!r} not in dataset columns {table.columns}")
    feature_columns = [c for c in table.columns if c != label_column]

    missing = np.zeros(table.n_rows, dtype=bool)
    for name in table.columns:
        col = table.cells[name]
        for i, cell in enumerate(col):
            if cell in MISSING_TOKENS:
                missing[i] = True
            elif table.kinds[name] == "numeric" and not _parses_as_float(cell):
                missing[i] = True
    keep = np.flatnonzero(~missing)
    n_dropped = int(missing.sum())

    encoders: dict[str, LabelEncoder] = {}
    cols = []
    for name in feature_columns:
        values = [table.cells[name][i] for i in keep]
        if table.kinds[name] == "numeric":
            cols.append(np.array([float(v) for v in values]))
        else:
            encoded, enc = label_encode(values)
            encoders[name] = enc
            cols.append(encoded)

    label_cells = [table.cells[label_column][i] for i in keep]
    distinct = sorted(set(label_cells))
    if len(distinct) != 2:
        raise DataError(f"label column must be binary, found values {distinct}")
    if positive_label not in distinct:
        raise ConfigError(f"positive label {positive_label!r} not among label values {distinct}")
    labels = np.array([1 if cell == positive_label else 0 for cell in label_cells], dtype=np.int64)

    return Dataset(
        features=np.column_stack(cols) if cols else np.empty((keep.size, 0)),
        labels=labels,
        sample_ids=keep.astype(np.int64),
        feature_columns=feature_columns,
        kinds=dict(table.kinds),
        encoders=encoders,
        n_dropped=n_dropped,
    )


# ---------------------------------------------------------------------------
# standardization (population sigma) and PCA


@dataclass
class Standardizer:
    mean: np.ndarray
    sigma: np.ndarray
    zero_variance: np.ndarray  # flags for constant columns, mapped to 0

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        mean = X.mean(axis=0)
        sigma = X.std(axis=0)  # population: divide by m
        zero = sigma == 0.0
        if zero.any():
            warnings.warn(f"{int(zero.sum())} constant column(s) standardized to zero")
        return cls(mean=mean, sigma=sigma, zero_variance=zero)

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        safe_sigma = np.where(self.zero_variance, 1.0, self.sigma)
        out = (X - self.mean) / safe_sigma
        out[:, self.zero_variance] = 0.0
        return out


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (d, k), orthonormal columns
    explained_variance: np.ndarray  # non-increasing


def pca_fit(X: np.ndarray, k: int) -> PcaModel:
    """Top-k right singular vectors of the centered matrix.

    Component signs are fixed so the largest-magnitude loading of each
    component is positive, removing the SVD sign ambiguity.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    m, d = X.shape
    if k > min(m, d):
        raise ValueError(f"k={k} exceeds min(m={m}, d={d})")
    mean = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
    components = vt[:k].T.copy()
    for j in range(k):
        pivot = np.argmax(np.abs(components[:, j]))
        if components[pivot, j] < 0:
            components[:, j] = -components[:, j]
    explained = (s[:k] ** 2) / m
    if explained[-1] < 1e-12:
        warnings.warn("PCA retained components with negligible variance (rank-deficient input)")
    return PcaModel(mean=mean, components=components, explained_variance=explained)


def pca_transform(model: PcaModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return (X - model.mean) @ model.components


def split(labels: np.ndarray, train_ratio: float = 0.8, seed: int = 0):
    """Stratified, seeded, disjoint and exhaustive train/test index split."""
    return stratified_split_indices(labels, train_ratio, seed)


# ---------------------------------------------------------------------------
# fitted-state serialization and the leakage audit


@dataclass
class PrepState:
    encoders: dict[str, LabelEncoder]
    standardizer: Standardizer
    pca: PcaModel
    feature_columns: list[str]
    label_column: str
    positive_label: str


def fit_prep(
    dataset: Dataset, train_idx: np.ndarray, k: int, label_column: str, positive_label: str
) -> PrepState:
    X_train = dataset.features[train_idx]
    standardizer = Standardizer.fit(X_train)
    pca = pca_fit(standardizer.transform(X_train), k)
    return PrepState(
        encoders=dataset.encoders,
        standardizer=standardizer,
        pca=pca,
        feature_columns=dataset.feature_columns,
        label_column=label_column,
        positive_label=positive_label,
    )


def apply_prep(state: PrepState, X: np.ndarray) -> np.ndarray:
    return pca_transform(state.pca, state.standardizer.transform(X))


def audit_leak_free(state: PrepState, dataset: Dataset, train_idx: np.ndarray, k: int) -> None:
    """Re-derive every fitted statistic from the train split; raise on mismatch."""
    X_train = dataset.features[train_idx]
    std = Standardizer.fit(X_train)
    if not (
        np.array_equal(std.mean, state.standardizer.mean)
        and np.array_equal(std.sigma, state.standardizer.sigma)
    ):
        raise DataError("standardizer statistics do not derive from the train split")
    pca = pca_fit(std.transform(X_train), k)
    if not (
        np.array_equal(pca.mean, state.pca.mean)
        and np.array_equal(pca.components, state.pca.components)
    ):
        raise DataError("PCA model does not derive from the train split")


def state_to_doc(state: PrepState) -> dict:
    return {
        "kind": "prep_state",
        "encoders": {name: enc.mapping for name, enc in state.encoders.items()},
        "standardizer": {
            "mean": state.standardizer.mean.tolist(),
            "sigma": state.standardizer.sigma.tolist(),
            "zero_variance": state.standardizer.zero_variance.tolist(),
        },
        "pca": {
            "mean": state.pca.mean.tolist(),
            "components": state.pca.components.tolist(),
            "explained_variance": state.pca.explained_variance.tolist(),
        },
        "feature_columns": state.feature_columns,
        "label_column": state.label_column,
        "positive_label": state.positive_label,
    }


def state_from_doc(doc: dict) -> PrepState:
    if doc.get("kind") != "prep_state":
        raise ValueError("not a prep-state document")
    return PrepState(
        encoders={name: LabelEncoder(mapping) for name, mapping in doc["encoders"].items()},
        standardizer=Standardizer(
            mean=np.array(doc["standardizer"]["mean"]),
            sigma=np.array(doc["standardizer"]["sigma"]),
            zero_variance=np.array(doc["standardizer"]["zero_variance"], dtype=bool),
        ),
        pca=PcaModel(
            mean=np.array(doc["pca"]["mean"]),
            components=np.array(doc["pca"]["components"]),
            explained_variance=np.array(doc["pca"]["explained_variance"]),
        ),
        feature_columns=list(doc["feature_columns"]),
        label_column=doc["label_column"],
        positive_label=doc["positive_label"],
    )


def save_state(path: str | Path, state: PrepState) -> None:
    Path(path).write_text(json.dumps(state_to_doc(state), sort_keys=True, indent=2) + "\n")


def load_state(path: str | Path) -> PrepState:
    return state_from_doc(json.loads(Path(path).read_text()))
