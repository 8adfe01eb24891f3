"""Meta-feature construction from the two quantum branches.

Three schemes feed the meta-learner: hard decisions thresholded at 0.5,
raw margins (QNN pre-sigmoid logit, QSVM decision value), and calibrated
probabilities. The 0.5 threshold resolves ties toward the attack class,
matching the forest's voting rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .util import write_delimited

SCHEMES = ("hard", "margin", "probability")


@dataclass
class MetaFeatureTable:
    scheme: str
    sample_ids: np.ndarray
    features: np.ndarray  # (m, 2): column 0 QNN, column 1 QSVM
    labels: np.ndarray | None = None


@dataclass
class BranchOutputs:
    """Aligned per-sample outputs of one branch: raw score and probability."""

    sample_ids: np.ndarray
    raw: np.ndarray  # QNN logit / QSVM decision value
    prob: np.ndarray


def extract_meta_features(
    qnn_out: BranchOutputs,
    qsvm_out: BranchOutputs,
    scheme: str,
    labels: np.ndarray | None = None,
) -> MetaFeatureTable:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown fusion scheme {scheme!r}; expected one of {SCHEMES}")
    if qnn_out.sample_ids.shape != qsvm_out.sample_ids.shape or np.any(
        qnn_out.sample_ids != qsvm_out.sample_ids
    ):
        raise ValueError("branch outputs are not aligned on sample ids")
    if scheme == "hard":
        cols = ((qnn_out.prob >= 0.5).astype(np.float64), (qsvm_out.prob >= 0.5).astype(np.float64))
    elif scheme == "margin":
        cols = (qnn_out.raw.astype(np.float64), qsvm_out.raw.astype(np.float64))
    else:
        cols = (qnn_out.prob.astype(np.float64), qsvm_out.prob.astype(np.float64))
    return MetaFeatureTable(
        scheme=scheme,
        sample_ids=qnn_out.sample_ids.copy(),
        features=np.column_stack(cols),
        labels=None if labels is None else np.asarray(labels).copy(),
    )


@dataclass
class DisagreementReport:
    n_samples: int
    n_qsvm_errors: int
    n_qnn_errors: int
    n_both_errors: int
    disagreement_rate: float


def disagreement_report(
    qnn_labels: np.ndarray, qsvm_labels: np.ndarray, true_labels: np.ndarray
) -> DisagreementReport:
    """Error-set sizes and the fraction of samples where the branches differ."""
    qnn_labels = np.asarray(qnn_labels).ravel()
    qsvm_labels = np.asarray(qsvm_labels).ravel()
    true_labels = np.asarray(true_labels).ravel()
    if not (qnn_labels.shape == qsvm_labels.shape == true_labels.shape):
        raise ValueError("prediction and label vectors differ in length")
    qnn_err = qnn_labels != true_labels
    qsvm_err = qsvm_labels != true_labels
    return DisagreementReport(
        n_samples=int(true_labels.size),
        n_qsvm_errors=int(qsvm_err.sum()),
        n_qnn_errors=int(qnn_err.sum()),
        n_both_errors=int((qnn_err & qsvm_err).sum()),
        disagreement_rate=float(np.mean(qnn_labels != qsvm_labels)),
    )


def write_meta_table(path: str | Path, table: MetaFeatureTable) -> None:
    labels = table.labels if table.labels is not None else np.full(table.sample_ids.size, -1)
    rows = zip(
        table.sample_ids,
        [table.scheme] * table.sample_ids.size,
        table.features[:, 0],
        table.features[:, 1],
        labels,
    )
    write_delimited(path, ("sample_id", "scheme", "feature_qnn", "feature_qsvm", "label"), rows)
