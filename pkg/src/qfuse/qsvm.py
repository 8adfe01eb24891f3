"""Quantum-kernel SVM branch.

The Gram matrix is exact: rows are embedded once as statevectors and the
pairwise fidelity |<psi_i|psi_j>|^2 comes from a single gemm, which is
arithmetic-identical (to float rounding) to running the embed-adjoint
circuit per entry. The dual problem is solved by SMO with maximal-
violating-pair selection on the precomputed kernel; probabilities come
from Platt scaling fitted on out-of-fold decision values so calibration
never sees in-sample margins.

Labels are {0,1} at the API surface and {-1,+1} internally (attack = +1).
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import noise as noise_mod
from . import sim
from .errors import DataError
from .util import rng_stream, stratified_kfold_indices

logger = logging.getLogger(__name__)

KKT_TOL = 1e-3
MAX_SMO_ITER = 10_000
EIG_FLOOR = -1e-8
SYM_ATOL = 1e-10


@dataclass
class KernelMatrix:
    """Square fidelity Gram matrix with the sample ids it was built from."""

    values: np.ndarray
    sample_ids: np.ndarray

    def validate(self) -> None:
        k = self.values
        if k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise ValueError(f"kernel matrix must be square, got {k.shape}")
        if not np.allclose(k, k.T, atol=SYM_ATOL):
            raise ValueError("kernel matrix is not symmetric")
        if not np.allclose(np.diag(k), 1.0, atol=SYM_ATOL):
            raise ValueError("kernel matrix diagonal deviates from 1")
        min_eig = float(np.linalg.eigvalsh(k).min())
        if min_eig < EIG_FLOOR:
            raise ValueError(f"kernel matrix min eigenvalue {min_eig} below tolerance")


def embed_states(X: np.ndarray) -> np.ndarray:
    """Angle-embedded statevectors, one row per sample."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return sim.batch_angle_embed(X, X.shape[1])


def compute_kernel_block(X_a: np.ndarray, X_b: np.ndarray | None = None) -> np.ndarray:
    """Fidelity kernel block; symmetric case mirrors the upper triangle."""
    X_a = np.atleast_2d(np.asarray(X_a, dtype=np.float64))
    states_a = embed_states(X_a)
    if X_b is None:
        overlaps = states_a @ states_a.conj().T
        k = np.abs(overlaps) ** 2
        k = np.triu(k) + np.triu(k, 1).T
        np.fill_diagonal(k, 1.0)
        return k
    X_b = np.atleast_2d(np.asarray(X_b, dtype=np.float64))
    if X_b.shape[1] != X_a.shape[1]:
        raise ValueError(f"feature arity mismatch: {X_a.shape[1]} vs {X_b.shape[1]}")
    states_b = embed_states(X_b)
    return np.abs(states_a @ states_b.conj().T) ** 2


def compute_gram(X: np.ndarray, sample_ids: np.ndarray | None = None) -> KernelMatrix:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    ids = np.arange(X.shape[0]) if sample_ids is None else np.asarray(sample_ids)
    return KernelMatrix(values=compute_kernel_block(X), sample_ids=ids)


def clip_to_psd(k: np.ndarray) -> np.ndarray:
    """Clip the negative eigenvalue tail; used when numerical noise breaks PSD."""
    eigvals, eigvecs = np.linalg.eigh(k)
    if eigvals.min() >= EIG_FLOOR:
        return k
    logger.warning("clipping kernel eigenvalue tail at %.3e", eigvals.min())
    clipped = (eigvecs * np.maximum(eigvals, 0.0)) @ eigvecs.T
    return 0.5 * (clipped + clipped.T)


def noisy_kernel_block(
    X_a: np.ndarray,
    X_b: np.ndarray,
    channel: noise_mod.NoiseChannel,
    n_traj: int,
    stream_key: tuple[int, ...],
) -> np.ndarray:
    """Per-entry trajectory-mean kernel block; rng stream keyed by (*key, i, j)."""
    X_a = np.atleast_2d(np.asarray(X_a, dtype=np.float64))
    X_b = np.atleast_2d(np.asarray(X_b, dtype=np.float64))
    out = np.empty((X_a.shape[0], X_b.shape[0]))
    for i in range(X_a.shape[0]):
        for j in range(X_b.shape[0]):
            rng = rng_stream(*stream_key, i, j)
            out[i, j] = noise_mod.noisy_kernel_value(X_a[i], X_b[j], channel, n_traj, rng)
    return out


# ---------------------------------------------------------------------------
# SMO dual solver (precomputed kernel)


@dataclass
class SmoResult:
    alphas: np.ndarray
    bias: float
    objective: float
    iterations: int
    converged: bool


def dual_objective(K: np.ndarray, y_pm: np.ndarray, alphas: np.ndarray) -> float:
    ay = alphas * y_pm
    return float(alphas.sum() - 0.5 * ay @ K @ ay)


def smo_solve(
    K: np.ndarray,
    y_pm: np.ndarray,
    C: float,
    tol: float = KKT_TOL,
    max_iter: int = MAX_SMO_ITER,
) -> SmoResult:
    """Maximize the SVM dual by sequential updates of the maximal violating pair.

    Stops when the duality-gap surrogate m(alpha) - M(alpha) drops to tol.
    The bias is the mean margin residual of unbounded support vectors, or
    the midpoint of the feasible interval when every alpha sits on a bound.
    """
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y_pm, dtype=np.float64).ravel()
    m = y.size
    if K.shape != (m, m):
        raise ValueError(f"kernel shape {K.shape} inconsistent with {m} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1/+1")
    if np.unique(y).size < 2:
        raise DataError("single-class input: SVM needs both classes")

    alphas = np.zeros(m)
    f_nob = np.zeros(m)  # decision values without bias
    iterations = 0
    converged = False
    while iterations < max_iter:
        neg_e = y - f_nob
        up = ((alphas < C) & (y > 0)) | ((alphas > 0) & (y < 0))
        low = ((alphas < C) & (y < 0)) | ((alphas > 0) & (y > 0))
        m_up = neg_e[up].max() if up.any() else -np.inf
        m_low = neg_e[low].min() if low.any() else np.inf
        if m_up - m_low <= tol:
            converged = True
            break
        i = int(np.flatnonzero(up)[np.argmax(neg_e[up])])
        j = int(np.flatnonzero(low)[np.argmin(neg_e[low])])

        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta <= 1e-15:
            eta = 1e-12  # flat direction: step saturates at the box
        delta = (neg_e[i] - neg_e[j]) / eta
        # update the pair, then restore box feasibility while preserving the
        # equality constraint; saturated variables land exactly on a bound
        pair_sum = y[i] * alphas[i] + y[j] * alphas[j]
        a_i = alphas[i] + y[i] * delta
        a_j = alphas[j] - y[j] * delta
        a_i = min(max(a_i, 0.0), C)
        a_j = y[j] * (pair_sum - y[i] * a_i)
        a_j = min(max(a_j, 0.0), C)
        a_i = y[i] * (pair_sum - y[j] * a_j)
        if a_i == alphas[i] and a_j == alphas[j]:
            break  # degenerate pair, no feasible progress
        f_nob += (a_i - alphas[i]) * y[i] * K[:, i] + (a_j - alphas[j]) * y[j] * K[:, j]
        alphas[i], alphas[j] = a_i, a_j
        iterations += 1

    bias = _solve_bias(alphas, y, f_nob, C, tol)
    return SmoResult(alphas, bias, dual_objective(K, y, alphas), iterations, converged)


def _solve_bias(alphas, y, f_nob, C, tol) -> float:
    residual = y - f_nob
    eps = 1e-9 * C
    unbounded = (alphas > eps) & (alphas < C - eps)
    if unbounded.any():
        return float(residual[unbounded].mean())
    lower = ((alphas <= eps) & (y > 0)) | ((alphas >= C - eps) & (y < 0))
    upper = ((alphas <= eps) & (y < 0)) | ((alphas >= C - eps) & (y > 0))
    b_lo = residual[lower].max() if lower.any() else -np.inf
    b_hi = residual[upper].min() if upper.any() else np.inf
    if np.isfinite(b_lo) and np.isfinite(b_hi):
        return float(0.5 * (b_lo + b_hi))
    return float(residual.mean())


@dataclass
class SvmModel:
    features: np.ndarray  # samples the alphas refer to
    labels_pm: np.ndarray
    alphas: np.ndarray
    bias: float
    C: float
    platt_a: float | None = None
    platt_b: float | None = None
    sample_ids: np.ndarray | None = None

    def support_mask(self) -> np.ndarray:
        return self.alphas > 0.0


def decision_values(model: SvmModel, K_test_train: np.ndarray) -> np.ndarray:
    """Raw margins for a kernel block whose columns follow the model samples."""
    K_test_train = np.atleast_2d(np.asarray(K_test_train, dtype=np.float64))
    if K_test_train.shape[1] != model.alphas.size:
        raise ValueError(
            f"kernel block has {K_test_train.shape[1]} columns, model holds {model.alphas.size} samples"
        )
    return K_test_train @ (model.alphas * model.labels_pm) + model.bias


def decide(model: SvmModel, X_test: np.ndarray) -> np.ndarray:
    return decision_values(model, compute_kernel_block(X_test, model.features))


def predict_proba(model: SvmModel, decisions: np.ndarray) -> np.ndarray:
    if model.platt_a is None or model.platt_b is None:
        raise ValueError("model has no Platt coefficients")
    return 1.0 / (1.0 + np.exp(-(model.platt_a * np.asarray(decisions) + model.platt_b)))


# ---------------------------------------------------------------------------
# Platt scaling


def platt_calibrate(decisions: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Fit p = sigmoid(A*f + B) by Newton iterations on smoothed targets."""
    f = np.asarray(decisions, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=np.float64).ravel()
    if f.shape != y.shape:
        raise ValueError("decision values and labels differ in length")
    n_pos = float(np.sum(y == 1.0))
    n_neg = float(np.sum(y == 0.0))
    if n_pos == 0 or n_neg == 0:
        raise DataError("Platt calibration needs both classes")
    t = np.where(y == 1.0, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    a = 0.0
    t_mean = t.mean()
    b = float(np.log(t_mean / (1.0 - t_mean)))
    for _ in range(200):
        z = a * f + b
        p = 1.0 / (1.0 + np.exp(-z))
        g = p - t
        grad = np.array([g @ f, g.sum()])
        if np.abs(grad).max() < 1e-10:
            break
        w = p * (1.0 - p)
        h = np.array([[w @ f**2, w @ f], [w @ f, w.sum()]]) + 1e-12 * np.eye(2)
        step = np.linalg.solve(h, grad)
        # backtracking keeps the smoothed-likelihood objective decreasing
        obj0 = _platt_objective(a, b, f, t)
        scale = 1.0
        while scale > 1e-10:
            a_new, b_new = a - scale * step[0], b - scale * step[1]
            if _platt_objective(a_new, b_new, f, t) <= obj0 + 1e-15:
                break
            scale *= 0.5
        a, b = a - scale * step[0], b - scale * step[1]
    return float(a), float(b)


def _platt_objective(a, b, f, t):
    z = a * f + b
    # stable cross-entropy: log(1+exp(z)) - t*z
    return float(np.sum(np.logaddexp(0.0, z) - t * z))


# ---------------------------------------------------------------------------
# training protocol and audits


def train_qsvm(
    X: np.ndarray,
    y01: np.ndarray,
    C: float = 10.0,
    tol: float = KKT_TOL,
    seed: int = 0,
    calibration_folds: int = 3,
    sample_ids: np.ndarray | None = None,
) -> tuple[SvmModel, SmoResult]:
    """Full-data SMO fit plus Platt scaling on out-of-fold decision values."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y01 = np.asarray(y01).ravel().astype(np.float64)
    y_pm = 2.0 * y01 - 1.0
    gram = compute_gram(X, sample_ids)
    k = gram.values
    min_eig = float(np.linalg.eigvalsh(k).min())
    if min_eig < EIG_FLOOR:
        k = clip_to_psd(k)
    result = smo_solve(k, y_pm, C, tol)
    if not result.converged:
        warnings.warn(f"SMO hit the iteration cap ({result.iterations} pair updates)")

    oof = np.zeros(y01.size)
    for heldout in stratified_kfold_indices(y01, calibration_folds, seed):
        rest = np.setdiff1d(np.arange(y01.size), heldout)
        sub = smo_solve(k[np.ix_(rest, rest)], y_pm[rest], C, tol)
        oof[heldout] = k[np.ix_(heldout, rest)] @ (sub.alphas * y_pm[rest]) + sub.bias
    a, b = platt_calibrate(oof, y01)

    model = SvmModel(
        features=X,
        labels_pm=y_pm,
        alphas=result.alphas,
        bias=result.bias,
        C=C,
        platt_a=a,
        platt_b=b,
        sample_ids=np.arange(y01.size) if sample_ids is None else np.asarray(sample_ids),
    )
    return model, result


def kkt_audit(model: SvmModel, K: np.ndarray, tol: float = KKT_TOL) -> list[dict]:
    """Per-sample KKT status of a trained model on its own kernel matrix."""
    margins = decision_values(model, K)
    eps = 1e-9 * model.C
    rows = []
    for idx in range(model.alphas.size):
        a = model.alphas[idx]
        yf = float(model.labels_pm[idx] * margins[idx])
        if a <= eps:
            kind, violation = "zero", max(0.0, (1.0 - tol) - yf)
        elif a >= model.C - eps:
            kind, violation = "at_bound", max(0.0, yf - (1.0 + tol))
        else:
            kind, violation = "unbounded", max(0.0, abs(yf - 1.0) - tol)
        rows.append(
            {"sample": idx, "alpha": float(a), "y_times_f": yf, "kind": kind, "violation": violation}
        )
    return rows


# ---------------------------------------------------------------------------
# serialization: support vectors only


def model_to_doc(model: SvmModel) -> dict:
    keep = model.support_mask()
    return {
        "kind": "qsvm",
        "C": model.C,
        "bias": model.bias,
        "platt_a": model.platt_a,
        "platt_b": model.platt_b,
        "alphas": model.alphas[keep].tolist(),
        "labels_pm": model.labels_pm[keep].tolist(),
        "features": model.features[keep].tolist(),
        "sample_ids": None if model.sample_ids is None else model.sample_ids[keep].tolist(),
    }


def model_from_doc(doc: dict) -> SvmModel:
    if doc.get("kind") != "qsvm":
        raise ValueError("not a qsvm model document")
    return SvmModel(
        features=np.array(doc["features"], dtype=np.float64),
        labels_pm=np.array(doc["labels_pm"], dtype=np.float64),
        alphas=np.array(doc["alphas"], dtype=np.float64),
        bias=float(doc["bias"]),
        C=float(doc["C"]),
        platt_a=doc["platt_a"],
        platt_b=doc["platt_b"],
        sample_ids=None if doc["sample_ids"] is None else np.array(doc["sample_ids"]),
    )


def save_qsvm(path: str | Path, model: SvmModel) -> None:
    Path(path).write_text(json.dumps(model_to_doc(model), sort_keys=True, indent=2) + "\n")


def load_qsvm(path: str | Path) -> SvmModel:
    return model_from_doc(json.loads(Path(path).read_text()))
