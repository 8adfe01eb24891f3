"""Variational quantum classifier branch.

Circuit: angle embedding, entangling ansatz, per-qubit Pauli-Z readout.
The expectation vector feeds a single dense unit with sigmoid output;
training minimizes binary cross-entropy with Adam. Quantum parameters
get exact two-point parameter-shift gradients; the dense layer and bias
are analytic.

Initialization is pinned for testability: theta uniform in [0, 2*pi)
from the run seed, readout weights and bias zero, so the first-epoch
loss of an untrained model is exactly ln 2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import noise as noise_mod
from . import sim
from .errors import DataError
from .sim import SelWiring
from .util import rng_stream, stratified_split_indices

PROB_EPS = 1e-12
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# cap on complex elements per batched circuit evaluation; larger sweeps are chunked
MAX_BATCH_ELEMENTS = 1 << 22


@dataclass
class TrainConfig:
    n_qubits: int = 13
    layers: int = 7
    learning_rate: float = 0.01
    batch_size: int = 32
    epochs: int = 100
    loss: str = "cross-entropy"
    seed: int = 0
    validation_fraction: float = 0.1


@dataclass
class QnnParams:
    theta: np.ndarray  # (layers, n_qubits, 3) radians
    w: np.ndarray  # (n_qubits,) readout weights
    b: float

    @property
    def n_qubits(self) -> int:
        return self.theta.shape[1]

    @property
    def layers(self) -> int:
        return self.theta.shape[0]

    def copy(self) -> "QnnParams":
        return QnnParams(self.theta.copy(), self.w.copy(), float(self.b))


def init_params(config: TrainConfig) -> QnnParams:
    rng = rng_stream(config.seed, 0)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=(config.layers, config.n_qubits, 3))
    return QnnParams(theta=theta, w=np.zeros(config.n_qubits), b=0.0)


def default_wiring(params: QnnParams) -> SelWiring:
    return SelWiring.ring(params.n_qubits, params.layers)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def qnn_forward(
    x: np.ndarray,
    params: QnnParams,
    noise: noise_mod.NoiseChannel | None = None,
    wiring: SelWiring | None = None,
    n_traj: int = 256,
    rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    """Return (logit, probability) for one sample; noisy z is a trajectory mean."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != params.n_qubits:
        raise ValueError(f"feature vector has length {x.size}, expected {params.n_qubits}")
    wiring = wiring or default_wiring(params)
    if noise is None or noise.p == 0.0:
        amps = sim.batch_angle_embed(x[None, :], params.n_qubits)
        sim.batch_apply_sel_ansatz(amps, params.n_qubits, params.theta, wiring)
        z = sim.batch_expectations_z(amps, params.n_qubits)[0]
    else:
        if rng is None:
            raise ValueError("noisy forward requires an explicit rng")
        z = noise_mod.noisy_embed_sel_expectations(x, params.theta, wiring, noise, n_traj, rng)
    logit = float(params.w @ z + params.b)
    return logit, float(sigmoid(logit))


def forward_batch(
    X: np.ndarray, params: QnnParams, wiring: SelWiring | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Noiseless (logits, probs, z) over the rows of X."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    wiring = wiring or default_wiring(params)
    n = params.n_qubits
    z = np.empty((X.shape[0], n))
    chunk = max(1, MAX_BATCH_ELEMENTS // (2**n))
    for lo in range(0, X.shape[0], chunk):
        rows = X[lo : lo + chunk]
        amps = sim.batch_angle_embed(rows, n)
        sim.batch_apply_sel_ansatz(amps, n, params.theta, wiring)
        z[lo : lo + rows.shape[0]] = sim.batch_expectations_z(amps, n)
    logits = z @ params.w + params.b
    return logits, sigmoid(logits), z


def bce_loss(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross-entropy with probabilities clipped away from {0,1}."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if probs.shape != labels.shape:
        raise ValueError(f"shape mismatch: probs {probs.shape} vs labels {labels.shape}")
    p = np.clip(probs, PROB_EPS, 1.0 - PROB_EPS)
    return float(-np.mean(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p)))


@dataclass
class QnnGrads:
    theta: np.ndarray
    w: np.ndarray
    b: float


def _shifted_z_batch(
    X: np.ndarray, params: QnnParams, wiring: SelWiring
) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate base and all +-pi/2 parameter shifts for every sample.

    Returns (z_base of shape (S, n), z_shift of shape (S, P, 2, n)) where P
    indexes the flattened theta entries. One batched engine call covers all
    samples and variants; rows are chunked to bound memory.
    """
    S = X.shape[0]
    n = params.n_qubits
    P = params.theta.size
    variants = 1 + 2 * P
    flat = params.theta.ravel()
    thetas = np.tile(flat, (variants, 1))
    for k in range(P):
        thetas[1 + 2 * k, k] += np.pi / 2.0
        thetas[2 + 2 * k, k] -= np.pi / 2.0
    thetas = thetas.reshape(variants, *params.theta.shape)

    xs_rows = np.repeat(X, variants, axis=0)
    theta_rows = np.tile(thetas, (S, 1, 1, 1))
    z_rows = np.empty((S * variants, n))
    chunk = max(1, MAX_BATCH_ELEMENTS // (2**n))
    for lo in range(0, z_rows.shape[0], chunk):
        hi = min(lo + chunk, z_rows.shape[0])
        amps = sim.batch_angle_embed(xs_rows[lo:hi], n)
        sim.batch_apply_sel_ansatz(amps, n, theta_rows[lo:hi], wiring)
        z_rows[lo:hi] = sim.batch_expectations_z(amps, n)
    z_rows = z_rows.reshape(S, variants, n)
    z_base = z_rows[:, 0, :]
    z_shift = z_rows[:, 1:, :].reshape(S, P, 2, n)
    return z_base, z_shift


def parameter_shift_grad(
    x: np.ndarray, params: QnnParams, label: float, wiring: SelWiring | None = None
) -> QnnGrads:
    """Exact BCE gradient for one sample via the two-point shift rule."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    wiring = wiring or default_wiring(params)
    z_base, z_shift = _shifted_z_batch(x, params, wiring)
    logit = float(z_base[0] @ params.w + params.b)
    p = float(sigmoid(logit))
    resid = p - float(label)
    dz = 0.5 * (z_shift[0, :, 0, :] - z_shift[0, :, 1, :])  # (P, n)
    grad_theta = (resid * (dz @ params.w)).reshape(params.theta.shape)
    return QnnGrads(theta=grad_theta, w=resid * z_base[0], b=resid)


def batch_gradient(
    X: np.ndarray, y: np.ndarray, params: QnnParams, wiring: SelWiring
) -> tuple[QnnGrads, float]:
    """Mean gradient and loss over a mini-batch."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    z_base, z_shift = _shifted_z_batch(X, params, wiring)
    logits = z_base @ params.w + params.b
    probs = sigmoid(logits)
    resid = probs - y  # (S,)
    dz = 0.5 * (z_shift[:, :, 0, :] - z_shift[:, :, 1, :])  # (S, P, n)
    grad_theta = (resid[:, None] * (dz @ params.w)).mean(axis=0).reshape(params.theta.shape)
    grad_w = (resid[:, None] * z_base).mean(axis=0)
    grad_b = float(resid.mean())
    return QnnGrads(grad_theta, grad_w, grad_b), bce_loss(probs, y)


# ---------------------------------------------------------------------------
# Adam


def adam_step(
    values: np.ndarray,
    grads: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    lr: float,
    t: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bias-corrected Adam update; t is the 1-based step counter."""
    m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * grads
    v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * grads**2
    m_hat = m / (1.0 - ADAM_BETA1**t)
    v_hat = v / (1.0 - ADAM_BETA2**t)
    return values - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS), m, v


def _pack(params: QnnParams) -> np.ndarray:
    return np.concatenate([params.theta.ravel(), params.w, [params.b]])


def _unpack(flat: np.ndarray, like: QnnParams) -> QnnParams:
    t_size = like.theta.size
    n = like.n_qubits
    return QnnParams(
        theta=flat[:t_size].reshape(like.theta.shape).copy(),
        w=flat[t_size : t_size + n].copy(),
        b=float(flat[t_size + n]),
    )


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)


def train_qnn(
    X: np.ndarray, y: np.ndarray, config: TrainConfig, wiring: SelWiring | None = None
) -> tuple[QnnParams, TrainHistory]:
    """Mini-batch Adam training; deterministic for a fixed config and seed."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y).ravel().astype(np.float64)
    if X.shape[0] == 0:
        raise DataError("empty training set")
    classes = np.unique(y)
    if not np.all(np.isin(classes, (0.0, 1.0))):
        raise DataError(f"labels must be binary 0/1, found {classes}")
    if classes.size < 2:
        raise DataError("training set contains a single class")
    if X.shape[1] != config.n_qubits:
        raise ValueError(f"data has {X.shape[1]} features, config expects {config.n_qubits}")

    params = init_params(config)
    wiring = wiring or default_wiring(params)
    fit_idx, val_idx = stratified_split_indices(y, 1.0 - config.validation_fraction, config.seed)
    X_fit, y_fit = X[fit_idx], y[fit_idx]
    X_val, y_val = X[val_idx], y[val_idx]

    flat = _pack(params)
    m = np.zeros_like(flat)
    v = np.zeros_like(flat)
    t = 0
    history = TrainHistory()
    for epoch in range(config.epochs):
        order = rng_stream(config.seed, 1, epoch).permutation(X_fit.shape[0])
        for lo in range(0, order.size, config.batch_size):
            batch = order[lo : lo + config.batch_size]
            grads, _ = batch_gradient(X_fit[batch], y_fit[batch], params, wiring)
            t += 1
            flat, m, v = adam_step(
                flat,
                np.concatenate([grads.theta.ravel(), grads.w, [grads.b]]),
                m,
                v,
                config.learning_rate,
                t,
            )
            params = _unpack(flat, params)
        _, probs_fit, _ = forward_batch(X_fit, params, wiring)
        _, probs_val, _ = forward_batch(X_val, params, wiring)
        history.train_loss.append(bce_loss(probs_fit, y_fit))
        history.train_accuracy.append(float(np.mean((probs_fit >= 0.5) == (y_fit == 1.0))))
        history.val_accuracy.append(float(np.mean((probs_val >= 0.5) == (y_val == 1.0))))
    return params, history


# ---------------------------------------------------------------------------
# serialization: self-describing JSON, bit-exact float round-trip


def params_to_doc(params: QnnParams, config: TrainConfig) -> dict:
    return {
        "kind": "qnn",
        "config": {
            "n_qubits": config.n_qubits,
            "layers": config.layers,
            "learning_rate": config.learning_rate,
            "batch_size": config.batch_size,
            "epochs": config.epochs,
            "loss": config.loss,
            "seed": config.seed,
            "validation_fraction": config.validation_fraction,
        },
        "theta": params.theta.tolist(),
        "w": params.w.tolist(),
        "b": params.b,
    }


def params_from_doc(doc: dict) -> tuple[QnnParams, TrainConfig]:
    if doc.get("kind") != "qnn":
        raise ValueError("not a qnn model document")
    config = TrainConfig(**doc["config"])
    params = QnnParams(
        theta=np.array(doc["theta"], dtype=np.float64),
        w=np.array(doc["w"], dtype=np.float64),
        b=float(doc["b"]),
    )
    return params, config


def save_qnn(path: str | Path, params: QnnParams, config: TrainConfig) -> None:
    Path(path).write_text(json.dumps(params_to_doc(params, config), sort_keys=True, indent=2) + "\n")


def load_qnn(path: str | Path) -> tuple[QnnParams, TrainConfig]:
    return params_from_doc(json.loads(Path(path).read_text()))
