"""Single-qubit Kraus channels and their stochastic trajectory unraveling.

Noise acts on statevectors, not density matrices: one Kraus operator is
sampled per insertion with probability ||K|psi>||^2 and the state is
renormalized. Averages over many trajectories converge to the channel
acting on the density matrix, which keeps 13-qubit noisy runs feasible.

Insertion policy (used by the noisy circuit runners here): a channel is
applied after every gate, to each qubit the gate touches.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import sim
from .sim import SelWiring, StateVector

_I2 = np.eye(2, dtype=np.complex128)


class ChannelKind(str, Enum):
    AMPLITUDE_DAMPING = "amplitude_damping"
    BIT_FLIP = "bit_flip"
    PHASE_FLIP = "phase_flip"
    PHASE_DAMPING = "phase_damping"
    DEPOLARIZING = "depolarizing"


@dataclass(frozen=True)
class NoiseChannel:
    kind: ChannelKind
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"channel probability must be in [0,1], got {self.p}")


def kraus_operators(channel: NoiseChannel) -> list[np.ndarray]:
    """Textbook Kraus set for the channel; damping kinds use gamma = p."""
    p = channel.p
    if channel.kind is ChannelKind.BIT_FLIP:
        return [np.sqrt(1 - p) * _I2, np.sqrt(p) * sim._PAULI["X"]]
    if channel.kind is ChannelKind.PHASE_FLIP:
        return [np.sqrt(1 - p) * _I2, np.sqrt(p) * sim._PAULI["Z"]]
    if channel.kind is ChannelKind.DEPOLARIZING:
        return [
            np.sqrt(1 - p) * _I2,
            np.sqrt(p / 3.0) * sim._PAULI["X"],
            np.sqrt(p / 3.0) * sim._PAULI["Y"],
            np.sqrt(p / 3.0) * sim._PAULI["Z"],
        ]
    if channel.kind is ChannelKind.AMPLITUDE_DAMPING:
        k0 = np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=np.complex128)
        k1 = np.array([[0, np.sqrt(p)], [0, 0]], dtype=np.complex128)
        return [k0, k1]
    if channel.kind is ChannelKind.PHASE_DAMPING:
        k0 = np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=np.complex128)
        k1 = np.array([[0, 0], [0, np.sqrt(p)]], dtype=np.complex128)
        return [k0, k1]
    raise ValueError(f"unknown channel kind {channel.kind!r}")


def batch_apply_channel(
    amps: np.ndarray,
    n_qubits: int,
    channel: NoiseChannel,
    qubit: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Sample one Kraus outcome per batch row, apply it, renormalize the row."""
    if channel.p == 0.0:
        return amps
    kraus = kraus_operators(channel)
    view = sim._qubit_view(amps, n_qubits, qubit)
    batch = amps.shape[0]
    candidates = np.stack([np.einsum("ab,rpbq->rpaq", k, view) for k in kraus])
    weights = np.abs(candidates.reshape(len(kraus), batch, -1)) ** 2
    probs = weights.sum(axis=2).T  # (batch, n_kraus)
    cum = np.cumsum(probs, axis=1)
    total = cum[:, -1:]
    u = rng.random(batch)[:, None] * total
    choice = (u >= cum).sum(axis=1)
    rows = np.arange(batch)
    chosen = candidates[choice, rows]
    norms = np.sqrt(probs[rows, choice])
    view[...] = chosen / norms[:, None, None, None]
    return amps


def apply_channel_trajectory(
    state: StateVector, channel: NoiseChannel, qubit: int, rng: np.random.Generator
) -> StateVector:
    """One stochastic unraveling step of the channel on a single state."""
    out = state.copy()
    batch_apply_channel(out.amps[None, :], state.n_qubits, channel, qubit, rng)
    return out


# ---------------------------------------------------------------------------
# noisy circuit runners (per-gate insertion on the touched qubits)


def noisy_embed_sel_expectations(
    x: np.ndarray,
    theta: np.ndarray,
    wiring: SelWiring,
    channel: NoiseChannel,
    n_traj: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Trajectory-mean per-qubit <Z> of the embed + ansatz circuit under noise."""
    x = np.asarray(x, dtype=np.float64).ravel()
    n = wiring.n_qubits
    theta = np.asarray(theta, dtype=np.float64)
    amps = sim.batch_zero(n, n_traj)
    for q in range(n):
        sim.batch_apply_rotation(amps, n, q, "Y", x[q])
        batch_apply_channel(amps, n, channel, q, rng)
    for layer in range(wiring.n_layers):
        for q in range(n):
            for ax_idx, axis in enumerate(("X", "Y", "Z")):
                sim.batch_apply_rotation(amps, n, q, axis, theta[layer, q, ax_idx])
                batch_apply_channel(amps, n, channel, q, rng)
        for control, target in wiring.cnot_pairs[layer]:
            sim.batch_apply_cnot(amps, n, control, target)
            batch_apply_channel(amps, n, channel, control, rng)
            batch_apply_channel(amps, n, channel, target, rng)
    return sim.batch_expectations_z(amps, n).mean(axis=0)


def noisy_kernel_value(
    x_i: np.ndarray,
    x_j: np.ndarray,
    channel: NoiseChannel,
    n_traj: int,
    rng: np.random.Generator,
) -> float:
    """Trajectory-mean all-zeros probability of the fidelity circuit under noise."""
    x_i = np.asarray(x_i, dtype=np.float64).ravel()
    x_j = np.asarray(x_j, dtype=np.float64).ravel()
    if x_i.size != x_j.size:
        raise ValueError(f"feature lengths differ: {x_i.size} vs {x_j.size}")
    n = x_i.size
    amps = sim.batch_zero(n, n_traj)
    for q in range(n):
        sim.batch_apply_rotation(amps, n, q, "Y", x_i[q])
        batch_apply_channel(amps, n, channel, q, rng)
    for q in range(n):
        sim.batch_apply_rotation(amps, n, q, "Y", -x_j[q])
        batch_apply_channel(amps, n, channel, q, rng)
    return float(np.mean(np.abs(amps[:, 0]) ** 2))
