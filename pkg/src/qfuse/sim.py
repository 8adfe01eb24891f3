"""Dense statevector simulation for the two quantum branches.

Conventions fixed here and relied on everywhere else:

- Qubit 0 is the least-significant bit of the basis index: basis state
  ``k`` has qubit ``q`` in state ``(k >> q) & 1``.
- Rotations are ``exp(-i * angle * P / 2)`` for Pauli ``P``.
- Ansatz layers apply per-qubit rotations in the order X, Y, Z, then a
  ring of CNOTs with control ``i`` and target ``(i + 1) % n``. Circuits
  on a single qubit have no entanglers.

The module keeps two surfaces over one engine: a functional single-state
API (`StateVector` in, new `StateVector` out) and a batched core working
on ``(batch, 2**n)`` amplitude arrays in place. The batched core is what
makes trajectory noise and parameter-shift sweeps affordable; rotations
accept per-row angles so a batch may mix samples and parameter variants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}

NORM_ATOL = 1e-10


@dataclass
class StateVector:
    """Dense complex amplitudes over ``n_qubits`` qubits."""

    n_qubits: int
    amps: np.ndarray

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(2**n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amps.copy())


@dataclass(frozen=True)
class SelWiring:
    """Layer count and per-layer CNOT pairs of the entangling ansatz."""

    n_qubits: int
    n_layers: int
    cnot_pairs: tuple[tuple[tuple[int, int], ...], ...] = field(default=())

    @classmethod
    def ring(cls, n_qubits: int, n_layers: int) -> "SelWiring":
        if n_qubits < 1 or n_layers < 0:
            raise ValueError("need n_qubits >= 1 and n_layers >= 0")
        if n_qubits == 1:
            layer: tuple[tuple[int, int], ...] = ()
        else:
            layer = tuple((i, (i + 1) % n_qubits) for i in range(n_qubits))
        return cls(n_qubits, n_layers, tuple(layer for _ in range(n_layers)))


def rotation_matrix(axis: str, angle: float) -> np.ndarray:
    """2x2 unitary exp(-i*angle*P/2) for P in {X, Y, Z}."""
    half = 0.5 * angle
    c, s = np.cos(half), np.sin(half)
    if axis == "X":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
    if axis == "Y":
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    if axis == "Z":
        return np.array([[c - 1j * s, 0], [0, c + 1j * s]], dtype=np.complex128)
    raise ValueError(f"unknown rotation axis {axis!r}")


def rotation_matrices(axis: str, angles: np.ndarray) -> np.ndarray:
    """Stack of rotation matrices, one per angle; shape (len(angles), 2, 2)."""
    angles = np.asarray(angles, dtype=np.float64)
    half = 0.5 * angles
    c, s = np.cos(half), np.sin(half)
    mats = np.zeros(angles.shape + (2, 2), dtype=np.complex128)
    if axis == "X":
        mats[..., 0, 0] = c
        mats[..., 0, 1] = -1j * s
        mats[..., 1, 0] = -1j * s
        mats[..., 1, 1] = c
    elif axis == "Y":
        mats[..., 0, 0] = c
        mats[..., 0, 1] = -s
        mats[..., 1, 0] = s
        mats[..., 1, 1] = c
    elif axis == "Z":
        mats[..., 0, 0] = c - 1j * s
        mats[..., 1, 1] = c + 1j * s
    else:
        raise ValueError(f"unknown rotation axis {axis!r}")
    return mats


# ---------------------------------------------------------------------------
# batched core: amps has shape (batch, 2**n) and is updated in place


def batch_zero(n_qubits: int, batch: int) -> np.ndarray:
    amps = np.zeros((batch, 2**n_qubits), dtype=np.complex128)
    amps[:, 0] = 1.0
    return amps


def _qubit_view(amps: np.ndarray, n_qubits: int, qubit: int) -> np.ndarray:
    # (batch, upper-bits, qubit, lower-bits); qubit 0 is the last index bit
    if not 0 <= qubit < n_qubits:
        raise ValueError(f"qubit {qubit} out of range for {n_qubits} qubits")
    batch = amps.shape[0]
    return amps.reshape(batch, 2 ** (n_qubits - 1 - qubit), 2, 2**qubit)


def batch_apply_1q(amps: np.ndarray, n_qubits: int, qubit: int, mats: np.ndarray) -> np.ndarray:
    """Apply a 2x2 unitary (shared, or one per row if mats is 3-D) to one qubit."""
    view = _qubit_view(amps, n_qubits, qubit)
    if mats.ndim == 2:
        out = np.einsum("ab,rpbq->rpaq", mats, view)
    else:
        out = np.einsum("rab,rpbq->rpaq", mats, view)
    view[...] = out
    return amps


def batch_apply_rotation(
    amps: np.ndarray, n_qubits: int, qubit: int, axis: str, angles
) -> np.ndarray:
    """Rotate one qubit; ``angles`` is a scalar or one angle per batch row."""
    if np.ndim(angles) == 0:
        return batch_apply_1q(amps, n_qubits, qubit, rotation_matrix(axis, float(angles)))
    return batch_apply_1q(amps, n_qubits, qubit, rotation_matrices(axis, angles))


def batch_apply_cnot(amps: np.ndarray, n_qubits: int, control: int, target: int) -> np.ndarray:
    if control == target:
        raise ValueError("control and target must differ")
    if not (0 <= control < n_qubits and 0 <= target < n_qubits):
        raise ValueError(f"qubit pair ({control},{target}) out of range for {n_qubits} qubits")
    batch = amps.shape[0]
    view = amps.reshape((batch,) + (2,) * n_qubits)
    ax_c = 1 + (n_qubits - 1 - control)
    ax_t = 1 + (n_qubits - 1 - target)
    sel: list = [slice(None)] * (n_qubits + 1)
    sel[ax_c] = 1
    sub = view[tuple(sel)]
    flip_axis = ax_t - 1 if ax_t > ax_c else ax_t
    view[tuple(sel)] = np.flip(sub, axis=flip_axis).copy()
    return amps


def batch_angle_embed(xs: np.ndarray, n_qubits: int) -> np.ndarray:
    """Per-row product states: qubit i of row r rotated by RY(xs[r, i])."""
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    if xs.shape[1] != n_qubits:
        raise ValueError(f"expected {n_qubits} features per row, got {xs.shape[1]}")
    amps = batch_zero(n_qubits, xs.shape[0])
    for q in range(n_qubits):
        batch_apply_rotation(amps, n_qubits, q, "Y", xs[:, q])
    return amps


def batch_apply_sel_ansatz(
    amps: np.ndarray, n_qubits: int, thetas: np.ndarray, wiring: SelWiring
) -> np.ndarray:
    """Entangling ansatz over a batch; thetas is (L, n, 3) or (batch, L, n, 3)."""
    thetas = np.asarray(thetas, dtype=np.float64)
    per_row = thetas.ndim == 4
    expected = (wiring.n_layers, wiring.n_qubits, 3)
    if (thetas.shape[1:] if per_row else thetas.shape) != expected:
        raise ValueError(f"theta shape {thetas.shape} does not match wiring {expected}")
    if wiring.n_qubits != n_qubits:
        raise ValueError("wiring qubit count does not match state")
    for layer in range(wiring.n_layers):
        for q in range(n_qubits):
            for ax_idx, axis in enumerate(("X", "Y", "Z")):
                angles = thetas[:, layer, q, ax_idx] if per_row else thetas[layer, q, ax_idx]
                batch_apply_rotation(amps, n_qubits, q, axis, angles)
        for control, target in wiring.cnot_pairs[layer]:
            batch_apply_cnot(amps, n_qubits, control, target)
    return amps


def batch_expectations_z(amps: np.ndarray, n_qubits: int) -> np.ndarray:
    """Exact per-qubit <Z> for every row; shape (batch, n_qubits)."""
    probs = np.abs(amps) ** 2
    out = np.empty((amps.shape[0], n_qubits), dtype=np.float64)
    for q in range(n_qubits):
        view = probs.reshape(amps.shape[0], 2 ** (n_qubits - 1 - q), 2, 2**q)
        out[:, q] = view[:, :, 0, :].sum(axis=(1, 2)) - view[:, :, 1, :].sum(axis=(1, 2))
    return out


# ---------------------------------------------------------------------------
# single-state API


def angle_embed(x: np.ndarray, n_qubits: int) -> StateVector:
    """Encode a feature vector as per-qubit Y rotations applied to |0...0>."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != n_qubits:
        raise ValueError(f"feature vector has length {x.size}, expected {n_qubits}")
    return StateVector(n_qubits, batch_angle_embed(x[None, :], n_qubits)[0])


def apply_rotation(state: StateVector, qubit: int, axis: str, angle: float) -> StateVector:
    out = state.copy()
    batch_apply_rotation(out.amps[None, :], state.n_qubits, qubit, axis, float(angle))
    return out


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    out = state.copy()
    batch_apply_cnot(out.amps[None, :], state.n_qubits, control, target)
    return out


def apply_sel_ansatz(state: StateVector, theta: np.ndarray, wiring: SelWiring) -> StateVector:
    out = state.copy()
    batch_apply_sel_ansatz(out.amps[None, :], state.n_qubits, np.asarray(theta), wiring)
    return out


def expectation_z(state: StateVector, qubit: int) -> float:
    if not 0 <= qubit < state.n_qubits:
        raise ValueError(f"qubit {qubit} out of range for {state.n_qubits} qubits")
    return float(batch_expectations_z(state.amps[None, :], state.n_qubits)[0, qubit])


def all_expectations_z(state: StateVector) -> np.ndarray:
    return batch_expectations_z(state.amps[None, :], state.n_qubits)[0]


def fidelity_kernel_value(
    x_i: np.ndarray,
    x_j: np.ndarray,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Fidelity |<psi(x_i)|psi(x_j)>|^2 via the embed-then-adjoint circuit.

    Builds the embedding of ``x_i``, applies the adjoint embedding of
    ``x_j``, and reads the all-zeros probability. Exact by default; with
    ``shots`` set, the probability is estimated from a seeded binomial
    draw instead.
    """
    x_i = np.asarray(x_i, dtype=np.float64).ravel()
    x_j = np.asarray(x_j, dtype=np.float64).ravel()
    if x_i.size != x_j.size:
        raise ValueError(f"feature lengths differ: {x_i.size} vs {x_j.size}")
    n = x_i.size
    amps = batch_angle_embed(x_i[None, :], n)
    for q in range(n):
        batch_apply_rotation(amps, n, q, "Y", -x_j[q])
    p_zero = float(np.abs(amps[0, 0]) ** 2)
    p_zero = min(max(p_zero, 0.0), 1.0)
    if shots is None:
        return p_zero
    if rng is None:
        raise ValueError("shot sampling requires an explicit rng")
    return float(rng.binomial(int(shots), p_zero)) / float(shots)
