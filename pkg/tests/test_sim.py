"""Statevector engine: gates, embedding, ansatz, expectations, kernel."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qfuse import sim
from qfuse.sim import SelWiring, StateVector

from helpers import cnot_matrix, product_kernel_oracle


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return StateVector(n, amps / np.linalg.norm(amps))


class TestAngleEmbed:
    def test_zero_rotations_keep_ground_state(self):
        state = sim.angle_embed([0.0, 0.0, 0.0], 3)
        expected = np.zeros(8)
        expected[0] = 1.0
        np.testing.assert_allclose(state.amps, expected, atol=1e-15)

    def test_pi_rotation_flips_qubit(self):
        state = sim.angle_embed([np.pi], 1)
        np.testing.assert_allclose(np.abs(state.amps), [0.0, 1.0], atol=1e-12)

    def test_half_pi_gives_equal_superposition(self):
        state = sim.angle_embed([np.pi / 2], 1)
        np.testing.assert_allclose(state.amps, [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-12)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            sim.angle_embed([0.1, 0.2], 3)

    def test_qubit_zero_is_least_significant_bit(self):
        # rotate only qubit 0 by pi: |000> -> |001> = index 1
        state = sim.angle_embed([np.pi, 0.0, 0.0], 3)
        assert abs(state.amps[1]) == pytest.approx(1.0, abs=1e-12)


class TestRotations:
    def test_rz_leaves_ground_state_expectation(self):
        state = StateVector.zero(1)
        out = sim.apply_rotation(state, 0, "Z", 1.234)
        assert sim.expectation_z(out, 0) == pytest.approx(1.0, abs=1e-12)

    def test_rx_pi_flips_up_to_phase(self):
        out = sim.apply_rotation(StateVector.zero(1), 0, "X", np.pi)
        assert abs(out.amps[1]) == pytest.approx(1.0, abs=1e-12)

    @given(st.floats(-10, 10), st.integers(0, 2))
    @settings(deadline=None, max_examples=30)
    def test_rotation_inverse(self, angle, qubit):
        state = random_state(3, 7)
        forward = sim.apply_rotation(state, qubit, "Y", angle)
        back = sim.apply_rotation(forward, qubit, "Y", -angle)
        np.testing.assert_allclose(back.amps, state.amps, atol=1e-12)

    def test_out_of_range_qubit(self):
        with pytest.raises(ValueError):
            sim.apply_rotation(StateVector.zero(2), 2, "X", 0.1)

    @given(
        st.sampled_from(["X", "Y", "Z"]),
        st.floats(-2 * np.pi, 2 * np.pi),
        st.integers(0, 3),
        st.integers(0, 10_000),
    )
    @settings(deadline=None, max_examples=60)
    def test_norm_preserved(self, axis, angle, qubit, seed):
        state = random_state(4, seed)
        out = sim.apply_rotation(state, qubit, axis, angle)
        assert abs(out.norm() - 1.0) < 1e-10


class TestCnot:
    def test_flips_target_when_control_set(self):
        state = StateVector(2, np.array([0, 0, 1, 0], dtype=complex))  # |10>
        out = sim.apply_cnot(state, 1, 0)
        np.testing.assert_allclose(np.abs(out.amps), [0, 0, 0, 1], atol=1e-15)

    def test_identity_on_unset_control(self):
        state = StateVector.zero(2)
        out = sim.apply_cnot(state, 1, 0)
        np.testing.assert_allclose(out.amps, state.amps, atol=1e-15)

    def test_involution(self):
        state = random_state(3, 11)
        out = sim.apply_cnot(sim.apply_cnot(state, 0, 2), 0, 2)
        np.testing.assert_allclose(out.amps, state.amps, atol=1e-12)

    def test_equal_indices_rejected(self):
        with pytest.raises(ValueError):
            sim.apply_cnot(StateVector.zero(2), 1, 1)

    @given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 10_000))
    @settings(deadline=None, max_examples=40)
    def test_matches_permutation_matrix(self, control, target, seed):
        if control == target:
            return
        state = random_state(4, seed)
        out = sim.apply_cnot(state, control, target)
        expected = cnot_matrix(4, control, target) @ state.amps
        np.testing.assert_allclose(out.amps, expected, atol=1e-12)


class TestSelAnsatz:
    def test_zero_theta_equals_pure_cnot_ring(self):
        for n in (2, 3, 4):
            wiring = SelWiring.ring(n, 2)
            state = random_state(n, n)
            out = sim.apply_sel_ansatz(state, np.zeros((2, n, 3)), wiring)
            ref = state
            for layer in wiring.cnot_pairs:
                for control, target in layer:
                    ref = sim.apply_cnot(ref, control, target)
            np.testing.assert_allclose(out.amps, ref.amps, atol=1e-12)

    def test_single_qubit_skips_entanglers(self):
        wiring = SelWiring.ring(1, 1)
        assert wiring.cnot_pairs == ((),)
        theta = np.zeros((1, 1, 3))
        theta[0, 0, 1] = np.pi  # lone RY(pi)
        out = sim.apply_sel_ansatz(StateVector.zero(1), theta, wiring)
        np.testing.assert_allclose(np.abs(out.amps), [0.0, 1.0], atol=1e-12)

    def test_random_theta_preserves_norm(self):
        rng = np.random.default_rng(5)
        wiring = SelWiring.ring(3, 4)
        out = sim.apply_sel_ansatz(
            random_state(3, 17), rng.uniform(0, 2 * np.pi, size=(4, 3, 3)), wiring
        )
        assert abs(out.norm() - 1.0) < 1e-10

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            sim.apply_sel_ansatz(StateVector.zero(3), np.zeros((2, 2, 3)), SelWiring.ring(3, 2))

    def test_ring_covers_all_qubits(self):
        wiring = SelWiring.ring(5, 3)
        for layer in wiring.cnot_pairs:
            controls = sorted(c for c, _ in layer)
            targets = sorted(t for _, t in layer)
            assert controls == list(range(5)) and targets == list(range(5))
            assert all(t == (c + 1) % 5 for c, t in layer)


class TestExpectationZ:
    def test_ground_state(self):
        assert sim.expectation_z(StateVector.zero(1), 0) == 1.0

    def test_equator_state(self):
        state = sim.angle_embed([np.pi / 2], 1)
        assert abs(sim.expectation_z(state, 0)) < 1e-12

    def test_cosine_law_on_grid(self):
        for theta in np.linspace(-np.pi, np.pi, 21):
            state = sim.angle_embed([theta], 1)
            assert sim.expectation_z(state, 0) == pytest.approx(np.cos(theta), abs=1e-12)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            sim.expectation_z(StateVector.zero(2), 5)


class TestFidelityKernel:
    def test_self_fidelity_is_one(self):
        rng = np.random.default_rng(1)
        for n in (1, 3, 5):
            x = rng.normal(size=n)
            assert sim.fidelity_kernel_value(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_single_qubit(self):
        assert sim.fidelity_kernel_value([0.0], [np.pi]) == pytest.approx(0.0, abs=1e-12)

    def test_closed_form_product(self):
        rng = np.random.default_rng(2)
        for n in (1, 2, 4, 8):
            for _ in range(50):
                x, y = rng.normal(size=n), rng.normal(size=n)
                got = sim.fidelity_kernel_value(x, y)
                assert got == pytest.approx(product_kernel_oracle(x, y), abs=1e-10)

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        x, y = rng.normal(size=4), rng.normal(size=4)
        assert sim.fidelity_kernel_value(x, y) == pytest.approx(
            sim.fidelity_kernel_value(y, x), abs=1e-12
        )

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            sim.fidelity_kernel_value([0.1], [0.1, 0.2])

    def test_shot_sampling_converges(self):
        rng = np.random.default_rng(4)
        x, y = rng.normal(size=2), rng.normal(size=2)
        exact = sim.fidelity_kernel_value(x, y)
        sampled = sim.fidelity_kernel_value(x, y, shots=200_000, rng=np.random.default_rng(0))
        assert abs(sampled - exact) < 0.01

    def test_shot_sampling_requires_rng(self):
        with pytest.raises(ValueError):
            sim.fidelity_kernel_value([0.1], [0.2], shots=100)
