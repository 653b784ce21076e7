import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catprobe.errors import ConfigurationError, PreconditionError
from catprobe.qstate import (
    SIGMA_X,
    SIGMA_Z,
    CompositeState,
    TwoLevelState,
    bloch_vector,
    reduced_density,
    step_propagator,
    tensor_embed,
)
from oracles import series_expm

S2 = 1 / math.sqrt(2)

angles = st.floats(0, 2 * math.pi, allow_nan=False)


def random_state(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


class TestBlochVector:
    @pytest.mark.parametrize(
        "amps, expected",
        [
            ((1, 0), (0, 0, 1)),
            ((S2, S2), (1, 0, 0)),
            ((S2, 1j * S2), (0, 1, 0)),
        ],
    )
    def test_examples(self, amps, expected):
        np.testing.assert_allclose(bloch_vector(TwoLevelState(*amps)), expected, atol=1e-15)

    def test_rejects_unnormalized(self):
        with pytest.raises(PreconditionError):
            bloch_vector(np.array([1.0, 1.0]))

    @given(angles, angles)
    def test_unit_length_and_z(self, theta, phi):
        psi = TwoLevelState(math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2))
        x, y, z = bloch_vector(psi)
        assert abs(x * x + y * y + z * z - 1) <= 1e-10
        assert abs(z - (2 * abs(psi.amp_L) ** 2 - 1)) <= 1e-15


class TestStepPropagator:
    def test_zero_hamiltonian_is_identity(self):
        np.testing.assert_array_equal(step_propagator(0, 0, 0.37).u, np.eye(2))

    def test_pure_phase(self):
        u = step_propagator(0, 2, math.pi / 2).u
        np.testing.assert_allclose(u, np.diag([np.exp(-0.5j * math.pi), np.exp(0.5j * math.pi)]), atol=1e-15)

    def test_matches_series(self):
        h = 0.5 * 1.0 * SIGMA_X + 0.5 * 0.7 * SIGMA_Z
        ref = series_expm(-1j * 0.01 * h, terms=15)
        np.testing.assert_allclose(step_propagator(1.0, 0.7, 0.01).u, ref, atol=1e-12, rtol=0)

    @pytest.mark.parametrize("dt", [0.0, -0.1])
    def test_rejects_nonpositive_dt(self, dt):
        with pytest.raises(ConfigurationError):
            step_propagator(1, 1, dt)

    @given(st.floats(-50, 50), st.floats(-50, 50), st.floats(1e-6, 1.0))
    def test_unitary(self, delta, eta, dt):
        u = step_propagator(delta, eta, dt).u
        assert np.max(np.abs(u.conj().T @ u - np.eye(2))) <= 1e-12

    def test_norm_drift_over_many_steps(self):
        rng = np.random.default_rng(3)
        v = np.array([1.0 + 0j, 0.0])
        n = 5000
        for eta in rng.normal(scale=10, size=n):
            v = step_propagator(1.0, eta, 0.01).u @ v
        assert abs(np.linalg.norm(v) - 1) <= n * 1e-13


class TestReducedDensity:
    def test_orthogonal_environments_kill_coherence(self):
        psi = CompositeState(2, [S2, 0, 0, S2])
        rho = reduced_density(psi)
        np.testing.assert_allclose(rho.rho, np.diag([0.5, 0.5]), atol=1e-15)
        assert abs(rho.rho_LR) <= 1e-15

    def test_product_state_is_pure(self):
        rng = np.random.default_rng(0)
        phi = random_state(rng, 5)
        rho = reduced_density(tensor_embed(TwoLevelState.symmetric(), phi))
        assert abs(rho.rho_LR - 0.5) <= 1e-12
        assert abs(rho.purity() - 1) <= 1e-10

    def test_partial_overlap(self):
        # environments with real overlap 0.3: Phi_L = (1, 0), Phi_R = (0.3, sqrt(0.91))
        phi_L = np.array([1.0, 0.0])
        phi_R = np.array([0.3, math.sqrt(0.91)])
        flat = np.concatenate([S2 * phi_L, S2 * phi_R])
        expected = sum(flat[e] * np.conj(flat[2 + e]) for e in range(2))
        assert abs(expected - 0.15) <= 1e-15
        assert abs(reduced_density(CompositeState(2, flat)).rho_LR - expected) <= 1e-15

    @settings(max_examples=50)
    @given(st.integers(1, 12), st.integers(0, 2**32 - 1))
    def test_trace_one(self, dim_env, seed):
        rng = np.random.default_rng(seed)
        rho = reduced_density(CompositeState(dim_env, random_state(rng, 2 * dim_env)))
        assert abs(np.trace(rho.rho) - 1) <= 1e-12


class TestTensorEmbed:
    def test_basis(self):
        np.testing.assert_array_equal(tensor_embed(TwoLevelState.left(), [1, 0]).amplitudes, [1, 0, 0, 0])

    def test_symmetric(self):
        out = tensor_embed(TwoLevelState.symmetric(), [0, 1]).amplitudes
        np.testing.assert_allclose(out, [0, S2, 0, S2], atol=1e-16)

    def test_layout(self):
        psi = TwoLevelState(0.6, 0.8j)
        phi = np.array([0.0, 0.6, 0.8])
        cs = tensor_embed(psi, phi)
        for s, a in enumerate(psi.vector):
            for e in range(3):
                assert cs.amplitudes[s * 3 + e] == a * phi[e]

    def test_empty_environment(self):
        with pytest.raises(ConfigurationError):
            tensor_embed(TwoLevelState.left(), [])

    @given(st.integers(1, 16), st.integers(0, 2**32 - 1))
    def test_norm(self, dim, seed):
        rng = np.random.default_rng(seed)
        psi = TwoLevelState.from_vector(random_state(rng, 2))
        cs = tensor_embed(psi, random_state(rng, dim))
        assert abs(np.linalg.norm(cs.amplitudes) - 1) <= 1e-12


def test_states_are_immutable():
    cs = CompositeState(1, [1, 0])
    with pytest.raises(ValueError):
        cs.amplitudes[0] = 0
    with pytest.raises(PreconditionError):
        TwoLevelState(1, 1)
