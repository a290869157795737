"""Tests for dynamics module (unitary and Lindblad evolution)."""

import math

import numpy as np
import pytest

from squeezed_ladder import dynamics
from squeezed_ladder.dynamics import (
    Jump,
    SpinOscDensity,
    Trajectory,
    energy,
    evolve_lindblad,
    evolve_unitary,
    liouvillian,
    reservoir_jumps,
    sample_times,
    spin_repump,
)
from squeezed_ladder.exceptions import DimensionMismatchError, IntegrationError, ValidationError
from squeezed_ladder.hamiltonians import (
    DriveParams,
    Hamiltonian,
    NoiseParams,
    carrier,
    detuning_term,
    engineered,
)
from squeezed_ladder.hilbert import (
    DOWN,
    UP,
    FockSpace,
    SqueezeParams,
    basis,
    engineered_lowering,
    make_number,
    spin_state,
    squeezed_fock_state,
)


class TestSampleTimes:
    # Tests that a single sample sits at the end of the interval.
    def test_single_sample(self):
        np.testing.assert_allclose(sample_times(2.0, 1), [2.0])

    # Tests that negative durations are rejected.
    def test_negative_duration(self):
        with pytest.raises(ValidationError, match="Duration"):
            sample_times(-1.0, 3)

    # Tests that trajectories require strictly increasing times.
    def test_trajectory_times(self):
        space = FockSpace(2)
        psi = spin_state(basis(space, 0), space)
        with pytest.raises(ValidationError, match="increasing"):
            Trajectory(np.array([0.0, 0.0]), [psi, psi])


class TestUnitary:
    # Tests that an H_plus pi pulse moves |down, zeta 0> to |up, zeta 1>.
    def test_pi_pulse(self):
        space = FockSpace(96)
        zeta = SqueezeParams(0.8)
        K, _ = engineered_lowering(zeta, 0j, space)
        omega = 2 * math.pi * 4300
        h = engineered("plus", DriveParams(omega), K)
        psi0 = spin_state(squeezed_fock_state(zeta, 0, space), space)
        traj = evolve_unitary(h, psi0, math.pi / omega, 5)
        assert traj.final.p_down < 1e-8
        target = spin_state(squeezed_fock_state(zeta, 1, space), space, UP).amplitudes
        assert abs(np.vdot(target, traj.final.amplitudes)) ** 2 > 1 - 1e-8

    # Tests that P(down) follows cos^2(Omega t / 2) during carrier flopping.
    def test_carrier_flopping(self):
        space = FockSpace(6)
        h = carrier(DriveParams(1.0), space)
        psi0 = spin_state(basis(space, 2), space)
        traj = evolve_unitary(h, psi0, 4.0, 21)
        np.testing.assert_allclose(traj.records["p_down"], np.cos(traj.times / 2) ** 2,
                                   atol=1e-12)
        np.testing.assert_allclose(traj.records["mean_n"], 2.0)

    # Tests that energy is conserved under the generating Hamiltonian.
    def test_energy_conserved(self):
        space = FockSpace(8)
        h = carrier(DriveParams(1.0, 0.3), space)
        psi0 = spin_state(basis(space, 1), space)
        traj = evolve_unitary(h, psi0, 3.0, 4)
        assert energy(h, traj.final) == pytest.approx(energy(h, psi0), abs=1e-12)

    # Tests that mismatched truncations are refused.
    def test_dimension_mismatch(self):
        h = Hamiltonian.zero(FockSpace(4))
        psi = spin_state(basis(FockSpace(5), 0), FockSpace(5))
        with pytest.raises(DimensionMismatchError):
            evolve_unitary(h, psi, 1.0)

    # Tests that a propagator that loses norm is reported instead of renormalized.
    def test_norm_drift_raises(self, monkeypatch):
        space = FockSpace(4)
        real_eigh = dynamics.eigh

        def leaky_eigh(matrix):
            evals, evecs = real_eigh(matrix)
            return evals, 1.01 * evecs

        monkeypatch.setattr(dynamics, "eigh", leaky_eigh)
        h = carrier(DriveParams(1.0), space)
        with pytest.raises(IntegrationError, match="Norm drifted"):
            evolve_unitary(h, spin_state(basis(space, 0), space), 1.0, 3)


class TestLindblad:
    # Tests that heating and cooling at equal rates raise <n> at rate Gamma_A.
    def test_heating_rate(self):
        space = FockSpace(20)
        gamma = 10.0
        rho0 = SpinOscDensity.product(DOWN, np.outer(basis(space, 0), basis(space, 0)), space)
        jumps = reservoir_jumps(NoiseParams(gamma_amp=gamma), space)
        traj = evolve_lindblad(Hamiltonian.zero(space), jumps, rho0, 0.01, 3)
        assert traj.records["mean_n"][-1] == pytest.approx(gamma * 0.01, rel=0.02)

    # Tests that motional dephasing damps coherences at Gamma (m - n)^2 / 2.
    @pytest.mark.parametrize("m,n", [(1, 0), (2, 0), (3, 1)])
    def test_dephasing_rate(self, m, n):
        space = FockSpace(8)
        gamma = 100.0
        t = 0.005
        osc = (basis(space, 0) + basis(space, 1) + basis(space, 2) + basis(space, 3)) / 2
        rho0 = SpinOscDensity.from_state(spin_state(osc, space))
        jumps = reservoir_jumps(NoiseParams(gamma_phase=gamma), space)
        traj = evolve_lindblad(Hamiltonian.zero(space), jumps, rho0, t)
        before = rho0.spin_block(DOWN, DOWN)[m, n]
        after = traj.final.spin_block(DOWN, DOWN)[m, n]
        expected = math.exp(-gamma * (m - n) ** 2 * t / 2)
        assert abs(after / before) == pytest.approx(expected, rel=0.01)

    # Tests that without jumps the master equation reproduces unitary evolution.
    def test_matches_unitary_when_closed(self):
        space = FockSpace(6)
        h = carrier(DriveParams(1.0), space)
        psi0 = spin_state(basis(space, 1), space)
        closed = evolve_unitary(h, psi0, 2.0, 3)
        opened = evolve_lindblad(h, [], SpinOscDensity.from_state(psi0), 2.0, 3)
        np.testing.assert_allclose(opened.records["p_down"], closed.records["p_down"],
                                   atol=1e-6)

    # Tests that trace and positivity survive a noisy evolution.
    def test_trace_and_positivity(self):
        space = FockSpace(12)
        h = carrier(DriveParams(5.0), space)
        rho0 = SpinOscDensity.from_state(spin_state(basis(space, 1), space))
        jumps = reservoir_jumps(NoiseParams(gamma_amp=2.0, gamma_phase=3.0), space)
        traj = evolve_lindblad(h, jumps, rho0, 0.2, 4)
        for rho in traj.states:
            assert np.trace(rho.matrix).real == pytest.approx(1.0, abs=1e-8)
            assert rho.min_eigenvalue() > -1e-6

    # Tests that the sparse generator reproduces the master-equation right-hand side.
    def test_liouvillian_matches_rhs(self):
        space = FockSpace(5)
        h = carrier(DriveParams(1.3, 0.4), space) + detuning_term(0.7, space)
        jumps = reservoir_jumps(NoiseParams(gamma_amp=0.9, gamma_phase=0.5), space)
        rng = np.random.default_rng(3)
        x = rng.normal(size=(10, 10)) + 1j * rng.normal(size=(10, 10))
        rho = x @ x.conj().T
        rho /= np.trace(rho)
        expected = -1j * (h.matrix @ rho - rho @ h.matrix)
        for jump in jumps:
            l = np.kron(np.eye(2), jump.operator.matrix) * math.sqrt(jump.rate)
            ldl = l.conj().T @ l
            expected += l @ rho @ l.conj().T - 0.5 * (ldl @ rho + rho @ ldl)
        got = (liouvillian(h, jumps) @ rho.ravel()).reshape(10, 10)
        np.testing.assert_allclose(got, expected, atol=1e-12)

    # Tests that squeezed-ladder flopping under the reference noise stays a valid density.
    def test_reference_noise_flopping(self):
        space = FockSpace(96)
        zeta = SqueezeParams(1.0)
        K, _ = engineered_lowering(zeta, 0j, space)
        omega = 2 * math.pi * 4300
        noise = NoiseParams(delta=2 * math.pi * 30, gamma_amp=2 * math.pi * 10.7,
                            gamma_phase=2 * math.pi * 5)
        h = engineered("plus", DriveParams(omega), K) + detuning_term(noise.delta, space)
        psi0 = spin_state(squeezed_fock_state(zeta, 0, space), space)
        traj = evolve_lindblad(h, reservoir_jumps(noise, space),
                               SpinOscDensity.from_state(psi0), 2e-3, 41)
        for rho in traj.states:
            assert np.trace(rho.matrix).real == pytest.approx(1.0, abs=1e-8)
            assert rho.min_eigenvalue() > -1e-8
        assert 0.0 < traj.records["p_down"].min() < 0.5

    # Tests that jumps with negative rates are rejected.
    def test_negative_rate(self):
        with pytest.raises(ValidationError, match="rate"):
            Jump(-1.0, make_number(FockSpace(3)))

    # Tests that a closed noise model yields no jumps.
    def test_no_jumps_when_closed(self):
        assert reservoir_jumps(NoiseParams(delta=5.0), FockSpace(4)) == []


class TestRepump:
    # Tests that repumping resets the spin and keeps the motional state.
    def test_repump(self):
        space = FockSpace(6)
        psi = spin_state(basis(space, 3), space, UP)
        rho = spin_repump(SpinOscDensity.from_state(psi))
        assert rho.p_down == pytest.approx(1.0)
        assert rho.spin_block(DOWN, DOWN)[3, 3] == pytest.approx(1.0)

    # Tests that densities with the wrong trace are rejected.
    def test_bad_trace(self):
        space = FockSpace(2)
        with pytest.raises(ValidationError, match="trace"):
            SpinOscDensity(np.eye(4, dtype=complex), space)
