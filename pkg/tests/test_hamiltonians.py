"""Tests for hamiltonians module (drive Hamiltonians, Lamb-Dicke couplings, detuning)."""

import math

import numpy as np
import pytest
from scipy.special import genlaguerre

from squeezed_ladder.exceptions import RatioError, TruncationError, ValidationError
from squeezed_ladder.hamiltonians import (
    ALL_ORDERS,
    DriveParams,
    ExperimentConfig,
    Hamiltonian,
    LambDicke,
    bichromatic,
    bichromatic_equivalent,
    block_splitting,
    carrier,
    detuning_squeezed_form,
    detuning_term,
    engineered,
    jaynes_cummings,
    ladder_lowering,
    sideband,
    sideband_factors,
    sideband_matrix_element,
    transition_rabi_frequency,
)
from squeezed_ladder.hilbert import (
    DOWN,
    UP,
    FockSpace,
    SqueezeParams,
    basis,
    engineered_lowering,
    spin_state,
    squeezed_fock_state,
)


def composite(zeta, n, space, spin):
    return spin_state(squeezed_fock_state(zeta, n, space), space, spin).amplitudes


class TestParams:
    # Tests that negative Rabi frequencies are rejected.
    def test_negative_drive(self):
        with pytest.raises(ValidationError, match="Rabi frequency"):
            DriveParams(-1.0)

    # Tests that the Lamb-Dicke parameter must lie in [0, 1).
    def test_lamb_dicke_range(self):
        with pytest.raises(ValidationError, match="Lamb-Dicke"):
            LambDicke(1.0)

    # Tests that a blue tone as strong as the red tone is a RatioError.
    def test_config_ratio(self):
        with pytest.raises(RatioError, match="Omega_b < Omega_r"):
            ExperimentConfig(omega_red=1.0, omega_blue=1.0)

    # Tests that unknown Lamb-Dicke orders are rejected.
    def test_config_ld_order(self):
        with pytest.raises(ValidationError, match="ld_order"):
            ExperimentConfig(ld_order="cubic")

    # Tests that non-Hermitian matrices are not accepted as Hamiltonians.
    def test_hamiltonian_hermitian(self):
        space = FockSpace(2)
        m = np.zeros((4, 4), dtype=complex)
        m[0, 1] = 1.0
        with pytest.raises(ValidationError, match="not Hermitian"):
            Hamiltonian(m, space, "bad")


class TestSqrtNLaw:
    # Tests that H_plus block splittings scale as sqrt(n) on the squeezed ladder.
    @pytest.mark.parametrize("r", [0.0, 0.5, 1.0])
    def test_plus_splittings(self, r):
        space = FockSpace(128)
        zeta = SqueezeParams(r)
        K, _ = engineered_lowering(zeta, 0j, space)
        h = engineered("plus", DriveParams(1.0), K)
        base = block_splitting(h, composite(zeta, 0, space, DOWN), composite(zeta, 1, space, UP))
        assert base == pytest.approx(1.0, abs=1e-6)
        for n in range(1, 7):
            split = block_splitting(h, composite(zeta, n - 1, space, DOWN),
                                    composite(zeta, n, space, UP))
            assert abs(split / base - math.sqrt(n)) < 1e-6

    # Tests that H_minus couples |up, zeta n-1> to |down, zeta n> at sqrt(n) Omega.
    @pytest.mark.parametrize("n", [1, 2, 5])
    def test_minus_splittings(self, n):
        space = FockSpace(128)
        zeta = SqueezeParams(1.0, 0.7)
        K, _ = engineered_lowering(zeta, 0j, space)
        h = engineered("minus", DriveParams(2.0, 0.3), K)
        split = block_splitting(h, composite(zeta, n - 1, space, UP),
                                composite(zeta, n, space, DOWN))
        assert split == pytest.approx(2.0 * math.sqrt(n), abs=1e-6)

    # Tests that the Jaynes-Cummings drive reproduces the Fock-basis sqrt(n) law.
    def test_jaynes_cummings(self):
        space = FockSpace(16)
        h = jaynes_cummings(DriveParams(1.0), space)
        down3 = spin_state(basis(space, 3), space, DOWN).amplitudes
        up2 = spin_state(basis(space, 2), space, UP).amplitudes
        assert block_splitting(h, down3, up2) == pytest.approx(math.sqrt(3))

    # Tests that the carrier flips the spin without touching the oscillator.
    def test_carrier(self):
        space = FockSpace(8)
        h = carrier(DriveParams(3.0), space)
        down = spin_state(basis(space, 4), space, DOWN).amplitudes
        up = spin_state(basis(space, 4), space, UP).amplitudes
        assert block_splitting(h, down, up) == pytest.approx(3.0)

    # Tests that an unknown sign is rejected.
    def test_bad_sign(self):
        K, _ = engineered_lowering(SqueezeParams(0.0), 0j, FockSpace(4))
        with pytest.raises(ValidationError, match="sign"):
            engineered("sideways", DriveParams(1.0), K)


class TestBichromatic:
    # Tests that a linear bichromatic drive equals H_minus with the derived squeezing.
    def test_equivalent_to_h_minus(self):
        space = FockSpace(64)
        red = DriveParams(1.0, 0.2)
        blue = DriveParams(math.tanh(0.5), 0.9)
        h = bichromatic(red, blue, LambDicke(0.05), "linear", space)
        drive, zeta = bichromatic_equivalent(red, blue)
        assert zeta.r == pytest.approx(0.5)
        assert zeta.phi == pytest.approx(0.7)
        assert drive.omega == pytest.approx(1.0 / math.cosh(0.5))
        K, _ = engineered_lowering(zeta, 0j, space)
        np.testing.assert_allclose(h.matrix, engineered("minus", drive, K).matrix, atol=1e-12)

    # Tests that Omega_b >= Omega_r raises RatioError.
    def test_ratio_error(self):
        with pytest.raises(RatioError):
            bichromatic(DriveParams(1.0), DriveParams(1.5), LambDicke(0.05), "linear",
                        FockSpace(8))

    # Tests that sidebands reject unknown kinds.
    def test_sideband_kind(self):
        with pytest.raises(ValidationError, match="red"):
            sideband("green", DriveParams(1.0), LambDicke(0.0), "linear", FockSpace(4))


class TestLambDicke:
    # Tests that Fock-basis elements match the Laguerre closed form.
    @pytest.mark.parametrize("n", range(11))
    def test_fock_elements(self, n):
        eta = 0.05
        expected = math.exp(-eta ** 2 / 2) * genlaguerre(n, 1)(eta ** 2) / math.sqrt(n + 1)
        got = sideband_matrix_element("fock", n, LambDicke(eta), FockSpace(64))
        assert got == pytest.approx(expected, abs=1e-9)

    # Tests that squeezing enlarges the Lamb-Dicke correction at every level.
    @pytest.mark.parametrize("n", range(1, 8))
    def test_squeezed_correction_larger(self, n):
        space = FockSpace(128)
        eta = LambDicke(0.05)
        fock = sideband_matrix_element("fock", n, eta, space)
        squeezed = sideband_matrix_element(SqueezeParams(1.0), n, eta, space)
        assert abs(math.sqrt(n + 1) - squeezed) > abs(math.sqrt(n + 1) - fock)

    # Tests that the squeezed correction is cosh(2r) times the Fock one to leading order.
    def test_squeezed_correction_scale(self):
        space = FockSpace(128)
        eta = LambDicke(0.02)
        fock = sideband_matrix_element("fock", 0, eta, space)
        squeezed = sideband_matrix_element(SqueezeParams(1.0), 0, eta, space)
        ratio = (1 - squeezed) / (1 - fock)
        assert ratio == pytest.approx(math.cosh(2.0), rel=0.05)

    # Tests that zero squeezing reproduces the Fock-basis elements.
    def test_zero_squeezing_matches_fock(self):
        space = FockSpace(32)
        eta = LambDicke(0.1)
        for n in range(5):
            assert sideband_matrix_element(SqueezeParams(0.0), n, eta, space) == pytest.approx(
                sideband_matrix_element("fock", n, eta, space), abs=1e-12)

    # Tests that elements near the top of a small truncation are still exact.
    def test_independent_of_truncation(self):
        eta = LambDicke(0.05)
        assert sideband_matrix_element("fock", 14, eta, FockSpace(16)) == pytest.approx(
            sideband_matrix_element("fock", 14, eta, FockSpace(64)), abs=1e-12)

    # Tests that squeezed elements past the caller's truncation use a padded space.
    @pytest.mark.parametrize("n", [6, 7])
    def test_squeezed_element_padded(self, n):
        eta = LambDicke(0.05)
        zeta = SqueezeParams(1.0)
        small = sideband_matrix_element(zeta, n, eta, FockSpace(128))
        large = sideband_matrix_element(zeta, n, eta, FockSpace(384))
        assert small == pytest.approx(large, abs=1e-9)
        assert small < math.sqrt(n + 1)

    # Tests that the whole design range r <= 1.2, n <= 8 is reachable.
    def test_design_range(self):
        value = sideband_matrix_element(SqueezeParams(1.2), 8, LambDicke(0.0), FockSpace(64))
        assert value == pytest.approx(3.0, abs=1e-6)

    # Tests that a level beyond every allowed truncation raises TruncationError.
    def test_unresolvable_level(self):
        with pytest.raises(TruncationError):
            sideband_matrix_element(SqueezeParams(1.0), 1500, LambDicke(0.05), FockSpace(16))

    # Tests that sideband factors reduce to sqrt(k+1) at eta = 0.
    def test_factors_eta_zero(self):
        np.testing.assert_allclose(sideband_factors(LambDicke(0.0), 3),
                                   np.sqrt([1, 2, 3, 4]))

    # Tests that the all-orders ladder uses the corrected coupling.
    def test_all_orders_rabi_frequency(self):
        config = ExperimentConfig(space=FockSpace(128), squeeze=SqueezeParams(1.0),
                                  lamb_dicke=LambDicke(0.05), ld_order=ALL_ORDERS)
        linear = ExperimentConfig(space=FockSpace(128), squeeze=SqueezeParams(1.0))
        assert transition_rabi_frequency(1.0, 2, linear) == pytest.approx(math.sqrt(3))
        assert transition_rabi_frequency(1.0, 2, config) < math.sqrt(3)
        K = ladder_lowering(config)
        assert K.matrix.shape == (128, 128)


class TestDetuning:
    # Tests that the squeezed form of delta a+a agrees with the number operator.
    @pytest.mark.parametrize("r", [0.3, 0.7, 1.0])
    def test_identity(self, r):
        space = FockSpace(80)
        zeta = SqueezeParams(r, 0.4)
        K, _ = engineered_lowering(zeta, 0j, space)
        plain = detuning_term(1.0, space).matrix
        squeezed = detuning_squeezed_form(1.0, zeta, K, space).matrix
        n = space.interior
        assert np.max(np.abs(squeezed[:n, :n] - plain[:n, :n])) < 1e-8

    # Tests that the detuning term is diagonal with delta * n entries.
    def test_detuning_diagonal(self):
        space = FockSpace(4)
        h = detuning_term(2.0, space)
        np.testing.assert_allclose(np.diagonal(h.matrix).real, [0, 2, 4, 6, 0, 2, 4, 6])
