"""Spin-oscillator Hamiltonians in the interaction picture (hbar = 1, rad/s).

All drive terms attach their phase to sigma_+:
    H = (Omega / 2) (X sigma_+ e^{i phase} + h.c.)
with X = a (red sideband), a+ (blue sideband), K (H_minus), K+ (H_plus) or
the identity (carrier).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Literal, Union

import numpy as np
from scipy.linalg import eigvalsh, expm

from squeezed_ladder.exceptions import RatioError, TruncationError, ValidationError
from squeezed_ladder.hilbert import (
    DEFAULT_DIM,
    SIGMA_PLUS,
    TOL,
    BogoliubovParams,
    ComplexArray,
    FockSpace,
    OscillatorOperator,
    SqueezeParams,
    bogoliubov_operator,
    embed,
    engineered_lowering,
    make_destroy,
    make_number,
    squeezed_basis,
)

LINEAR = "linear"
ALL_ORDERS = "all_orders"
LD_ORDERS = (LINEAR, ALL_ORDERS)
MAX_PADDED_DIM = 1024

LdOrder = Literal["linear", "all_orders"]
Basis = Union[Literal["fock"], SqueezeParams]


@dataclass(frozen=True)
class DriveParams:
    omega: float
    phase: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.omega) or self.omega < 0:
            raise ValidationError(f"Drive Rabi frequency must be >= 0, got {self.omega}")


@dataclass(frozen=True)
class LambDicke:
    eta: float = 0.0

    def __post_init__(self) -> None:
        if not 0 <= self.eta < 1:
            raise ValidationError(f"Lamb-Dicke parameter must lie in [0, 1), got {self.eta}")


@dataclass(frozen=True)
class NoiseParams:
    """Trap detuning and motional reservoir rates, all in rad/s."""

    delta: float = 0.0
    gamma_amp: float = 0.0
    gamma_phase: float = 0.0

    def __post_init__(self) -> None:
        if self.gamma_amp < 0 or self.gamma_phase < 0:
            raise ValidationError("Reservoir rates must be >= 0")

    @property
    def is_closed(self) -> bool:
        return self.gamma_amp == 0 and self.gamma_phase == 0


@dataclass(frozen=True)
class ExperimentConfig:
    """Physical setup shared by every pulse of a schedule.

    trap_frequency is metadata only: simulations run in the interaction frame.
    omega_red/omega_blue drive the physical bichromatic pulse; zero means
    "derive from omega_minus and the squeezing".
    """

    space: FockSpace = field(default_factory=lambda: FockSpace(DEFAULT_DIM))
    squeeze: SqueezeParams = field(default_factory=SqueezeParams)
    lamb_dicke: LambDicke = field(default_factory=LambDicke)
    trap_frequency: float = 0.0
    omega_plus: float = 0.0
    omega_minus: float = 0.0
    omega_carrier: float = 0.0
    omega_red: float = 0.0
    omega_blue: float = 0.0
    alpha: complex = 0j
    ld_order: str = LINEAR

    def __post_init__(self) -> None:
        if self.ld_order not in LD_ORDERS:
            raise ValidationError(f"ld_order must be one of {LD_ORDERS}, got {self.ld_order!r}")
        for name in ("omega_plus", "omega_minus", "omega_carrier", "omega_red", "omega_blue"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")
        if self.omega_blue and self.omega_blue >= self.omega_red:
            raise RatioError(
                f"Bichromatic drive needs Omega_b < Omega_r "
                f"(got {self.omega_blue:.6g} >= {self.omega_red:.6g} rad/s)"
            )


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    matrix: ComplexArray
    space: FockSpace
    label: str = ""

    def __post_init__(self) -> None:
        d = 2 * self.space.dim
        if self.matrix.shape != (d, d):
            raise ValidationError(f"Hamiltonian shape {self.matrix.shape} is not {d}x{d}")
        scale = max(1.0, float(np.max(np.abs(self.matrix))))
        if np.max(np.abs(self.matrix - self.matrix.conj().T)) > TOL * scale:
            raise ValidationError(f"Hamiltonian {self.label!r} is not Hermitian")

    def __add__(self, other: Hamiltonian) -> Hamiltonian:
        self.space.require_same(other.space)
        label = " + ".join(x for x in (self.label, other.label) if x)
        return Hamiltonian(self.matrix + other.matrix, self.space, label)

    @classmethod
    def zero(cls, space: FockSpace) -> Hamiltonian:
        return cls(np.zeros((2 * space.dim, 2 * space.dim), dtype=complex), space, "zero")


def _spin_flip_term(omega: float, phase: float, x: ComplexArray, label: str,
                    space: FockSpace) -> Hamiltonian:
    half = embed(x, SIGMA_PLUS) * (0.5 * omega * cmath.exp(1j * phase))
    return Hamiltonian(half + half.conj().T, space, label)


def jaynes_cummings(drive: DriveParams, space: FockSpace) -> Hamiltonian:
    """(Omega/2)(a+ sigma_- e^{i phi} + h.c.): |down, n> <-> |up, n-1> at sqrt(n) Omega."""
    a = make_destroy(space).matrix
    # a+ sigma_- e^{i phi} + h.c. = a sigma_+ e^{-i phi} + h.c.
    return _spin_flip_term(drive.omega, -drive.phase, a, "jaynes-cummings", space)


def carrier(drive: DriveParams, space: FockSpace) -> Hamiltonian:
    return _spin_flip_term(drive.omega, drive.phase, np.eye(space.dim, dtype=complex),
                           "carrier", space)


def engineered(sign: str, drive: DriveParams, K: OscillatorOperator) -> Hamiltonian:
    """H_minus = (Omega/2)(K sigma_+ e^{i phi} + h.c.), H_plus uses K+ instead of K."""
    if sign == "minus":
        x = K.matrix
    elif sign == "plus":
        x = K.matrix.conj().T
    else:
        raise ValidationError(f"sign must be 'plus' or 'minus', got {sign!r}")
    return _spin_flip_term(drive.omega, drive.phase, x, f"H_{sign}", K.space)


# --- Lamb-Dicke corrections ------------------------------------------------

def ld_lowering(eta: LambDicke, space: FockSpace) -> OscillatorOperator:
    """Resonant first-sideband part of exp(i eta (a + a+)), scaled by 1/(i eta).

    Elements <n|A|n+1> reduce to sqrt(n+1) as eta -> 0, so A replaces a in the
    sideband couplings when Lamb-Dicke effects are kept to all orders. The
    exponential is taken on a doubled space so every retained element is exact.
    """
    if eta.eta == 0:
        return make_destroy(space)
    big = make_destroy(FockSpace(2 * space.dim)).matrix
    full = expm(1j * eta.eta * (big + big.conj().T))
    upper = np.diagonal(full, offset=1)[:space.dim - 1] / (1j * eta.eta)
    return OscillatorOperator(np.diag(upper, k=1), space)


def sideband_lowering(order: str, eta: LambDicke, space: FockSpace) -> OscillatorOperator:
    if order == LINEAR:
        return make_destroy(space)
    if order == ALL_ORDERS:
        return ld_lowering(eta, space)
    raise ValidationError(f"ld_order must be one of {LD_ORDERS}, got {order!r}")


def ladder_lowering(config: ExperimentConfig) -> OscillatorOperator:
    """K of the configured squeezed ladder, with the configured Lamb-Dicke order.

    The all-orders variant restricts the coupling to the first sideband in the
    Fock basis first and applies the Bogoliubov map afterwards.
    """
    K, params = engineered_lowering(config.squeeze, config.alpha, config.space)
    if config.ld_order == LINEAR:
        return K
    return bogoliubov_operator(params, ld_lowering(config.lamb_dicke, config.space))


def sideband(kind: str, drive: DriveParams, eta: LambDicke, ld_order: str,
             space: FockSpace) -> Hamiltonian:
    """Single red or blue sideband drive."""
    a = sideband_lowering(ld_order, eta, space).matrix
    if kind == "red":
        return _spin_flip_term(drive.omega, drive.phase, a, "red", space)
    if kind == "blue":
        return _spin_flip_term(drive.omega, drive.phase, a.conj().T, "blue", space)
    raise ValidationError(f"sideband kind must be 'red' or 'blue', got {kind!r}")


def bichromatic(omega_r: DriveParams, omega_b: DriveParams, eta: LambDicke, ld_order: str,
                space: FockSpace) -> Hamiltonian:
    """Simultaneous red and blue sideband drives.

    In linear mode this equals H_minus with Omega_minus = Omega_r / cosh r,
    r = artanh(Omega_b / Omega_r) and phi_s = phi_b - phi_r.

    Raises:
        RatioError: When Omega_b >= Omega_r.
    """
    if omega_b.omega >= omega_r.omega:
        raise RatioError(
            f"Bichromatic drive needs Omega_b < Omega_r "
            f"(got {omega_b.omega:.6g} >= {omega_r.omega:.6g} rad/s)"
        )
    h = sideband("red", omega_r, eta, ld_order, space) + \
        sideband("blue", omega_b, eta, ld_order, space)
    return Hamiltonian(h.matrix, space, "bichromatic")


def bichromatic_equivalent(omega_r: DriveParams, omega_b: DriveParams) -> tuple[DriveParams, SqueezeParams]:
    """(H_minus drive, squeezing) reproduced by a linear bichromatic drive."""
    ratio = omega_b.omega / omega_r.omega
    zeta = SqueezeParams.from_ratio(ratio, omega_b.phase - omega_r.phase)
    return DriveParams(omega_r.omega / math.cosh(zeta.r), omega_r.phase), zeta


# --- detuning --------------------------------------------------------------

def detuning_term(delta: float, space: FockSpace) -> Hamiltonian:
    """delta a+ a on the oscillator, identity on the spin."""
    return Hamiltonian(embed(make_number(space).matrix * delta), space, "detuning")


def detuning_squeezed_form(delta: float, zeta: SqueezeParams, K: OscillatorOperator,
                           space: FockSpace) -> Hamiltonian:
    """delta a+ a rewritten through the squeezed-ladder operator K.

    delta a+ a = delta (cosh 2r K+K + sinh^2 r)
                 - delta (sinh 2r / 2)(e^{i phi} K+^2 + e^{-i phi} K^2)
    Agrees with detuning_term on the interior block; the top rows differ
    because products of truncated K matrices lose the highest level.
    """
    space.require_same(K.space)
    k = K.matrix
    kd = k.conj().T
    r, phi = zeta.r, zeta.phi
    osc = (math.cosh(2 * r) * (kd @ k) + math.sinh(r) ** 2 * np.eye(space.dim)
           - 0.5 * math.sinh(2 * r) * (cmath.exp(1j * phi) * (kd @ kd)
                                       + cmath.exp(-1j * phi) * (k @ k)))
    osc = 0.5 * (osc + osc.conj().T)
    return Hamiltonian(embed(osc * delta), space, "detuning (squeezed form)")


# --- matrix elements and Rabi frequencies ----------------------------------

def _resolving_space(zeta: SqueezeParams, n: int,
                     space: FockSpace) -> tuple[FockSpace, ComplexArray]:
    """Smallest doubling of ``space`` that holds |zeta, 0..n> inside its interior."""
    dim = max(space.dim, 16)
    while True:
        padded = FockSpace(dim)
        if n < padded.interior:
            try:
                return padded, squeezed_basis(zeta, padded, n)
            except TruncationError:
                if 2 * dim > MAX_PADDED_DIM:
                    raise
        elif 2 * dim > MAX_PADDED_DIM:
            raise TruncationError(
                f"Level {n} does not fit below dim={MAX_PADDED_DIM}",
                detail={"dim": float(MAX_PADDED_DIM)},
            )
        dim *= 2


def sideband_matrix_element(basis: Basis, n: int, eta: LambDicke, space: FockSpace) -> float:
    """|<basis, n+1| A+ |basis, n>| for the all-orders sideband coupling A.

    In the squeezed basis A+ is first mapped through the Bogoliubov transform
    of the basis, then sandwiched between squeezed Fock states. Tends to
    sqrt(n+1) as eta -> 0 in either basis.

    ``space`` is the smallest truncation used; the element is evaluated on a
    padded space that resolves both states, so it does not depend on the
    caller's dim.

    Raises:
        TruncationError: When |zeta, n+1> is not resolved below MAX_PADDED_DIM.
    """
    if n < 0:
        raise ValidationError(f"Level must be >= 0, got {n}")
    if isinstance(basis, str):
        if basis != "fock":
            raise ValidationError(f"basis must be 'fock' or SqueezeParams, got {basis!r}")
        A = ld_lowering(eta, FockSpace(max(16, 2 * (n + 2))))
        return float(abs(A.matrix[n, n + 1]))
    padded, columns = _resolving_space(basis, n + 1, space)
    params = BogoliubovParams(math.cosh(basis.r), cmath.exp(1j * basis.phi) * math.sinh(basis.r))
    K = bogoliubov_operator(params, ld_lowering(eta, padded))
    return float(abs(np.vdot(columns[:, n + 1], K.matrix.conj().T @ columns[:, n])))


def sideband_factors(eta: LambDicke, k_max: int) -> np.ndarray:
    """Fock-basis sideband factors for transitions k <-> k+1, k = 0..k_max."""
    if eta.eta == 0:
        return np.sqrt(np.arange(1, k_max + 2, dtype=float))
    space = FockSpace(max(16, 2 * (k_max + 2)))
    return np.abs(np.diagonal(ld_lowering(eta, space).matrix, offset=1)[:k_max + 1])


def transition_rabi_frequency(omega: float, n: int, config: ExperimentConfig) -> float:
    """Rabi frequency of the |zeta, n> <-> |zeta, n+1> transition under the simulated model."""
    if config.ld_order == LINEAR:
        return omega * math.sqrt(n + 1)
    return omega * sideband_matrix_element(config.squeeze, n, config.lamb_dicke, config.space)


def block_splitting(H: Hamiltonian, first: ComplexArray, second: ComplexArray) -> float:
    """Eigen-splitting of H restricted to span{first, second} (composite vectors).

    For a resonant two-level block this is the Rabi frequency of the transition.
    """
    vecs = np.stack([first, second], axis=1)
    block = vecs.conj().T @ H.matrix @ vecs
    block = 0.5 * (block + block.conj().T)
    evals = eigvalsh(block)
    return float(evals[1] - evals[0])
