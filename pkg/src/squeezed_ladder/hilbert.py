"""Truncated Fock-space operators and states on the spin-oscillator system.

Conventions:
    - Spin index is outermost: composite index = spin * dim + n, with the
      down block (spin 0) first and the up block (spin 1) second.
    - Squeeze operator S(zeta) = exp[(zeta* a^2 - zeta a+^2) / 2], which gives
      S a S+ = cosh(r) a + e^{i phi} sinh(r) a+, the lowering operator K of
      the squeezed ladder.
    - The squeezed quadrature of S(zeta)|0> lies at angle phi / 2.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Protocol, Union

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import expm

from squeezed_ladder.exceptions import (
    DimensionMismatchError,
    TruncationError,
    ValidationError,
)

DEFAULT_DIM = 256
TOL = 1e-9
TAIL_TOL = 1e-8
VACUUM_VARIANCE = 0.25

DOWN = 0
UP = 1

ComplexArray = NDArray[np.complex128]
RealArray = NDArray[np.float64]


@dataclass(frozen=True)
class FockSpace:
    """Number states |0> .. |dim-1> of one motional mode."""

    dim: int = DEFAULT_DIM

    def __post_init__(self) -> None:
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValidationError(f"Fock dimension must be an integer >= 2, got {self.dim}")

    @property
    def guard_band(self) -> int:
        return self.dim // 8

    @property
    def interior(self) -> int:
        """Number of leading levels trusted for operator identities."""
        return self.dim - self.guard_band

    def require_same(self, other: FockSpace) -> None:
        if other.dim != self.dim:
            raise DimensionMismatchError(
                f"Fock dimension mismatch: {self.dim} vs {other.dim}"
            )


@dataclass(frozen=True, eq=False)
class OscillatorOperator:
    matrix: ComplexArray
    space: FockSpace
    unitary: bool = False

    def __post_init__(self) -> None:
        if self.matrix.shape != (self.space.dim, self.space.dim):
            raise DimensionMismatchError(
                f"Operator shape {self.matrix.shape} does not match dim {self.space.dim}"
            )

    def dag(self) -> OscillatorOperator:
        return OscillatorOperator(self.matrix.conj().T, self.space, self.unitary)

    def __matmul__(self, other: OscillatorOperator) -> OscillatorOperator:
        self.space.require_same(other.space)
        return OscillatorOperator(
            self.matrix @ other.matrix, self.space, self.unitary and other.unitary,
        )

    def interior_block(self) -> ComplexArray:
        n = self.space.interior
        return self.matrix[:n, :n]

    def interior_unitarity_error(self) -> float:
        """Max-norm of U+U - I on the interior block."""
        n = self.space.interior
        product = self.matrix.conj().T @ self.matrix
        return float(np.max(np.abs(product[:n, :n] - np.eye(n))))


@dataclass(frozen=True)
class SqueezeParams:
    """zeta = r * exp(i phi); phi is wrapped into [0, 2 pi)."""

    r: float = 0.0
    phi: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.r) or self.r < 0:
            raise ValidationError(f"Squeezing magnitude r must be finite and >= 0, got {self.r}")
        if not math.isfinite(self.phi):
            raise ValidationError(f"Squeezing phase must be finite, got {self.phi}")
        object.__setattr__(self, "phi", self.phi % (2 * math.pi))

    @property
    def zeta(self) -> complex:
        return self.r * cmath.exp(1j * self.phi)

    @property
    def squeezed_angle(self) -> float:
        """Quadrature angle with reduced variance."""
        return self.phi / 2

    @classmethod
    def from_ratio(cls, ratio: float, phase: float = 0.0) -> SqueezeParams:
        """Squeezing set by a bichromatic amplitude ratio Omega_b / Omega_r = tanh r."""
        return cls(math.atanh(ratio), phase)


@dataclass(frozen=True)
class BogoliubovParams:
    """K = mu a + nu a+ - alpha."""

    mu: complex
    nu: complex
    alpha: complex = 0j

    def __post_init__(self) -> None:
        norm = abs(self.mu) ** 2 - abs(self.nu) ** 2
        if abs(norm - 1) > TOL * max(1.0, abs(self.mu) ** 2):
            raise ValidationError(
                f"|mu|^2 - |nu|^2 must equal 1 to keep [K, K+] = 1, got {norm:.12g}"
            )


@dataclass(frozen=True, eq=False)
class SpinOscState:
    """Pure spin-oscillator state, down block first."""

    amplitudes: ComplexArray
    space: FockSpace

    def __post_init__(self) -> None:
        if self.amplitudes.shape != (2 * self.space.dim,):
            raise DimensionMismatchError(
                f"State length {self.amplitudes.shape} does not match 2 x {self.space.dim}"
            )
        norm = float(np.linalg.norm(self.amplitudes))
        if abs(norm - 1) > TOL:
            raise ValidationError(f"State is not normalized (norm {norm:.12g})")

    def spin_block(self, spin: int) -> ComplexArray:
        d = self.space.dim
        return self.amplitudes[spin * d:(spin + 1) * d]

    @property
    def p_down(self) -> float:
        return float(np.vdot(self.spin_block(DOWN), self.spin_block(DOWN)).real)

    def oscillator_density(self) -> ComplexArray:
        """Reduced oscillator density matrix (spin traced out)."""
        down, up = self.spin_block(DOWN), self.spin_block(UP)
        return np.outer(down, down.conj()) + np.outer(up, up.conj())


class HasOscillatorDensity(Protocol):
    def oscillator_density(self) -> ComplexArray: ...


OscillatorLike = Union[ComplexArray, RealArray, SpinOscState, HasOscillatorDensity]


# --- operators -------------------------------------------------------------

def make_destroy(space: FockSpace) -> OscillatorOperator:
    """Annihilation operator with <k-1|a|k> = sqrt(k)."""
    diag = np.sqrt(np.arange(1, space.dim, dtype=float))
    return OscillatorOperator(np.diag(diag, k=1).astype(complex), space)


def make_number(space: FockSpace) -> OscillatorOperator:
    return OscillatorOperator(np.diag(np.arange(space.dim, dtype=float)).astype(complex), space)


def make_identity(space: FockSpace) -> OscillatorOperator:
    return OscillatorOperator(np.eye(space.dim, dtype=complex), space, unitary=True)


def _squeeze_generator(zeta: complex, dim: int) -> ComplexArray:
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)
    ad = a.conj().T
    return 0.5 * (np.conj(zeta) * (a @ a) - zeta * (ad @ ad))


def _displace_generator(alpha: complex, dim: int) -> ComplexArray:
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)
    return alpha * a.conj().T - np.conj(alpha) * a


def tail_mass(generator: ComplexArray, column: int, dim: int) -> float:
    """Weight beyond ``dim`` of exp(G)|column>, estimated on a doubled space."""
    padded = expm(generator)[:, column]
    return float(np.sum(np.abs(padded[dim:]) ** 2))


def _check_tail(mass: float, what: str, space: FockSpace) -> None:
    if mass > TAIL_TOL:
        raise TruncationError(
            f"{what} has weight {mass:.3g} beyond dim={space.dim}; increase --dim",
            detail={"tail_mass": mass, "dim": float(space.dim)},
        )


def make_squeeze(zeta: SqueezeParams, space: FockSpace) -> OscillatorOperator:
    """Squeeze unitary S(zeta), exponentiated on the truncated space.

    Raises:
        TruncationError: When S|0> leaks more than TAIL_TOL past the last level.
    """
    if zeta.r == 0:
        return make_identity(space)
    z = zeta.zeta
    _check_tail(tail_mass(_squeeze_generator(z, 2 * space.dim), 0, space.dim),
                "Squeezed vacuum", space)
    return OscillatorOperator(expm(_squeeze_generator(z, space.dim)), space, unitary=True)


def make_displace(alpha: complex, space: FockSpace) -> OscillatorOperator:
    """Displacement unitary D(alpha) = exp(alpha a+ - alpha* a)."""
    if alpha == 0:
        return make_identity(space)
    _check_tail(tail_mass(_displace_generator(alpha, 2 * space.dim), 0, space.dim),
                "Coherent state", space)
    return OscillatorOperator(expm(_displace_generator(alpha, space.dim)), space, unitary=True)


def engineered_lowering(
    zeta: SqueezeParams, alpha: complex, space: FockSpace,
) -> tuple[OscillatorOperator, BogoliubovParams]:
    """Lowering operator K = mu a + nu a+ - alpha of the squeezed (displaced) ladder.

    The matrix is assembled from its Bogoliubov coefficients, so it is exact
    on every row except the truncation edge. It equals S D a D+ S+ with
    D = D(alpha) on the interior block.
    """
    params = BogoliubovParams(
        mu=math.cosh(zeta.r),
        nu=cmath.exp(1j * zeta.phi) * math.sinh(zeta.r),
        alpha=complex(alpha),
    )
    if zeta.r > 0:
        _check_tail(tail_mass(_squeeze_generator(zeta.zeta, 2 * space.dim), 0, space.dim),
                    "Squeezed vacuum", space)
    a = make_destroy(space).matrix
    matrix = params.mu * a + params.nu * a.conj().T - params.alpha * np.eye(space.dim)
    return OscillatorOperator(matrix, space), params


def bogoliubov_operator(params: BogoliubovParams, a: OscillatorOperator) -> OscillatorOperator:
    """mu A + nu A+ - alpha for an arbitrary lowering-type operator A."""
    m = a.matrix
    matrix = params.mu * m + params.nu * m.conj().T - params.alpha * np.eye(a.space.dim)
    return OscillatorOperator(matrix, a.space)


# --- states ----------------------------------------------------------------

def basis(space: FockSpace, n: int) -> ComplexArray:
    if not 0 <= n < space.dim:
        raise ValidationError(f"Fock level {n} outside 0..{space.dim - 1}")
    vec = np.zeros(space.dim, dtype=complex)
    vec[n] = 1.0
    return vec


def squeezed_fock_state(
    zeta: SqueezeParams, n: int, space: FockSpace, alpha: complex = 0j,
) -> ComplexArray:
    """|zeta, n> = S(zeta) D(alpha) |n> as an oscillator vector.

    Raises:
        ValidationError: When n is not a retained level.
        TruncationError: When the state leaks more than TAIL_TOL past the last level.
    """
    basis(space, n)
    return squeezed_basis(zeta, space, n, alpha)[:, n]


def squeezed_basis(
    zeta: SqueezeParams, space: FockSpace, n_max: int, alpha: complex = 0j,
) -> ComplexArray:
    """Columns |zeta, 0> .. |zeta, n_max> with one exponential per call.

    The tail check runs on the highest column, which spreads furthest.
    """
    if not 0 <= n_max < space.dim:
        raise ValidationError(f"Fock level {n_max} outside 0..{space.dim - 1}")
    dim = space.dim
    if zeta.r == 0 and alpha == 0:
        return np.eye(dim, n_max + 1, dtype=complex)

    padded = np.zeros(2 * dim, dtype=complex)
    padded[n_max] = 1.0
    if alpha != 0:
        padded = expm(_displace_generator(alpha, 2 * dim)) @ padded
    if zeta.r > 0:
        padded = expm(_squeeze_generator(zeta.zeta, 2 * dim)) @ padded
    _check_tail(float(np.sum(np.abs(padded[dim:]) ** 2)), f"|zeta, {n_max}>", space)

    unitary = np.eye(dim, dtype=complex)
    if alpha != 0:
        unitary = expm(_displace_generator(alpha, dim))
    if zeta.r > 0:
        unitary = expm(_squeeze_generator(zeta.zeta, dim)) @ unitary
    columns = unitary[:, :n_max + 1]
    return np.asarray(columns / np.linalg.norm(columns, axis=0), dtype=complex)


def spin_state(oscillator: ComplexArray, space: FockSpace, spin: int = DOWN) -> SpinOscState:
    """|spin> (x) |oscillator>."""
    if oscillator.shape != (space.dim,):
        raise DimensionMismatchError(
            f"Oscillator vector length {oscillator.shape} does not match dim {space.dim}"
        )
    amplitudes = np.zeros(2 * space.dim, dtype=complex)
    amplitudes[spin * space.dim:(spin + 1) * space.dim] = oscillator
    return SpinOscState(amplitudes, space)


def thermal_populations(nbar: float, space: FockSpace) -> RealArray:
    """Bose-Einstein distribution over the retained levels (renormalized)."""
    if nbar < 0:
        raise ValidationError(f"Mean occupation must be >= 0, got {nbar}")
    if nbar == 0:
        return np.asarray(basis(space, 0).real)
    k = np.arange(space.dim)
    p = (nbar / (1 + nbar)) ** k / (1 + nbar)
    _check_tail(float(1 - p.sum()), f"Thermal state nbar={nbar}", space)
    return np.asarray(p / p.sum())


def squeezed_thermal_density(zeta: SqueezeParams, nbar: float, space: FockSpace) -> ComplexArray:
    """S rho_th S+ for an imperfectly cooled mode."""
    p = thermal_populations(nbar, space)
    occupied = np.nonzero(p > TAIL_TOL)[0]
    columns = squeezed_basis(zeta, space, int(occupied[-1]))
    weights = p[:columns.shape[1]]
    rho = (columns * weights) @ columns.conj().T
    return np.asarray(rho / np.trace(rho).real)


# --- observables -----------------------------------------------------------

def _oscillator_density(state: OscillatorLike) -> ComplexArray:
    if hasattr(state, "oscillator_density"):
        return state.oscillator_density()
    arr = np.asarray(state)
    if arr.ndim == 1:
        return np.outer(arr, arr.conj())
    return np.asarray(arr, dtype=complex)


def populations(state: OscillatorLike) -> RealArray:
    """Energy-eigenbasis populations p(k) of a vector, density matrix or spin-oscillator state."""
    rho = _oscillator_density(state)
    return np.asarray(np.clip(np.diagonal(rho).real, 0.0, None))


def squeezed_populations(
    state: OscillatorLike, zeta: SqueezeParams, space: FockSpace, n_max: int,
    alpha: complex = 0j,
) -> RealArray:
    """Populations <zeta, m|rho|zeta, m> for m = 0..n_max."""
    rho = _oscillator_density(state)
    columns = squeezed_basis(zeta, space, n_max, alpha)
    return np.asarray(np.einsum("km,kl,lm->m", columns.conj(), rho, columns).real)


def parity(state: OscillatorLike | None = None, *,
           probabilities: RealArray | None = None) -> float:
    """<(-1)^n> of a state, or of an energy-basis ``probabilities`` vector.

    A 1-D ``state`` is always read as amplitudes.
    """
    if (state is None) == (probabilities is None):
        raise ValidationError("parity needs exactly one of state or probabilities")
    p = populations(state) if probabilities is None else np.asarray(probabilities, dtype=float)
    signs = np.where(np.arange(p.shape[0]) % 2 == 0, 1.0, -1.0)
    return float(np.clip(np.dot(signs, p), -1.0, 1.0))


def quadrature_variance(state: OscillatorLike, angle: float) -> float:
    """Variance of x_theta = (a e^{-i theta} + a+ e^{i theta}) / 2; vacuum gives 0.25."""
    rho = _oscillator_density(state)
    dim = rho.shape[0]
    a = make_destroy(FockSpace(dim)).matrix
    x = 0.5 * (a * cmath.exp(-1j * angle) + a.conj().T * cmath.exp(1j * angle))
    mean = np.trace(rho @ x).real
    second = np.trace(rho @ x @ x).real
    return float(second - mean ** 2)


def variance_db(variance: float) -> float:
    """Variance relative to vacuum in dB (negative means squeezed)."""
    return 10 * math.log10(variance / VACUUM_VARIANCE)


def fidelity(state: OscillatorLike | ComplexArray, target: ComplexArray) -> float:
    """|<target|psi>|^2, or <target|rho|target> for densities."""
    if isinstance(state, SpinOscState):
        return float(abs(np.vdot(target, state.amplitudes)) ** 2)
    arr = np.asarray(state)
    if arr.ndim == 1:
        return float(abs(np.vdot(target, arr)) ** 2)
    return float(np.vdot(target, arr @ target).real)


def embed(op: OscillatorOperator | ComplexArray, spin_op: ComplexArray | None = None) -> ComplexArray:
    """spin_op (x) op on the composite space; identity on the spin by default."""
    matrix = op.matrix if isinstance(op, OscillatorOperator) else op
    return np.kron(np.eye(2) if spin_op is None else spin_op, matrix)


# sigma_+ = |up><down| in the (down, up) ordering
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.conj().T
PROJ_DOWN = np.array([[1, 0], [0, 0]], dtype=complex)
PROJ_UP = np.array([[0, 0], [0, 1]], dtype=complex)
