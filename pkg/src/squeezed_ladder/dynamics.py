"""Closed and open time evolution of the spin-oscillator system.

Closed evolution diagonalizes the (piecewise constant) Hamiltonian once and
is exact at every sample. Open evolution builds the sparse Liouvillian of
the segment once and applies its exponential to the row-major flattened
density matrix over the sample grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import sparse
from scipy.linalg import eigh, eigvalsh
from scipy.sparse.linalg import expm_multiply

from squeezed_ladder.exceptions import DimensionMismatchError, IntegrationError, ValidationError
from squeezed_ladder.hamiltonians import Hamiltonian, NoiseParams
from squeezed_ladder.hilbert import (
    DOWN,
    TOL,
    UP,
    ComplexArray,
    FockSpace,
    OscillatorOperator,
    SpinOscState,
    embed,
    make_destroy,
    make_number,
)

INTEG_TOL = 1e-8
POSITIVITY_TOL = 100 * INTEG_TOL
# entries below this fraction of the largest one are dropped from sparse operators
SPARSE_CUTOFF = 1e-15


@dataclass(frozen=True, eq=False)
class SpinOscDensity:
    """Spin-oscillator density matrix, down block first.

    Trace and Hermiticity are checked on construction; positivity is
    monitored by the integrator instead (see evolve_lindblad).
    """

    matrix: ComplexArray
    space: FockSpace

    def __post_init__(self) -> None:
        d = 2 * self.space.dim
        if self.matrix.shape != (d, d):
            raise DimensionMismatchError(
                f"Density shape {self.matrix.shape} does not match {d}x{d}"
            )
        trace = np.trace(self.matrix)
        if abs(trace - 1) > max(TOL, INTEG_TOL):
            raise ValidationError(f"Density trace is {trace.real:.12g}, expected 1")
        if np.max(np.abs(self.matrix - self.matrix.conj().T)) > max(TOL, INTEG_TOL):
            raise ValidationError("Density matrix is not Hermitian")

    @classmethod
    def from_state(cls, psi: SpinOscState) -> SpinOscDensity:
        return cls(np.outer(psi.amplitudes, psi.amplitudes.conj()), psi.space)

    @classmethod
    def product(cls, spin: int, oscillator: ComplexArray, space: FockSpace) -> SpinOscDensity:
        """|spin><spin| (x) rho_osc."""
        proj = np.zeros((2, 2), dtype=complex)
        proj[spin, spin] = 1.0
        return cls(np.kron(proj, oscillator), space)

    def spin_block(self, row: int, col: int) -> ComplexArray:
        d = self.space.dim
        return self.matrix[row * d:(row + 1) * d, col * d:(col + 1) * d]

    @property
    def p_down(self) -> float:
        return float(np.trace(self.spin_block(DOWN, DOWN)).real)

    def oscillator_density(self) -> ComplexArray:
        return self.spin_block(DOWN, DOWN) + self.spin_block(UP, UP)

    def min_eigenvalue(self) -> float:
        return float(eigvalsh(self.matrix)[0])


State = Union[SpinOscState, SpinOscDensity]


@dataclass(frozen=True)
class Jump:
    """Collapse operator sqrt(rate) * operator acting on the oscillator."""

    rate: float
    operator: OscillatorOperator
    label: str = ""

    def __post_init__(self) -> None:
        if self.rate < 0:
            raise ValidationError(f"Jump rate must be >= 0, got {self.rate}")


@dataclass
class Trajectory:
    times: np.ndarray
    states: list[State]
    records: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.times) != len(self.states):
            raise ValidationError("Trajectory needs one state per time")
        if np.any(np.diff(self.times) <= 0):
            raise ValidationError("Trajectory times must be strictly increasing")

    @property
    def final(self) -> State:
        return self.states[-1]


def sample_times(duration: float, sample_count: int) -> np.ndarray:
    if duration < 0:
        raise ValidationError(f"Duration must be >= 0, got {duration}")
    if sample_count < 1:
        raise ValidationError(f"sample_count must be >= 1, got {sample_count}")
    if sample_count == 1 or duration == 0:
        return np.array([float(duration)])
    return np.linspace(0.0, duration, sample_count)


def reservoir_jumps(noise: NoiseParams, space: FockSpace) -> list[Jump]:
    """Heating/cooling pair sqrt(G_A) a+, sqrt(G_A) a and dephasing sqrt(G_Ph) a+ a."""
    a = make_destroy(space)
    jumps = []
    if noise.gamma_amp > 0:
        jumps.append(Jump(noise.gamma_amp, a.dag(), "amplitude+"))
        jumps.append(Jump(noise.gamma_amp, a, "amplitude-"))
    if noise.gamma_phase > 0:
        jumps.append(Jump(noise.gamma_phase, make_number(space), "phase"))
    return jumps


def _records(states: list[State]) -> dict[str, np.ndarray]:
    n_op = np.arange(states[0].space.dim, dtype=float)
    p_down = np.array([s.p_down for s in states])
    mean_n = np.array([float(np.dot(n_op, np.diagonal(s.oscillator_density()).real))
                       for s in states])
    return {"p_down": p_down, "mean_n": mean_n}


def evolve_unitary(H: Hamiltonian, psi0: SpinOscState, duration: float,
                   sample_count: int = 2) -> Trajectory:
    """psi(t) = exp(-i H t) psi0 sampled on an even grid over [0, duration]."""
    H.space.require_same(psi0.space)
    times = sample_times(duration, sample_count)
    evals, evecs = eigh(H.matrix)
    coeffs = evecs.conj().T @ psi0.amplitudes
    phases = np.exp(-1j * np.outer(times, evals))
    amplitudes = (phases * coeffs) @ evecs.T
    states: list[State] = []
    for t, amp in zip(times, amplitudes):
        norm = float(np.linalg.norm(amp))
        if abs(norm - 1) > TOL:
            raise IntegrationError(
                f"Norm drifted to {norm:.12g} at t = {t:.6g} s",
                detail={"norm_error": abs(norm - 1)},
            )
        states.append(SpinOscState(np.ascontiguousarray(amp), psi0.space))
    return Trajectory(times, states, _records(states))


def _sparse(matrix: ComplexArray) -> sparse.csr_matrix:
    scale = float(np.max(np.abs(matrix))) if matrix.size else 0.0
    pruned = np.where(np.abs(matrix) > SPARSE_CUTOFF * scale, matrix, 0)
    return sparse.csr_matrix(pruned, dtype=complex)


def liouvillian(H: Hamiltonian, jumps: list[Jump]) -> sparse.csr_matrix:
    """Generator of d vec(rho)/dt for the row-major vec(rho).

    Uses vec(A rho B) = (A (x) B^T) vec(rho), so
    -i[H, rho]   -> -i (H (x) 1 - 1 (x) H^T)
    L rho L+     -> L (x) L*
    {L+L, rho}/2 -> (L+L (x) 1 + 1 (x) (L+L)^T) / 2
    """
    d = H.matrix.shape[0]
    eye = sparse.identity(d, dtype=complex, format="csr")
    h = _sparse(H.matrix)
    generator = -1j * (sparse.kron(h, eye, format="csr") - sparse.kron(eye, h.T, format="csr"))
    for jump in jumps:
        H.space.require_same(jump.operator.space)
        if jump.rate == 0:
            continue
        l = _sparse(embed(jump.operator)) * math.sqrt(jump.rate)
        ldl = (l.conj().T @ l).tocsr()
        generator = generator + sparse.kron(l, l.conj(), format="csr") - 0.5 * (
            sparse.kron(ldl, eye, format="csr") + sparse.kron(eye, ldl.T, format="csr")
        )
    return sparse.csr_matrix(generator)


def evolve_lindblad(H: Hamiltonian, jumps: list[Jump], rho0: SpinOscDensity, duration: float,
                    sample_count: int = 2, integ_tol: float = INTEG_TOL) -> Trajectory:
    """Propagate d rho/dt = -i[H, rho] + sum_j (L rho L+ - {L+L, rho}/2).

    The segment is time independent, so rho(t) = exp(L t) rho0 is applied
    with expm_multiply on the even sample grid.

    Raises:
        IntegrationError: When rho loses trace or positivity.
    """
    H.space.require_same(rho0.space)
    for jump in jumps:
        H.space.require_same(jump.operator.space)
    times = sample_times(duration, sample_count)
    d = 2 * rho0.space.dim

    if duration == 0:
        return Trajectory(times, [rho0], _records([rho0]))

    generator = liouvillian(H, jumps)
    y0 = np.ascontiguousarray(rho0.matrix).ravel()
    if len(times) == 1:
        ys = expm_multiply(generator * float(times[0]), y0)[np.newaxis, :]
    else:
        ys = expm_multiply(generator, y0, start=0.0, stop=float(times[-1]),
                           num=len(times), endpoint=True)
    if not np.all(np.isfinite(ys)):
        raise IntegrationError("Master-equation propagation produced non-finite values")

    states: list[State] = []
    for y in ys:
        rho = y.reshape(d, d)
        rho = 0.5 * (rho + rho.conj().T)
        trace = np.trace(rho).real
        if abs(trace - 1) > integ_tol:
            raise IntegrationError(
                f"Trace drifted to {trace:.12g}", detail={"trace_error": abs(trace - 1)},
            )
        density = SpinOscDensity(rho, rho0.space)
        lowest = density.min_eigenvalue()
        if lowest < -POSITIVITY_TOL:
            raise IntegrationError(
                f"Density lost positivity (min eigenvalue {lowest:.3g})",
                detail={"min_eigenvalue": lowest},
            )
        states.append(density)
    return Trajectory(times, states, _records(states))


def spin_repump(rho: SpinOscDensity) -> SpinOscDensity:
    """Pump the spin to down incoherently, keeping the motional state."""
    return SpinOscDensity.product(DOWN, rho.oscillator_density(), rho.space)


def energy(H: Hamiltonian, state: State) -> float:
    if isinstance(state, SpinOscState):
        return float(np.vdot(state.amplitudes, H.matrix @ state.amplitudes).real)
    return float(np.trace(H.matrix @ state.matrix).real)
