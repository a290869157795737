"""Spin-population signal models, Rabi fits and number-state tomography."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from lmfit import Minimizer, Parameters
from scipy.signal import periodogram

from squeezed_ladder.exceptions import (
    AliasWarning,
    FitError,
    IllConditionedError,
    ValidationError,
)
from squeezed_ladder.hamiltonians import LambDicke, sideband_factors, sideband_matrix_element
from squeezed_ladder.hilbert import DEFAULT_DIM, FockSpace, SqueezeParams

DECAY_KINDS = ("none", "gaussian", "per_level", "exponential")
PER_LEVEL_EXPONENT = 0.7
COND_LIMIT = 1e8
FIT_TOL = 1e-6
MIN_SAMPLES = 8
NYQUIST_MARGIN = 0.9


@dataclass(frozen=True)
class DecayModel:
    """Envelope of each Rabi component.

    gaussian:    exp(-(gamma t)^2), one gamma shared by all levels
    per_level:   exp(-(gamma_k t)^2) with gamma_k = gamma (k+1)^0.7
    exponential: exp(-gamma t)
    """

    kind: str = "gaussian"
    gamma: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in DECAY_KINDS:
            raise ValidationError(f"decay must be one of {DECAY_KINDS}, got {self.kind!r}")
        if self.gamma < 0:
            raise ValidationError(f"Decay rate must be >= 0, got {self.gamma}")

    def envelope(self, times: np.ndarray, k: np.ndarray | int = 0) -> np.ndarray:
        """Envelope values with shape (len(times), len(k))."""
        t = np.asarray(times, dtype=float)
        levels = np.atleast_1d(np.asarray(k, dtype=float))
        if self.kind == "none" or self.gamma == 0:
            return np.ones((len(t), len(levels)))
        if self.kind == "per_level":
            rate = self.gamma * (levels + 1) ** PER_LEVEL_EXPONENT
        else:
            rate = np.full_like(levels, self.gamma)
        if self.kind == "exponential":
            return np.exp(-np.outer(t, rate))
        return np.exp(-np.outer(t, rate) ** 2)

    def with_gamma(self, gamma: float) -> DecayModel:
        return DecayModel(self.kind, gamma)


@dataclass
class RabiFit:
    omega: float
    gamma: float
    contrast: float
    parity_flag: int
    covariance: np.ndarray
    param_names: list[str]
    stderr: dict[str, float] = field(default_factory=dict)
    residual: float = 0.0
    decay: str = "gaussian"

    def __post_init__(self) -> None:
        if self.omega < 0:
            raise ValidationError("Fitted Rabi frequency must be >= 0")
        if not 0 <= self.contrast <= 1:
            raise ValidationError(f"Fitted contrast {self.contrast} outside [0, 1]")

    def as_dict(self) -> dict[str, Any]:
        return {
            "omega": self.omega,
            "gamma": self.gamma,
            "contrast": self.contrast,
            "parity_flag": self.parity_flag,
            "decay": self.decay,
            "residual": self.residual,
            "stderr": self.stderr,
            "param_names": self.param_names,
            "covariance": self.covariance.tolist(),
        }


@dataclass
class PopulationEstimate:
    """Number-state populations p(k), k = 0..k_max, with standard errors."""

    probabilities: np.ndarray
    sigmas: np.ndarray | None = None
    gamma: float = 0.0
    condition: float = 1.0

    def __post_init__(self) -> None:
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        if self.sigmas is None:
            self.sigmas = np.zeros_like(self.probabilities)
        self.sigmas = np.asarray(self.sigmas, dtype=float)
        if self.probabilities.sum() > 1 + FIT_TOL + 3 * self.parity_sigma:
            raise ValidationError(
                f"Populations sum to {self.probabilities.sum():.6g} > 1"
            )

    @property
    def k_max(self) -> int:
        return len(self.probabilities) - 1

    @property
    def parity(self) -> float:
        signs = np.where(np.arange(len(self.probabilities)) % 2 == 0, 1.0, -1.0)
        return float(np.dot(signs, self.probabilities))

    @property
    def parity_sigma(self) -> float:
        assert self.sigmas is not None
        return float(np.sqrt(np.sum(self.sigmas ** 2)))


# --- forward model ---------------------------------------------------------

def sideband_frequencies(omega_b: float, eta: LambDicke, k_max: int) -> np.ndarray:
    """Blue-sideband Rabi frequencies Omega_{k,k+1}, k = 0..k_max."""
    return omega_b * sideband_factors(eta, k_max)


def _bsb_design(times: np.ndarray, freqs: np.ndarray, decay: DecayModel) -> np.ndarray:
    k = np.arange(len(freqs))
    env = decay.envelope(times, k)
    return 0.5 * (1 + env * np.cos(np.outer(times, freqs)))


def bsb_forward(populations: PopulationEstimate, omega_b: float, eta: LambDicke,
                decay_model: DecayModel, times: np.ndarray) -> np.ndarray:
    """P(down, t) = 1/2 sum_k p(k) (1 + envelope_k(t) cos(Omega_{k,k+1} t))."""
    t = np.asarray(times, dtype=float)
    if np.any(t < 0):
        raise ValidationError("Probe times must be >= 0")
    freqs = sideband_frequencies(omega_b, eta, populations.k_max)
    return np.asarray(_bsb_design(t, freqs, decay_model) @ populations.probabilities)


# --- Rabi fit --------------------------------------------------------------

def _rabi_model(params: Parameters, t: np.ndarray, parity_flag: int, decay: str) -> np.ndarray:
    omega = params["omega"].value
    gamma = params["gamma"].value
    contrast = params["contrast"].value
    env = DecayModel(decay, gamma).envelope(t)[:, 0]
    sign = -1.0 if parity_flag else 1.0
    return 0.5 + sign * 0.5 * contrast * env * np.cos(omega * t)


def _rabi_residual(params: Parameters, t: np.ndarray, data: np.ndarray,
                   parity_flag: int, decay: str) -> np.ndarray:
    return _rabi_model(params, t, parity_flag, decay) - data


def dominant_frequency(times: np.ndarray, values: np.ndarray) -> float:
    """Angular frequency of the periodogram peak (DC excluded)."""
    dt = float(times[1] - times[0])
    freqs, power = periodogram(values, fs=1.0 / dt, nfft=8 * len(values), detrend="constant")
    if power[1:].max() <= 1e-20:
        raise FitError("Signal has no oscillating component to fit")
    return float(2 * math.pi * freqs[1 + int(np.argmax(power[1:]))])


def fit_rabi(times: np.ndarray, values: np.ndarray, parity_flag: int = 0,
             decay: str = "gaussian", starts: int = 3, seed: int | None = None) -> RabiFit:
    """Fit P(t) = 1/2 + (-1)^p (C/2) envelope(t) cos(Omega t).

    p = 0 for flopping that starts in the measured state, p = 1 otherwise.
    The frequency is seeded from the periodogram peak and refined by
    Levenberg-Marquardt from a few jittered starts; the lowest chi-square wins.

    Raises:
        FitError: When no start converges or the trace has nothing to fit.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if parity_flag not in (0, 1):
        raise ValidationError(f"parity flag must be 0 or 1, got {parity_flag}")
    if decay not in ("gaussian", "exponential"):
        raise ValidationError(f"Rabi fit decay must be gaussian or exponential, got {decay!r}")
    if len(t) < MIN_SAMPLES or len(t) != len(y):
        raise ValidationError(f"Need at least {MIN_SAMPLES} matching samples, got {len(t)}")
    if np.any(np.diff(t) <= 0):
        raise ValidationError("Sample times must be strictly increasing")

    omega0 = dominant_frequency(t, y)
    span = float(t[-1] - t[0])
    if omega0 * span < 4 * math.pi:
        raise FitError(
            f"Trace spans fewer than two oscillation periods "
            f"(Omega ~ {omega0:.6g} rad/s over {span:.6g} s)"
        )
    contrast0 = float(np.clip(2 * math.sqrt(2) * np.std(y), 0.05, 1.0))

    rng = np.random.default_rng(seed)
    jitters = np.concatenate([[0.0], rng.normal(0.0, 0.01, max(starts - 1, 0))])
    best = None
    for jitter in jitters:
        params = Parameters()
        params.add("omega", value=omega0 * (1 + jitter), min=0)
        params.add("gamma", value=0.1 / span, min=0)
        params.add("contrast", value=contrast0, min=0, max=1)
        minner = Minimizer(_rabi_residual, params, fcn_args=(t, y, parity_flag, decay))
        result = minner.minimize(method="leastsq")
        if result.success and (best is None or result.chisqr < best.chisqr):
            best = result
    if best is None:
        raise FitError("Rabi fit did not converge from any start")

    names = list(best.var_names)
    covar = best.covar if best.covar is not None else np.full((len(names), len(names)), np.nan)
    omega = float(best.params["omega"].value)
    nyquist = math.pi / float(t[1] - t[0])
    if omega > NYQUIST_MARGIN * nyquist:
        warnings.warn(
            f"Fitted Omega {omega:.6g} rad/s is within 10% of the Nyquist limit {nyquist:.6g}",
            AliasWarning, stacklevel=2,
        )
    return RabiFit(
        omega=omega,
        gamma=float(best.params["gamma"].value),
        contrast=float(best.params["contrast"].value),
        parity_flag=parity_flag,
        covariance=np.asarray(covar),
        param_names=names,
        stderr={n: float(best.params[n].stderr) if best.params[n].stderr is not None
                else float("nan") for n in names},
        residual=float(best.chisqr),
        decay=decay,
    )


def fit_fringe(phis: np.ndarray, values: np.ndarray) -> dict[str, float]:
    """Least-squares P(phi) = offset + (C/2) cos(phi - phi0); needs three or more points."""
    phi = np.asarray(phis, dtype=float)
    y = np.asarray(values, dtype=float)
    if len(phi) < 3:
        return {"contrast": float("nan"), "phase_offset": float("nan"), "offset": float("nan")}
    design = np.column_stack([np.ones_like(phi), np.cos(phi), np.sin(phi)])
    (c0, a, b), *_ = np.linalg.lstsq(design, y, rcond=None)
    return {
        "contrast": float(2 * math.hypot(a, b)),
        "phase_offset": float(math.atan2(b, a) % (2 * math.pi)),
        "offset": float(c0),
    }


# --- population extraction -------------------------------------------------

def _solve_linear(design: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    p, *_ = np.linalg.lstsq(design, y, rcond=None)
    rss = float(np.sum((design @ p - y) ** 2))
    return p, rss


def extract_populations(times: np.ndarray, values: np.ndarray, omega_b: float, eta: LambDicke,
                        k_max: int, decay: DecayModel | None = None, fit_decay: bool = True,
                        clip: bool = False, normalize: bool = False) -> PopulationEstimate:
    """Invert a blue-sideband trace into populations p(0..k_max).

    Frequencies are fixed by the sideband matrix elements, so the amplitudes
    p(k) enter linearly; only the decay rate is fitted (variable projection).
    Raw estimates may be slightly negative; ``clip`` and ``normalize`` are opt-in.

    Raises:
        IllConditionedError: When neighboring frequencies cannot be separated
            over the sampled window.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if len(t) != len(y) or len(t) <= k_max + 1:
        raise ValidationError(
            f"Need more than k_max + 1 = {k_max + 1} samples, got {len(t)}"
        )
    decay = decay or DecayModel("gaussian")
    freqs = sideband_frequencies(omega_b, eta, k_max)
    if np.any(np.diff(freqs) <= 0):
        raise IllConditionedError("Sideband frequencies are not distinct")

    condition = float(np.linalg.cond(_bsb_design(t, freqs, decay)))
    if not math.isfinite(condition) or condition > COND_LIMIT:
        raise IllConditionedError(
            f"Cannot separate {k_max + 1} sideband components over t_max = {t[-1]:.6g} s "
            f"(condition number {condition:.3g}); lengthen the probe or lower k_max",
            detail={"condition": condition},
        )

    gamma = decay.gamma
    fitted = 0
    if fit_decay and decay.kind != "none":
        def _residual(params: Parameters) -> np.ndarray:
            design = _bsb_design(t, freqs, decay.with_gamma(params["gamma"].value))
            p, _ = _solve_linear(design, y)
            return design @ p - y

        params = Parameters()
        params.add("gamma", value=decay.gamma, min=0)
        result = Minimizer(_residual, params).minimize(method="leastsq")
        gamma = float(result.params["gamma"].value)
        fitted = 1

    design = _bsb_design(t, freqs, decay.with_gamma(gamma))
    p, rss = _solve_linear(design, y)
    dof = max(len(t) - len(p) - fitted, 1)
    cov = (rss / dof) * np.linalg.pinv(design.T @ design)
    sigmas = np.sqrt(np.clip(np.diagonal(cov), 0.0, None))

    if clip:
        p = np.clip(p, 0.0, None)
    if normalize and p.sum() > 0:
        p = p / p.sum()
    return PopulationEstimate(p, sigmas, gamma=gamma, condition=condition)


# --- Rabi-frequency scaling ------------------------------------------------

def rabi_ratio_table(n_max: int, zeta: SqueezeParams, eta: LambDicke, mode: str = "ld_corrected",
                     space: FockSpace | None = None) -> list[dict[str, float]]:
    """Ratios Omega_{n,n-1} / Omega_{1,0} for n = 1..n_max.

    Each row carries the sqrt(n) reference, the ratio for the requested mode
    and the Fock-basis ratio at the same eta for comparison.
    """
    if mode not in ("sqrt_n", "ld_corrected"):
        raise ValidationError(f"mode must be sqrt_n or ld_corrected, got {mode!r}")
    if n_max < 1:
        raise ValidationError(f"n_max must be >= 1, got {n_max}")
    space = space or FockSpace(DEFAULT_DIM)

    rows = []
    fock0 = sq0 = 1.0
    if mode == "ld_corrected":
        fock0 = sideband_matrix_element("fock", 0, eta, space)
        sq0 = sideband_matrix_element(zeta, 0, eta, space)
    for n in range(1, n_max + 1):
        sqrt_n = math.sqrt(n)
        if mode == "sqrt_n":
            rows.append({"n": n, "sqrt_n": sqrt_n, "ratio": sqrt_n, "fock": sqrt_n})
            continue
        fock = sideband_matrix_element("fock", n - 1, eta, space) / fock0
        squeezed = sideband_matrix_element(zeta, n - 1, eta, space) / sq0
        rows.append({"n": n, "sqrt_n": sqrt_n, "ratio": squeezed, "fock": fock})
    return rows
