"""Pulse schedules: sequence-file parsing and emission, protocol generators, execution.

Sequence files are line oriented (UTF-8, '#' starts a comment)::

    set <key> <value>
    prepare squeezed_vacuum | fock <n> | squeezed_fock <n> | squeezed_thermal <nbar>
    pulse <kind> theta=<expr> [phase=<expr>] [level=<n>]
    pulse <kind> duration=<seconds> [phase=<expr>]
    repump
    probe <plus|minus|blue|red> tmax=<seconds> points=<int>
    scan phase from=<expr> to=<expr> points=<int>

Frequencies in ``set`` lines are in Hz. A pulse given as an angle is converted
to a duration with the Rabi frequency of the transition |level> <-> |level+1>
of the simulated model (level 0 when omitted).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Union

import numpy as np

from squeezed_ladder.config import (
    DEFAULTS,
    canonical,
    coerce_setting,
    experiment_from_settings,
    noise_from_settings,
    settings_from_experiment,
)
from squeezed_ladder.dynamics import (
    SpinOscDensity,
    State,
    evolve_lindblad,
    evolve_unitary,
    reservoir_jumps,
    spin_repump,
)
from squeezed_ladder.exceptions import (
    ModeError,
    ParseError,
    RatioError,
    SqueezedLadderError,
    TruncationError,
    ValidationError,
)
from squeezed_ladder.hamiltonians import (
    ALL_ORDERS,
    DriveParams,
    ExperimentConfig,
    Hamiltonian,
    NoiseParams,
    bichromatic,
    bichromatic_equivalent,
    carrier,
    detuning_term,
    engineered,
    ladder_lowering,
    sideband,
    sideband_matrix_element,
    transition_rabi_frequency,
)
from squeezed_ladder.hilbert import (
    DOWN,
    OscillatorOperator,
    SpinOscState,
    basis,
    spin_state,
    squeezed_fock_state,
    squeezed_thermal_density,
)
from squeezed_ladder.tomography import fit_fringe

PULSE_KINDS = ("carrier", "plus", "minus", "blue", "red", "bichromatic", "wait")
PROBE_KINDS = ("plus", "minus", "blue", "red")
PREP_KINDS = ("squeezed_vacuum", "fock", "squeezed_fock", "squeezed_thermal")
OBSERVABLES = ("P_down", "P_up", "populations_fock", "populations_squeezed", "parity")
MODES = ("unitary", "lindblad")

CHECK = "✓"
CROSS = "✗"
RANGE_TOL = 1e-6

_NUMBER = r"\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
_EXPR_TOKEN = re.compile(rf"\s*(?:(?P<num>{_NUMBER})|(?P<pi>pi)|(?P<op>[*/]))")


# --- schedule types --------------------------------------------------------

@dataclass(frozen=True)
class Pulse:
    kind: str
    theta: float | None = None
    duration: float | None = None
    phase: float = 0.0
    level: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in PULSE_KINDS:
            raise ValidationError(f"Unknown pulse kind {self.kind!r}")
        if (self.theta is None) == (self.duration is None):
            raise ValidationError("Pulse needs exactly one of theta or duration")
        if self.theta is not None and self.theta < 0:
            raise ValidationError(f"Pulse angle must be >= 0, got {self.theta}")
        if self.duration is not None and self.duration < 0:
            raise ValidationError(f"Pulse duration must be >= 0, got {self.duration}")
        if self.kind == "wait" and self.theta is not None:
            raise ValidationError("wait takes a duration, not an angle")
        if self.level is not None and self.level < 0:
            raise ValidationError(f"Pulse level must be >= 0, got {self.level}")


@dataclass(frozen=True)
class Preparation:
    kind: str = "squeezed_vacuum"
    n: int = 0
    nbar: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in PREP_KINDS:
            raise ValidationError(f"Unknown preparation {self.kind!r}")
        if self.n < 0 or self.nbar < 0:
            raise ValidationError("Preparation level and occupation must be >= 0")

    @property
    def is_mixed(self) -> bool:
        return self.kind == "squeezed_thermal"


@dataclass(frozen=True)
class Repump:
    pass


@dataclass(frozen=True)
class Probe:
    kind: str
    tmax: float
    points: int

    def __post_init__(self) -> None:
        if self.kind not in PROBE_KINDS:
            raise ValidationError(f"Probe kind must be one of {PROBE_KINDS}, got {self.kind!r}")
        if self.tmax <= 0 or self.points < 2:
            raise ValidationError("Probe needs tmax > 0 and at least 2 points")


@dataclass(frozen=True)
class Scan:
    start: float
    stop: float
    points: int

    def __post_init__(self) -> None:
        if self.points < 1:
            raise ValidationError("Phase scan needs at least 1 point")

    @property
    def phis(self) -> np.ndarray:
        if self.points == 1:
            return np.array([self.start])
        return np.linspace(self.start, self.stop, self.points)


Directive = Union[Pulse, Repump, Probe, Scan]


@dataclass(frozen=True)
class Schedule:
    """Preparation plus ordered directives; settings are in lab units (Hz)."""

    settings: dict[str, Any] = field(default_factory=dict)
    prep: Preparation | None = None
    steps: tuple[Directive, ...] = ()
    source_lines: tuple[int, ...] = field(default=(), compare=False)

    @property
    def config(self) -> ExperimentConfig:
        return experiment_from_settings(self.settings)

    @property
    def noise(self) -> NoiseParams:
        return noise_from_settings(self.settings)

    @property
    def pulses(self) -> list[Pulse]:
        return [s for s in self.steps if isinstance(s, Pulse)]

    def line_of(self, index: int) -> int | None:
        return self.source_lines[index] if index < len(self.source_lines) else None


@dataclass
class MeasurementRecord:
    observable: str
    times: np.ndarray
    values: np.ndarray
    label: str = ""
    axis: str = "t_seconds"
    extras: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.observable not in OBSERVABLES:
            raise ValidationError(f"Unknown observable {self.observable!r}")
        values = np.asarray(self.values, dtype=float)
        low = -1.0 if self.observable == "parity" else 0.0
        if np.any(values < low - RANGE_TOL) or np.any(values > 1 + RANGE_TOL):
            raise ValidationError(f"{self.observable} values outside [{low:g}, 1]")
        self.values = np.clip(values, low, 1.0)
        self.times = np.asarray(self.times, dtype=float)


# --- parsing ---------------------------------------------------------------

def parse_expr(text: str, line: int | None = None, column: int | None = None) -> float:
    """Evaluate a phase/angle expression: products and quotients of decimals and ``pi``."""
    s = text.strip()
    sign = 1.0
    if s.startswith("-"):
        sign, s = -1.0, s[1:]
    elif s.startswith("+"):
        s = s[1:]
    pos, value, op, expect_term = 0, 1.0, "*", True
    while pos < len(s):
        m = _EXPR_TOKEN.match(s, pos)
        if not m:
            raise ParseError(f"Cannot read expression {text!r}", line, column)
        pos = m.end()
        if m.group("op"):
            if expect_term:
                raise ParseError(f"Misplaced operator in {text!r}", line, column)
            op, expect_term = m.group("op"), True
            continue
        if not expect_term:
            raise ParseError(f"Missing operator in {text!r}", line, column)
        term = math.pi if m.group("pi") else float(m.group("num"))
        if op == "/":
            if term == 0:
                raise ParseError(f"Division by zero in {text!r}", line, column)
            value /= term
        else:
            value *= term
        expect_term = False
    if expect_term:
        raise ParseError(f"Incomplete expression {text!r}", line, column)
    return sign * value


def _tokens(raw: str) -> list[tuple[str, int]]:
    return [(m.group(0), m.start() + 1) for m in re.finditer(r"\S+", raw)]


def _keyword_args(tokens: list[tuple[str, int]], allowed: tuple[str, ...],
                  line: int) -> dict[str, tuple[str, int]]:
    out: dict[str, tuple[str, int]] = {}
    for text, col in tokens:
        if "=" not in text:
            raise ParseError(f"Expected key=value, got {text!r}", line, col)
        key, _, value = text.partition("=")
        key = key.lower()
        if key not in allowed:
            raise ParseError(f"Unknown argument {key!r}; expected {', '.join(allowed)}", line, col)
        if key in out:
            raise ParseError(f"Duplicate argument {key!r}", line, col)
        if not value:
            raise ParseError(f"Missing value for {key!r}", line, col)
        out[key] = (value, col + len(key) + 1)
    return out


def _int_arg(arg: tuple[str, int], line: int) -> int:
    value, col = arg
    try:
        return int(value)
    except ValueError:
        raise ParseError(f"Expected an integer, got {value!r}", line, col)


def _float_arg(arg: tuple[str, int], line: int) -> float:
    value, col = arg
    try:
        return float(value)
    except ValueError:
        raise ParseError(f"Expected a number, got {value!r}", line, col)


def _parse_pulse(tokens: list[tuple[str, int]], line: int) -> Pulse:
    if len(tokens) < 2:
        raise ParseError("pulse needs a kind", line, tokens[0][1] + len(tokens[0][0]))
    kind, kind_col = tokens[1][0].lower(), tokens[1][1]
    if kind not in PULSE_KINDS:
        raise ParseError(f"Unknown pulse kind {kind!r}; expected {', '.join(PULSE_KINDS)}",
                         line, kind_col)
    args = _keyword_args(tokens[2:], ("theta", "duration", "phase", "level"), line)
    if ("theta" in args) == ("duration" in args):
        raise ParseError("pulse needs exactly one of theta= or duration=", line, kind_col)
    theta = parse_expr(args["theta"][0], line, args["theta"][1]) if "theta" in args else None
    duration = _float_arg(args["duration"], line) if "duration" in args else None
    phase = parse_expr(args["phase"][0], line, args["phase"][1]) if "phase" in args else 0.0
    level = _int_arg(args["level"], line) if "level" in args else None
    try:
        return Pulse(kind, theta=theta, duration=duration, phase=phase, level=level)
    except ValidationError as e:
        raise ValidationError(e.message, line, kind_col)


def _parse_prepare(tokens: list[tuple[str, int]], line: int) -> Preparation:
    if len(tokens) < 2:
        raise ParseError("prepare needs a state", line, tokens[0][1] + len(tokens[0][0]))
    kind, col = tokens[1][0].lower(), tokens[1][1]
    if kind not in PREP_KINDS:
        raise ParseError(f"Unknown preparation {kind!r}; expected {', '.join(PREP_KINDS)}",
                         line, col)
    if kind == "squeezed_vacuum":
        if len(tokens) != 2:
            raise ParseError("squeezed_vacuum takes no argument", line, tokens[2][1])
        return Preparation(kind)
    if len(tokens) != 3:
        raise ParseError(f"{kind} takes exactly one argument", line, col)
    if kind == "squeezed_thermal":
        nbar = _float_arg(tokens[2], line)
        if nbar < 0:
            raise ValidationError("Mean occupation must be >= 0", line, tokens[2][1])
        return Preparation(kind, nbar=nbar)
    n = _int_arg(tokens[2], line)
    if n < 0:
        raise ValidationError("Fock level must be >= 0", line, tokens[2][1])
    return Preparation(kind, n=n)


def _parse_probe(tokens: list[tuple[str, int]], line: int) -> Probe:
    if len(tokens) < 2:
        raise ParseError("probe needs a kind", line, tokens[0][1] + len(tokens[0][0]))
    kind, col = tokens[1][0].lower(), tokens[1][1]
    if kind not in PROBE_KINDS:
        raise ParseError(f"Unknown probe kind {kind!r}; expected {', '.join(PROBE_KINDS)}",
                         line, col)
    args = _keyword_args(tokens[2:], ("tmax", "points"), line)
    for key in ("tmax", "points"):
        if key not in args:
            raise ParseError(f"probe needs {key}=", line, col)
    try:
        return Probe(kind, _float_arg(args["tmax"], line), _int_arg(args["points"], line))
    except ValidationError as e:
        raise ValidationError(e.message, line, col)


def _parse_scan(tokens: list[tuple[str, int]], line: int) -> Scan:
    if len(tokens) < 2 or tokens[1][0].lower() != "phase":
        col = tokens[1][1] if len(tokens) > 1 else tokens[0][1]
        raise ParseError("Only 'scan phase' is supported", line, col)
    args = _keyword_args(tokens[2:], ("from", "to", "points"), line)
    for key in ("from", "to", "points"):
        if key not in args:
            raise ParseError(f"scan needs {key}=", line, tokens[1][1])
    try:
        return Scan(parse_expr(args["from"][0], line, args["from"][1]),
                    parse_expr(args["to"][0], line, args["to"][1]),
                    _int_arg(args["points"], line))
    except ValidationError as e:
        raise ValidationError(e.message, line, tokens[1][1])


def parse_sequence(text: str) -> Schedule:
    """Parse and validate a sequence file.

    Raises:
        ParseError: Syntax errors, with line and column.
        ValidationError: Rule violations (missing prepare, level beyond the
            truncation, Omega_b >= Omega_r, ...), with the offending line.
    """
    settings: dict[str, Any] = {}
    setting_lines: dict[str, int] = {}
    prep: Preparation | None = None
    prep_line = 0
    steps: list[Directive] = []
    lines: list[int] = []
    first_step_line: int | None = None

    for lineno, raw in enumerate(text.splitlines(), 1):
        content = raw.split("#", 1)[0]
        tokens = _tokens(content)
        if not tokens:
            continue
        word, col = tokens[0][0].lower(), tokens[0][1]
        if word == "set":
            if len(tokens) != 3:
                raise ParseError("set takes a key and a value", lineno, col)
            key = tokens[1][0].lower()
            try:
                settings[key] = coerce_setting(key, tokens[2][0])
            except ValidationError as e:
                bad_col = tokens[1][1] if key not in DEFAULTS else tokens[2][1]
                raise ValidationError(e.message, lineno, bad_col)
            setting_lines[key] = lineno
        elif word == "prepare":
            if prep is not None:
                raise ValidationError(f"Duplicate prepare (first on line {prep_line})", lineno, col)
            if steps:
                raise ValidationError("prepare must come before pulses", lineno, col)
            prep, prep_line = _parse_prepare(tokens, lineno), lineno
        elif word in ("pulse", "repump", "probe", "scan"):
            if word == "pulse":
                steps.append(_parse_pulse(tokens, lineno))
            elif word == "repump":
                if len(tokens) != 1:
                    raise ParseError("repump takes no arguments", lineno, tokens[1][1])
                steps.append(Repump())
            elif word == "probe":
                steps.append(_parse_probe(tokens, lineno))
            else:
                steps.append(_parse_scan(tokens, lineno))
            lines.append(lineno)
            if first_step_line is None:
                first_step_line = lineno
        else:
            raise ParseError(f"Unknown directive {tokens[0][0]!r}", lineno, col)

    if prep is None:
        raise ValidationError(
            "Sequence has no prepare line",
            first_step_line or max(setting_lines.values(), default=1),
        )
    schedule = Schedule(settings, prep, tuple(steps), tuple(lines))
    validate_schedule(schedule, setting_lines, prep_line)
    return schedule


def validate_schedule(schedule: Schedule, setting_lines: dict[str, int] | None = None,
                      prep_line: int | None = None) -> ExperimentConfig:
    """Check a schedule against its own configuration; returns the configuration."""
    setting_lines = setting_lines or {}
    try:
        config = schedule.config
        schedule.noise
    except RatioError as e:
        line = max((setting_lines.get(k, 0) for k in ("omega_red", "omega_blue")), default=0)
        raise RatioError(e.message, line or None)
    except ValidationError as e:
        line = max(setting_lines.values(), default=0)
        raise ValidationError(e.message, line or None)

    if schedule.prep is None:
        raise ValidationError("Schedule has no preparation")
    limit = config.space.dim
    if schedule.prep.n >= limit:
        raise ValidationError(
            f"Prepared level {schedule.prep.n} must be below dim={limit}", prep_line,
        )
    for index, step in enumerate(schedule.steps):
        if isinstance(step, Pulse) and step.level is not None and step.level + 1 >= config.space.interior:
            raise ValidationError(
                f"Pulse level {step.level} reaches the guard band of dim={limit}",
                schedule.line_of(index),
            )
    return config


# --- emission --------------------------------------------------------------

def _fmt(value: float) -> str:
    return f"{value:.12g}"


def emit_sequence(schedule: Schedule) -> str:
    """Canonical text form: one directive per line, lowercase keys, 12 significant digits."""
    out = []
    for key in DEFAULTS:
        if key in schedule.settings:
            value = schedule.settings[key]
            out.append(f"set {key} {value if isinstance(value, (int, str)) else _fmt(value)}")
    prep = schedule.prep
    if prep is not None:
        if prep.kind == "squeezed_vacuum":
            out.append("prepare squeezed_vacuum")
        elif prep.kind == "squeezed_thermal":
            out.append(f"prepare squeezed_thermal {_fmt(prep.nbar)}")
        else:
            out.append(f"prepare {prep.kind} {prep.n}")
    for step in schedule.steps:
        if isinstance(step, Pulse):
            amount = (f"theta={_fmt(step.theta)}" if step.theta is not None
                      else f"duration={_fmt(step.duration or 0.0)}")
            level = f" level={step.level}" if step.level is not None else ""
            out.append(f"pulse {step.kind} {amount} phase={_fmt(step.phase)}{level}")
        elif isinstance(step, Repump):
            out.append("repump")
        elif isinstance(step, Probe):
            out.append(f"probe {step.kind} tmax={_fmt(step.tmax)} points={step.points}")
        else:
            out.append(f"scan phase from={_fmt(step.start)} to={_fmt(step.stop)} points={step.points}")
    return "\n".join(out) + "\n"


# --- generators ------------------------------------------------------------

def ladder_sequence(n_target: int, config: ExperimentConfig,
                    noise: NoiseParams | None = None) -> Schedule:
    """Climb |zeta, 0> -> |zeta, n_target> with alternating H_plus / H_minus pi pulses.

    Pulse m drives |zeta, m> <-> |zeta, m+1>: H_plus for even m, H_minus for odd m.

    Raises:
        TruncationError: When n_target reaches the guard band.
    """
    if n_target < 0:
        raise ValidationError(f"n_target must be >= 0, got {n_target}")
    if n_target >= config.space.interior:
        raise TruncationError(
            f"n_target={n_target} reaches the guard band of dim={config.space.dim}",
            detail={"dim": float(config.space.dim)},
        )
    pulses = tuple(
        Pulse("plus" if m % 2 == 0 else "minus", theta=canonical(math.pi), phase=0.0, level=m)
        for m in range(n_target)
    )
    return Schedule(settings_from_experiment(config, noise), Preparation("squeezed_vacuum"), pulses)


def superposition_sequence(config: ExperimentConfig,
                           noise: NoiseParams | None = None) -> Schedule:
    """(|zeta, 0> + e^{i phi_s} |zeta, 2>)/sqrt(2) with the spin in down.

    H_plus pi/2 pulse at phase phi_s, then an H_minus pi pulse at phase pi
    moves the |up, zeta 1> half to |down, zeta 2>.
    """
    pulses = (
        Pulse("plus", theta=canonical(math.pi / 2), phase=canonical(config.squeeze.phi), level=0),
        Pulse("minus", theta=canonical(math.pi), phase=canonical(math.pi), level=1),
    )
    return Schedule(settings_from_experiment(config, noise), Preparation("squeezed_vacuum"), pulses)


# --- execution -------------------------------------------------------------

def prepare_state(prep: Preparation, config: ExperimentConfig) -> State:
    space = config.space
    if prep.kind == "squeezed_vacuum":
        return spin_state(squeezed_fock_state(config.squeeze, 0, space, config.alpha), space)
    if prep.kind == "fock":
        return spin_state(basis(space, prep.n), space)
    if prep.kind == "squeezed_fock":
        return spin_state(squeezed_fock_state(config.squeeze, prep.n, space, config.alpha), space)
    rho = squeezed_thermal_density(config.squeeze, prep.nbar, space)
    return SpinOscDensity.product(DOWN, rho, space)


class _Context:
    """Hamiltonians and Rabi frequencies for one configuration, built on demand."""

    def __init__(self, config: ExperimentConfig, noise: NoiseParams, mode: str) -> None:
        self.config = config
        self.noise = noise
        self.mode = mode
        self._K: OscillatorOperator | None = None
        self._detuning = detuning_term(noise.delta, config.space) if noise.delta else None
        self.jumps = reservoir_jumps(noise, config.space) if mode == "lindblad" else []

    @property
    def K(self) -> OscillatorOperator:
        if self._K is None:
            self._K = ladder_lowering(self.config)
        return self._K

    def _bichromatic_drives(self, phase: float) -> tuple[DriveParams, DriveParams]:
        c = self.config
        if c.omega_red:
            return DriveParams(c.omega_red, phase), DriveParams(c.omega_blue, phase + c.squeeze.phi)
        omega_r = c.omega_minus * math.cosh(c.squeeze.r)
        return (DriveParams(omega_r, phase),
                DriveParams(omega_r * math.tanh(c.squeeze.r), phase + c.squeeze.phi))

    def hamiltonian(self, kind: str, phase: float) -> Hamiltonian:
        c = self.config
        builders: dict[str, Callable[[], Hamiltonian]] = {
            "carrier": lambda: carrier(DriveParams(c.omega_carrier, phase), c.space),
            "plus": lambda: engineered("plus", DriveParams(c.omega_plus, phase), self.K),
            "minus": lambda: engineered("minus", DriveParams(c.omega_minus, phase), self.K),
            "blue": lambda: sideband("blue", DriveParams(c.omega_plus, phase), c.lamb_dicke,
                                     c.ld_order, c.space),
            "red": lambda: sideband("red", DriveParams(c.omega_minus, phase), c.lamb_dicke,
                                    c.ld_order, c.space),
            "bichromatic": lambda: bichromatic(*self._bichromatic_drives(phase), c.lamb_dicke,
                                               c.ld_order, c.space),
            "wait": lambda: Hamiltonian.zero(c.space),
        }
        h = builders[kind]()
        if self._detuning is not None:
            h = h + self._detuning
        return h

    def rabi_frequency(self, kind: str, level: int) -> float:
        c = self.config
        if kind == "carrier":
            return c.omega_carrier
        if kind == "plus":
            return transition_rabi_frequency(c.omega_plus, level, c)
        if kind == "minus":
            return transition_rabi_frequency(c.omega_minus, level, c)
        if kind in ("blue", "red"):
            omega = c.omega_plus if kind == "blue" else c.omega_minus
            if c.ld_order == ALL_ORDERS:
                return omega * sideband_matrix_element("fock", level, c.lamb_dicke, c.space)
            return omega * math.sqrt(level + 1)
        drive, zeta = bichromatic_equivalent(*self._bichromatic_drives(0.0))
        if c.ld_order == ALL_ORDERS:
            return drive.omega * sideband_matrix_element(zeta, level, c.lamb_dicke, c.space)
        return drive.omega * math.sqrt(level + 1)

    def duration(self, pulse: Pulse) -> float:
        if pulse.duration is not None:
            return pulse.duration
        assert pulse.theta is not None
        omega = self.rabi_frequency(pulse.kind, pulse.level or 0)
        if omega <= 0:
            raise ValidationError(f"{pulse.kind} pulse given as an angle but its drive is off")
        return pulse.theta / omega

    def evolve(self, kind: str, phase: float, state: State, duration: float,
               sample_count: int = 1) -> tuple[np.ndarray, list[State]]:
        h = self.hamiltonian(kind, phase)
        if isinstance(state, SpinOscState):
            traj = evolve_unitary(h, state, duration, sample_count)
        else:
            traj = evolve_lindblad(h, self.jumps, state, duration, sample_count)
        return traj.times, traj.states


def _to_mode(state: State, mode: str) -> State:
    if mode == "lindblad" and isinstance(state, SpinOscState):
        return SpinOscDensity.from_state(state)
    return state


def _describe(step: Directive) -> str:
    if isinstance(step, Pulse):
        amount = f"theta={step.theta:.4g}" if step.theta is not None else f"t={step.duration:.4g}s"
        return f"pulse {step.kind} {amount} phase={step.phase:.4g}"
    if isinstance(step, Repump):
        return "repump"
    if isinstance(step, Probe):
        return f"probe {step.kind} ({step.points} points to {step.tmax:.4g}s)"
    return f"scan phase ({step.points} points)"


def _run_scan(ctx: _Context, state: State, phis: np.ndarray) -> MeasurementRecord:
    """R_minus(pi) then R_plus(pi/2, phi_a); P(down) per phi_a."""
    pi_pulse = Pulse("minus", theta=math.pi, phase=math.pi, level=1)
    _, states = ctx.evolve("minus", math.pi, state, ctx.duration(pi_pulse))
    shelved = states[-1]
    half = Pulse("plus", theta=math.pi / 2, level=0)
    t_half = ctx.duration(half)
    values = []
    for phi in phis:
        _, final = ctx.evolve("plus", float(phi), shelved, t_half)
        values.append(final[-1].p_down)
    fringe = fit_fringe(phis, np.array(values))
    return MeasurementRecord("P_down", phis, np.array(values), label="phase scan",
                             axis="phi_rad", extras=fringe)


def execute(schedule: Schedule, mode: str = "unitary", noise: NoiseParams | None = None,
            verbose: bool = False, trace_points: int = 0) -> tuple[State, list[MeasurementRecord]]:
    """Run a schedule step by step.

    Detuning applies in both modes; reservoir jumps and repumps need
    ``mode="lindblad"``. Probes and scans branch off the current state and
    leave it unchanged. With ``trace_points`` >= 2 every pulse also records
    P(down) on that many samples, timed from the end of the preparation.

    Raises:
        ModeError: Repump or mixed preparation in unitary mode.
    """
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")
    config = validate_schedule(schedule)
    assert schedule.prep is not None
    noise = noise if noise is not None else schedule.noise
    if mode == "unitary":
        for index, step in enumerate(schedule.steps):
            if isinstance(step, Repump):
                raise ModeError("repump needs lindblad mode", schedule.line_of(index))
        if schedule.prep.is_mixed:
            raise ModeError("Mixed preparation needs lindblad mode")

    ctx = _Context(config, noise, mode)
    state = _to_mode(prepare_state(schedule.prep, config), mode)
    records: list[MeasurementRecord] = []
    total = len(schedule.steps)
    elapsed = 0.0

    for i, step in enumerate(schedule.steps, 1):
        if verbose:
            print(f"  [{i}/{total}] {_describe(step)}", end="", flush=True)
        try:
            if isinstance(step, Pulse):
                duration = ctx.duration(step)
                times, states = ctx.evolve(step.kind, step.phase, state, duration,
                                           max(trace_points, 1))
                state = states[-1]
                if trace_points >= 2:
                    records.append(MeasurementRecord(
                        "P_down", elapsed + times, np.array([s.p_down for s in states]),
                        label=f"pulse {i} {step.kind}",
                    ))
                elapsed += duration
            elif isinstance(step, Repump):
                assert isinstance(state, SpinOscDensity)
                state = spin_repump(state)
            elif isinstance(step, Probe):
                times, states = ctx.evolve(step.kind, 0.0, state, step.tmax, step.points)
                records.append(MeasurementRecord(
                    "P_down", times, np.array([s.p_down for s in states]),
                    label=f"probe {step.kind}",
                ))
            else:
                records.append(_run_scan(ctx, state, step.phis))
        except SqueezedLadderError as e:
            if verbose:
                print(f"  {CROSS} ERROR: {e}")
            if e.line is None:
                e.line = schedule.line_of(i - 1)
            raise
        if verbose:
            print(f"  {CHECK}")
    return state, records


def phase_scan(schedule: Schedule, phi_values: list[float] | np.ndarray, mode: str = "unitary",
               noise: NoiseParams | None = None) -> MeasurementRecord:
    """Run the preparation part of ``schedule`` then scan the analysis phase.

    ``extras`` of the returned record carry the fitted fringe contrast and
    phase offset (three or more phases needed).
    """
    kept = [i for i, s in enumerate(schedule.steps) if not isinstance(s, (Scan, Probe))]
    pulses_only = Schedule(
        schedule.settings, schedule.prep,
        tuple(schedule.steps[i] for i in kept),
        tuple(ln for ln in (schedule.line_of(i) for i in kept) if ln is not None),
    )
    state, _ = execute(pulses_only, mode, noise)
    ctx = _Context(pulses_only.config, noise if noise is not None else schedule.noise, mode)
    return _run_scan(ctx, state, np.asarray(phi_values, dtype=float))
