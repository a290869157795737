#!/usr/bin/env python3
"""CLI entry point for the squeezed-ladder simulator."""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Any

import numpy as np

from squeezed_ladder.config import (
    CONFIG_ENV,
    DIM_ENV,
    REFERENCE_NOISE,
    coerce_setting,
    experiment_from_settings,
    noise_from_settings,
    resolve_settings,
)
from squeezed_ladder.dynamics import SpinOscDensity
from squeezed_ladder.exceptions import InputError, NumericalError, TruncationError
from squeezed_ladder.hamiltonians import LambDicke
from squeezed_ladder.hilbert import (
    parity,
    populations,
    quadrature_variance,
    squeezed_fock_state,
    squeezed_populations,
    variance_db,
)
from squeezed_ladder.pulseseq import (
    CHECK,
    Preparation,
    Probe,
    Schedule,
    emit_sequence,
    execute,
    ladder_sequence,
    parse_sequence,
    phase_scan,
    superposition_sequence,
)
from squeezed_ladder.results import FORMATS, ResultDocument, read_trace, render, write_document
from squeezed_ladder.tomography import DecayModel, extract_populations, fit_rabi, rabi_ratio_table

EXIT_INPUT = 2
EXIT_NUMERICAL = 3
DEFAULT_PROBE_POINTS = 400
DEFAULT_SCAN_TMAX = 2e-3
DEFAULT_PHASE_POINTS = 9
DEFAULT_TRACE_POINTS = 40
DEFAULT_DELTAS = "10,20,30"


def add_common_args(parser: argparse.ArgumentParser) -> None:
    """Add arguments shared across subcommands."""
    parser.add_argument("--dim", type=int,
                        help=f"Fock-space truncation (or {DIM_ENV} env var)")
    parser.add_argument("--out", help="Write results to this file instead of stdout")
    parser.add_argument("--format", choices=FORMATS, default="csv",
                        help="Output format (default: csv)")
    parser.add_argument("--seed", type=int, default=0,
                        help="Seed for randomized fit starts (default: 0)")
    parser.add_argument("--config", help=f"YAML settings file (or {CONFIG_ENV} env var)")
    parser.add_argument("--verbose", "-v", action="store_true",
                        help="Print per-step progress")


def add_physics_args(parser: argparse.ArgumentParser) -> None:
    """Add squeezing, drive and noise arguments (frequencies in Hz)."""
    parser.add_argument("--r", type=float, help="Squeezing magnitude")
    parser.add_argument("--phi", type=float, help="Squeezing phase phi_s (rad)")
    parser.add_argument("--eta", type=float, help="Lamb-Dicke parameter")
    parser.add_argument("--ld-order", choices=["linear", "all_orders"],
                        help="Lamb-Dicke expansion order")
    parser.add_argument("--omega", type=float,
                        help="Rabi frequency of H_plus and H_minus (Hz)")
    parser.add_argument("--noise", action="store_true",
                        help="Use the reference detuning and reservoir rates")
    parser.add_argument("--delta", type=float, help="Trap-drive detuning (Hz)")
    parser.add_argument("--gamma-amp", type=float, help="Amplitude reservoir rate (Hz)")
    parser.add_argument("--gamma-phase", type=float, help="Phase reservoir rate (Hz)")


def _flag_overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Settings given explicitly on the command line, coerced."""
    overrides: dict[str, Any] = {}
    if getattr(args, "noise", False):
        overrides.update(REFERENCE_NOISE)
    for key in ("dim", "r", "phi", "eta", "ld_order", "delta", "gamma_amp", "gamma_phase"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    omega = getattr(args, "omega", None)
    if omega is not None:
        overrides["omega_plus"] = overrides["omega_minus"] = omega
    return {key: coerce_setting(key, value) for key, value in overrides.items()}


def _resolve(args: argparse.Namespace) -> dict[str, Any]:
    """Resolve settings from flags -> env vars -> config file -> defaults."""
    return resolve_settings(_flag_overrides(args), getattr(args, "config", None))


def _is_open(settings: dict[str, Any]) -> bool:
    return bool(settings["gamma_amp"] or settings["gamma_phase"])


def _emit(doc: ResultDocument, args: argparse.Namespace) -> None:
    if args.out:
        write_document(doc, args.out, args.format)
        print(f"Wrote {args.out}")
    else:
        sys.stdout.write(render(doc, args.format))


def _add_populations(doc: ResultDocument, osc: np.ndarray, settings: dict[str, Any],
                     k_max: int, m_max: int) -> None:
    """Energy-basis populations to k_max and squeezed-basis populations to m_max.

    m_max is lowered to the highest |zeta, m> the truncation resolves.
    """
    config = experiment_from_settings(settings)
    fock = populations(osc)
    for m in range(min(m_max, config.space.dim - 1), -1, -1):
        try:
            squeezed = squeezed_populations(osc, config.squeeze, config.space, m, config.alpha)
            break
        except TruncationError:
            if m == 0:
                raise
    doc.add("populations", ["k", "p"], [[k, fock[k]] for k in range(k_max + 1)])
    doc.add("squeezed_populations", ["m", "p"], [[k, p] for k, p in enumerate(squeezed)])


def cmd_state(args: argparse.Namespace) -> None:
    """Populations, parity and squeezing of |zeta, n>."""
    settings = _resolve(args)
    config = experiment_from_settings(settings)
    psi = squeezed_fock_state(config.squeeze, args.n, config.space, config.alpha)
    k_max = min(args.k_max, config.space.dim - 1)
    p = populations(psi)
    var_sq = quadrature_variance(psi, config.squeeze.squeezed_angle)
    var_anti = quadrature_variance(psi, config.squeeze.squeezed_angle + math.pi / 2)

    doc = ResultDocument("state", {
        "n": args.n, "r": settings["r"], "phi": settings["phi"], "dim": config.space.dim,
        "parity": parity(probabilities=p),
        "variance_squeezed": var_sq, "variance_squeezed_db": variance_db(var_sq),
        "variance_anti": var_anti, "variance_anti_db": variance_db(var_anti),
    })
    doc.add("populations", ["k", "p"], [[k, p[k]] for k in range(k_max + 1)])
    _emit(doc, args)


def cmd_ladder(args: argparse.Namespace) -> None:
    """Climb the squeezed ladder to n_target and report the trajectory."""
    settings = _resolve(args)
    config = experiment_from_settings(settings)
    noise = noise_from_settings(settings)
    schedule = ladder_sequence(args.n_target, config, noise)
    mode = "lindblad" if _is_open(settings) else "unitary"
    if args.verbose or args.out:
        print(f"\nClimbing to |zeta, {args.n_target}> ({mode}, {len(schedule.steps)} pulses)...\n")
    state, records = execute(schedule, mode, noise, verbose=args.verbose,
                             trace_points=args.trace_points)

    target = squeezed_fock_state(config.squeeze, args.n_target, config.space, config.alpha)
    osc = state.oscillator_density()
    fid = float(np.vdot(target, osc @ target).real)
    k_max = min(max(2 * args.n_target + 10, 20), config.space.dim - 1)

    doc = ResultDocument("ladder", {
        "n_target": args.n_target, "mode": mode, "r": settings["r"],
        "fidelity": fid, "p_down": state.p_down,
    })
    rows = []
    for rec in records:
        step = int(rec.label.split()[1])
        rows.extend([step, t, v] for t, v in zip(rec.times, rec.values))
    doc.add("trajectory", ["step", "t_seconds", "p_down"], rows)
    _add_populations(doc, osc, settings, k_max, args.n_target + 2)
    _emit(doc, args)


def _flopping_trace(settings: dict[str, Any], n: int, tmax: float, points: int) -> np.ndarray:
    """P(down, t) on the |down, zeta n> <-> |up, zeta n+1> transition."""
    prep = Preparation("squeezed_fock", n=n)
    schedule = Schedule(settings, prep, (Probe("plus", tmax, points),))
    mode = "lindblad" if _is_open(settings) else "unitary"
    _, records = execute(schedule, mode)
    return records[0].values


def cmd_scan_detuning(args: argparse.Namespace) -> None:
    """Flopping curves for one ladder transition at several detunings."""
    base = _resolve(args)
    try:
        deltas = [float(d) for d in args.deltas.split(",") if d.strip()]
    except ValueError:
        print(f"Error: --deltas must be comma-separated numbers, got {args.deltas!r}",
              file=sys.stderr)
        sys.exit(EXIT_INPUT)
    runs = [{**base, "delta": d} for d in deltas]
    experiment_from_settings(base)

    def _run(settings: dict[str, Any]) -> np.ndarray:
        return _flopping_trace(settings, args.n, args.tmax, args.points)

    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            traces = list(pool.map(_run, runs))
    else:
        traces = []
        for i, settings in enumerate(runs, 1):
            if args.verbose:
                print(f"  [{i}/{len(runs)}] delta = {settings['delta']:g} Hz", end="", flush=True)
            traces.append(_run(settings))
            if args.verbose:
                print(f"  {CHECK}")

    times = np.linspace(0.0, args.tmax, args.points)
    columns = ["t_seconds"] + [f"p_down_delta_{d:g}" for d in deltas]
    rows = [[t] + [trace[i] for trace in traces] for i, t in enumerate(times)]
    doc = ResultDocument("scan-detuning", {
        "n": args.n, "r": base["r"], "omega_hz": base["omega_plus"],
    })
    doc.add("traces", columns, rows)
    _emit(doc, args)


def cmd_fit(args: argparse.Namespace) -> None:
    """Fit a Rabi trace (t_seconds, p_down)."""
    times, values = read_trace(args.trace, args.column)
    fit = fit_rabi(times, values, parity_flag=args.parity_flag, decay=args.decay,
                   seed=args.seed)
    summary: dict[str, Any] = {
        "omega_rad_s": fit.omega, "omega_hz": fit.omega / (2 * math.pi),
        "gamma": fit.gamma, "contrast": fit.contrast,
        "parity_flag": fit.parity_flag, "decay": fit.decay, "residual": fit.residual,
    }
    summary.update({f"stderr_{k}": v for k, v in fit.stderr.items()})
    doc = ResultDocument("fit", summary)
    doc.add("covariance", ["param"] + fit.param_names,
            [[name] + list(row) for name, row in zip(fit.param_names, fit.covariance)])
    _emit(doc, args)


def cmd_tomo(args: argparse.Namespace) -> None:
    """Number-state populations from a blue-sideband trace."""
    times, values = read_trace(args.trace, args.column)
    settings = _resolve(args)
    decay = DecayModel(args.decay)
    est = extract_populations(
        times, values, 2 * math.pi * args.omega_b, LambDicke(float(settings["eta"])),
        args.k_max, decay=decay, fit_decay=args.decay != "none",
        clip=args.clip, normalize=args.normalize,
    )
    assert est.sigmas is not None
    doc = ResultDocument("tomo", {
        "k_max": est.k_max, "decay": args.decay, "gamma": est.gamma,
        "condition": est.condition, "sum": float(est.probabilities.sum()),
        "parity": est.parity, "parity_sigma": est.parity_sigma,
    })
    doc.add("populations", ["k", "p", "sigma"],
            [[k, p, s] for k, (p, s) in enumerate(zip(est.probabilities, est.sigmas))])
    _emit(doc, args)


def cmd_phase_scan(args: argparse.Namespace) -> None:
    """Prepare the squeezed superposition and scan the analysis phase."""
    settings = _resolve(args)
    config = experiment_from_settings(settings)
    noise = noise_from_settings(settings)
    mode = "lindblad" if _is_open(settings) else "unitary"
    phis = config.squeeze.phi + np.linspace(0.0, 2 * math.pi, args.points, endpoint=False)
    record = phase_scan(superposition_sequence(config, noise), phis, mode, noise)

    doc = ResultDocument("phase-scan", {
        "mode": mode, "phi_s": config.squeeze.phi, "points": args.points, **record.extras,
    })
    doc.add("fringe", ["phi_rad", "p_down"], [[p, v] for p, v in zip(record.times, record.values)])
    _emit(doc, args)


def cmd_ratios(args: argparse.Namespace) -> None:
    """Rabi-frequency ratios Omega_{n,n-1} / Omega_{1,0} against sqrt(n)."""
    settings = _resolve(args)
    config = experiment_from_settings(settings)
    rows = rabi_ratio_table(args.n_max, config.squeeze, config.lamb_dicke, args.mode,
                            config.space)
    doc = ResultDocument("ratios", {"mode": args.mode, "r": settings["r"], "eta": settings["eta"]})
    doc.add("ratios", ["n", "sqrt_n", "ratio", "fock"],
            [[row["n"], row["sqrt_n"], row["ratio"], row["fock"]] for row in rows])
    _emit(doc, args)


def cmd_run(args: argparse.Namespace) -> None:
    """Execute a sequence file."""
    try:
        with open(args.sequence, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        print(f"Error: Cannot read sequence file {args.sequence}: {e.strerror}", file=sys.stderr)
        sys.exit(EXIT_INPUT)
    parsed = parse_sequence(text)
    if args.emit:
        sys.stdout.write(emit_sequence(parsed))
        return

    # File settings win over config/env; explicit flags win over both.
    base = resolve_settings(config_path=args.config)
    schedule = Schedule({**base, **parsed.settings, **_flag_overrides(args)}, parsed.prep,
                        parsed.steps, parsed.source_lines)
    mode = args.mode or ("lindblad" if _is_open(schedule.settings) else "unitary")
    if args.verbose or args.out:
        print(f"\nRunning {args.sequence} ({mode}, {len(schedule.steps)} steps)...\n")
    state, records = execute(schedule, mode, verbose=args.verbose)

    settings = schedule.settings
    osc = state.oscillator_density()
    k_max = min(20, schedule.config.space.dim - 1)
    doc = ResultDocument("run", {
        "mode": mode, "p_down": state.p_down, "parity": parity(osc),
        "mixed": isinstance(state, SpinOscDensity),
    })
    _add_populations(doc, osc, settings, k_max, 4)
    for i, rec in enumerate(records, 1):
        extras = [[k, v] for k, v in rec.extras.items()]
        doc.add(f"record_{i}", [rec.axis, rec.observable],
                [[t, v] for t, v in zip(rec.times, rec.values)])
        if extras:
            doc.add(f"record_{i}_fit", ["key", "value"], extras)
    _emit(doc, args)


def main() -> None:
    parser = argparse.ArgumentParser(
        description="Squeezed Jaynes-Cummings ladder simulator (frequencies in Hz)",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    # state
    p_state = subparsers.add_parser("state", help="Populations and squeezing of |zeta, n>")
    add_common_args(p_state)
    add_physics_args(p_state)
    p_state.add_argument("--n", type=int, default=0, help="Ladder level (default: 0)")
    p_state.add_argument("--k-max", type=int, default=30,
                         help="Highest Fock level listed (default: 30)")

    # ladder
    p_ladder = subparsers.add_parser("ladder", help="Climb the squeezed ladder")
    add_common_args(p_ladder)
    add_physics_args(p_ladder)
    p_ladder.add_argument("--n-target", type=int, required=True, help="Target ladder level")
    p_ladder.add_argument("--trace-points", type=int, default=DEFAULT_TRACE_POINTS,
                          help=f"Samples per pulse (default: {DEFAULT_TRACE_POINTS})")

    # scan-detuning
    p_scan = subparsers.add_parser("scan-detuning",
                                   help="Flopping curves of one transition versus detuning")
    add_common_args(p_scan)
    add_physics_args(p_scan)
    p_scan.add_argument("--n", type=int, default=0,
                        help="Lower level of the transition n <-> n+1 (default: 0)")
    p_scan.add_argument("--deltas", default=DEFAULT_DELTAS,
                        help=f"Comma-separated detunings in Hz (default: {DEFAULT_DELTAS})")
    p_scan.add_argument("--tmax", type=float, default=DEFAULT_SCAN_TMAX,
                        help=f"Probe duration in seconds (default: {DEFAULT_SCAN_TMAX})")
    p_scan.add_argument("--points", type=int, default=DEFAULT_PROBE_POINTS,
                        help=f"Samples per trace (default: {DEFAULT_PROBE_POINTS})")
    p_scan.add_argument("--workers", type=int, default=1,
                        help="Parallel traces (default: 1)")

    # fit
    p_fit = subparsers.add_parser("fit", help="Fit a Rabi flopping trace")
    add_common_args(p_fit)
    p_fit.add_argument("trace", help="CSV with t_seconds, p_down columns")
    p_fit.add_argument("--column", default="p_down", help="Value column (default: p_down)")
    p_fit.add_argument("--parity-flag", type=int, choices=[0, 1], default=0,
                       help="0 when flopping starts in down, 1 otherwise (default: 0)")
    p_fit.add_argument("--decay", choices=["gaussian", "exponential"], default="gaussian",
                       help="Envelope model (default: gaussian)")

    # tomo
    p_tomo = subparsers.add_parser("tomo", help="Populations from a blue-sideband trace")
    add_common_args(p_tomo)
    p_tomo.add_argument("trace", help="CSV with t_seconds, p_down columns")
    p_tomo.add_argument("--column", default="p_down", help="Value column (default: p_down)")
    p_tomo.add_argument("--omega-b", type=float, required=True,
                        help="Blue-sideband Rabi frequency (Hz)")
    p_tomo.add_argument("--eta", type=float, help="Lamb-Dicke parameter")
    p_tomo.add_argument("--k-max", type=int, default=30, help="Highest level (default: 30)")
    p_tomo.add_argument("--decay", choices=["none", "gaussian", "per_level"], default="gaussian",
                        help="Decay model (default: gaussian)")
    p_tomo.add_argument("--clip", action="store_true", help="Clip negative populations")
    p_tomo.add_argument("--normalize", action="store_true", help="Renormalize to sum 1")

    # phase-scan
    p_phase = subparsers.add_parser("phase-scan",
                                    help="Phase scan of the |zeta,0> + |zeta,2> superposition")
    add_common_args(p_phase)
    add_physics_args(p_phase)
    p_phase.add_argument("--points", type=int, default=DEFAULT_PHASE_POINTS,
                         help=f"Analysis phases over one period (default: {DEFAULT_PHASE_POINTS})")

    # ratios
    p_ratios = subparsers.add_parser("ratios", help="Rabi-frequency ratio table")
    add_common_args(p_ratios)
    add_physics_args(p_ratios)
    p_ratios.add_argument("--n-max", type=int, default=7, help="Highest level (default: 7)")
    p_ratios.add_argument("--mode", choices=["sqrt_n", "ld_corrected"], default="ld_corrected",
                          help="Ratio model (default: ld_corrected)")

    # run
    p_run = subparsers.add_parser("run", help="Execute a sequence file")
    add_common_args(p_run)
    add_physics_args(p_run)
    p_run.add_argument("sequence", help="Sequence file")
    p_run.add_argument("--mode", choices=["unitary", "lindblad"],
                       help="Evolution mode (default: lindblad when reservoir rates are set)")
    p_run.add_argument("--emit", action="store_true",
                       help="Print the canonical form of the sequence and exit")

    args = parser.parse_args()

    commands = {
        "state": cmd_state,
        "ladder": cmd_ladder,
        "scan-detuning": cmd_scan_detuning,
        "fit": cmd_fit,
        "tomo": cmd_tomo,
        "phase-scan": cmd_phase_scan,
        "ratios": cmd_ratios,
        "run": cmd_run,
    }
    try:
        commands[args.command](args)
    except InputError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(EXIT_INPUT)
    except NumericalError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(EXIT_NUMERICAL)


if __name__ == "__main__":
    main()
