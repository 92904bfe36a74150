"""Command-line front end: ``analyze``, ``scan``, ``simulate`` and ``verify``.

Exit status: 0 success, 1 configuration error, 2 numerical failure,
3 acceptance failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io
from .errors import (
    AnalysisError,
    ConfigError,
    DegenerateBasis,
    DerivativeMismatch,
    NoConvergence,
    NonNegativeGv,
    NumericalFailure,
    TuringLabError,
)
from .kinetics import ReactionSystem, linearize
from .linear_analysis import (
    GrowingModeSummary,
    classify_sign_pattern,
    default_k_grid,
    dispersion_curve,
    growing_mode_summary,
    has_turing_instability,
    rest_state_stable,
    summary_rows,
)
from .simulator import SimulationConfig, Simulator
from .spectral import Grid, SpectralField
from .verification import (
    ExperimentSpec,
    bootstrap_constant_c2,
    growth_bound_fit,
    mixed_profile,
    pure_mode_profile,
    run_theorem_experiment,
    scaling_study,
)

log = logging.getLogger("turing_lab")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_ACCEPTANCE = 3

C1_TRIALS = 100
C1_STABILITY = 0.01


def _q_text(q) -> str:
    return "(" + ",".join(str(i) for i in q) + ")"


def _modes_text(modes) -> str:
    return "{" + ", ".join(_q_text(q) for q in modes) + "}"


# --------------------------------------------------------------------------
# commands


def _report_lines(system: ReactionSystem, cfg: io.RunConfig):
    """Linear analysis as text; also returns the summary (None if not Turing unstable)."""
    lin = linearize(system)
    d = cfg.grid.d
    lines = [
        f"model: {system.name}",
        f"steady_state: U = {system.steady_state[0]!r}, V = {system.steady_state[1]!r}",
        f"jacobian: a11 = {lin.a11!r}, a12 = {lin.a12!r}, a21 = {lin.a21!r}, a22 = {lin.a22!r}",
        f"diffusion: D1 = {lin.d1bar!r}, D2 = {lin.d2bar!r}",
        f"trace = {lin.trace!r}, det = {lin.det!r}",
        f"rest_stable: {str(rest_state_stable(lin)).lower()}",
        f"sign_pattern: {classify_sign_pattern(lin)}",
        f"dimension: {d}",
    ]
    witness = has_turing_instability(lin, d)
    lines.append(f"turing_unstable: {str(bool(witness)).lower()}")
    lines.append(f"range_condition: sqrt(D1 D2) det A form {str(witness.range_literal).lower()}, "
                 f"sqrt(D1 D2 det A) form {str(witness.range_standard).lower()}")
    if not math.isnan(witness.k_minus):
        lines.append(f"unstable_band: ({witness.k_minus!r}, {witness.k_plus!r})")
    lines.append("witness_q2: {" + ", ".join(str(k) for k in witness.witness) + "}")
    summary = None
    if witness:
        summary = growing_mode_summary(lin, d)
        lines += [
            f"lambda_max: {summary.lambda_max!r}",
            f"omega_max: {_modes_text(summary.omega_max)}",
            f"nu: {summary.nu!r}",
            f"growing_modes: {len(summary.growing)}",
        ]
    return lin, summary, lines


def cmd_analyze(cfg: io.RunConfig) -> int:
    system = io.build_system(cfg.model)
    lin, summary, lines = _report_lines(system, cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    k = default_k_grid(lin, cfg.analysis.k_points, cfg.analysis.k_max)
    io.write_csv(out / "dispersion.csv", io.DISPERSION_HEADER, dispersion_curve(lin, k))
    if summary is not None:
        io.write_csv(out / "modes.csv", io.mode_header(cfg.grid.d), summary_rows(summary))
    (out / "analysis.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def _scan_row(cfg: io.RunConfig, point: dict, i: int):
    try:
        system = io.build_system(cfg.model, point)
        lin = linearize(system)
    except (NoConvergence, DerivativeMismatch, ConfigError) as exc:
        log.warning("[point %d] %s: %s", i, type(exc).__name__, exc)
        return (None, None, None, None)
    stable = rest_state_stable(lin)
    if not stable or lin.d1bar == lin.d2bar:
        return (stable, False, None, 0)
    witness = has_turing_instability(lin, cfg.grid.d)
    if not witness:
        return (True, False, None, 0)
    summary = growing_mode_summary(lin, cfg.grid.d)
    return (True, True, summary.lambda_max, len(summary.omega_max))


def cmd_scan(cfg: io.RunConfig) -> int:
    points = io.scan_points(cfg.scan)
    keys = list(cfg.scan.params)
    rows = [tuple(p[k] for k in keys) + _scan_row(cfg, p, i) for i, p in enumerate(points)]
    path = io.write_csv(Path(cfg.out) / "scan.csv", tuple(keys) + io.SCAN_TAIL, rows)
    print(f"scan: {len(rows)} points -> {path}")
    return EXIT_OK


def _summary_or_none(lin, d) -> GrowingModeSummary | None:
    try:
        return growing_mode_summary(lin, d)
    except AnalysisError:
        return None


def initial_field(grid: Grid, lin, summary, sec: io.SimulationSection, seed: int) -> SpectralField:
    """Unit-L2 initial profile scaled by ``amplitude``."""
    if sec.initial == "zero":
        return SpectralField.zeros(grid)
    if sec.initial == "random":
        rng = np.random.default_rng(seed)
        c = np.zeros((2,) + grid.shape)
        sl = (slice(None),) + (slice(0, min(4, grid.n)),) * grid.d
        c[sl] = rng.standard_normal(c[sl].shape)
        f = SpectralField(grid, c)
    elif sec.initial == "pure":
        q0 = sec.q0 or (summary.omega_max[0] if summary else None)
        if q0 is None:
            raise ConfigError("simulation.q0: needed for a pure profile when no mode grows")
        f = pure_mode_profile(grid, lin, q0)
    else:
        if summary is None:
            raise ConfigError("simulation.initial: 'mixed' needs a Turing-unstable model")
        f = mixed_profile(grid, lin, summary)
    return f.scaled(sec.amplitude / f.l2())


def cmd_simulate(cfg: io.RunConfig) -> int:
    system = io.build_system(cfg.model)
    lin = linearize(system)
    grid = Grid(cfg.grid.d, cfg.grid.n)
    summary = _summary_or_none(lin, grid.d)
    sec = cfg.simulation
    sim_cfg = SimulationConfig(grid=grid, dt=sec.dt, t_end=sec.t_end, scheme=sec.scheme, mode=sec.mode,
                               snapshot_stride=sec.snapshot_stride, dealias=sec.dealias)
    w0 = initial_field(grid, lin, summary, sec, cfg.seed)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    index = []

    def save(t, fld):
        if sec.snapshots:
            name = f"snapshot_{len(index):05d}.turf"
            io.write_snapshot(out / name, fld, t)
            index.append((len(index), t, name))

    dominant = summary.omega_max if summary else ()
    traj = Simulator(system, lin, sim_cfg).run(w0, dominant_modes=dominant, on_snapshot=save)
    io.write_csv(out / "diagnostics.csv", io.DIAGNOSTICS_HEADER, traj.diagnostics_rows())
    io.write_csv(out / "snapshots.csv", ("index", "t", "file"), index)
    io.write_csv(out / "final_coefficients.csv", io.coefficient_header(grid.d), io.coefficient_rows(traj.final))
    for w in traj.warnings:
        log.warning("%s", w)
    print(f"simulate: {len(traj.times)} snapshots, t_final = {traj.times[-1]!r}, status = {traj.status}")
    if not traj.ok:
        print(f"halted: {traj.reason}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _flag(name: str, ok: bool, detail: str) -> str:
    return f"{'PASS' if ok else 'FAIL'} {name}: {detail}"


def cmd_verify(cfg: io.RunConfig) -> int:
    system = io.build_system(cfg.model)
    lin = linearize(system)
    grid = Grid(cfg.grid.d, cfg.grid.n)
    summary = growing_mode_summary(lin, grid.d)
    e = cfg.experiment
    sim_cfg = SimulationConfig(grid=grid, dt=e.dt, t_end=0.0, scheme=e.scheme, mode="nonlinear")
    q0 = e.q0 or summary.omega_max[0]
    profiles = {"mixed": mixed_profile(grid, lin, summary), "pure": pure_mode_profile(grid, lin, q0)}
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = [f"model: {system.name}", f"theta: {e.theta!r}", f"deltas: {list(e.deltas)}",
             f"lambda_max: {summary.lambda_max!r}", f"nu: {summary.nu!r}"]
    flags = []
    numerical = False

    def experiment(profile, mode, tag):
        nonlocal numerical
        spec = ExperimentSpec(system, lin, profiles[profile], e.theta, e.deltas, e.epsilon_frac, e.samples)
        rep = run_theorem_experiment(spec, dataclasses.replace(sim_cfg, mode=mode), summary)
        io.write_csv(out / f"deviation_{tag}.csv", io.DEVIATION_HEADER, rep.rows())
        if not all(r.ok for r in rep.runs):
            numerical = True
        return rep

    rep = experiment(e.profile, "nonlinear", "nonlinear")
    res = scaling_study(rep)
    lines.append(f"per-delta max ratio: {list(res.window_max)}")
    flags.append(_flag("deviation_scaling", res.passed,
                       f"C_fit = {res.c_fit!r}, spread = {res.spread!r} (limit 3)"))

    if e.linear_check:
        lrep = experiment(e.profile, "linear_only", "linear")
        lres = scaling_study(lrep, linear=True)
        flags.append(_flag("linear_collapse", lres.passed,
                           f"C_fit = {lres.c_fit!r}, spread = {lres.spread!r}"))

    prep = rep if e.profile == "pure" else experiment("pure", "nonlinear", "pure")
    finals = [r.final_norm for r in prep.runs]
    flags.append(_flag("instability_flag", all(prep.instability_flags()),
                       f"||w(T)|| = {finals}, threshold {e.theta / 2!r}"))

    c1a = growth_bound_fit(lin, C1_TRIALS, d=grid.d, seed=cfg.seed, summary=summary)
    c1b = growth_bound_fit(lin, 2 * C1_TRIALS, d=grid.d, seed=cfg.seed, summary=summary)
    ok = math.isfinite(c1a) and c1a >= 1 and abs(c1b / c1a - 1) <= C1_STABILITY
    flags.append(_flag("growth_bound", ok, f"C1 = {c1a!r} ({C1_TRIALS} trials), {c1b!r} ({2 * C1_TRIALS} trials)"))
    try:
        lines.append(f"C2: {bootstrap_constant_c2(lin)!r}")
    except NonNegativeGv as exc:
        lines.append(f"C2: undefined ({exc})")

    text = "\n".join(lines + flags) + "\n"
    (out / "verify.txt").write_text(text)
    print(text, end="")
    if numerical:
        return EXIT_NUMERICAL
    return EXIT_OK if all(f.startswith("PASS") for f in flags) else EXIT_ACCEPTANCE


COMMANDS = {"analyze": cmd_analyze, "scan": cmd_scan, "simulate": cmd_simulate, "verify": cmd_verify}


# --------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="turing-lab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="TOML run configuration")
        s.add_argument("--out", help="output directory")
        s.add_argument("--seed", type=int, help="seed for randomized profiles and fits")
        s.add_argument("--model", help="built-in model name")
        s.add_argument("--grid-n", type=int, help="points per axis")
        s.add_argument("--dim", type=int, help="spatial dimension d")
        if name in ("simulate", "verify"):
            s.add_argument("--dt", type=float, help="time step (target step for verify)")
        if name == "simulate":
            s.add_argument("--t-end", type=float, help="final time")
        if name == "verify":
            s.add_argument("--delta", type=float, nargs="+", help="perturbation sizes")
            s.add_argument("--theta", type=float, help="escape threshold")
    return p


def apply_overrides(cfg: io.RunConfig, args: argparse.Namespace) -> io.RunConfig:
    cfg.command = args.command
    if args.out is not None:
        cfg.out = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if args.model is not None:
        cfg.model = io.ModelConfig(name=args.model, params=dict(cfg.model.params)
                                   if cfg.model.name == args.model else {})
    if args.grid_n is not None:
        cfg.grid.n = args.grid_n
    if args.dim is not None:
        cfg.grid.d = args.dim
    dt = getattr(args, "dt", None)
    if dt is not None:
        if args.command == "verify":
            cfg.experiment.dt = dt
        else:
            cfg.simulation.dt = dt
    if getattr(args, "t_end", None) is not None:
        cfg.simulation.t_end = args.t_end
    if getattr(args, "delta", None):
        cfg.experiment.deltas = tuple(sorted(set(args.delta), reverse=True))
    if getattr(args, "theta", None) is not None:
        cfg.experiment.theta = args.theta
    io.validate(cfg)
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = io.load_config(args.config) if args.config else io.RunConfig()
        cfg = apply_overrides(cfg, args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, AnalysisError, NoConvergence, DerivativeMismatch) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, DegenerateBasis) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except TuringLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
