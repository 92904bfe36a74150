"""Numerical check that small perturbations follow their fastest linear modes until escape.

A perturbation ``delta * w0`` of the steady state is integrated up to the
escape time ``T = ln(theta/delta) / lambda_max``. Along the way its distance
from the dominant-mode prediction

    delta * exp(lambda_max t) * sum_{q in Omega_max} w_q^+ r_+(q) e_q

is compared with the envelope

    (exp(-nu t) + delta ||w0||_H2^2 + delta exp(lambda_max t)) * delta exp(lambda_max t).

The ratio of the two should stay bounded, uniformly in ``delta``, on the
window ``[eps T, T]``.
"""
from __future__ import annotations

import dataclasses
import itertools
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BadOrder, ConfigError, InsufficientData, NonNegativeGv, NumericalFailure
from .kinetics import Linearization, ReactionSystem
from .linear_analysis import GENERIC, GrowingModeSummary, ModeSpectrum, dispersion_eigen, growing_mode_summary
from .simulator import SimulationConfig, Simulator
from .spectral import (
    EigenCoordinates,
    Grid,
    SpectralField,
    eigen_decompose,
    h2_norm,
    l2_norm,
    linear_propagate,
    mode_field,
)

log = logging.getLogger(__name__)

THETA = 0.1
EPSILON_FRAC = 0.25
DELTAS = (1e-3, 1e-4, 1e-5)
SAMPLES = 200
SPREAD_LIMIT = 3.0


def escape_time(delta: float, theta: float, lambda_max: float) -> float:
    """``ln(theta/delta) / lambda_max``: when ``delta exp(lambda_max t)`` reaches ``theta``."""
    if not lambda_max > 0:
        raise ValueError("lambda_max must be positive")
    if not delta > 0:
        raise ValueError("delta must be positive")
    if delta > theta:
        raise BadOrder(f"delta = {delta} exceeds theta = {theta}")
    return math.log(theta / delta) / lambda_max


def bootstrap_constant_c2(lin: Linearization) -> float:
    """``((f_v + g_u)^2 / (2|g_v|) + f_u)^3 / D1^2``, the constant of the H2 energy estimate."""
    if lin.a22 >= 0:
        raise NonNegativeGv(f"g_v = {lin.a22} must be negative")
    return ((lin.a12 + lin.a21) ** 2 / (2 * abs(lin.a22)) + lin.a11) ** 3 / lin.d1bar ** 2


# --------------------------------------------------------------------------
# profiles and the dominant-mode prediction


def dominant_mode_prediction(coords: EigenCoordinates, summary: GrowingModeSummary, t: float) -> np.ndarray:
    """Keep only ``w_q^+ r_+(q)`` for ``q`` in ``Omega_max`` and grow it at ``lambda_max``."""
    spec = coords.spectrum
    out = np.zeros((2,) + spec.q2.shape)
    growth = math.exp(summary.lambda_max * t)
    for q in summary.omega_max:
        i = tuple(q)
        if len(i) != spec.q2.ndim:
            raise ConfigError("summary dimension does not match the coordinates")
        if spec.kind[i] != GENERIC:
            raise ConfigError(f"maximal mode {q} is not generic")
        out[(slice(None),) + i] = coords.c2[i] * spec.basis2[(slice(None),) + i] * growth
    return out


def pure_mode_profile(grid: Grid, lin: Linearization, q0) -> SpectralField:
    """``r_+(q0) e_{q0}`` scaled to unit L2 norm on the box."""
    e = dispersion_eigen(lin, q0)
    f = mode_field(grid, e.q, e.r_plus)
    return f.scaled(1.0 / f.l2())


def mixed_profile(grid: Grid, lin: Linearization, summary: GrowingModeSummary,
                  weight: float = 0.1) -> SpectralField:
    """Unit-L2 profile led by ``r_+`` of the first maximal mode, plus ``weight``-sized components elsewhere.

    The extra components sit on ``q = 0``, on ``r_-`` of the same maximal mode,
    and on the neighbours ``2 q0`` and ``3 q0`` along the first axis (when
    resolved), so every eigen-direction class that matters to the deviation
    is populated.
    """
    q0 = summary.omega_max[0]
    e0 = dispersion_eigen(lin, q0)
    c = np.zeros((2,) + grid.shape)
    c[(slice(None),) + tuple(q0)] = e0.r_plus / np.linalg.norm(e0.r_plus)
    c[(slice(None),) + tuple(q0)] += weight * e0.r_minus / np.linalg.norm(e0.r_minus)
    c[(slice(None),) + (0,) * grid.d] += weight * np.array([1.0, 1.0])
    for k, vec in ((2, (1.0, -1.0)), (3, (0.5, 1.0))):
        qk = (k * max(q0[0], 1),) + tuple(q0[1:])
        if max(qk) < grid.n // 2:
            c[(slice(None),) + qk] += weight * np.array(vec)
    f = SpectralField(grid, c)
    return f.scaled(1.0 / f.l2())


# --------------------------------------------------------------------------
# the experiment


@dataclass(frozen=True)
class ExperimentSpec:
    system: ReactionSystem
    lin: Linearization
    w0: SpectralField
    theta: float = THETA
    deltas: tuple[float, ...] = DELTAS
    epsilon_frac: float = EPSILON_FRAC
    samples: int = SAMPLES

    def __post_init__(self):
        object.__setattr__(self, "deltas", tuple(float(x) for x in self.deltas))
        if abs(self.w0.l2() - 1.0) > 1e-10:
            raise ConfigError(f"w0 must have unit L2 norm, got {self.w0.l2():.12g}")
        if not 0 < self.theta < 1:
            raise ConfigError("theta must lie in (0, 1)")
        if not 0 < self.epsilon_frac < 1:
            raise ConfigError("epsilon_frac must lie in (0, 1)")
        if any(b >= a for a, b in zip(self.deltas, self.deltas[1:])):
            raise ConfigError("deltas must be strictly decreasing")
        if any(not d > 0 for d in self.deltas):
            raise ConfigError("deltas must be positive")
        for d in self.deltas:
            if d > self.theta:
                raise BadOrder(f"delta = {d} exceeds theta = {self.theta}")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")


@dataclass
class DeltaRun:
    """Deviation series for one ``delta``; arrays are aligned with ``t``."""

    delta: float
    escape_time: float
    t: np.ndarray
    dev: np.ndarray
    bound: np.ndarray
    linear_bound: np.ndarray
    l2: np.ndarray
    h2: np.ndarray
    final_norm: float
    status: str = "ok"
    reason: str = ""

    @property
    def ratio(self) -> np.ndarray:
        return self.dev / self.bound

    @property
    def linear_ratio(self) -> np.ndarray:
        return self.dev / self.linear_bound

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class DeviationReport:
    theta: float
    lambda_max: float
    nu: float
    w0_h2: float
    epsilon_frac: float
    mode: str
    runs: list[DeltaRun] = field(default_factory=list)

    def window(self, run: DeltaRun) -> np.ndarray:
        return run.t >= self.epsilon_frac * run.escape_time - 1e-12

    def instability_flags(self) -> list[bool]:
        return [r.ok and r.final_norm >= self.theta / 2 for r in self.runs]

    def rows(self):
        """CSV rows ``(delta, t, dev, bound, ratio, l2, h2)``."""
        out = []
        for r in self.runs:
            ratio = r.ratio
            for i in range(len(r.t)):
                out.append((r.delta, r.t[i], r.dev[i], r.bound[i], ratio[i], r.l2[i], r.h2[i]))
        return out


def _sample_plan(T: float, dt: float, samples: int) -> tuple[int, float, int]:
    """Steps, step size and snapshot stride giving ``samples`` equal intervals on ``[0, T]``."""
    if T == 0:
        return 0, dt, 1
    per = max(1, math.ceil(T / (dt * samples)))
    steps = per * samples
    return steps, T / steps, per


def _run_one(spec: ExperimentSpec, summary: GrowingModeSummary, cfg: SimulationConfig, delta: float) -> DeltaRun:
    lam, nu = summary.lambda_max, summary.nu
    grid = spec.w0.grid
    w0_h2 = h2_norm(spec.w0.coeffs)
    T = escape_time(delta, spec.theta, lam)
    steps, dt, stride = _sample_plan(T, cfg.dt, spec.samples)
    run_cfg = dataclasses.replace(cfg, grid=grid, dt=dt, t_end=steps * dt, snapshot_stride=stride)

    spectrum = grid.spectrum(spec.lin)
    coords = eigen_decompose(spec.w0.coeffs, spectrum)
    dom0 = dominant_mode_prediction(coords, summary, 0.0)

    ts, devs, l2s, h2s = [], [], [], []
    final = [math.nan]

    def record(t, full, dev):
        ts.append(t)
        devs.append(dev)
        l2s.append(l2_norm(full))
        h2s.append(h2_norm(full))
        final[0] = l2s[-1]

    status, reason = "ok", ""
    if cfg.mode == "linear_only":
        # Without N the solution is exp(Lt) delta w0 exactly. Dropping the
        # dominant coordinates before propagating keeps the remainder free of
        # the roundoff leakage a time stepper would amplify by exp(lambda T).
        rest = EigenCoordinates(spectrum, coords.c1.copy(), coords.c2.copy())
        for q in summary.omega_max:
            rest.c2[tuple(q)] = 0.0
        rest = rest.scaled(delta)
        for t in np.linspace(0.0, T, spec.samples + 1 if T > 0 else 1):
            r = linear_propagate(rest, float(t))
            record(float(t), r + delta * math.exp(lam * t) * dom0, l2_norm(r))
    else:
        def observe(t, fld):
            pred = delta * math.exp(lam * t) * dom0
            record(t, fld.coeffs, l2_norm(fld.coeffs - pred))

        sim = Simulator(spec.system, spec.lin, run_cfg)
        try:
            traj = sim.run(spec.w0.scaled(delta), on_snapshot=observe, keep_snapshots=False)
            status, reason = traj.status, traj.reason
        except NumericalFailure as exc:
            status, reason = type(exc).__name__, str(exc)

    t = np.array(ts)
    growth = delta * np.exp(lam * t)
    decay = np.exp(-nu * t)
    bound = (decay + delta * w0_h2 ** 2 + growth) * growth
    return DeltaRun(delta, T, t, np.array(devs), bound, decay * growth, np.array(l2s), np.array(h2s),
                    final[0] if status == "ok" else math.nan, status, reason)


def _workers(n_tasks: int) -> int:
    cap = os.environ.get("TURING_LAB_THREADS")
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = min(limit, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"TURING_LAB_THREADS must be an integer, got {cap!r}") from None
    return max(1, min(limit, n_tasks))


def run_theorem_experiment(spec: ExperimentSpec, cfg: SimulationConfig,
                           summary: GrowingModeSummary | None = None) -> DeviationReport:
    """Simulate ``delta * w0`` up to the escape time for every ``delta`` and measure the deviation.

    ``cfg`` supplies the scheme, mode and target step; ``dt`` is shrunk so
    that ``samples`` snapshots fall evenly on ``[0, T]``. A numerical failure
    for one ``delta`` is recorded in its run and does not stop the sweep. In
    ``linear_only`` mode the deviation is computed from the non-dominant
    remainder of the data by the exact propagator instead of the time stepper.
    """
    if summary is None:
        summary = growing_mode_summary(spec.lin, spec.w0.grid.d)
    report = DeviationReport(spec.theta, summary.lambda_max, summary.nu, h2_norm(spec.w0.coeffs),
                             spec.epsilon_frac, cfg.mode)
    workers = _workers(len(spec.deltas))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_one, spec, summary, cfg, d) for d in spec.deltas]
            report.runs = [f.result() for f in futures]
    else:
        report.runs = [_run_one(spec, summary, cfg, d) for d in spec.deltas]
    for r in report.runs:
        if not r.ok:
            log.warning("[delta=%g] %s: %s", r.delta, r.status, r.reason)
    return report


# --------------------------------------------------------------------------
# scaling study


@dataclass(frozen=True)
class ScalingResult:
    deltas: tuple[float, ...]
    window_max: tuple[float, ...]
    c_fit: float
    spread: float
    dev_at_escape: tuple[float, ...]
    envelope: tuple[float, ...]
    dev_monotone: bool
    passed: bool


def scaling_study(report: DeviationReport, *, linear: bool = False, spread_limit: float = SPREAD_LIMIT) -> ScalingResult:
    """Fit ``C`` as the largest window ratio and test its stability across ``delta``.

    With ``linear=True`` the ratio is taken against ``exp(-nu t) delta
    exp(lambda_max t)`` alone.

    Raises
    ------
    InsufficientData
        Fewer than three completed runs, or deltas spanning under two decades.
    """
    runs = [r for r in report.runs if r.ok and len(r.t)]
    if len(runs) < 3:
        raise InsufficientData(f"need at least 3 completed runs, have {len(runs)}")
    ds = [r.delta for r in runs]
    if math.log10(max(ds) / min(ds)) < 2 - 1e-12:
        raise InsufficientData("deltas must span at least two decades")

    maxima = []
    for r in runs:
        ratio = r.linear_ratio if linear else r.ratio
        maxima.append(float(np.max(ratio[report.window(r)])))
    finite = all(math.isfinite(m) for m in maxima)
    c_fit = max(maxima)
    if c_fit == 0:
        spread = 1.0
    else:
        spread = c_fit / min(maxima) if min(maxima) > 0 else math.inf
    dev_end = tuple(float(r.dev[-1]) for r in runs)
    env = tuple(d ** (report.nu / report.lambda_max) + report.theta ** 2 for d in ds)
    order = np.argsort(ds)[::-1]
    ends = np.array(dev_end)[order]
    monotone = bool(np.all(np.diff(ends) <= 1e-12 * np.max(np.abs(ends))))
    return ScalingResult(tuple(ds), tuple(maxima), c_fit, spread, dev_end, env, monotone,
                         finite and spread <= spread_limit)


# --------------------------------------------------------------------------
# linear growth constant


def growth_bound_fit(lin: Linearization, trials: int = 100, *, d: int = 1, band: int = 4,
                     t_grid: Sequence[float] | None = None, seed: int = 0,
                     initial: Sequence[SpectralField] | None = None,
                     summary: GrowingModeSummary | None = None) -> float:
    """Largest ``||exp(L t) w0|| / exp(lambda_max t)`` over unit-L2 initial data and a time grid.

    ``L`` acts on each cosine mode separately, so the supremum over all data
    equals the supremum over data carried by a single mode. Each random trial
    is therefore one mode drawn uniformly from ``q_i < band`` with a uniformly
    distributed direction in the ``(u, v)`` plane. Pass ``initial`` to use
    given fields instead (each is normalised first).

    Returns
    -------
    float
        The fitted constant; at least 1 whenever ``t = 0`` is in the grid.
    """
    if summary is None:
        summary = growing_mode_summary(lin, d)
    lam = summary.lambda_max
    t_grid = np.linspace(0.0, 30.0, 301) if t_grid is None else np.asarray(t_grid, dtype=float)
    if np.any(t_grid < 0):
        raise ValueError("times must be non-negative")

    best = 0.0
    if initial is not None:
        for f in initial:
            c = f.coeffs / f.l2()
            coords = eigen_decompose(c, f.grid.spectrum(lin))
            for t in t_grid:
                best = max(best, l2_norm(linear_propagate(coords, float(t))) * math.exp(-lam * t))
        return best

    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    modes = np.array(list(itertools.product(range(band), repeat=d)))
    q = modes[rng.integers(len(modes), size=trials)]
    phi = rng.uniform(0.0, 2 * np.pi, size=trials)
    vecs = np.stack([np.cos(phi), np.sin(phi)])
    coords = eigen_decompose(vecs, ModeSpectrum.build(lin, np.sum(q ** 2, axis=1)))
    for t in t_grid:
        growth = np.linalg.norm(linear_propagate(coords, float(t)), axis=0)
        best = max(best, float(np.max(growth)) * math.exp(-lam * t))
    return best
