"""Time integration of the perturbation system around the homogeneous steady state.

The right-hand side is split as ``dw/dt = L(w) + N(w)`` with

* ``L(w) = Dbar lap(w) + A w``, diagonal in the cosine basis up to a 2x2 block
  per mode, and
* ``N(w) = div((D(w + Wbar) - Dbar) grad w) + F(w + Wbar) - A w``.

The default scheme treats ``L`` with Crank-Nicolson (each mode's 2x2 system is
inverted in closed form) and ``N`` with second-order Adams-Bashforth, falling
back to forward Euler on the first step. ``N`` is evaluated pseudospectrally on
a grid zero-padded to ``2n`` points per axis.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, NonFinite, UnstableTimeStep, ValidityExceeded
from .kinetics import Linearization, ReactionSystem
from .spectral import (
    Grid,
    SpectralField,
    analyze,
    derivative_sine_coeffs,
    divergence_cos_coeffs,
    even_extension,
    evenness_defect,
    h2_norm,
    l2_norm,
    synthesize,
    truncate,
)

log = logging.getLogger(__name__)

SCHEMES = ("imex_cn_ab2", "explicit_rk4")
MODES = ("nonlinear", "linear_only")
BLOCKING_FRACTION = 0.01


@dataclass(frozen=True)
class SimulationConfig:
    grid: Grid
    dt: float
    t_end: float
    scheme: str = "imex_cn_ab2"
    mode: str = "nonlinear"
    snapshot_stride: int = 1
    dealias: bool = True
    check_dt: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise ConfigError(f"t_end must be non-negative, got {self.t_end}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if self.snapshot_stride < 1:
            raise ConfigError("snapshot_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        # tolerate t_end/dt landing a hair off an integer
        return int(math.floor(self.t_end / self.dt + 1e-9))


@dataclass
class Trajectory:
    """Snapshots every ``snapshot_stride`` steps plus per-step diagnostics.

    ``status`` is ``"ok"`` for a completed run, otherwise the name of the
    error that halted it; ``reason`` carries the message.
    """

    times: list[float] = field(default_factory=list)
    snapshots: list[SpectralField] = field(default_factory=list)
    diag_t: list[float] = field(default_factory=list)
    diag_l2: list[float] = field(default_factory=list)
    diag_h2: list[float] = field(default_factory=list)
    diag_max: list[float] = field(default_factory=list)
    diag_dominant: list[float] = field(default_factory=list)
    status: str = "ok"
    reason: str = ""
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def final(self) -> SpectralField:
        return self.snapshots[-1]

    def diagnostics_rows(self):
        return list(zip(self.diag_t, self.diag_l2, self.diag_h2, self.diag_max, self.diag_dominant))


class Simulator:
    """Holds the per-mode operators for one ``(system, lin, cfg)`` and advances states.

    The Adams-Bashforth history lives on the instance; call :meth:`reset`
    before reusing it for a new initial condition.
    """

    def __init__(self, system: ReactionSystem, lin: Linearization, cfg: SimulationConfig):
        self.system, self.lin, self.cfg = system, lin, cfg
        self.grid = cfg.grid
        self.wbar = np.array(system.steady_state if system.steady_state is not None else (0.0, 0.0))
        self.m = 2 * self.grid.n if cfg.dealias else self.grid.n
        q2 = self.grid.q2
        self._m11 = lin.a11 - lin.d1bar * q2
        self._m22 = lin.a22 - lin.d2bar * q2
        self._m12 = np.full_like(q2, lin.a12)
        self._m21 = np.full_like(q2, lin.a21)
        self._build_cn(cfg.dt)
        self._prev_n = None

    def reset(self):
        self._prev_n = None

    # -- operators ------------------------------------------------------------

    def _build_cn(self, dt):
        h = 0.5 * dt
        # P = I - h M, R = I + h M; store P^{-1} R and dt P^{-1}
        p11, p12, p21, p22 = 1 - h * self._m11, -h * self._m12, -h * self._m21, 1 - h * self._m22
        det = p11 * p22 - p12 * p21
        i11, i12, i21, i22 = p22 / det, -p12 / det, -p21 / det, p11 / det
        r11, r12, r21, r22 = 1 + h * self._m11, h * self._m12, h * self._m21, 1 + h * self._m22
        self._R = (i11 * r11 + i12 * r21, i11 * r12 + i12 * r22,
                   i21 * r11 + i22 * r21, i21 * r12 + i22 * r22)
        self._S = (dt * i11, dt * i12, dt * i21, dt * i22)

    @staticmethod
    def _apply(B, w):
        b11, b12, b21, b22 = B
        return np.stack([b11 * w[0] + b12 * w[1], b21 * w[0] + b22 * w[1]])

    def linear_rhs(self, w: np.ndarray) -> np.ndarray:
        return self._apply((self._m11, self._m12, self._m21, self._m22), w)

    def nonlinear_rhs(self, w: np.ndarray) -> np.ndarray:
        """Coefficients of ``N(w)``; identically zero in ``linear_only`` mode."""
        if self.cfg.mode == "linear_only":
            return np.zeros_like(w)
        n, m, d = self.grid.n, self.m, self.grid.d
        lin = self.lin
        vals = synthesize(w, m)
        U, V = vals[0] + self.wbar[0], vals[1] + self.wbar[1]
        f, g = self.system.reaction(U, V)
        react = np.stack([f - (lin.a11 * vals[0] + lin.a12 * vals[1]),
                          g - (lin.a21 * vals[0] + lin.a22 * vals[1])])
        out = truncate(analyze(react), n)

        dd = (self.system.D1(U, V) - lin.d1bar, self.system.D2(U, V) - lin.d2bar)
        for c in range(2):
            if not np.any(dd[c]):
                continue
            wc = truncate(w[c], m, component_axis=False) if m != n else w[c]
            for ax in range(d):
                ds = derivative_sine_coeffs(wc, ax, component_axis=False)
                grad = synthesize(ds, component_axis=False, sine_axis=ax)
                flux = analyze(dd[c] * grad, component_axis=False, sine_axis=ax)
                div = divergence_cos_coeffs(flux, ax, component_axis=False)
                out[c] += truncate(div, n, component_axis=False)
        return out

    def rhs(self, w):
        return self.linear_rhs(w) + self.nonlinear_rhs(w)

    # -- stepping -------------------------------------------------------------

    def dt_max(self, state: SpectralField) -> float:
        """Step-size ceiling ``0.5/|lambda_stiff|`` for the explicitly treated terms.

        For RK4 everything is explicit, so ``lambda_stiff`` is the largest
        eigenvalue modulus over the resolved band. For the IMEX scheme only
        ``N`` is explicit; its stiffness is bounded by the spectral radius of
        ``A`` plus the diffusivity variation at the initial state times the
        largest resolved ``q2``.
        """
        if self.cfg.scheme == "explicit_rk4":
            tr = self._m11 + self._m22
            det = self._m11 * self._m22 - self._m12 * self._m21
            disc = tr * tr - 4 * det + 0j
            lam = np.maximum(np.abs(0.5 * (tr + np.sqrt(disc))), np.abs(0.5 * (tr - np.sqrt(disc))))
            stiff = float(np.max(lam))
        else:
            stiff = float(np.max(np.abs(np.linalg.eigvals(self.lin.A))))
            if self.cfg.mode == "nonlinear":
                vals = state.values
                U, V = vals[0] + self.wbar[0], vals[1] + self.wbar[1]
                var = max(float(np.max(np.abs(self.system.D1(U, V) - self.lin.d1bar))),
                          float(np.max(np.abs(self.system.D2(U, V) - self.lin.d2bar))))
                stiff += var * float(np.max(self.grid.q2))
        return math.inf if stiff == 0 else 0.5 / stiff

    def check(self, w: np.ndarray, values: np.ndarray | None = None) -> float:
        if values is None:
            values = synthesize(w)
        mx = float(np.max(np.abs(values)))
        if not (np.all(np.isfinite(w)) and math.isfinite(mx)):
            raise NonFinite("state contains NaN or Inf")
        if mx > self.system.eta:
            raise ValidityExceeded(f"max |w| = {mx:.4g} exceeds validity radius eta = {self.system.eta}")
        return mx

    def advance(self, w: np.ndarray) -> np.ndarray:
        """One step on raw coefficients (no validity check)."""
        dt = self.cfg.dt
        if self.cfg.scheme == "explicit_rk4":
            k1 = self.rhs(w)
            k2 = self.rhs(w + 0.5 * dt * k1)
            k3 = self.rhs(w + 0.5 * dt * k2)
            k4 = self.rhs(w + dt * k3)
            return w + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        nl = self.nonlinear_rhs(w)
        ext = nl if self._prev_n is None else 1.5 * nl - 0.5 * self._prev_n
        self._prev_n = nl
        return self._apply(self._R, w) + self._apply(self._S, ext)

    def step(self, state: SpectralField) -> SpectralField:
        self.check(state.coeffs, state.values)
        w = self.advance(state.coeffs)
        if not np.all(np.isfinite(w)):
            raise NonFinite("step produced NaN or Inf")
        return SpectralField(self.grid, w)

    def run(self, initial: SpectralField, dominant_modes: Sequence[tuple[int, ...]] = (),
            on_snapshot: Callable[[float, SpectralField], None] | None = None,
            keep_snapshots: bool = True) -> Trajectory:
        """Integrate to ``t_end``; stop early (status set) on a numerical failure."""
        cfg = self.cfg
        if initial.grid != self.grid:
            raise ConfigError("initial field lives on a different grid")
        if cfg.check_dt:
            limit = self.dt_max(initial)
            if cfg.dt > limit:
                raise UnstableTimeStep(f"dt = {cfg.dt} exceeds the stability ceiling {limit:.4g} "
                                       f"for scheme {cfg.scheme}")
        self.reset()
        traj = Trajectory()
        dom_idx = tuple((slice(None),) + tuple(q) for q in dominant_modes)
        mu = self.grid.mu

        def record_diag(t, w, mx):
            traj.diag_t.append(t)
            traj.diag_l2.append(l2_norm(w))
            traj.diag_h2.append(h2_norm(w))
            traj.diag_max.append(mx)
            if dom_idx:
                amp = sum(float(mu[i[1:]] * np.sum(w[i] ** 2)) for i in dom_idx)
                traj.diag_dominant.append(math.sqrt(amp))
            else:
                traj.diag_dominant.append(math.nan)

        def record_snap(t, w):
            fld = SpectralField(self.grid, w)
            if keep_snapshots:
                traj.times.append(t)
                traj.snapshots.append(fld)
            if on_snapshot is not None:
                on_snapshot(t, fld)
            self._blocking_check(w, t, traj)

        w = np.array(initial.coeffs)
        steps = cfg.n_steps
        try:
            mx = self.check(w)
            record_diag(0.0, w, mx)
            record_snap(0.0, w)
            for i in range(1, steps + 1):
                w = self.advance(w)
                t = i * cfg.dt
                mx = self.check(w)
                record_diag(t, w, mx)
                if i % cfg.snapshot_stride == 0 or i == steps:
                    record_snap(t, w)
        except (NonFinite, ValidityExceeded) as exc:
            traj.status = type(exc).__name__
            traj.reason = str(exc)
            log.warning("run halted at t=%.6g: %s", traj.diag_t[-1] if traj.diag_t else 0.0, exc)
        return traj

    def _blocking_check(self, w, t, traj):
        n = self.grid.n
        cut = math.ceil(2 * n / 3)
        energy = self.grid.mu * (w[0] ** 2 + w[1] ** 2)
        total = float(np.sum(energy))
        if total == 0:
            return
        top = np.zeros(self.grid.shape, dtype=bool)
        for ax in range(self.grid.d):
            sl = [slice(None)] * self.grid.d
            sl[ax] = slice(cut, None)
            top[tuple(sl)] = True
        frac = float(np.sum(energy[top])) / total
        if frac >= BLOCKING_FRACTION and not traj.warnings:
            msg = f"t={t:.4g}: top third of modes holds {100 * frac:.2f}% of the energy; increase n"
            traj.warnings.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=3)


def step(state: SpectralField, lin: Linearization, system: ReactionSystem, cfg: SimulationConfig) -> SpectralField:
    """Advance ``state`` by one ``cfg.dt`` (first-step form: forward Euler on ``N``)."""
    return Simulator(system, lin, cfg).step(state)


def run(initial: SpectralField, lin: Linearization, system: ReactionSystem, cfg: SimulationConfig,
        **kw) -> Trajectory:
    return Simulator(system, lin, cfg).run(initial, **kw)


def evenness_check(state) -> float:
    """Largest deviation from evenness of the doubled-box extension.

    ``state`` is a :class:`SpectralField`, whose extension is rebuilt by FFT,
    or an array already sampled on the doubled box ``(2,) + (2n,)*d``.
    """
    if isinstance(state, SpectralField):
        return evenness_defect(even_extension(state))
    return evenness_defect(np.asarray(state))
