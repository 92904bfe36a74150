"""Cosine-basis representation of Neumann fields on the box (0, pi)^d.

Fields are sampled at the midpoints ``x_j = pi (j + 1/2) / n``. On these nodes
the family ``cos(q x)``, ``0 <= q < n``, is discretely orthogonal, so analysis
is a scaled DCT-II and synthesis a DCT-III. Derivatives of cosine series are
sine series, handled by the matching DST-II/DST-III pair; together they make
up the even-extension machinery the simulator uses.

Coefficient arrays have shape ``(2,) + (n,) * d``: component first
(``u`` then ``v``), then one axis per space dimension indexed by ``q_i``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .errors import DegenerateBasis
from .linear_analysis import COMPLEX, DEFECTIVE, GENERIC, ModeSpectrum
from .kinetics import Linearization


@dataclass(frozen=True)
class Grid:
    d: int
    n: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.n < 4 or self.n & (self.n - 1):
            raise ValueError(f"points per axis must be a power of two >= 4, got {self.n}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def nodes(self) -> np.ndarray:
        return np.pi * (np.arange(self.n) + 0.5) / self.n

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*([self.nodes] * self.d), indexing="ij")

    @functools.cached_property
    def q2(self) -> np.ndarray:
        q = np.arange(self.n, dtype=float)
        return functools.reduce(np.add.outer, [q * q] * self.d) if self.d > 1 else q * q

    @functools.cached_property
    def mu(self) -> np.ndarray:
        return parseval_weights(self.shape)

    def spectrum(self, lin: Linearization) -> ModeSpectrum:
        return ModeSpectrum.build(lin, self.q2)


def parseval_weights(shape: tuple[int, ...]) -> np.ndarray:
    """``mu_q = prod_i (pi if q_i == 0 else pi/2)`` so that ``||w||^2 = sum mu_q |w_q|^2``."""
    out = np.ones(shape)
    for ax, n in enumerate(shape):
        w = np.full(n, np.pi / 2)
        w[0] = np.pi
        sl = [None] * len(shape)
        sl[ax] = slice(None)
        out = out * w[tuple(sl)]
    return out


def wave_numbers(shape: tuple[int, ...]) -> np.ndarray:
    """``q2`` for every entry of a coefficient layout with the given spatial shape."""
    out = np.zeros(shape)
    for ax, n in enumerate(shape):
        sl = [None] * len(shape)
        sl[ax] = slice(None)
        out = out + (np.arange(n, dtype=float) ** 2)[tuple(sl)]
    return out


# --------------------------------------------------------------------------
# one-axis transforms


def _resize(a: np.ndarray, axis: int, m: int) -> np.ndarray:
    n = a.shape[axis]
    if m == n:
        return a
    if m < n:
        return np.take(a, np.arange(m), axis=axis)
    pad = [(0, 0)] * a.ndim
    pad[axis] = (0, m - n)
    return np.pad(a, pad)


def _axis_scale(n: int, axis: int, ndim: int, first: float, rest: float, last: float | None = None):
    s = np.full(n, rest)
    s[0] = first
    if last is not None:
        s[-1] = last
    sh = [1] * ndim
    sh[axis] = n
    return s.reshape(sh)


def cos_analyze(x: np.ndarray, axis: int) -> np.ndarray:
    n = x.shape[axis]
    return sfft.dct(x, type=2, axis=axis) * _axis_scale(n, axis, x.ndim, 0.5 / n, 1.0 / n)


def cos_synthesize(c: np.ndarray, axis: int, m: int | None = None) -> np.ndarray:
    c = _resize(c, axis, m or c.shape[axis])
    n = c.shape[axis]
    return sfft.dct(c * _axis_scale(n, axis, c.ndim, 1.0, 0.5), type=3, axis=axis)


def sin_analyze(x: np.ndarray, axis: int) -> np.ndarray:
    """Coefficients of ``sin(q x)``, ``q = 1..n``; entry ``j`` holds ``q = j + 1``."""
    n = x.shape[axis]
    return sfft.dst(x, type=2, axis=axis) * _axis_scale(n, axis, x.ndim, 1.0 / n, 1.0 / n, 0.5 / n)


def sin_synthesize(s: np.ndarray, axis: int, m: int | None = None) -> np.ndarray:
    s = _resize(s, axis, m or s.shape[axis])
    n = s.shape[axis]
    return sfft.dst(s * _axis_scale(n, axis, s.ndim, 0.5, 0.5, 1.0), type=3, axis=axis)


def _spatial_axes(a: np.ndarray, component_axis: bool) -> range:
    return range(1, a.ndim) if component_axis else range(a.ndim)


def analyze(values: np.ndarray, *, component_axis: bool = True, sine_axis: int | None = None) -> np.ndarray:
    """Cosine coefficients of midpoint samples.

    ``w_q = (prod_i c_{q_i} / n^d) sum_j values(x_j) e_q(x_j)`` with
    ``c_0 = 1`` and ``c_q = 2`` otherwise. If ``sine_axis`` is given, that
    spatial axis is expanded in ``sin(q x)``, ``q = 1..n``, instead.
    """
    out = np.asarray(values, dtype=float)
    for k, ax in enumerate(_spatial_axes(out, component_axis)):
        out = sin_analyze(out, ax) if k == sine_axis else cos_analyze(out, ax)
    return out


def synthesize(coeffs: np.ndarray, m: int | None = None, *, component_axis: bool = True,
               sine_axis: int | None = None) -> np.ndarray:
    """Evaluate a cosine series on the midpoint grid with ``m`` points per axis (default: as many as coefficients)."""
    out = np.asarray(coeffs, dtype=float)
    for k, ax in enumerate(_spatial_axes(out, component_axis)):
        out = sin_synthesize(out, ax, m) if k == sine_axis else cos_synthesize(out, ax, m)
    return out


def truncate(coeffs: np.ndarray, n: int, *, component_axis: bool = True) -> np.ndarray:
    out = coeffs
    for ax in _spatial_axes(coeffs, component_axis):
        out = _resize(out, ax, n)
    return out


def derivative_sine_coeffs(coeffs: np.ndarray, axis: int, *, component_axis: bool = True) -> np.ndarray:
    """Sine coefficients of ``d/dx_axis`` of a cosine series (same length, last entry ``q = n`` is zero)."""
    ax = axis + 1 if component_axis else axis
    n = coeffs.shape[ax]
    q = np.arange(n, dtype=float)
    sh = [1] * coeffs.ndim
    sh[ax] = n
    shifted = np.roll(coeffs * (-q).reshape(sh), -1, axis=ax)
    idx = [slice(None)] * coeffs.ndim
    idx[ax] = n - 1
    shifted[tuple(idx)] = 0.0
    return shifted


def divergence_cos_coeffs(sine_coeffs: np.ndarray, axis: int, *, component_axis: bool = True) -> np.ndarray:
    """Cosine coefficients of ``d/dx_axis`` of a sine series ``sum s_q sin(q x)``; the ``q = n`` term is dropped."""
    ax = axis + 1 if component_axis else axis
    n = sine_coeffs.shape[ax]
    q = np.arange(1, n + 1, dtype=float)
    sh = [1] * sine_coeffs.ndim
    sh[ax] = n
    out = np.roll(sine_coeffs * q.reshape(sh), 1, axis=ax)
    idx = [slice(None)] * sine_coeffs.ndim
    idx[ax] = 0
    out[tuple(idx)] = 0.0
    return out


def laplacian(coeffs: np.ndarray) -> np.ndarray:
    return -wave_numbers(coeffs.shape[1:]) * coeffs


# --------------------------------------------------------------------------
# fields


@dataclass(frozen=True)
class SpectralField:
    """Two-component Neumann field, held as cosine coefficients; samples are derived on demand."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (2,) + self.grid.shape:
            raise ValueError(f"coefficient shape {c.shape} does not match grid {(2,) + self.grid.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_values(cls, grid: Grid, values) -> "SpectralField":
        values = np.asarray(values, dtype=float)
        if values.shape != (2,) + grid.shape:
            raise ValueError(f"value shape {values.shape} does not match grid {(2,) + grid.shape}")
        return cls(grid, analyze(values))

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralField":
        return cls(grid, np.zeros((2,) + grid.shape))

    @functools.cached_property
    def values(self) -> np.ndarray:
        v = synthesize(self.coeffs)
        v.setflags(write=False)
        return v

    @property
    def u(self) -> np.ndarray:
        return self.values[0]

    @property
    def v(self) -> np.ndarray:
        return self.values[1]

    def l2(self) -> float:
        return l2_norm(self.coeffs)

    def h2(self) -> float:
        return h2_norm(self.coeffs)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def scaled(self, a: float) -> "SpectralField":
        return SpectralField(self.grid, a * self.coeffs)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs - other.coeffs)


def mode_field(grid: Grid, q, vector, amplitude: float = 1.0) -> SpectralField:
    """``amplitude * vector * e_q``."""
    q = (q,) if np.isscalar(q) else tuple(q)
    c = np.zeros((2,) + grid.shape)
    c[(slice(None),) + q] = amplitude * np.asarray(vector, dtype=float)
    return SpectralField(grid, c)


def l2_norm(coeffs: np.ndarray) -> float:
    c = np.asarray(coeffs)
    return math.sqrt(float(np.sum(parseval_weights(c.shape[1:]) * (c[0] ** 2 + c[1] ** 2))))


def h2_norm(coeffs: np.ndarray) -> float:
    """Parseval norm with weight ``mu_q (1 + q2 + q2^2)``."""
    c = np.asarray(coeffs)
    q2 = wave_numbers(c.shape[1:])
    w = parseval_weights(c.shape[1:]) * (1 + q2 + q2 * q2)
    return math.sqrt(float(np.sum(w * (c[0] ** 2 + c[1] ** 2))))


def grid_l2_norm(values: np.ndarray) -> float:
    """Midpoint-rule L2 norm of samples with shape ``(2,) + (n,)*d``."""
    v = np.asarray(values)
    d = v.ndim - 1
    n = v.shape[1]
    return math.sqrt(float((np.pi / n) ** d * np.sum(v * v)))


# --------------------------------------------------------------------------
# eigen coordinates and the exact linear propagator


@dataclass(frozen=True)
class EigenCoordinates:
    """Per-mode coordinates in the eigenbasis: ``(w-, w+)``, ``(w, w')`` or ``(w_Re, w_Im)``."""

    spectrum: ModeSpectrum
    c1: np.ndarray
    c2: np.ndarray

    @property
    def plus(self) -> np.ndarray:
        return self.c2

    @property
    def minus(self) -> np.ndarray:
        return self.c1

    def scaled(self, a: float) -> "EigenCoordinates":
        return EigenCoordinates(self.spectrum, a * self.c1, a * self.c2)


DET_FLOOR = 1e-14


def eigen_decompose(coeffs: np.ndarray, spectrum: ModeSpectrum) -> EigenCoordinates:
    """Solve ``w_q = c1 basis1 + c2 basis2`` for every mode by Cramer's rule.

    For generic modes the determinant is ``(lam+ - lam-)/f_v``, so it stays
    away from zero for large ``q``.
    """
    c = np.asarray(coeffs, dtype=float)
    if c.shape != (2,) + spectrum.q2.shape:
        raise ValueError(f"coefficients {c.shape} do not match spectrum {spectrum.q2.shape}")
    b1, b2 = spectrum.basis1, spectrum.basis2
    det = b1[0] * b2[1] - b1[1] * b2[0]
    if np.any(np.abs(det) < DET_FLOOR):
        bad = np.argwhere(np.abs(det) < DET_FLOOR)[0]
        raise DegenerateBasis(f"eigenbasis determinant {det[tuple(bad)]:.3e} at mode {tuple(bad)}")
    c1 = (c[0] * b2[1] - c[1] * b2[0]) / det
    c2 = (b1[0] * c[1] - b1[1] * c[0]) / det
    return EigenCoordinates(spectrum, c1, c2)


def recompose(coords: EigenCoordinates) -> np.ndarray:
    s = coords.spectrum
    return coords.c1 * s.basis1 + coords.c2 * s.basis2


def linear_propagate(coords: EigenCoordinates, t: float) -> np.ndarray:
    """Coefficients of ``exp(L t) w`` from eigen coordinates, mode by mode, in real arithmetic."""
    if t < 0:
        raise ValueError("t must be non-negative")
    s = coords.spectrum
    c1, c2 = coords.c1, coords.c2
    b1, b2 = s.basis1, s.basis2
    out = np.zeros((2,) + s.q2.shape)

    g = s.kind == GENERIC
    if np.any(g):
        out[:, g] = (c1[g] * np.exp(s.lam_minus[g] * t) * b1[:, g]
                     + c2[g] * np.exp(s.lam_plus[g] * t) * b2[:, g])
    dm = s.kind == DEFECTIVE
    if np.any(dm):
        e = np.exp(s.lam_plus[dm] * t)
        out[:, dm] = ((c1[dm] * b1[:, dm] + c2[dm] * b2[:, dm]) + c2[dm] * b1[:, dm] * t) * e
    cm = s.kind == COMPLEX
    if np.any(cm):
        ph = s.imag[cm] * t
        co, si = np.cos(ph), np.sin(ph)
        e = np.exp(s.lam_plus[cm] * t)
        re_r, im_r = b1[:, cm], b2[:, cm]
        out[:, cm] = (c1[cm] * (re_r * co - im_r * si) + c2[cm] * (re_r * si + im_r * co)) * e
    return out


def propagate_field(field: SpectralField, lin: Linearization, t: float) -> SpectralField:
    spec = field.grid.spectrum(lin)
    return SpectralField(field.grid, linear_propagate(eigen_decompose(field.coeffs, spec), t))


# --------------------------------------------------------------------------
# even extension


def extended_nodes(n: int) -> np.ndarray:
    """Midpoint nodes of the doubled periodic box ``(-pi, pi)``: mirror images of the ``(0, pi)`` nodes."""
    x = np.pi * (np.arange(n) + 0.5) / n
    return np.concatenate([-x[::-1], x])


def even_extension(field: SpectralField) -> np.ndarray:
    """Samples of the field on the doubled box ``(-pi, pi)^d``, evaluated by periodic FFT synthesis.

    The cosine coefficients are placed symmetrically in a full Fourier
    spectrum of period ``2 pi`` and transformed back with an inverse FFT; the
    result is not forced to be even, which is what :func:`evenness_defect`
    inspects.
    """
    grid = field.grid
    n, d = grid.n, grid.d
    N = 2 * n
    # cos(q x) = (exp(iqx) + exp(-iqx))/2, applied axis by axis
    spec = field.coeffs.astype(complex)
    for ax in range(1, d + 1):
        full = np.zeros(spec.shape[:ax] + (N,) + spec.shape[ax + 1:], dtype=complex)
        src = np.moveaxis(spec, ax, 0)
        dst = np.moveaxis(full, ax, 0)
        dst[0] = src[0]
        dst[1:n] = 0.5 * src[1:n]
        dst[N - 1:n:-1] = 0.5 * src[1:n]
        spec = full
    # sample at y_j = -pi + pi (j + 1/2)/n  -> phase shift of the DFT grid
    y0 = -np.pi + np.pi * 0.5 / n
    k = np.fft.fftfreq(N, 1.0 / N)
    for ax in range(1, d + 1):
        sh = [1] * (d + 1)
        sh[ax] = N
        spec = spec * np.exp(1j * k * y0).reshape(sh)
    vals = np.fft.ifftn(spec, axes=tuple(range(1, d + 1))) * N ** d
    return vals.real


def evenness_defect(extended: np.ndarray) -> float:
    """Largest ``|w(x) - w(x reflected in one axis)|`` over samples on the doubled box."""
    e = np.asarray(extended)
    worst = 0.0
    for ax in range(1, e.ndim):
        worst = max(worst, float(np.max(np.abs(e - np.flip(e, axis=ax)))))
    return worst
