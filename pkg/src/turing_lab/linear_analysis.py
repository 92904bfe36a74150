"""Dispersion relation and Turing-instability analysis for Neumann cosine modes.

For a wave index ``q`` with ``q2 = sum(q_i**2)`` the linearized system acts on
the coefficient ``w_q`` through the 2x2 block

    M(q2) = A - q2 * diag(D1, D2)

whose eigenvalues solve ``lam**2 - tr(M) lam + det(M) = 0``. Every mode falls
into one of three classes: two distinct real roots (generic), a repeated real
root with a single eigenvector (defective) or a complex-conjugate pair.

All root computations go through :func:`_block_eigen`, which is vectorized over
``q2`` so the same code serves a single mode and a whole grid band.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import EqualDiffusivities, NoTuringInstability, NotRestStable, ZeroFv
from .kinetics import Linearization

GENERIC, DEFECTIVE, COMPLEX = 0, 1, 2
KIND_NAMES = {GENERIC: "generic", DEFECTIVE: "defective", COMPLEX: "complex"}

EPS_DISC = 1e-12
EPS_MAX = 1e-9


# --------------------------------------------------------------------------
# scalar criteria


def rest_state_stable(lin: Linearization) -> bool:
    """Kinetics alone are stable: ``tr A < 0`` and ``det A > 0``."""
    return lin.trace < 0 and lin.det > 0


def turing_criterion_value(lin: Linearization, k: float) -> float:
    """``h(k) = (f_u - D1 k)(g_v - D2 k) - f_v g_u``; negative means mode ``k = q2`` grows."""
    return (lin.a11 - lin.d1bar * k) * (lin.a22 - lin.d2bar * k) - lin.a12 * lin.a21


def classify_sign_pattern(lin: Linearization) -> str:
    s = np.sign(lin.A)
    if np.array_equal(s, [[1, -1], [1, -1]]):
        return "activator_inhibitor"
    if np.array_equal(s, [[1, 1], [-1, -1]]):
        return "positive_feedback"
    return "other"


@dataclass(frozen=True)
class TuringWitness:
    """Outcome of the instability test.

    ``k_minus``/``k_plus`` bound the open interval where ``h(k) < 0`` (``nan``
    when ``h`` has no positive real roots) and ``witness`` lists every
    admissible ``q2`` strictly inside it. ``range_literal`` and
    ``range_standard`` evaluate the two readings of the discriminant
    condition: ``f_u D2 + g_v D1 > 2 sqrt(D1 D2) det A`` and
    ``f_u D2 + g_v D1 > 2 sqrt(D1 D2 det A)``.
    """

    unstable: bool
    k_minus: float
    k_plus: float
    witness: tuple[int, ...]
    range_literal: bool
    range_standard: bool

    def __bool__(self):
        return self.unstable


def admissible_q2(d: int, k_max: float) -> list[int]:
    """All values ``sum(q_i**2) <= k_max`` reachable by ``d`` non-negative integers."""
    return sorted({sum(x * x for x in q) for q in mode_indices(d, k_max)})


def mode_indices(d: int, k_max: float) -> list[tuple[int, ...]]:
    """Wave indices with ``q2 <= k_max`` in lexicographic order."""
    if d not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {d}")
    if k_max < 0:
        return []
    m = math.isqrt(int(math.floor(k_max)))
    return [q for q in itertools.product(range(m + 1), repeat=d) if sum(x * x for x in q) <= k_max]


def h_roots(lin: Linearization) -> tuple[float, float] | None:
    """Real roots ``k_minus <= k_plus`` of ``h(k) = 0``, or ``None``."""
    a = lin.d1bar * lin.d2bar
    b = -(lin.a11 * lin.d2bar + lin.a22 * lin.d1bar)
    c = lin.det
    disc = b * b - 4 * a * c
    if disc < 0:
        return None
    sq = math.sqrt(disc)
    s = -0.5 * (b + math.copysign(sq, b))
    if s == 0:
        return 0.0, 0.0
    r1, r2 = s / a, c / s
    return min(r1, r2), max(r1, r2)


def has_turing_instability(lin: Linearization, d: int) -> TuringWitness:
    """Decide diffusion-driven instability on the Neumann box in dimension ``d``.

    Raises
    ------
    NotRestStable
        ``tr A >= 0`` or ``det A <= 0``.
    EqualDiffusivities
        ``D1 == D2`` exactly, which rules out a Turing instability.
    """
    if not rest_state_stable(lin):
        raise NotRestStable(f"rest state not stable: tr A = {lin.trace}, det A = {lin.det}")
    if lin.d1bar == lin.d2bar:
        raise EqualDiffusivities("equal diffusivities cannot produce a Turing instability")
    lhs = lin.a11 * lin.d2bar + lin.a22 * lin.d1bar
    root = math.sqrt(lin.d1bar * lin.d2bar)
    range_literal = lhs > 2 * root * lin.det
    range_standard = lhs > 2 * math.sqrt(lin.d1bar * lin.d2bar * lin.det)

    roots = h_roots(lin)
    if roots is None or roots[1] <= 0:
        return TuringWitness(False, math.nan, math.nan, (), range_literal, range_standard)
    k_minus, k_plus = roots
    witness = tuple(k for k in admissible_q2(d, k_plus) if k_minus < k < k_plus)
    return TuringWitness(bool(witness), k_minus, k_plus, witness, range_literal, range_standard)


# --------------------------------------------------------------------------
# per-mode eigen data


class _Blocks(NamedTuple):
    kind: np.ndarray
    lam_plus: np.ndarray     # lambda_+, defective lambda, complex Re lambda
    lam_minus: np.ndarray    # lambda_-, defective lambda, complex Re lambda
    imag: np.ndarray         # complex Im lambda > 0, else 0
    basis1: np.ndarray       # r_-, r, Re r       shape (2, ...)
    basis2: np.ndarray       # r_+, r', Im r      shape (2, ...)


def _block_eigen(lin: Linearization, k) -> _Blocks:
    k = np.asarray(k, dtype=float)
    if lin.a12 == 0:
        raise ZeroFv("f_v = 0: the eigenvector formula is undefined")
    a12, a21 = lin.a12, lin.a21
    m11 = lin.a11 - lin.d1bar * k
    m22 = lin.a22 - lin.d2bar * k
    b = -(m11 + m22)
    c = m11 * m22 - a12 * a21
    diff = m11 - m22
    disc = diff * diff + 4 * a12 * a21
    tol = EPS_DISC * np.maximum(np.maximum(b * b, 4 * np.abs(c)), np.finfo(float).tiny)

    kind = np.where(disc > tol, GENERIC, np.where(disc < -tol, COMPLEX, DEFECTIVE))
    sq = np.sqrt(np.abs(disc))
    with np.errstate(divide="ignore", invalid="ignore"):
        # stable quadratic formula: the large-magnitude root first, the other via Vieta
        s = -0.5 * (b + np.copysign(sq, b))
        other = np.where(s != 0, c / s, 0.0)
    hi, lo = np.maximum(s, other), np.minimum(s, other)

    centre = -0.5 * b
    lam_p = np.where(kind == GENERIC, hi, centre)
    lam_m = np.where(kind == GENERIC, lo, centre)
    imag = np.where(kind == COMPLEX, 0.5 * sq, 0.0)

    def second(lam):
        # at a true root (lam - m11)/f_v == g_u/(lam - m22); take the better-conditioned form
        a, bb = lam - m11, lam - m22
        with np.errstate(divide="ignore", invalid="ignore"):
            alt = a21 / bb
        use_alt = (kind == GENERIC) & (np.abs(bb) > np.abs(a))
        return np.where(use_alt, alt, a / a12)

    one, zero = np.ones_like(k), np.zeros_like(k)
    y_minus = second(lam_m)
    y_plus = second(lam_p)
    b1 = np.stack([one, y_minus])
    b2 = np.where(kind == GENERIC, np.stack([one, y_plus]),
                  np.where(kind == DEFECTIVE, np.stack([zero, zero + 1.0 / a12]),
                           np.stack([zero, imag / a12])))
    return _Blocks(kind, lam_p, lam_m, imag, b1, b2)


@dataclass(frozen=True)
class ModeEigenData:
    """Eigen data of one wave index.

    ``lambda_plus``/``lambda_minus`` hold the two real roots for a generic
    mode, the repeated root twice for a defective one and ``Re lambda`` twice
    for a complex pair (``imag`` then carries ``Im lambda > 0``). ``basis1`` and
    ``basis2`` are ``(r_-, r_+)``, ``(r, r')`` or ``(Re r, Im r)``.
    """

    q: tuple[int, ...]
    q2: int
    kind: str
    lambda_plus: float
    lambda_minus: float
    imag: float
    basis1: np.ndarray
    basis2: np.ndarray

    @property
    def growth_rate(self) -> float:
        return self.lambda_plus

    def _want(self, kind):
        if self.kind != kind:
            raise AttributeError(f"mode {self.q} is {self.kind}, not {kind}")

    @property
    def r_plus(self):
        self._want("generic")
        return self.basis2

    @property
    def r_minus(self):
        self._want("generic")
        return self.basis1

    @property
    def r(self):
        self._want("defective")
        return self.basis1

    @property
    def r_prime(self):
        self._want("defective")
        return self.basis2

    @property
    def re_r(self):
        self._want("complex")
        return self.basis1

    @property
    def im_r(self):
        self._want("complex")
        return self.basis2


def _as_index(q) -> tuple[int, ...]:
    if isinstance(q, (int, np.integer)):
        return (int(q),)
    q = tuple(int(x) for x in q)
    if not 1 <= len(q) <= 3 or min(q) < 0:
        raise ValueError(f"bad wave index {q}")
    return q


def dispersion_eigen(lin: Linearization, q) -> ModeEigenData:
    """Eigenvalues, eigenvectors and class of the block for wave index ``q``."""
    q = _as_index(q)
    q2 = sum(x * x for x in q)
    blk = _block_eigen(lin, float(q2))
    return ModeEigenData(q, q2, KIND_NAMES[int(blk.kind)], float(blk.lam_plus), float(blk.lam_minus),
                         float(blk.imag), blk.basis1.astype(float), blk.basis2.astype(float))


@dataclass(frozen=True)
class ModeSpectrum:
    """Eigen data for every mode of a band, stored as arrays over ``q2``.

    ``q2`` may have any shape (typically the ``(n,)*d`` coefficient layout);
    ``basis1``/``basis2`` carry a leading axis of length 2.
    """

    lin: Linearization
    q2: np.ndarray
    kind: np.ndarray
    lam_plus: np.ndarray
    lam_minus: np.ndarray
    imag: np.ndarray
    basis1: np.ndarray
    basis2: np.ndarray

    @classmethod
    def build(cls, lin: Linearization, q2) -> "ModeSpectrum":
        q2 = np.asarray(q2, dtype=float)
        blk = _block_eigen(lin, q2)
        return cls(lin, q2, *blk)

    @property
    def real_parts(self) -> tuple[np.ndarray, np.ndarray]:
        return self.lam_plus, self.lam_minus


def mode_spectrum(lin: Linearization, q2) -> ModeSpectrum:
    return ModeSpectrum.build(lin, q2)


# --------------------------------------------------------------------------
# growing modes


@dataclass(frozen=True)
class GrowingModeSummary:
    """Maximal growth rate, the modes attaining it, all growing modes and the gap.

    ``scanned`` holds ``(q, eigen data)`` for every mode examined, in
    lexicographic order of ``q``; ``k_scan`` is the largest ``q2`` scanned.
    """

    d: int
    lambda_max: float
    omega_max: tuple[tuple[int, ...], ...]
    growing: tuple[tuple[int, ...], ...]
    nu: float
    next_largest: float
    k_cut: int
    k_scan: int
    witness: TuringWitness
    scanned: tuple[ModeEigenData, ...] = field(repr=False)


def _numerical_abscissa(lin: Linearization, k: float) -> float:
    """Largest eigenvalue of the symmetric part of ``M(k)``; bounds ``Re lambda`` and decreases in ``k``."""
    m11 = lin.a11 - lin.d1bar * k
    m22 = lin.a22 - lin.d2bar * k
    s = 0.5 * (lin.a12 + lin.a21)
    return 0.5 * (m11 + m22) + math.hypot(0.5 * (m11 - m22), s)


def growing_mode_summary(lin: Linearization, d: int) -> GrowingModeSummary:
    """Scan the wave indices that can grow and measure ``lambda_max``, ``Omega_max`` and ``nu``.

    Modes with ``q2 <= ceil(k_plus) + 1`` are scanned first. The scan is then
    extended until the numerical abscissa of ``M(q2)`` drops below the
    largest non-maximal real part found so far, so no unscanned mode can
    close the gap.
    """
    witness = has_turing_instability(lin, d)
    if not witness:
        raise NoTuringInstability(f"no admissible q2 in ({witness.k_minus}, {witness.k_plus}) for d={d}")
    k_cut = math.ceil(witness.k_plus) + 1

    k_scan = k_cut
    while True:
        modes = [dispersion_eigen(lin, q) for q in mode_indices(d, k_scan)]
        lam = np.array([m.lambda_plus for m in modes])
        lam_max = float(lam.max())
        in_max = np.abs(lam - lam_max) <= EPS_MAX * abs(lam_max)
        rest = [m.lambda_plus for m, top in zip(modes, in_max) if not top]
        rest += [m.lambda_minus for m, top in zip(modes, in_max) if top]
        rest_max = max(rest)
        k_tail = k_scan
        while _numerical_abscissa(lin, k_tail + 1) >= rest_max:
            k_tail += 1
        if k_tail == k_scan:
            break
        k_scan = k_tail

    omega = tuple(m.q for m, top in zip(modes, in_max) if top)
    growing = tuple(m.q for m in modes if m.lambda_plus > 0)
    return GrowingModeSummary(d, lam_max, omega, growing, lam_max - rest_max, rest_max,
                              k_cut, k_scan, witness, tuple(modes))


# --------------------------------------------------------------------------
# tabulation


class DispersionRow(NamedTuple):
    k: float
    re_plus: float
    re_minus: float
    imag: float
    kind: str


def dispersion_curve(lin: Linearization, k_grid: Iterable[float]) -> list[DispersionRow]:
    """Tabulate both roots of the dispersion quadratic at each ``k`` (playing ``q2``)."""
    k = np.asarray(list(k_grid), dtype=float)
    if k.size == 0:
        return []
    if np.any(k < 0):
        raise ValueError("k values must be non-negative")
    blk = _block_eigen(lin, k)
    return [DispersionRow(float(k[i]), float(blk.lam_plus[i]), float(blk.lam_minus[i]),
                          float(blk.imag[i]), KIND_NAMES[int(blk.kind[i])]) for i in range(k.size)]


def summary_rows(summary: GrowingModeSummary) -> list[tuple]:
    """Rows ``(*q, Re lambda_+, Re lambda_-, Im lambda, class)`` for CSV output."""
    return [(*m.q, m.lambda_plus, m.lambda_minus, m.imag, m.kind) for m in summary.scanned]


def default_k_grid(lin: Linearization, points: int = 201, k_max: float | None = None) -> np.ndarray:
    if k_max is None:
        roots = h_roots(lin)
        k_max = 2.0 * roots[1] if roots and roots[1] > 0 else 10.0
    return np.linspace(0.0, k_max, points)


def parse_q(text: str | Sequence[int]) -> tuple[int, ...]:
    if isinstance(text, str):
        return _as_index([int(x) for x in text.replace("(", "").replace(")", "").split(",") if x.strip()])
    return _as_index(text)
