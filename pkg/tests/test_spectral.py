import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from turing_lab.errors import DegenerateBasis
from turing_lab.kinetics import Linearization
from turing_lab.linear_analysis import COMPLEX, DEFECTIVE, GENERIC, ModeSpectrum, dispersion_eigen
from turing_lab.simulator import evenness_check
from turing_lab.spectral import (
    EigenCoordinates,
    Grid,
    SpectralField,
    analyze,
    eigen_decompose,
    even_extension,
    evenness_defect,
    extended_nodes,
    grid_l2_norm,
    h2_norm,
    l2_norm,
    linear_propagate,
    mode_field,
    recompose,
    synthesize,
)

BENCH = Linearization(1.0, -2.0, 3.0, -4.0, 0.5, 20.0)
# M(1) = -1 I + [[0.5, 2], [-1/8, -0.5]]: a repeated root at q2 = 1
DEFECTIVE_LIN = Linearization.from_matrix([[-0.25, 2.0], [-0.125, 0.0]], (0.25, 1.5))
# M(q2) has complex roots for small q2
COMPLEX_LIN = Linearization(-0.5, -2.0, 3.0, -1.0, 0.1, 0.3)


def random_values(rng, d, n):
    return rng.standard_normal((2,) + (n,) * d)


# ---- transforms ------------------------------------------------------------

def test_constant_field():
    g = Grid(1, 16)
    vals = np.empty((2, 16))
    vals[0], vals[1] = 1.5, -0.25
    c = analyze(vals)
    assert c[0, 0] == pytest.approx(1.5) and c[1, 0] == pytest.approx(-0.25)
    assert np.abs(c[:, 1:]).max() <= 1e-14


def test_single_cosine_analysis():
    g = Grid(1, 32)
    vals = np.stack([np.cos(g.nodes), np.zeros(32)])
    c = analyze(vals)
    assert c[0, 1] == pytest.approx(1.0, abs=1e-13)
    c[0, 1] = 0
    assert np.abs(c).max() <= 1e-13


def test_single_coefficient_synthesis():
    g = Grid(1, 16)
    f = mode_field(g, (2,), (1.0, 0.0))
    np.testing.assert_allclose(f.u, np.cos(2 * g.nodes), atol=1e-14)
    np.testing.assert_array_equal(SpectralField.zeros(g).values, 0)


@pytest.mark.parametrize("d, n", [(1, 8), (1, 16), (1, 32), (1, 64), (2, 8), (2, 16), (2, 32), (2, 64),
                                  (3, 8), (3, 16), (3, 32)])
def test_round_trip(d, n):
    rng = np.random.default_rng(d * 100 + n)
    vals = random_values(rng, d, n)
    err = np.abs(synthesize(analyze(vals)) - vals).max()
    assert err <= 1e-12 * np.abs(vals).max()


@given(st.floats(-3, 3), st.integers(0, 2 ** 32 - 1))
def test_synthesis_is_linear(a, seed):
    rng = np.random.default_rng(seed)
    c1, c2 = rng.standard_normal((2, 2, 16)), rng.standard_normal((2, 2, 16))
    lhs = synthesize(a * c1 + c2)
    rhs = a * synthesize(c1) + synthesize(c2)
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(lhs).max())


def test_mesh_matches_nodes():
    g = Grid(2, 8)
    x, y = g.mesh()
    np.testing.assert_array_equal(x[:, 0], g.nodes)
    np.testing.assert_array_equal(y[0, :], g.nodes)
    assert np.all((g.nodes > 0) & (g.nodes < np.pi))


def test_grid_rejects_bad_sizes():
    with pytest.raises(ValueError):
        Grid(1, 12)
    with pytest.raises(ValueError):
        Grid(4, 8)


# ---- norms -----------------------------------------------------------------

def test_known_norms():
    g = Grid(1, 16)
    assert mode_field(g, (1,), (1, 0)).l2() == pytest.approx(math.sqrt(math.pi / 2))
    const = mode_field(g, (0,), (1, 0))
    assert const.l2() == pytest.approx(math.sqrt(math.pi))
    assert const.h2() == pytest.approx(math.sqrt(math.pi))


@pytest.mark.parametrize("d, n", [(1, 32), (2, 16), (3, 8)])
def test_parseval_matches_quadrature(d, n):
    rng = np.random.default_rng(7)
    vals = random_values(rng, d, n)
    assert grid_l2_norm(vals) == pytest.approx(l2_norm(analyze(vals)), rel=1e-10)


@given(hnp.arrays(float, (2, 8), elements=st.floats(-10, 10)))
def test_h2_dominates_l2(c):
    assert h2_norm(c) >= l2_norm(c)


# ---- eigen coordinates -----------------------------------------------------

def test_eigen_coordinates_of_basis_vectors():
    g = Grid(1, 8)
    e = dispersion_eigen(BENCH, (1,))
    spec = g.spectrum(BENCH)
    co = eigen_decompose(mode_field(g, (1,), e.r_plus).coeffs, spec)
    assert (co.c1[1], co.c2[1]) == pytest.approx((0, 1), abs=1e-14)
    co = eigen_decompose(mode_field(g, (1,), e.r_minus + 2 * e.r_plus).coeffs, spec)
    assert (co.c1[1], co.c2[1]) == pytest.approx((1, 2), abs=1e-13)


@pytest.mark.parametrize("lin", [BENCH, DEFECTIVE_LIN, COMPLEX_LIN])
def test_recomposition(lin):
    rng = np.random.default_rng(3)
    g = Grid(1, 16)
    c = rng.standard_normal((2, 16))
    back = recompose(eigen_decompose(c, g.spectrum(lin)))
    assert np.abs(back - c).max() <= 1e-10 * np.abs(c).max()


def test_degenerate_basis_is_reported():
    spec = ModeSpectrum.build(BENCH, np.array([1.0]))
    bad = ModeSpectrum(spec.lin, spec.q2, spec.kind, spec.lam_plus, spec.lam_minus, spec.imag,
                       spec.basis1, spec.basis1.copy())
    with pytest.raises(DegenerateBasis):
        eigen_decompose(np.ones((2, 1)), bad)


# ---- exact propagator ------------------------------------------------------

def _expm_oracle(lin, q2, c, t):
    M = lin.A - q2 * np.diag(lin.D)
    return scipy.linalg.expm(M * t) @ c


@pytest.mark.parametrize("lin, q2, kind", [
    (BENCH, 1.0, GENERIC),
    (DEFECTIVE_LIN, 1.0, DEFECTIVE),
    (COMPLEX_LIN, 0.0, COMPLEX),
    (COMPLEX_LIN, 1.0, COMPLEX),
])
@pytest.mark.parametrize("t", [0.0, 0.3, 1.0, 4.0])
def test_propagator_matches_matrix_exponential(lin, q2, kind, t):
    spec = ModeSpectrum.build(lin, np.array([q2]))
    assert spec.kind[0] == kind
    c = np.array([[0.7], [-1.3]])
    got = linear_propagate(eigen_decompose(c, spec), t)[:, 0]
    want = _expm_oracle(lin, q2, c[:, 0], t)
    assert np.abs(got - want).max() <= 1e-9 * max(1.0, np.abs(want).max())


def test_propagator_identity_at_zero():
    g = Grid(2, 8)
    c = np.random.default_rng(1).standard_normal((2, 8, 8))
    co = eigen_decompose(c, g.spectrum(BENCH))
    np.testing.assert_allclose(linear_propagate(co, 0.0), recompose(co), atol=1e-14)


def test_growing_mode_scalar_exponential():
    g = Grid(1, 8)
    e = dispersion_eigen(BENCH, (1,))
    co = eigen_decompose(mode_field(g, (1,), e.r_plus).coeffs, g.spectrum(BENCH))
    out = linear_propagate(co, 1.0)
    np.testing.assert_allclose(out[:, 1], e.r_plus * math.exp(e.lambda_plus), rtol=1e-13)


@pytest.mark.parametrize("lin", [BENCH, DEFECTIVE_LIN, COMPLEX_LIN])
@given(t=st.floats(0, 3), s=st.floats(0, 3))
def test_semigroup(lin, t, s):
    spec = ModeSpectrum.build(lin, np.array([0.0, 1.0, 2.0, 4.0]))
    c = np.array([[1.0, -0.5, 0.25, 2.0], [0.3, 1.0, -1.0, 0.5]])
    once = linear_propagate(eigen_decompose(c, spec), t + s)
    mid = linear_propagate(eigen_decompose(c, spec), t)
    twice = linear_propagate(eigen_decompose(mid, spec), s)
    assert np.abs(once - twice).max() <= 1e-9 * max(1.0, np.abs(once).max())


def test_negative_time_rejected():
    spec = ModeSpectrum.build(BENCH, np.array([1.0]))
    with pytest.raises(ValueError):
        linear_propagate(EigenCoordinates(spec, np.ones(1), np.ones(1)), -1.0)


# ---- even extension --------------------------------------------------------

@pytest.mark.parametrize("d, n", [(1, 16), (2, 8), (2, 32), (3, 8)])
def test_extension_is_even_and_exact(d, n):
    g = Grid(d, n)
    rng = np.random.default_rng(n + d)
    f = SpectralField(g, rng.standard_normal((2,) + g.shape) / (1 + g.q2))
    ext = even_extension(f)
    assert evenness_defect(ext) <= 1e-13 * max(1.0, np.abs(ext).max())
    # the (0, pi) half reproduces the field samples
    half = ext[(slice(None),) + (slice(n, 2 * n),) * d]
    assert np.abs(half - f.values).max() <= 1e-12


def test_injected_sine_breaks_evenness():
    g = Grid(1, 16)
    f = mode_field(g, (1,), (1.0, 0.5))
    ext = even_extension(f)
    y = extended_nodes(16)
    ext[0] += 1e-3 * np.sin(y)
    assert evenness_check(ext) > 1e-4
    assert evenness_check(f) <= 1e-13
