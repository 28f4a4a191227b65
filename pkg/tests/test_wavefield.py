import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from duality_lab.errors import GridMismatch, PaddingViolation
from duality_lab.wavefield import (
    GaussianParams,
    Grid,
    Wavepacket,
    expectation_T,
    gaussian_overlap,
    inner_product,
    make_gaussian,
    position_moments,
    shift,
    translated_gaussian,
)

# exp(-1/2): overlap of unit-width Gaussians one width apart
OVERLAP_UNIT = 0.6065306597126334

GRID = Grid.symmetric(24.0, 4096)

centers = st.floats(-3.0, 3.0)
widths = st.floats(0.3, 2.0)
momenta = st.floats(-3.0, 3.0)


def cat(grid, a, theta=0.0, w=1.0):
    psi = make_gaussian(GaussianParams(0.0, w), grid).psi
    psi = psi + np.exp(1j * theta) * make_gaussian(GaussianParams(a, w), grid).psi
    return Wavepacket(grid, psi).normalized()


def test_grid_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        Grid(-1.0, 1.0, 1000)
    with pytest.raises(ValueError):
        Grid(-1.0, 1.0, 128)


def test_default_grid_layout():
    g = Grid.default_for([1.0], [0.0], a=2.0)
    assert g.n_points == 4096
    assert g.x_max == pytest.approx(24.0)


def test_covering_grid_pads_and_resolves():
    g = Grid.covering(centers=(0.0, 5.0), widths=(0.1, 0.1), resolve=(0.05,))
    assert g.x_min <= -0.8 and g.x_max >= 5.8
    assert g.dx <= 0.005
    assert g.n_points & (g.n_points - 1) == 0


def test_unit_gaussian_moments():
    psi = make_gaussian(GaussianParams(0.0, 1.0), GRID)
    mean, var = position_moments(psi)
    assert psi.norm() == pytest.approx(1.0, abs=1e-12)
    assert abs(mean) < 1e-12
    assert var == pytest.approx(0.25, abs=1e-9)


def test_momentum_leaves_modulus_unchanged():
    p0 = make_gaussian(GaussianParams(0.0, 1.0, 0.0), GRID)
    p5 = make_gaussian(GaussianParams(0.0, 1.0, 5.0), GRID)
    assert np.max(np.abs(np.abs(p0.psi) - np.abs(p5.psi))) < 1e-14


def test_padding_violation_on_tight_grid():
    with pytest.raises(PaddingViolation):
        make_gaussian(GaussianParams(0.0, 1.0), Grid.symmetric(2.0, 1024))


def test_shift_refuses_wraparound():
    g = Grid.symmetric(10.0, 1024)
    psi = make_gaussian(GaussianParams(0.0, 1.0), g)
    with pytest.raises(PaddingViolation):
        shift(psi, 6.0)


def test_inner_product_of_unit_gaussians():
    p = make_gaussian(GaussianParams(0.0, 1.0), GRID)
    q = make_gaussian(GaussianParams(1.0, 1.0), GRID)
    assert inner_product(p, q).real == pytest.approx(OVERLAP_UNIT, abs=1e-12)


def test_inner_product_grid_mismatch():
    p = make_gaussian(GaussianParams(0.0, 1.0), GRID)
    q = make_gaussian(GaussianParams(0.0, 1.0), Grid.symmetric(24.0, 2048))
    with pytest.raises(GridMismatch):
        inner_product(p, q)


def test_gaussian_overlap_against_quadrature():
    # independent oracle: adaptive quadrature of the normalized amplitudes
    p = GaussianParams(-0.3, 0.8, 1.2)
    q = GaussianParams(0.5, 1.3, -0.4)

    def amp(g, x):
        return (2 / (math.pi * g.w**2)) ** 0.25 * complex(g(np.array(x)))

    re = quad(lambda x: (amp(p, x).conjugate() * amp(q, x)).real, -20, 20, epsabs=1e-14)[0]
    im = quad(lambda x: (amp(p, x).conjugate() * amp(q, x)).imag, -20, 20, epsabs=1e-14)[0]
    assert gaussian_overlap(p, q) == pytest.approx(complex(re, im), abs=1e-12)


def test_shift_matches_analytic():
    psi = make_gaussian(GaussianParams(0.0, 1.0), GRID)
    moved = shift(psi, 2.5)
    ref = make_gaussian(GaussianParams(2.5, 1.0), GRID)
    assert np.max(np.abs(moved.psi - ref.psi)) < 1e-9


def test_shift_by_zero_is_identity():
    psi = make_gaussian(GaussianParams(0.4, 0.7, 2.0), GRID)
    assert np.array_equal(shift(psi, 0.0).psi, psi.psi)


def test_translated_gaussian_equals_spectral_shift():
    p = GaussianParams(0.3, 0.9, 1.7)
    psi = make_gaussian(p, GRID)
    assert np.max(np.abs(translated_gaussian(p, 2.2, GRID).psi - shift(psi, 2.2).psi)) < 1e-12


def test_expectation_T_values():
    psi = make_gaussian(GaussianParams(0.0, 1.0), GRID)
    assert abs(expectation_T(psi, 1.0) - OVERLAP_UNIT) < 1e-9
    assert expectation_T(psi, 0.0) == 1.0


def test_cat_state_modulus_and_variance():
    a = 20.0
    g = Grid.covering(centers=(0.0, a, 2 * a), widths=(1.0, 1.0, 1.0))
    psi = cat(g, a)
    assert abs(expectation_T(psi, a)) == pytest.approx(0.5, abs=1e-6)
    _, var = position_moments(psi)
    assert var == pytest.approx(a**2 / 4, rel=0.01)


@given(centers, widths, momenta, st.floats(-2.0, 2.0))
def test_shift_is_unitary_and_translates_mean(x0, w, k, a):
    psi = make_gaussian(GaussianParams(x0, w, k), GRID)
    moved = shift(psi, a)
    assert abs(moved.norm() - 1.0) < 1e-10
    m0, v0 = position_moments(psi)
    m1, v1 = position_moments(moved)
    assert m1 == pytest.approx(m0 + a, abs=1e-9)
    assert v1 == pytest.approx(v0, abs=1e-9)


@given(centers, widths, momenta, st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_shift_composition(x0, w, k, a, b):
    psi = make_gaussian(GaussianParams(x0, w, k), GRID)
    assert np.max(np.abs(shift(psi, a + b).psi - shift(shift(psi, a), b).psi)) < 1e-10
    assert np.max(np.abs(shift(shift(psi, a), -a).psi - psi.psi)) < 1e-10


@given(centers, widths, momenta, centers, widths, momenta)
def test_inner_product_hermitian_and_matches_closed_form(x1, w1, k1, x2, w2, k2):
    p1, p2 = GaussianParams(x1, w1, k1), GaussianParams(x2, w2, k2)
    a, b = make_gaussian(p1, GRID), make_gaussian(p2, GRID)
    assert inner_product(a, b) == pytest.approx(inner_product(b, a).conjugate(), abs=1e-14)
    exact = gaussian_overlap(p1, p2)
    assert abs(inner_product(a, b) - exact) <= 1e-8 * max(abs(exact), 1e-6)
    assert abs(inner_product(a, a) - 1.0) < 1e-10


@given(centers, widths, momenta, st.floats(-4.0, 4.0))
def test_modular_expectation_bounded(x0, w, k, a):
    psi = make_gaussian(GaussianParams(x0, w, k), GRID)
    assert abs(expectation_T(psi, a)) <= 1.0 + 1e-12


@given(widths)
def test_gaussian_moments_match_closed_form(w):
    psi = make_gaussian(GaussianParams(0.7, w), GRID)
    mean, var = position_moments(psi)
    assert mean == pytest.approx(0.7, rel=1e-8)
    assert var == pytest.approx(w**2 / 4, rel=1e-8)
