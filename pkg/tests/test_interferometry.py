import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from duality_lab.errors import (
    DegenerateSplit,
    IndistinguishableStates,
    NullOutcome,
    OverlapSingularity,
    SingularHouseholder,
)
from duality_lab.interferometry import (
    DetectorFunction,
    OverlapStats,
    UnambiguousPovm,
    apply_detector,
    beam_split,
    detect,
    duality_check,
    fringe,
    fringe_closed_form,
    householder_apply,
    overlap_stats,
    population_extrema,
    povm_probabilities,
    visibility,
    visibility_scan,
    which_way,
    which_way_closed_form,
    which_way_theta,
)
from duality_lab.wavefield import GaussianParams, Grid, Wavepacket, inner_product, make_gaussian, shift

# 2 * 0.9 * 0.1 / (0.81 + 0.01)
V_NO_09_01 = 0.21951219512195122

FAR = 20.0
FAR_GRID = Grid.covering(centers=(0.0, FAR, 2 * FAR), widths=(1.0, 1.0, 1.0))
NEAR_GRID = Grid.symmetric(16.0, 2048)


def unit_phi(grid=FAR_GRID):
    return make_gaussian(GaussianParams(0.0, 1.0), grid)


def stats_of(z0, z1, z2=0.0, z3=0.0, r=0.0, t=0.0, n0=0.5, n1=0.5):
    return OverlapStats(n0=n0, n1=n1, r=complex(r), z0=complex(z0), z1=complex(z1), z2=complex(z2),
                        z3=complex(z3), t_overlap=complex(t))


def window(center, width, grid):
    return DetectorFunction.from_gaussian(GaussianParams(center, width), grid)


# -- beam splitter and Householder reflection -------------------------------

def test_beam_split_far_branches_share_probability():
    psi = beam_split(unit_phi(), FAR, 0.0)
    left = np.abs(psi.psi[psi.x < FAR / 2]) ** 2
    p_left = np.trapezoid(left, dx=FAR_GRID.dx)
    assert p_left == pytest.approx(0.5, abs=1e-9)


def test_beam_split_trivial_cases():
    phi = unit_phi(NEAR_GRID)
    assert np.max(np.abs(beam_split(phi, 0.0, 0.0).psi - phi.psi)) < 1e-12
    with pytest.raises(DegenerateSplit):
        beam_split(phi, 0.0, math.pi)


def test_householder_maps_phi_to_target():
    phi = unit_phi(NEAR_GRID)
    target = beam_split(phi, 1.3, 0.0)
    out = householder_apply(phi, target, phi)
    assert np.max(np.abs(out.psi - target.psi)) < 1e-10


def test_householder_negates_orthogonal_input():
    g = NEAR_GRID
    phi = make_gaussian(GaussianParams(0.25, 1.0), g)
    target = beam_split(make_gaussian(GaussianParams(0.0, 1.0), g), 0.5, 0.0)
    # both states are even about 0.25, so an odd function there is orthogonal to them
    x = g.x - 0.25
    odd = Wavepacket(g, x * np.exp(-(x**2))).normalized()
    assert abs(inner_product(phi, odd)) < 1e-12 and abs(inner_product(target, odd)) < 1e-12
    out = householder_apply(phi, target, odd)
    assert np.max(np.abs(out.psi + odd.psi)) < 1e-10


def test_householder_is_an_involution_for_real_overlap():
    phi = unit_phi(NEAR_GRID)
    target = beam_split(phi, 1.1, 0.0)
    assert abs(inner_product(target, phi).imag) < 1e-14
    for state in (phi, target, shift(phi, 1.1)):
        twice = householder_apply(phi, target, householder_apply(phi, target, state))
        assert np.max(np.abs(twice.psi - state.psi)) < 1e-9


def test_householder_singular():
    phi = unit_phi(NEAR_GRID)
    minus = Wavepacket(NEAR_GRID, -phi.psi)
    with pytest.raises(SingularHouseholder):
        householder_apply(phi, minus, phi)


# -- detector ----------------------------------------------------------------

def test_detector_rejects_modulus_above_one():
    with pytest.raises(ValueError):
        DetectorFunction.constant(NEAR_GRID, 1.1)


def test_complement_completes_partition_of_unity():
    D = window(0.0, 2.0, NEAR_GRID)
    total = np.abs(D.values) ** 2 + np.abs(D.complement().values) ** 2
    assert np.max(np.abs(total - 1.0)) < 1e-12


def test_apply_detector_identity_and_null():
    phi = unit_phi(NEAR_GRID)
    out, weight = apply_detector(phi, DetectorFunction.constant(NEAR_GRID))
    assert weight == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(out.psi - phi.psi)) < 1e-12
    with pytest.raises(NullOutcome):
        apply_detector(phi, DetectorFunction.constant(NEAR_GRID, 0.0))


def test_branch_window_selects_branch():
    phi = unit_phi()
    D = window(0.0, 6.0, FAR_GRID)
    out, weight = apply_detector(beam_split(phi, FAR, 0.0), D)
    # quadrature oracle for the weight: half of <phi||D|^2|phi>
    ref = 0.5 * np.trapezoid(np.abs(D.values) ** 2 * np.abs(phi.psi) ** 2, dx=FAR_GRID.dx)
    assert weight == pytest.approx(ref, rel=1e-9)
    assert abs(inner_product(phi, out)) == pytest.approx(1.0, abs=1e-3)


# -- overlap statistics --------------------------------------------------------

def test_stats_for_trivial_detector():
    a = 1.2
    phi = unit_phi(NEAR_GRID)
    s = overlap_stats(phi, a, DetectorFunction.constant(NEAR_GRID))
    t = s.t_overlap
    assert t == pytest.approx(math.exp(-a**2 / 2), abs=1e-12)
    assert s.n0 == pytest.approx(1.0) and s.n1 == pytest.approx(1.0)
    assert s.r == pytest.approx(t, abs=1e-12)
    assert s.z0 == pytest.approx(1 / math.sqrt(2)) and s.z1 == pytest.approx(1 / math.sqrt(2))
    assert s.z2 == pytest.approx(t / math.sqrt(2)) and s.z3 == pytest.approx(t / math.sqrt(2))


def test_stats_far_branches_have_no_cross_terms():
    s = overlap_stats(unit_phi(), FAR, window(4.0, 7.0, FAR_GRID))
    assert max(abs(s.r), abs(s.z2), abs(s.z3)) < 1e-9


def test_stats_antisymmetric_detector():
    a, sigma = 10.0, 0.2
    g = Grid.covering(centers=(0.0, a, 2 * a), widths=(1.0,) * 3, resolve=(sigma,))
    phi = make_gaussian(GaussianParams(0.0, 1.0), g)

    def profile(x):
        notch = 1.0 - np.exp(-((x - a) ** 2) / 2.0)
        return np.tanh(x / sigma) * notch**6

    s = overlap_stats(phi, a, DetectorFunction.from_function(profile, g))
    # odd detector against an even packet: no amplitude stays in branch 0's mode
    assert abs(s.z0) < 1e-12
    assert s.n0 > 0.5 and s.n1 < 1e-3 * s.n0


# -- which-way information ----------------------------------------------------

def test_which_way_balanced_and_unbalanced():
    h = 1 / math.sqrt(2)
    assert which_way(stats_of(h, h)) == 0.0
    assert which_way(stats_of(math.sqrt(0.8), math.sqrt(0.2))) == pytest.approx(0.6, abs=1e-12)


def test_which_way_single_branch_certainty():
    s = stats_of(1.0, 0.0, n0=1.0, n1=0.0)
    for theta in np.linspace(0, 2 * math.pi, 7):
        assert which_way_theta(s, theta) == pytest.approx(1.0, abs=1e-12)


def test_which_way_theta_independent_without_cross_terms():
    s = stats_of(0.8, 0.3)
    assert which_way_theta(s, 0.0) == pytest.approx(which_way_theta(s, math.pi), abs=1e-12)


def test_which_way_perfect_overlap_limit():
    eps = 1e-6
    z = 0.5 * (1 + 0j)
    s = stats_of(z, z, z, z, r=1 - eps, t=1 - eps, n0=1.0, n1=1.0)
    assert which_way(s) < 1e-9


def test_which_way_singular_overlap():
    with pytest.raises(OverlapSingularity):
        which_way(stats_of(0.5, 0.5, 0.5, 0.5, r=1.0, t=1.0))


def test_population_extrema_convention():
    assert population_extrema(stats_of(0.5, 0.5)) == (0.0, math.pi)
    tmax, tmin = population_extrema(stats_of(0.5, 0.5, r=0.3j))
    assert tmax == pytest.approx(1.5 * math.pi) and tmin == pytest.approx(0.5 * math.pi)


# -- visibility and fringes ----------------------------------------------------

def test_visibility_closed_forms():
    h = 1 / math.sqrt(2)
    assert visibility(stats_of(h, h)) == pytest.approx(1.0, abs=1e-12)
    assert visibility(stats_of(0.9, 0.1)) == pytest.approx(V_NO_09_01, abs=1e-12)


def test_coinciding_branches_carry_no_path_information():
    phi = unit_phi(NEAR_GRID)
    rep = duality_check(phi, 1e-3, window(0.0, 1.5, NEAR_GRID))
    assert rep.W < 1e-6
    assert rep.V == pytest.approx(1.0, abs=1e-6)


def test_fringe_undisturbed_interferometer():
    phi = unit_phi(NEAR_GRID)
    D = DetectorFunction.constant(NEAR_GRID)
    # post-selected: every non-null outcome recombines to phi
    for theta in (0.0, 1.0, 2.0, 3.0, 4.0, 5.5):
        assert fringe(phi, 0.0, D, theta) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(NullOutcome):
        fringe(phi, 0.0, D, math.pi)


def test_fringe_full_contrast_far_branches():
    V, tmax, tmin = visibility_scan(unit_phi(), FAR, DetectorFunction.constant(FAR_GRID))
    assert V == pytest.approx(1.0, abs=1e-9)
    assert fringe(unit_phi(), FAR, DetectorFunction.constant(FAR_GRID), tmax) == pytest.approx(1.0, abs=1e-9)


def test_fringe_flat_when_one_branch_is_blocked():
    phi = unit_phi()
    D = window(0.0, 4.0, FAR_GRID)
    values = [fringe(phi, FAR, D, th) for th in np.linspace(0, 2 * math.pi, 9)]
    assert max(values) - min(values) < 1e-9


def test_duality_saturates_for_phase_only_detector():
    # |D| = 1 on both branches: no information lost, duality saturated
    phase = lambda x: np.exp(0.7j * (np.tanh(x - FAR / 2) + 1.0))  # noqa: E731
    D = DetectorFunction.from_function(phase, FAR_GRID)
    s = overlap_stats(unit_phi(), FAR, D)
    assert abs(s.z0) ** 2 + abs(s.z1) ** 2 == pytest.approx(1.0, abs=1e-8)
    assert duality_check(unit_phi(), FAR, D).duality == pytest.approx(1.0, abs=1e-8)


def test_duality_trivial_detector_far():
    rep = duality_check(unit_phi(), FAR, DetectorFunction.constant(FAR_GRID))
    assert rep.W == pytest.approx(0.0, abs=1e-9)
    assert rep.V == pytest.approx(1.0, abs=1e-9)
    assert not rep.violated


gauss = st.tuples(st.floats(-2.0, 2.0), st.floats(0.4, 2.0), st.floats(-2.0, 2.0))


@given(gauss, gauss, st.floats(0.3, 4.0))
def test_random_gaussian_triples_respect_duality(p, d, a):
    g = Grid.covering(centers=(p[0], p[0] + a), widths=(p[1], p[1]), resolve=(d[1],))
    phi = make_gaussian(GaussianParams(*p), g)
    D = DetectorFunction.from_gaussian(GaussianParams(*d), g)
    try:
        s = overlap_stats(phi, a, D)
        rep = duality_check(phi, a, D)
    except (NullOutcome, OverlapSingularity):
        return
    assert rep.duality <= 1 + 1e-9
    assert s.cauchy_schwarz_excess() <= 1e-12
    assert which_way(s) == pytest.approx(which_way_closed_form(s), abs=1e-9)


@given(gauss, gauss, st.floats(0.3, 3.0), st.floats(0, 2 * math.pi))
def test_scan_and_closed_forms_agree(p, d, a, theta):
    g = Grid.covering(centers=(p[0], p[0] + a), widths=(p[1], p[1]), resolve=(d[1],))
    phi = make_gaussian(GaussianParams(*p), g)
    D = DetectorFunction.from_gaussian(GaussianParams(*d), g)
    s = overlap_stats(phi, a, D)
    if s.total < 1e-6:
        return
    assert fringe(phi, a, D, theta) == pytest.approx(fringe_closed_form(s, theta), abs=1e-10)
    if max(fringe_closed_form(s, t) for t in (0.0, 1.0, 2.0, 3.0, 4.0, 5.0)) < 1e-6:
        return
    V_scan, _, _ = visibility_scan(phi, a, D)
    assert V_scan == pytest.approx(visibility(s), abs=1e-6)


# -- unambiguous discrimination POVM -------------------------------------------

def test_povm_annihilates_own_state():
    phi = unit_phi()
    branch = shift(phi, FAR)
    assert povm_probabilities(phi, FAR, phi).p0 == pytest.approx(0.0, abs=1e-12)
    assert povm_probabilities(phi, FAR, branch).p1 == pytest.approx(0.0, abs=1e-12)
    povm = UnambiguousPovm(phi, FAR)
    assert np.max(np.abs(povm.apply(0, phi).psi)) < 1e-12
    assert np.max(np.abs(povm.apply(1, branch).psi)) < 1e-12


def test_povm_balanced_cat():
    phi = unit_phi()
    p = povm_probabilities(phi, FAR, beam_split(phi, FAR, 0.0))
    assert p.p0 == pytest.approx(p.p1, abs=1e-12)
    assert p.which_way == pytest.approx(0.0, abs=1e-12)


def test_povm_indistinguishable():
    with pytest.raises(IndistinguishableStates):
        UnambiguousPovm(unit_phi(NEAR_GRID), 0.0)


@given(st.floats(0.3, 3.0), st.floats(0, 2 * math.pi), st.floats(0, 1), st.floats(0, 2 * math.pi))
def test_povm_completeness_in_span(a, theta, mix, rel):
    phi = unit_phi(NEAR_GRID)
    state = Wavepacket(NEAR_GRID, mix * phi.psi + np.exp(1j * rel) * shift(phi, a).psi)
    p = povm_probabilities(phi, a, state)
    assert p.p0 + p.p1 + p.p2 == pytest.approx(state.norm() ** 2, abs=1e-9)
    assert p.out_of_span < 1e-9
    assert p.p2 >= -1e-9


@given(st.floats(0.5, 3.0), gauss)
def test_povm_which_way_matches_formula(a, d):
    phi = unit_phi(NEAR_GRID)
    D = DetectorFunction.from_gaussian(GaussianParams(*d), NEAR_GRID)
    s = overlap_stats(phi, a, D)
    povm = UnambiguousPovm(phi, a)
    for theta in population_extrema(s):
        try:
            state = detect(phi, a, D, theta)
            formula = which_way_theta(s, theta)
        except (NullOutcome, OverlapSingularity):
            continue
        assert povm.probabilities(state).which_way == pytest.approx(formula, abs=1e-9)
