import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mechqubit import hilbert
from mechqubit.closed_form import CouplingParams, PostSelection, plus_branch_angle, \
    postselected_ket_exact
from mechqubit.damped import DampedParams, beta, c1_coefficient, c2_coefficient, \
    decoherence_exponent, joint_state_damped, kernel, phonon_distribution_analytic, \
    postselected_state_damped, postselection_probability
from mechqubit.errors import DegeneratePostSelection

PI = math.pi

# 30-digit mpmath values: branch ODE d(beta)/dt = -(g/2 + i) beta + i lam and
# quadrature of (g/2) int |beta_+ - beta_-|^2
BETA_01_001 = complex("0.198436515422285820622986408145+0.000992182577111429103114932040725j")
EXPONENT = {
    (0.1, 0.01): 0.0012428702025582361888,
    (0.05, 0.01): 0.00031071755063955904719,
    (0.25, 0.001): 0.00078453195870432757268,
    (1.0, 0.01): 0.12428702025582361888,
    (0.1, 0.05): 0.0059489913903626748587,
}
C1 = {0.01: 0.9844508769801350453, 0.001: 0.99843080300256014897,
      0.05: 0.92531330416133545099, 0.0: 1.0}
# Pr(0..3) at the plus-branch angle, gamma = 0.01, t = pi
DIST = {
    0.1: [0.50750070540224247, 0.49197861496864381, 0.00039347281975871955,
          0.00012714610431872601],
    0.25: [0.49736489902073866, 0.48260901995636724, 0.015063061672833536,
           0.0048720563418538782],
    0.05: [0.50775438278996759, 0.49221306221066812, 2.4604343724860714e-5,
           7.9504184037127686e-6],
}
PROB = {0.05: 0.019605473444914381, 0.1: 0.07394585020433933, 0.15: 0.15133132816615309,
        0.2: 0.23708285494867425, 0.25: 0.31803959701304358}


@given(st.floats(0, 1), st.floats(0, 10))
def test_beta_undamped_limit(lam, t):
    p = DampedParams(lam, 0.0, t)
    le = lam * (1 - np.exp(-1j * t))
    assert abs(beta(p, 1) - le) < 1e-14
    assert abs(beta(p, -1) + le) < 1e-14


def test_beta_at_zero_time_and_sign_check():
    assert beta(DampedParams(0.3, 0.1, 0.0), 1) == 0
    with pytest.raises(ValueError):
        beta(DampedParams(0.3, 0.1, 1.0), 0)
    with pytest.raises(ValueError):
        DampedParams(0.1, -1e-3, 1.0)


def test_beta_against_ode_oracle():
    b = beta(DampedParams(0.1, 0.01, PI), 1)
    assert abs(b - BETA_01_001) < 1e-15
    assert 0.19 < abs(b) < 0.2


def test_kernel_antisymmetric():
    k = kernel(DampedParams(0.2, 0.03, 2.2))
    assert k.beta_minus == -k.beta_plus
    assert 0 < k.coherence_factor <= 1


def test_exponent_trivial_cases():
    assert decoherence_exponent(DampedParams(0.1, 0.0, PI)) == 0
    assert decoherence_exponent(DampedParams(0.0, 0.1, PI)) == 0


@pytest.mark.parametrize("key", sorted(EXPONENT))
def test_exponent_against_quadrature_oracle(key):
    lam, g = key
    got = decoherence_exponent(DampedParams(lam, g, PI))
    assert got == pytest.approx(EXPONENT[key], rel=1e-12, abs=1e-15)


def test_exponent_example_range():
    e = decoherence_exponent(DampedParams(0.1, 0.01, PI))
    assert 0 < e < 0.02


@given(st.floats(0, 1), st.floats(0, 0.2))
def test_exponent_equals_c2_form_at_half_period(lam, g):
    got = decoherence_exponent(DampedParams(lam, g, PI))
    assert got >= 0
    assert got == pytest.approx(-c2_coefficient(g) * lam ** 2, abs=1e-13)


@given(st.floats(0, 1), st.floats(0.001, 0.2), st.floats(0.1, 12))
def test_exponent_non_negative_and_increasing_in_time(lam, g, t):
    a = decoherence_exponent(DampedParams(lam, g, t))
    b = decoherence_exponent(DampedParams(lam, g, t * 1.1))
    assert 0 <= a <= b + 1e-15


@pytest.mark.parametrize("g", sorted(C1))
def test_c1_against_branch_amplitude(g):
    assert c1_coefficient(g) == pytest.approx(C1[g], rel=1e-14)


def test_coefficients_undamped_limit():
    assert c1_coefficient(0.0) == 1
    assert c2_coefficient(0.0) == 0
    assert c1_coefficient(1e-9) == pytest.approx(1, abs=1e-8)
    # leading order: (g/2) int_0^pi 8 (1 - cos t) dt = 4 pi g
    assert c2_coefficient(1e-9) == pytest.approx(-4 * PI * 1e-9, rel=1e-6)


def test_postselect_up_gives_coherent_state():
    p = DampedParams(0.1, 0.02, PI)
    rho, prob = postselected_state_damped(p, PostSelection(0.0, 0.0), 16)
    kp = hilbert.coherent_ket(kernel(p).beta_plus, 16)
    assert prob == pytest.approx(0.5, abs=1e-15)
    assert hilbert.trace_distance(rho, hilbert.ket2dm(kp)) < 1e-12


@given(st.floats(0.01, 0.3), st.floats(0.2, 6.0), st.floats(0, 2 * PI), st.floats(0, 2 * PI))
def test_undamped_matches_closed_form(lam, t, theta, phi):
    s = PostSelection(theta, phi)
    try:
        ket, prob_cf = postselected_ket_exact(CouplingParams(lam, t), s, 24)
        rho, prob = postselected_state_damped(DampedParams(lam, 0.0, t), s, 24)
    except DegeneratePostSelection:
        return
    if prob_cf < 1e-6:
        return
    assert abs(prob - prob_cf) < 1e-12
    assert hilbert.trace_distance(rho, hilbert.ket2dm(ket)) < 1e-10


@pytest.mark.parametrize("lam", sorted(PROB))
def test_probability_against_oracle(lam):
    p = DampedParams(lam, 0.01, PI)
    theta = plus_branch_angle(CouplingParams(lam, PI))
    assert postselection_probability(p, PostSelection(theta, 0)) == \
        pytest.approx(PROB[lam], rel=1e-12)


def test_probability_near_two_percent():
    p = DampedParams(0.05, 0.01, PI)
    theta = plus_branch_angle(CouplingParams(0.05, PI))
    assert postselection_probability(p, PostSelection(theta, 0)) == pytest.approx(0.02, abs=0.002)


@pytest.mark.parametrize("lam", sorted(DIST))
def test_distribution_against_oracle(lam):
    p = DampedParams(lam, 0.01, PI)
    s = PostSelection(plus_branch_angle(CouplingParams(lam, PI)), 0)
    got = phonon_distribution_analytic(p, s, np.arange(4))
    np.testing.assert_allclose(got, DIST[lam], rtol=1e-11)


def test_distribution_reference_values():
    p = DampedParams(0.1, 0.01, PI)
    s = PostSelection(plus_branch_angle(CouplingParams(0.1, PI)), 0)
    pr = phonon_distribution_analytic(p, s, np.arange(2))
    assert pr == pytest.approx([0.5, 0.5], abs=0.02)
    p = DampedParams(0.25, 0.01, PI)
    s = PostSelection(plus_branch_angle(CouplingParams(0.25, PI)), 0)
    assert phonon_distribution_analytic(p, s, 2) == pytest.approx(0.014, abs=0.003)


def test_distribution_scalar_and_time_guard():
    p = DampedParams(0.1, 0.01, PI)
    assert isinstance(phonon_distribution_analytic(p, PostSelection(1.0, 0), 3), float)
    with pytest.raises(ValueError):
        phonon_distribution_analytic(DampedParams(0.1, 0.01, 3.0), PostSelection(1.0, 0), 0)


@given(st.floats(0.01, 0.25), st.floats(0, 0.05), st.floats(0, 2 * PI), st.floats(0, 2 * PI))
def test_distribution_matches_state_diagonal(lam, g, theta, phi):
    p = DampedParams(lam, g, PI)
    s = PostSelection(theta, phi)
    try:
        rho, prob = postselected_state_damped(p, s, 24)
    except DegeneratePostSelection:
        return
    if prob < 1e-6:
        return
    pr = phonon_distribution_analytic(p, s, np.arange(24))
    assert abs(pr.sum() - 1) < 1e-8
    np.testing.assert_allclose(np.real(np.diag(rho)), pr, atol=1e-8)


def test_parity_cats_without_damping():
    p = DampedParams(1.0, 0.0, PI)
    n = np.arange(40)
    odd = phonon_distribution_analytic(p, PostSelection(1.5 * PI, 0), n)
    even = phonon_distribution_analytic(p, PostSelection(PI / 2, 0), n)
    assert np.all(odd[0::2] < 1e-12)
    assert np.all(even[1::2] < 1e-12)


@given(st.floats(0.01, 0.5), st.floats(0, 0.1), st.floats(0, 2 * PI), st.floats(0, 2 * PI))
def test_states_are_valid_density_matrices(lam, g, theta, phi):
    try:
        rho, _ = postselected_state_damped(DampedParams(lam, g, PI), PostSelection(theta, phi), 30)
    except DegeneratePostSelection:
        return
    hilbert.check_density_matrix(rho)


def test_joint_state_trace_and_blocks():
    p = DampedParams(0.1, 0.01, PI)
    rho = joint_state_damped(p, 16)
    hilbert.check_density_matrix(rho)
    k = kernel(p)
    off = rho[:16, 16:]
    kp, km = hilbert.coherent_ket(k.beta_plus, 16), hilbert.coherent_ket(k.beta_minus, 16)
    np.testing.assert_allclose(off, 0.5 * k.coherence_factor * np.outer(kp, km.conj()),
                               atol=1e-15)


def test_degenerate_probability():
    with pytest.raises(DegeneratePostSelection):
        postselected_state_damped(DampedParams(0.0, 0.01, PI), PostSelection(1.5 * PI, 0), 8)
