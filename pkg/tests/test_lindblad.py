import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mechqubit import hilbert
from mechqubit.closed_form import CouplingParams, PostSelection, joint_state_unitary, \
    plus_branch_angle
from mechqubit.damped import DampedParams, joint_state_damped, postselected_state_damped
from mechqubit.errors import CutoffError, DegeneratePostSelection
from mechqubit.lindblad import PLUS_QUBIT, DecoherenceRates, Generator, SolverConfig, \
    default_n_max, evolve, fidelity_to_plus_qubit, initial_state, liouvillian_rhs, \
    postselect_spin, propagate, trajectory

PI = math.pi
FULL_RATES = DecoherenceRates(1e-3, 1e-4, 1e-3, 10, 10)


def random_hermitian(rng, dim):
    h = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (h + h.conj().T) / 2


rates_st = st.builds(DecoherenceRates, st.floats(0, 0.1), st.floats(0, 0.1), st.floats(0, 0.1),
                     st.floats(0, 20), st.floats(0, 20))


@given(st.integers(0, 2 ** 31), st.floats(0, 1), rates_st)
def test_rhs_is_traceless_and_hermitian(seed, lam, rates):
    rho = random_hermitian(np.random.default_rng(seed), 12)
    d = liouvillian_rhs(rho, lam, rates)
    assert abs(np.trace(d)) < 1e-10
    np.testing.assert_allclose(d, d.conj().T, atol=1e-10)


def test_rhs_vanishes_on_hamiltonian_eigenprojector():
    gen = Generator(10, 0.2, DecoherenceRates())
    _, vecs = np.linalg.eigh(gen.hamiltonian)
    for k in (0, 3):
        rho = hilbert.ket2dm(vecs[:, k])
        assert np.max(np.abs(liouvillian_rhs(rho, 0.2, DecoherenceRates()))) < 1e-12


def test_rhs_shape_checks():
    with pytest.raises(ValueError):
        liouvillian_rhs(np.eye(5), 0.1, DecoherenceRates())
    with pytest.raises(ValueError):
        propagate(np.eye(6), 1.0, 0.1, DecoherenceRates(), SolverConfig(n_max=4))


def test_rhs_batched_equals_individual():
    rng = np.random.default_rng(1)
    batch = np.stack([random_hermitian(rng, 8) for _ in range(3)])
    out = liouvillian_rhs(batch, 0.3, FULL_RATES)
    for r, o in zip(batch, out):
        np.testing.assert_allclose(liouvillian_rhs(r, 0.3, FULL_RATES), o, atol=1e-13)


def test_rates_and_config_validation():
    with pytest.raises(ValueError):
        DecoherenceRates(gamma=-1e-3)
    with pytest.raises(ValueError):
        DecoherenceRates(nbar_m=math.nan)
    with pytest.raises(ValueError):
        SolverConfig(n_max=1)
    with pytest.raises(ValueError):
        SolverConfig(dt=0)
    with pytest.raises(ValueError):
        SolverConfig(method="euler")
    assert default_n_max(FULL_RATES) == 16
    assert default_n_max(DecoherenceRates(nbar_m=100)) == 32


def test_unitary_matches_closed_form():
    n = 16
    rho = evolve(initial_state(n), PI, 0.1, DecoherenceRates(), SolverConfig(n))
    ket = joint_state_unitary(CouplingParams(0.1, PI), n)
    assert hilbert.trace_distance(rho, hilbert.ket2dm(ket)) < 1e-6


@pytest.mark.parametrize("lam", [0.05, 0.1, 0.25])
@pytest.mark.parametrize("gamma", [1e-3, 1e-2])
def test_damping_matches_analytic_model(lam, gamma):
    n = 16
    rates = DecoherenceRates(gamma=gamma)
    rho = evolve(initial_state(n), PI, lam, rates, SolverConfig(n))
    assert hilbert.trace_distance(rho, joint_state_damped(DampedParams(lam, gamma, PI), n)) < 1e-6
    # spin coherence block against the analytic kernel
    ref = joint_state_damped(DampedParams(lam, gamma, PI), n)
    assert np.max(np.abs(rho[:n, n:] - ref[:n, n:])) < 1e-6
    s = PostSelection(plus_branch_angle(CouplingParams(lam, PI)), 0.0)
    rho_m, prob = postselect_spin(rho, s)
    ref_m, ref_prob = postselected_state_damped(DampedParams(lam, gamma, PI), s, n)
    assert hilbert.trace_distance(rho_m, ref_m) < 1e-6
    assert abs(prob - ref_prob) < 1e-8


def test_two_level_relaxation_oracle():
    n = 2
    cases = [DecoherenceRates(Gamma=0.3), DecoherenceRates(Gamma=0.2, nbar_q=1.5, gamma_phi=0.1)]
    times = np.linspace(0, 4, 9)
    for rates in cases:
        states = trajectory(initial_state(n), times, 0.0, rates, SolverConfig(n, dt=1e-3))
        nb = rates.nbar_q
        decay = rates.Gamma * (1 + 2 * nb)
        z_ss = -1 / (1 + 2 * nb)
        for t, rho in zip(times, states):
            spin = np.einsum("siti->st", rho.reshape(2, n, 2, n))
            z = (spin[0, 0] - spin[1, 1]).real
            assert z == pytest.approx(z_ss + (0 - z_ss) * math.exp(-decay * t), abs=1e-10)
            coh = abs(spin[0, 1])
            assert coh == pytest.approx(0.5 * math.exp(-(decay / 2 + rates.gamma_phi) * t),
                                        abs=1e-10)


def test_spin_relaxes_toward_down():
    rates = DecoherenceRates(Gamma=0.5)
    rho = evolve(initial_state(3), 12.0, 0.0, rates, SolverConfig(3, dt=1e-2))
    z = hilbert.expectation(rho, hilbert.tensor(hilbert.sigma_z(), np.eye(3))).real
    assert z == pytest.approx(-1 + math.exp(-0.5 * 12.0), abs=1e-9)


def test_trajectory_stays_physical():
    n = 16
    times = np.linspace(0, PI, 9)
    states = trajectory(initial_state(n), times, 0.05, FULL_RATES, SolverConfig(n))
    for rho in states:
        hilbert.check_density_matrix(rho, herm_tol=1e-10, trace_tol=1e-8, pos_tol=1e-8)


def _final(n, dt, lam=0.1, rates=DecoherenceRates(0.02, 0.01, 0.02, 1.0, 1.0)):
    return propagate(initial_state(n), PI, lam, rates, SolverConfig(n, dt=dt))


def test_rk4_convergence_order():
    n = 8
    ref = propagate(initial_state(n), PI, 0.1, DecoherenceRates(0.02, 0.01, 0.02, 1.0, 1.0),
                    SolverConfig(n, method="adaptive", rtol=1e-13, atol=1e-14))
    steps = np.array([PI / 10, PI / 20, PI / 40, PI / 80])
    errs = np.array([hilbert.trace_distance(_final(n, h), ref) for h in steps])
    order = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    assert 3.7 <= order <= 4.3, order


def test_step_halving_at_default_step():
    n = 16
    a = propagate(initial_state(n), PI, 0.05, FULL_RATES, SolverConfig(n))
    b = propagate(initial_state(n), PI, 0.05, FULL_RATES, SolverConfig(n, dt=PI / 4000))
    assert hilbert.trace_distance(a, b) < 1e-8


def test_adaptive_agrees_with_rk4():
    n = 12
    rates = DecoherenceRates(0.01, 0.01, 0.01, 0.5, 2.0)
    a = evolve(initial_state(n), PI, 0.1, rates, SolverConfig(n))
    b = evolve(initial_state(n), PI, 0.1, rates, SolverConfig(n, method="adaptive"))
    assert hilbert.trace_distance(a, b) < 1e-8


def test_tail_overflow_is_reported():
    with pytest.raises(CutoffError):
        evolve(initial_state(6), PI, 0.5, DecoherenceRates(), SolverConfig(6))


def test_zero_time_is_identity():
    rho0 = initial_state(4)
    np.testing.assert_array_equal(propagate(rho0, 0.0, 0.2, FULL_RATES, SolverConfig(4)), rho0)


def test_postselect_examples():
    n = 4
    rho_m = np.diag([0.7, 0.2, 0.1, 0.0]).astype(complex)
    up = np.diag([1.0, 0.0])
    got, prob = postselect_spin(hilbert.tensor(up, rho_m), PostSelection(0.0, 0.0))
    assert prob == pytest.approx(1)
    np.testing.assert_allclose(got, rho_m, atol=1e-15)
    with pytest.raises(DegeneratePostSelection):
        postselect_spin(hilbert.tensor(up, rho_m), PostSelection(PI, 0.0))
    with pytest.raises(ValueError):
        postselect_spin(np.eye(5), PostSelection(0.0, 0.0))


def test_postselected_unitary_state_has_equal_weights():
    n = 16
    p = CouplingParams(0.1, PI)
    rho = hilbert.ket2dm(joint_state_unitary(p, n))
    rho_m, _ = postselect_spin(rho, PostSelection(plus_branch_angle(p), 0.0))
    assert abs(rho_m[0, 0].real - rho_m[1, 1].real) < 1e-3


def test_fidelity_examples():
    assert fidelity_to_plus_qubit(np.outer(PLUS_QUBIT, PLUS_QUBIT)) == pytest.approx(1)
    minus = np.array([1.0, -1.0]) / math.sqrt(2)
    assert fidelity_to_plus_qubit(np.outer(minus, minus)) == pytest.approx(0, abs=1e-8)
    assert fidelity_to_plus_qubit(np.diag([0.5, 0.5, 0.0])) == pytest.approx(math.sqrt(0.5))


@settings(max_examples=20)
@given(st.integers(0, 2 ** 31))
def test_fidelity_in_unit_interval(seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    rho = g @ g.conj().T
    rho /= np.trace(rho)
    assert 0 <= fidelity_to_plus_qubit(rho) <= 1


@pytest.mark.slow
def test_hot_bath_populations():
    n = 32
    rates = DecoherenceRates(1e-5, 1e-4, 1e-3, nbar_m=100, nbar_q=10)
    rho = evolve(initial_state(n), PI, 0.05, rates, SolverConfig(n))
    rho_m, _ = postselect_spin(rho, PostSelection(plus_branch_angle(CouplingParams(0.05, PI)), 0))
    pr0, pr1 = np.real(np.diagonal(rho_m))[:2]
    assert abs(pr0 - 0.518) <= 0.024
    assert abs(pr1 - 0.447) <= 0.022
