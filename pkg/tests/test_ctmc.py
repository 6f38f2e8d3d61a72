import math

import numpy as np
import pytest
import scipy.linalg

from freshness.ctmc import (
    chain_diagnostics,
    is_reversible,
    spectral_decomposition,
    spectral_gap,
    stationary_argmax,
    stationary_distribution,
    tau_star,
    transition_matrices_on_grid,
    transition_matrix,
    validate_generator,
)
from freshness.chains import random_chain
from freshness.errors import (
    NegativeOffDiagonal,
    NotIrreducible,
    NotReversible,
    RowSumViolation,
    UniqueMaxRequired,
)


def test_validate_rejects_bad_generators():
    with pytest.raises(NegativeOffDiagonal):
        validate_generator([[-1, 1, 0], [-0.5, 0, 0.5], [1, 0, -1]])
    with pytest.raises(RowSumViolation):
        validate_generator([[-1, 2], [1, -1]])
    with pytest.raises(NotIrreducible):
        validate_generator([[-1, 1, 0], [1, -1, 0], [1, 0, -1]])
    with pytest.raises(ValueError):
        validate_generator([[0, 1, 2]])


def test_validate_replaces_diagonal():
    q = validate_generator([[-1.0 + 1e-12, 1.0], [2.0, -2.0]])
    assert q.rates[0, 0] == -1.0
    assert q.rates.flags.writeable is False


def test_two_state_stationary(two_state):
    pi = stationary_distribution(two_state).pi
    np.testing.assert_allclose(pi, [0.1 / 5.1, 5 / 5.1], rtol=0, atol=1e-15)


def test_stationary_on_random_chains(small_corpus):
    for q in small_corpus:
        pi = stationary_distribution(q).pi
        assert abs(pi.sum() - 1) < 1e-14
        assert np.max(np.abs(pi @ q.rates)) < 1e-12


@pytest.mark.parametrize("t", [0.0, 1e-6, 0.3, 2.0, 50.0])
def test_transition_matrix_against_scipy_expm(small_corpus, t):
    for q in small_corpus[:8]:
        p = transition_matrix(q, t).probs
        np.testing.assert_allclose(p, scipy.linalg.expm(q.rates * t), atol=1e-12)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-14)


def test_transition_matrix_two_state_closed_form(two_state):
    # P_11(t) = pi_1 + pi_2 exp(-(a+b)t)
    a, b = 5.0, 0.1
    for t in (0.01, 0.1, 1.0):
        p = transition_matrix(two_state, t).probs
        assert abs(p[0, 0] - (b + a * math.exp(-(a + b) * t)) / (a + b)) < 1e-14


def test_transition_matrix_rejects_negative_time(two_state):
    with pytest.raises(ValueError):
        transition_matrix(two_state, -1.0)


def test_grid_matches_pointwise(small_corpus):
    q = small_corpus[3]
    grid = transition_matrices_on_grid(q, 0.05, 40)
    for k in (1, 17, 40):
        np.testing.assert_allclose(grid[k], transition_matrix(q, 0.05 * k).probs, atol=1e-12)


def test_reversibility_flags():
    rev = random_chain(5, "reversible", seed=3)
    pi = stationary_distribution(rev)
    assert is_reversible(rev, pi)
    ring = validate_generator([[-1, 1, 0], [0, -1, 1], [1, 0, -1]])
    assert not is_reversible(ring, stationary_distribution(ring))
    with pytest.raises(NotReversible):
        spectral_decomposition(ring, stationary_distribution(ring))


def test_spectral_reconstructs_transition_diagonal():
    q = random_chain(5, "reversible", seed=8)
    pi = stationary_distribution(q).pi
    sd = spectral_decomposition(q, pi)
    assert sd.eigenvalues[0] == 0.0 and (sd.eigenvalues[1:] > 0).all()
    assert abs(sd.weights.sum() - 1.0) < 1e-12
    # tr(Pi P(t)) = sum_i a_i exp(-d_i t)
    for t in (0.1, 1.0, 5.0):
        lhs = float(pi @ np.diag(transition_matrix(q, t).probs))
        rhs = float(sd.weights @ np.exp(-sd.eigenvalues * t))
        assert abs(lhs - rhs) < 1e-12
    assert abs(spectral_gap(q) - sd.eigenvalues[1]) < 1e-10


def test_argmax_and_ties():
    d = stationary_argmax([0.2, 0.5, 0.3])
    assert (d.map_state, d.runner_up) == (1, 2) and abs(d.gap - 0.2) < 1e-15
    assert not stationary_argmax([0.4, 0.4, 0.2]).unique_max
    sym = validate_generator([[-1, 1], [1, -1]])
    with pytest.raises(UniqueMaxRequired):
        tau_star(sym)


def test_chain_diagnostics_reports_reversibility(two_state):
    diag = chain_diagnostics(two_state)
    assert diag.map_state == 1 and diag.reversible
    assert abs(diag.epsilon - diag.gap / 4) < 1e-16


def test_tau_star_two_state_closed_form(two_state):
    # P_11(t) = P_12(t) at t = ln(2a/(a-b))/(a+b)
    a, b = 5.0, 0.1
    exact = math.log(2 * a / (a - b)) / (a + b)
    ts = tau_star(two_state)
    assert ts.map_state == 1
    assert ts.empirical >= exact - 1e-12
    assert ts.empirical - exact <= ts.grid_step
    assert ts.empirical <= ts.certified


def test_tau_star_ring_ordering():
    ring = validate_generator([[-1, 1, 0], [0, -2, 2], [3, 0, -3]])
    ts = tau_star(ring)
    assert 0 <= ts.empirical <= ts.certified


def test_tau_star_argmax_holds_past_certified(small_corpus, rng):
    for q in small_corpus:
        ts = tau_star(q)
        for t in rng.uniform(ts.certified, 3 * ts.certified, 5):
            p = transition_matrix(q, t).probs
            assert (p.argmax(axis=1) == ts.map_state).all()
