import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.linalg import expm, null_space

from gradlike import markov_core as mc
from gradlike.errors import BoundaryPoint, NegativeOffDiagonal, NotIrreducible, NotStochastic, RowSumViolation
from gradlike.transforms import ConvexFunction, transform

rates = st.floats(0.05, 20.0)


@st.composite
def generators(draw, nmin=2, nmax=6):
    n = draw(st.integers(nmin, nmax))
    Q = draw(arrays(float, (n, n), elements=rates))
    return mc.generator_from_offdiagonal(Q)


@st.composite
def reversible_generators(draw):
    n = draw(st.integers(2, 6))
    S = draw(arrays(float, (n, n), elements=rates))
    S = S + S.T
    pi = draw(arrays(float, n, elements=st.floats(0.05, 1.0)))
    pi = pi / pi.sum()
    # L_ij = S_ij / pi_i satisfies detailed balance with pi
    return mc.generator_from_offdiagonal(S / pi[:, None]), pi


def test_validate_rate_matrix_snaps_diagonal():
    L = mc.validate_rate_matrix([[-1.0, 1.0 + 5e-13], [2.0, -2.0]])
    assert np.array_equal(np.asarray(L).sum(axis=1), [0.0, 0.0])
    assert L.n == 2


def test_validate_rate_matrix_errors():
    with pytest.raises(NegativeOffDiagonal) as exc:
        mc.validate_rate_matrix([[0.5, -0.5], [1.0, -1.0]])
    assert (exc.value.i, exc.value.j) == (0, 1)
    with pytest.raises(RowSumViolation):
        mc.validate_rate_matrix([[-1.0, 2.0], [1.0, -1.0]])


def test_validate_markov_matrix():
    K = mc.validate_markov_matrix([[0.25, 0.75], [1.0, 0.0]])
    assert K.n == 2
    with pytest.raises(NotStochastic):
        mc.validate_markov_matrix([[0.5, 0.6], [0.5, 0.5]])
    with pytest.raises(NotStochastic):
        mc.validate_markov_matrix([[1.5, -0.5], [0.5, 0.5]])


def test_two_state_closed_forms():
    a, b = 0.3, 1.7
    L = np.array([[-a, a], [b, -b]])
    pi = mc.invariant_probability(L)
    assert np.allclose(pi, [b / (a + b), a / (a + b)], atol=1e-15)
    # every two-state chain is reversible and its only nonzero rate is a + b
    assert mc.is_reversible(L, pi)
    assert mc.spectral_gap(L, pi) == pytest.approx(a + b, rel=1e-12)


def test_cycle_gap_matches_fourier_oracle():
    # symmetric walk on a 5-cycle with unit rates: gap = 2 - 2 cos(2 pi / 5)
    n = 5
    Q = np.zeros((n, n))
    for i in range(n):
        Q[i, (i + 1) % n] = Q[i, (i - 1) % n] = 1.0
    L = mc.generator_from_offdiagonal(Q)
    pi = mc.invariant_probability(L)
    assert np.allclose(pi, 0.2)
    assert mc.spectral_gap(L, pi) == pytest.approx(2 - 2 * np.cos(2 * np.pi / n), rel=1e-12)


def test_reducible_generator_rejected():
    L = mc.generator_from_offdiagonal([[0, 1, 0], [1, 0, 0], [0, 0, 0]])
    assert not mc.is_irreducible(L)
    with pytest.raises(NotIrreducible):
        mc.invariant_probability(L)
    with pytest.raises(NotIrreducible):
        mc.spectral_gap(L, np.full(3, 1 / 3))


def test_nonpositive_pi_rejected():
    L = mc.generator_from_offdiagonal([[0, 1], [1, 0]])
    with pytest.raises(BoundaryPoint):
        mc.adjoint(L, [1.0, 0.0])


@settings(max_examples=150, deadline=None)
@given(generators())
def test_invariant_probability_properties(L):
    pi = mc.invariant_probability(L)
    assert np.all(pi > 0) and pi.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.max(np.abs(pi @ L)) <= 1e-10 * max(1.0, np.abs(L).max())
    # null space oracle
    v = null_space(L.T)[:, 0]
    assert np.allclose(pi, v / v.sum(), atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(generators())
def test_adjoint_is_generator_with_same_pi(L):
    pi = mc.invariant_probability(L)
    A = mc.adjoint(L, pi)
    assert np.allclose(A.sum(axis=1), 0.0, atol=1e-9 * np.abs(L).max())
    assert np.allclose(mc.adjoint(A, pi), L, atol=1e-9 * np.abs(L).max())
    f, g = np.sin(np.arange(L.shape[0])), np.cos(np.arange(L.shape[0]))
    assert mc.inner(f, L @ g, pi) == pytest.approx(mc.inner(A @ f, g, pi), abs=1e-9 * np.abs(L).max())


@settings(max_examples=100, deadline=None)
@given(reversible_generators())
def test_reversible_construction_detected(data):
    L, pi = data
    assert mc.is_reversible(L, pi, tol=1e-9)
    assert np.allclose(mc.invariant_probability(L), pi, atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(generators(), st.integers(0, 2**32 - 1))
def test_gap_is_infimum_of_rayleigh_quotient(L, seed):
    pi = mc.invariant_probability(L)
    gap = mc.spectral_gap(L, pi)
    assert gap > 0
    rng = np.random.default_rng(seed)
    for _ in range(20):
        f = rng.normal(size=L.shape[0])
        var = mc.variance(f, pi)
        if var < 1e-12:
            continue
        assert mc.dirichlet_form(L, pi, f) >= gap * var * (1 - 1e-9) - 1e-12


@settings(max_examples=60, deadline=None)
@given(reversible_generators())
def test_gap_equals_decay_rate_for_reversible(data):
    L, pi = data
    gap = mc.spectral_gap(L, pi)
    ev = np.sort(np.linalg.eigvals(-L).real)
    assert gap == pytest.approx(ev[1], rel=1e-8)


@settings(max_examples=100, deadline=None)
@given(generators(), st.sampled_from(["log", "neg-reciprocal", "identity"]), st.integers(0, 2**32 - 1))
def test_poincare_inequality_holds(L, sid, seed):
    x = np.random.default_rng(seed).dirichlet(np.ones(L.shape[0]))
    lhs, rhs = mc.poincare_inequality_check(L, x, transform(sid))
    assert lhs <= rhs + 1e-9


@settings(max_examples=60, deadline=None)
@given(generators(), st.sampled_from(["tlogt", "chi2", "neglog"]), st.integers(0, 2**32 - 1))
def test_entropy_dissipation(L, sid, seed):
    S = ConvexFunction(sid)
    pi = mc.invariant_probability(L)
    x = np.random.default_rng(seed).dirichlet(np.ones(L.shape[0]))
    rate, bound = mc.entropy_dissipation(L, pi, S, x)
    assert rate <= bound + 1e-9
    # derivative against the semigroup
    # step scaled to the smallest mass and the fastest rate keeps truncation error small
    h = 1e-4 * x.min() / np.abs(np.diag(L)).max()
    fd = (mc.entropy_functional(pi, S, x @ expm(h * L)) - mc.entropy_functional(pi, S, x @ expm(-h * L))) / (2 * h)
    assert rate == pytest.approx(fd, rel=1e-4, abs=1e-7)


def test_dirichlet_edge_form_nonnegative():
    rng = np.random.default_rng(0)
    L = mc.generator_from_offdiagonal(rng.random((4, 4)))
    pi = mc.invariant_probability(L)
    for _ in range(50):
        assert mc.dirichlet_form(L, pi, rng.normal(size=4)) >= 0
    assert mc.dirichlet_form(L, pi, np.ones(4)) == 0.0
