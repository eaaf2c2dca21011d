import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradlike import stochastic as sto
from gradlike.dynamics import eval_field, generator_field
from gradlike.errors import InputError
from gradlike.games import logit_protocol
from gradlike.protocols import AttachmentSpec, PayoffSpec, ProtocolSpec

PAY = PayoffSpec.linear([[1.0, 0.0, 0.5], [0.0, 1.0, 0.0], [0.5, 0.0, 1.5]])
A = np.array([[1.0, 2.0, 0.5], [2.0, 1.0, 1.0], [0.5, 1.0, 3.0]])


def test_population_paths_are_deterministic():
    proto = logit_protocol(PAY, 2.0)
    a = sto.simulate_population(proto, 50, 500, 7, [0.5, 0.3, 0.2])
    b = sto.simulate_population(proto, 50, 500, 7, [0.5, 0.3, 0.2])
    c = sto.simulate_population(proto, 50, 500, 8, [0.5, 0.3, 0.2])
    assert np.array_equal(a.counts, b.counts)
    assert not np.array_equal(a.counts, c.counts)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 200), st.integers(0, 2**32 - 1))
def test_population_conserves_agents(N, seed):
    proto = ProtocolSpec.comparison(PAY, AttachmentSpec.uniform(3), "metropolis", 1.0)
    path = sto.simulate_population(proto, N, 200, seed, [0.2, 0.3, 0.5])
    assert np.all(path.counts.sum(axis=1) == N) and path.counts.min() >= 0
    moves = np.abs(np.diff(path.counts, axis=0)).sum(axis=1)
    assert set(np.unique(moves)) <= {0, 2}
    assert path.steps == 200


def test_single_agent_chain_has_kernel_law():
    # with N = 1 the population is one agent whose type follows K; for
    # gibbs-direct every row is pi, so visit frequencies converge to pi
    U0 = np.array([0.5, -0.2, 0.0])
    proto = ProtocolSpec.gibbs_direct(U0, np.zeros((3, 3)), 1.0)
    pi = np.exp(-U0) / np.exp(-U0).sum()
    path = sto.simulate_population(proto, 1, 40_000, 3, np.array([1, 0, 0]))
    freq = path.counts[1:].mean(axis=0)
    assert np.max(np.abs(freq - pi)) < 0.01


@pytest.mark.parametrize("x0,N,expected", [
    ([0.5, 0.3, 0.2], 10, [5, 3, 2]),
    ([1 / 3, 1 / 3, 1 / 3], 10, [4, 3, 3]),
    ([0.25, 0.25, 0.5], 3, [1, 1, 1]),
    ([0.1, 0.1, 0.8], 4, [1, 0, 3]),  # ties go to the lower index
])
def test_as_counts(x0, N, expected):
    c = sto.as_counts(x0, N)
    assert c.sum() == N and list(c) == expected


def test_as_counts_validates_integer_input():
    assert list(sto.as_counts(np.array([2, 3]), 5)) == [2, 3]
    with pytest.raises(InputError):
        sto.as_counts(np.array([2, 2]), 5)


def test_kernel_mean_field_is_generator_field():
    proto = ProtocolSpec.comparison(PAY, AttachmentSpec.uniform(3), "logit-pair", 2.0)
    F = sto.kernel_mean_field(proto)
    G = generator_field(proto)
    for x in np.random.default_rng(0).dirichlet(np.ones(3), 20):
        assert np.allclose(F(x), eval_field(G, x), atol=1e-15)


def test_meanfield_deviation_shrinks_with_N():
    proto = logit_protocol(PAY, 2.0)
    med = []
    for N in (100, 2500):
        c = sto.as_counts([0.5, 0.3, 0.2], N)
        ode = sto.meanfield_solution(proto, c / N, 2.0)
        med.append(np.median([sto.meanfield_deviation(sto.simulate_population(proto, N, 2 * N, s, c), proto, 2.0, ode)
                              for s in range(10)]))
    assert med[1] < med[0] / 2
    with pytest.raises(InputError):
        sto.meanfield_deviation(sto.simulate_population(proto, 10, 5, 0, [0.5, 0.3, 0.2]), proto, 0.0)


def test_reinforcement_occupation_measure():
    proto = ProtocolSpec.vertex_reinforcement(A, 1.0)
    occ = sto.simulate_reinforcement(proto, 2000, 11, 0, [0.2, 0.3, 0.5])
    assert np.allclose(occ.mu.sum(axis=1), 1.0)
    for k in (1, 2, 10, 2001):
        exact = np.array([float(v) for v in occ.exact_mu(k)])
        assert np.allclose(exact, occ.mu[k - 1], atol=1e-12)
    again = sto.simulate_reinforcement(proto, 2000, 11, 0, [0.2, 0.3, 0.5])
    assert np.array_equal(occ.visits, again.visits)


def test_reinforcement_prior_validation():
    proto = ProtocolSpec.vertex_reinforcement(A, 1.0)
    with pytest.raises(InputError):
        sto.simulate_reinforcement(proto, 10, 0, 0, [0.5, 0.5, 0.0])


def test_csv_outputs(tmp_path):
    proto = logit_protocol(PAY, 1.0)
    sto.simulate_population(proto, 10, 20, 0, [0.5, 0.3, 0.2]).to_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "k,c1,c2,c3" and len(lines) == 22
    occ = sto.simulate_reinforcement(ProtocolSpec.vertex_reinforcement(A), 5, 0, 1, [0.2, 0.3, 0.5])
    occ.to_csv(tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "k,X,mu1,mu2,mu3"


def test_summary():
    s = sto.summary([3.0, 1.0, 2.0])
    assert s == {"count": 3, "median": 2.0, "mean": 2.0, "min": 1.0, "max": 3.0}
