import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradlike import games
from gradlike.errors import InputError
from gradlike.protocols import PayoffSpec
from gradlike.simplex import barycenter

COORD = PayoffSpec.linear(np.eye(3))
RPS = PayoffSpec.linear([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])


def test_coordination_nash_set():
    ne = games.enumerate_nash(COORD)
    assert len(ne) == 7
    kinds = sorted(q.kind for q in ne)
    assert kinds == ["fully-mixed"] + ["partially-mixed"] * 3 + ["pure"] * 3
    for q in ne:
        assert games.is_nash(COORD, q.location)
        assert q.strict  # off-support payoffs are strictly below average everywhere
        assert q.nondegenerate in (None, True)
        assert q.to_dict()["kind"] == q.kind
    center = next(q for q in ne if q.kind == "fully-mixed")
    assert np.allclose(center.location, barycenter(3))


def test_rps_unique_interior_equilibrium():
    ne = games.enumerate_nash(RPS)
    assert len(ne) == 1
    assert np.allclose(ne[0].location, barycenter(3))
    assert ne[0].kind == "fully-mixed"


def test_extrinsic_matrix_sign():
    # on the face {1, 2}, h = U_1 - U_2 = x_1 - x_2 grows by 2 along e_1 - e_2
    D = games.extrinsic_matrix(COORD, [0.5, 0.5, 0.0])
    assert D.shape == (1, 1) and D[0, 0] == pytest.approx(2.0, abs=1e-8)


def test_is_nash_certificate():
    cert = games.is_nash(COORD, [0.7, 0.3, 0.0])
    assert not cert and cert.max_violation == pytest.approx(0.7 - 0.58)
    assert games.is_nash(COORD, [1.0, 0.0, 0.0])


def test_best_reply_and_index():
    idx, verts = games.best_reply_set(COORD, barycenter(3))
    assert idx == (0, 1, 2) and np.array_equal(verts, np.eye(3))
    assert games.best_reply_set(COORD, [0.6, 0.3, 0.1])[0] == (0,)
    # W = -|x|^2 / 2 is concave on every face
    assert games.potential_index(COORD, barycenter(3)) == 2
    assert games.potential_index(COORD, [0.5, 0.5, 0.0]) == 1
    assert games.potential_index(COORD, [1.0, 0.0, 0.0]) == 0


def test_two_strategy_closed_form():
    # anti-coordination: U = [[0, a], [b, 0]] has the mixed equilibrium x1 = a / (a + b)
    a, b = 2.0, 3.0
    ne = games.enumerate_nash(PayoffSpec.linear([[0.0, a], [b, 0.0]]))
    mixed = [q for q in ne if q.kind == "fully-mixed"]
    assert len(ne) == 1 and len(mixed) == 1
    assert mixed[0].location[0] == pytest.approx(a / (a + b))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_enumeration_agrees_with_grid_search(seed):
    rng = np.random.default_rng(seed)
    pay = PayoffSpec.linear(rng.normal(size=(2, 2)))
    ne = games.enumerate_nash(pay)
    assert ne
    for q in ne:
        assert games.is_nash(pay, q.location)
    locs = np.array([q.location for q in ne])
    for t in np.linspace(0, 1, 2001):
        x = np.array([t, 1 - t])
        if games.is_nash(pay, x, tol=0.0):
            assert np.min(np.abs(locs[:, 0] - t)) <= 1e-3


def test_enumeration_limits():
    with pytest.raises(InputError):
        games.enumerate_nash(PayoffSpec.linear(np.eye(7)))
    with pytest.raises(InputError):
        games.enumerate_nash(PayoffSpec.from_table(2, lambda x: x))


def test_degenerate_supports():
    # constant game: every point is Nash and all support systems are singular.
    # Two strategies: the one-dimensional solution line resolves to its endpoints.
    ne = games.enumerate_nash(PayoffSpec.linear(np.zeros((2, 2))))
    assert len(ne) == 2 and not any(q.flagged for q in ne)
    # Four strategies: the full support has a 3-dimensional solution set and is flagged
    ne = games.enumerate_nash(PayoffSpec.linear(np.zeros((4, 4))))
    flagged = [q for q in ne if q.flagged]
    assert len(flagged) == 1 and np.allclose(flagged[0].location, 0.25)


def test_contraction_near_strict_pure_nash():
    proto = games.logit_protocol(COORD, 50.0)
    c = games.contraction_diagnostic(proto.invariant, [1.0, 0.0, 0.0], 0.1, samples=50)
    assert c < 1.0


def test_correspondence_table(tmp_path):
    table = games.beta_correspondence(RPS, (1.0, 10.0))
    assert [r.beta for r in table.rows] == [1.0, 10.0]
    assert not table.unmatched()
    table.to_csv(tmp_path / "ladder.csv")
    text = (tmp_path / "ladder.csv").read_text().splitlines()
    assert text[0].startswith("beta,x1,x2,x3,nash_id")
    assert len(text) == 3
    assert table.to_dict()["rows"][0]["classification"] in ("sink", "saddle", "source")
    with pytest.raises(InputError):
        games.beta_correspondence(RPS, (10.0, 1.0))
