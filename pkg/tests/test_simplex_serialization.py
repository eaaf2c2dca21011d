import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gradlike import serialization as ser
from gradlike import simplex as sx
from gradlike.errors import BoundaryPoint, NotInSimplex, UnknownKind
from gradlike.transforms import ConvexFunction, transform

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_as_simplex_point():
    assert np.array_equal(sx.as_simplex_point([0.25, 0.75]), [0.25, 0.75])
    for bad in ([0.5, 0.6], [1.1, -0.1], [np.nan, 1.0], [[0.5, 0.5]]):
        with pytest.raises(NotInSimplex):
            sx.as_simplex_point(bad)


def test_support_and_interior():
    x = [0.5, 0.0, 0.5]
    assert sx.support(x) == (0, 2)
    assert not sx.is_interior(x)
    with pytest.raises(BoundaryPoint):
        sx.require_interior(x)


@settings(max_examples=200)
@given(arrays(float, st.integers(1, 7), elements=finite))
def test_projection_lands_in_simplex(y):
    p = sx.project_simplex(y)
    assert p.min() >= 0 and p.sum() == pytest.approx(1.0, abs=1e-9)
    # optimality: y - p is constant on the support and no larger off it
    r = y - p
    on = p > 0
    assert np.ptp(r[on]) <= 1e-7 * max(1.0, np.abs(y).max())
    if (~on).any():
        assert r[~on].max() <= r[on].min() + 1e-7 * max(1.0, np.abs(y).max())


@settings(max_examples=100)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_chart_roundtrip(n, seed):
    x = np.random.default_rng(seed).dirichlet(np.ones(n))
    c = sx.Chart(n)
    assert np.allclose(c.point(c.to_chart(x)), x, atol=1e-15)
    u = sx.tangent_part(np.random.default_rng(seed + 1).normal(size=n))
    assert np.allclose(c.tangent(c.to_chart(u)), u, atol=1e-14)
    assert np.allclose(c.basis().sum(axis=0), 0.0)


def test_grid_and_samplers():
    g = sx.simplex_grid(3, 100)
    assert g.shape == (100, 3) and np.all(g > 0) and np.allclose(g.sum(axis=1), 1)
    assert np.array_equal(g, sx.simplex_grid(3, 100))
    s = sx.sample_simplex(np.random.default_rng(1), 500, 4, min_coord=0.05)
    assert s.min() >= 0.05 - 1e-15 and np.allclose(s.sum(axis=1), 1)
    b = sx.sample_ball(np.random.default_rng(2), sx.barycenter(3), 0.1, 300)
    assert np.allclose(b.sum(axis=1), 1) and np.max(np.linalg.norm(b - 1 / 3, axis=1)) <= 0.1 + 1e-12


@pytest.mark.parametrize("sid", ["log", "neg-reciprocal", "neg-power", "identity"])
def test_transforms_increasing_with_derivative(sid):
    s = transform(sid, beta=2.0)
    t = np.linspace(0.1, 5, 50)
    assert np.all(np.diff(s(t)) > 0)
    h = 1e-6
    assert np.allclose(s.derivative(t), (s(t + h) - s(t - h)) / (2 * h), rtol=1e-6)


@pytest.mark.parametrize("sid", ["tlogt", "chi2", "neglog"])
def test_convex_functions(sid):
    S = ConvexFunction(sid)
    t = np.linspace(0.2, 4, 40)
    h = 1e-5
    assert np.allclose(S.derivative(t), (S(t + h) - S(t - h)) / (2 * h), rtol=1e-6)
    assert np.allclose(S.second_derivative(t), (S.derivative(t + h) - S.derivative(t - h)) / (2 * h), rtol=1e-5)
    assert np.all(S.second_derivative(t) > 0)


def test_unknown_transform():
    with pytest.raises(UnknownKind):
        transform("sqrt")


@settings(max_examples=100)
@given(arrays(float, st.tuples(st.integers(1, 5), st.integers(1, 5)),
              elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_matrix_text_roundtrip_is_exact(M):
    assert np.array_equal(ser.matrix_from_text(ser.matrix_to_text(M)), M)


@settings(max_examples=100)
@given(arrays(float, st.integers(1, 5).map(lambda k: (k, k)), elements=finite))
def test_matrix_json_roundtrip(M):
    back = ser.matrix_from_json(json.dumps(ser.matrix_to_json(M)))
    assert np.array_equal(back, M)


def test_matrix_parsers_reject_bad_input():
    with pytest.raises(ValueError):
        ser.matrix_from_text("1 2\n3\n")
    with pytest.raises(ValueError):
        ser.matrix_from_json({"n": 3, "entries": [[1, 2], [3, 4]]})


def test_csv_roundtrip(tmp_path):
    p = tmp_path / "t.csv"
    ser.write_csv(p, ["a", "b"], [[0.1, 1e-300], [2, np.float64(1) / 3]])
    header, rows = ser.read_csv(p)
    assert header == ["a", "b"]
    assert np.array_equal(rows, [[0.1, 1e-300], [2.0, 1 / 3]])


def test_to_jsonable_handles_numpy_and_complex():
    out = ser.to_jsonable({"a": np.arange(3), "z": complex(1, -2), 3: np.float64(0.5)})
    assert out == {"a": [0, 1, 2], "z": {"re": 1.0, "im": -2.0}, "3": 0.5}
    json.dumps(out)
