import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradlike import markov_core as mc
from gradlike.dynamics import eval_field, generator_field, replicator_field
from gradlike.errors import (AsymmetricMatrix, DegenerateDenominator, DimensionMismatch, InputError, RowOverflow,
                             UnknownKind)
from gradlike.protocols import (AttachmentSpec, PayoffSpec, ProtocolSpec, constant_target, gibbs_measure,
                                gibbs_target, logit_target, markov_kernel, target_from_dict,
                                vertex_reinforcement_invariant, vertex_reinforcement_kernel)

seeds = st.integers(0, 2**32 - 1)

W3 = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]])
POT = PayoffSpec.quadratic_potential([[1.0, -0.5, 0.2], [-0.5, 2.0, 0.3], [0.2, 0.3, -1.0]], [0.1, 0.0, -0.2])
RPS = PayoffSpec.linear([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])


def point(seed, n=3, interior=True):
    x = np.random.default_rng(seed).dirichlet(np.ones(n))
    return np.maximum(x, 1e-6) / np.maximum(x, 1e-6).sum() if interior else x


def all_protocols():
    A = np.array([[1.0, 2.0, 0.5], [2.0, 1.0, 1.0], [0.5, 1.0, 3.0]])
    return [
        ProtocolSpec.sampling(RPS, AttachmentSpec.uniform(3), "exp", 2.0),
        ProtocolSpec.sampling(POT, AttachmentSpec.imitative(np.ones((3, 3)) + np.eye(3), 1.0), "exp", 1.0),
        ProtocolSpec.sampling(PayoffSpec.linear(np.eye(3) + 1.0), AttachmentSpec.uniform(3), "power", 2.0),
        ProtocolSpec.comparison(POT, AttachmentSpec.constant(W3), "metropolis", 3.0),
        ProtocolSpec.comparison(RPS, AttachmentSpec.uniform(3), "logit-pair", 1.0),
        ProtocolSpec.comparison(POT, AttachmentSpec.constant(W3, [0.1, 0.0, -0.3]), "success", 0.5),
        ProtocolSpec.replicator(RPS),
        ProtocolSpec.gibbs_direct([0.1, 0.0, -0.2], [[0, 1, 0.5], [1, 0, 0], [0.5, 0, 0]], 2.0),
        ProtocolSpec.vertex_reinforcement(A, 2.0),
        ProtocolSpec.reversible_from_target(W3, gibbs_target([0.2, -0.1, 0.0], np.eye(3), 1.0)),
    ]


@pytest.mark.parametrize("proto", all_protocols(), ids=lambda p: p.kind)
def test_kernels_are_stochastic_and_roundtrip(proto):
    for s in range(20):
        x = point(s)
        K = markov_kernel(proto, x)
        L = proto.rate(x)
        assert np.allclose(L.sum(axis=1), 0.0, atol=1e-14)
        for i in range(3):
            assert np.allclose(proto.kernel_row(x, i), np.asarray(K)[i], atol=1e-15)
        if proto.has_closed_form_invariant:
            assert np.allclose(proto.invariant(x), proto.invariant_by_solve(x), atol=1e-10)
    back = ProtocolSpec.from_dict(proto.to_dict(), 3)
    x = point(99)
    assert np.array_equal(back.kernel(x), proto.kernel(x))


@settings(max_examples=60, deadline=None)
@given(seeds, st.sampled_from(["logit-pair", "metropolis", "dissatisfaction", "success"]),
       st.floats(0.1, 4.0))
def test_reversible_comparison_closed_form_matches_solve(seed, g, beta):
    rng = np.random.default_rng(seed)
    Q = rng.normal(size=(3, 3))
    pay = PayoffSpec.quadratic_potential(Q + Q.T, rng.normal(size=3))
    S = rng.random((3, 3)) + 0.1
    proto = ProtocolSpec.comparison(pay, AttachmentSpec.constant(S + S.T), g, beta)
    x = point(seed)
    pi = proto.invariant(x)
    assert np.allclose(pi, proto.invariant_by_solve(x), atol=1e-10)
    assert mc.is_reversible(proto.rate(x), pi, tol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seeds, st.floats(0.0, 10.0))
def test_uniform_sampling_rows_are_logit(seed, beta):
    rng = np.random.default_rng(seed)
    pay = PayoffSpec.linear(rng.normal(size=(4, 4)))
    proto = ProtocolSpec.sampling(pay, AttachmentSpec.uniform(4), "exp", beta)
    x = point(seed, 4)
    w = np.exp(beta * pay(x))
    assert np.allclose(proto.kernel(x), np.tile(w / w.sum(), (4, 1)), rtol=1e-12)
    assert np.allclose(proto.invariant(x), w / w.sum(), rtol=1e-10)


def test_gibbs_measure_limits():
    U0 = np.array([0.3, -0.2, 0.0])
    U = np.array([[0, 1.0, 0], [1.0, 0, 2.0], [0, 2.0, 0]])
    assert np.allclose(gibbs_measure(U0, U, 0.0, point(1)), np.exp(-U0) / np.exp(-U0).sum())
    with pytest.raises(AsymmetricMatrix):
        gibbs_measure(U0, U + np.triu(np.ones((3, 3))), 1.0, point(1))
    with pytest.raises(InputError):
        gibbs_measure(U0, U, -1.0, point(1))


def test_replicator_mean_field_is_replicator_ode():
    proto = ProtocolSpec.replicator(RPS)
    F = generator_field(proto)
    R = replicator_field(RPS, proto.rate_scale)
    for s in range(20):
        x = point(s)
        assert np.allclose(eval_field(F, x), eval_field(R, x), atol=1e-15)
    assert proto.imitative


def test_comparison_rate_scale_keeps_rows_stochastic():
    proto = ProtocolSpec.comparison(POT, AttachmentSpec.constant(W3), "success", 2.0)
    assert 0 < proto.rate_scale < 1
    with pytest.raises(RowOverflow):
        ProtocolSpec.comparison(POT, AttachmentSpec.constant(W3), "success", 2.0, rate_scale=10.0)


def test_reversible_from_target_is_reversible():
    t = gibbs_target([0.2, -0.1, 0.0], [[0, 1, 0], [1, 0, 0], [0, 0, 0]], 3.0)
    proto = ProtocolSpec.reversible_from_target(W3, t)
    for s in range(10):
        x = point(s)
        L = proto.rate(x)
        assert mc.is_reversible(L, t(x), tol=1e-14)
        assert np.allclose(proto.kernel(x), np.eye(3) + L / 3.0)
    with pytest.raises(InputError):
        ProtocolSpec.reversible_from_target(W3 - 1.0 + np.eye(3), t)


def test_vertex_reinforcement_invariant_and_degenerate_rows():
    A = np.array([[1.0, 2.0, 0.5], [2.0, 1.0, 1.0], [0.5, 1.0, 3.0]])
    for gamma in (1.0, 2.0):
        proto = ProtocolSpec.vertex_reinforcement(A, gamma)
        assert proto.target is not None
        x = point(3)
        assert np.allclose(proto.invariant(x), proto.invariant_by_solve(x), atol=1e-12)
    # off-support rows absorb when the normalizer vanishes
    Z = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    K = vertex_reinforcement_kernel(Z, 1.0, [0.0, 0.0, 1.0])
    assert np.array_equal(K[:2], np.eye(3)[:2])
    with pytest.raises(DegenerateDenominator):
        vertex_reinforcement_kernel(Z, 1.0, [0.0, 0.0, 1.0], on_degenerate="raise")
    assert ProtocolSpec.vertex_reinforcement(Z + 0.0 * np.eye(3)).target is None
    with pytest.raises(InputError):
        ProtocolSpec.vertex_reinforcement(A, 0.5)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_vertex_reinforcement_support_preserved(seed):
    rng = np.random.default_rng(seed)
    A = rng.random((4, 4)) + 0.1
    A = A + A.T
    x = rng.dirichlet(np.ones(4)) * (rng.random(4) < 0.7)
    if x.sum() == 0:
        x[0] = 1.0
    x /= x.sum()
    assert np.array_equal(vertex_reinforcement_invariant(A, 1.0, x) > 0, x > 0)


def test_payoff_specs():
    assert RPS.is_potential is False
    assert POT.is_potential
    x = point(4)
    h = 1e-6
    fd = np.array([(POT.potential_value(x + h * e) - POT.potential_value(x - h * e)) / (2 * h) for e in np.eye(3)])
    assert np.allclose(-fd, POT(x), atol=1e-8)
    with pytest.raises(InputError):
        RPS.potential_value(x)
    good = PayoffSpec.from_potential(2, lambda y: y[0] ** 2 * y[1], lambda y: np.array([2 * y[0] * y[1], y[0] ** 2]))
    assert np.allclose(good([0.5, 0.5]), [-0.5, -0.25])
    with pytest.raises(InputError):
        PayoffSpec.from_potential(2, lambda y: y[0] ** 2, lambda y: np.array([y[0], 0.0]))
    with pytest.raises(InputError):
        good.to_dict()
    assert np.allclose(POT.jacobian(x), -np.array(POT.matrix))


def test_attachment_self_weight_integral():
    a = AttachmentSpec.imitative(np.ones((3, 3)), 2.0, [0.5, 0.0, -0.5])
    x = np.array([0.2, 0.3, 0.5])
    from scipy.integrate import quad
    for j in range(3):
        val, _ = quad(lambda u: 2.0 * np.log(u) - a.offsets[j], 1.0, x[j])
        assert a.log_self_weight_integral(x)[j] == pytest.approx(val, rel=1e-9)


def test_targets_roundtrip_and_errors():
    for t in (constant_target([0.2, 0.3, 0.5]), gibbs_target([0, 0, 0.1], np.eye(3), 2.0), logit_target(RPS, 1.5)):
        back = target_from_dict(t.to_dict(), 3)
        x = point(5)
        assert np.array_equal(back(x), t(x))
    with pytest.raises(InputError):
        constant_target([0.5, 0.5, 0.0])
    with pytest.raises(DimensionMismatch):
        target_from_dict(constant_target([0.5, 0.5]).to_dict(), 3)
    with pytest.raises(UnknownKind):
        target_from_dict({"kind": "mystery"})


def test_constructor_validation():
    with pytest.raises(UnknownKind):
        ProtocolSpec.sampling(RPS, f="cubic")
    with pytest.raises(UnknownKind):
        ProtocolSpec.comparison(RPS, g="best-response")
    with pytest.raises(DimensionMismatch):
        ProtocolSpec.sampling(RPS, AttachmentSpec.uniform(4))
    with pytest.raises(InputError):
        ProtocolSpec.sampling(RPS, beta=-1.0)
    with pytest.raises(UnknownKind):
        ProtocolSpec.from_dict({"kind": "fictitious-play"})
    with pytest.raises(DegenerateDenominator):
        ProtocolSpec.sampling(PayoffSpec.linear(-np.ones((2, 2))), f="identity").kernel([0.5, 0.5])
