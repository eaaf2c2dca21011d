"""Revision protocols: state-dependent Markov kernels K(x) and generators L(x).

A :class:`ProtocolSpec` is a declarative description (kind tag, matrices,
scalars) that evaluates to a row-stochastic ``K(x)`` and a rate matrix
``L(x)`` at each population state ``x``. Target measures ``pi(x)`` (Gibbs,
logit, vertex reinforcement, ...) live in :class:`TargetMeasure`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

from . import markov_core as mc
from .errors import (
    AsymmetricMatrix,
    BoundaryPoint,
    DegenerateDenominator,
    DimensionMismatch,
    InputError,
    RowOverflow,
    UnknownKind,
)
from .simplex import barycenter, sample_simplex, simplex_grid

PROTOCOL_KINDS = (
    "sampling",
    "comparison",
    "gibbs-direct",
    "vertex-reinforcement",
    "reversible-from-target",
    "replicator",
)
COMPARISON_G = ("logit-pair", "metropolis", "dissatisfaction", "success", "proportional", "zero")
REVERSIBLE_G = ("logit-pair", "metropolis", "dissatisfaction", "success")
SAMPLING_F = ("exp", "power", "identity")
SYM_TOL = 1e-12
DENOM_FLOOR = 1e-300


def _matrix(a, name, n=None) -> np.ndarray:
    M = np.array(a, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {M.shape}")
    if n is not None and M.shape[0] != n:
        raise DimensionMismatch(f"{name} is {M.shape[0]}x{M.shape[0]} but n={n}")
    M.setflags(write=False)
    return M


def _vector(a, name, n=None) -> np.ndarray:
    v = np.array(a, dtype=float)
    if v.ndim != 1:
        raise DimensionMismatch(f"{name} must be a vector")
    if n is not None and v.size != n:
        raise DimensionMismatch(f"{name} has length {v.size} but n={n}")
    v.setflags(write=False)
    return v


def _require_symmetric(M, name):
    if np.max(np.abs(M - M.T), initial=0.0) > SYM_TOL * max(1.0, np.abs(M).max(initial=0.0)):
        raise AsymmetricMatrix(f"{name} must be symmetric")


def _softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max())
    return e / e.sum()


# ---------------------------------------------------------------------------
# payoffs and attachments


@dataclass(frozen=True, eq=False)
class PayoffSpec:
    """Payoff map ``U: simplex -> R^n``.

    ``linear-matrix``: ``U(x) = M x + offset``. ``potential-gradient``:
    ``U = -grad W`` from either a stored quadratic ``W = x'Qx/2 + l.x`` or
    user callables. ``explicit-table``: any callable ``x -> U(x)``.
    """

    kind: str
    n: int
    matrix: np.ndarray | None = None
    offset: np.ndarray | None = None
    potential: Callable | None = None
    gradient: Callable | None = None
    table: Callable | None = None

    def __post_init__(self):
        if self.kind not in ("linear-matrix", "potential-gradient", "explicit-table"):
            raise UnknownKind(self.kind, "payoff kind")

    @classmethod
    def linear(cls, M, offset=None) -> "PayoffSpec":
        M = _matrix(M, "payoff matrix")
        off = None if offset is None else _vector(offset, "payoff offset", M.shape[0])
        return cls("linear-matrix", M.shape[0], matrix=M, offset=off)

    @classmethod
    def quadratic_potential(cls, Q, linear=None) -> "PayoffSpec":
        """Potential ``W(x) = x'Qx/2 + linear.x`` with payoffs ``-Qx - linear``."""
        Q = _matrix(Q, "potential matrix")
        _require_symmetric(Q, "potential matrix")
        lin = np.zeros(Q.shape[0]) if linear is None else _vector(linear, "potential linear term", Q.shape[0])
        return cls("potential-gradient", Q.shape[0], matrix=Q, offset=lin)

    @classmethod
    def from_potential(cls, n, W, grad, check_points: int = 32, seed: int = 0) -> "PayoffSpec":
        """Wrap user callables; the gradient is checked against central differences."""
        spec = cls("potential-gradient", n, potential=W, gradient=grad)
        rng = np.random.default_rng(seed)
        h = 1e-6
        for x in sample_simplex(rng, check_points, n, min_coord=0.05 / n):
            g = np.asarray(grad(x), dtype=float)
            fd = np.array([(W(x + h * e) - W(x - h * e)) / (2 * h) for e in np.eye(n)])
            if np.max(np.abs(fd - g)) > 1e-5 * max(1.0, np.abs(g).max()):
                raise InputError("potential gradient does not match finite differences of W")
        return spec

    @classmethod
    def from_table(cls, n, fn) -> "PayoffSpec":
        return cls("explicit-table", n, table=fn)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "linear-matrix":
            u = self.matrix @ x
            return u + self.offset if self.offset is not None else u
        if self.kind == "potential-gradient":
            return -self.potential_gradient(x)
        return np.asarray(self.table(x), dtype=float)

    @property
    def is_potential(self) -> bool:
        if self.kind == "potential-gradient":
            return True
        if self.kind == "linear-matrix":
            return bool(np.max(np.abs(self.matrix - self.matrix.T)) <= SYM_TOL)
        return False

    def potential_value(self, x) -> float:
        """W with ``U = -grad W`` (defined only for potential games)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "potential-gradient" and self.potential is not None:
            return float(self.potential(x))
        if not self.is_potential:
            raise InputError("payoff is not a potential game")
        M = self.matrix
        sign = 1.0 if self.kind == "potential-gradient" else -1.0
        lin = self.offset if self.offset is not None else np.zeros(self.n)
        return float(sign * (0.5 * x @ M @ x + lin @ x))

    def potential_gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "potential-gradient":
            if self.gradient is not None:
                return np.asarray(self.gradient(x), dtype=float)
            return self.matrix @ x + self.offset
        if not self.is_potential:
            raise InputError("payoff is not a potential game")
        return -self(x)

    def jacobian(self, x, h: float = 1e-6) -> np.ndarray:
        """``DU(x)`` as an n x n matrix (ambient coordinates)."""
        if self.kind == "linear-matrix":
            return np.array(self.matrix)
        if self.kind == "potential-gradient" and self.gradient is None:
            return -np.array(self.matrix)
        x = np.asarray(x, dtype=float)
        cols = [(self(x + h * e) - self(x - h * e)) / (2 * h) for e in np.eye(self.n)]
        return np.column_stack(cols)

    def to_dict(self) -> dict:
        if self.kind == "linear-matrix":
            d = {"kind": self.kind, "matrix": self.matrix.tolist()}
            if self.offset is not None:
                d["offset"] = self.offset.tolist()
            return d
        if self.kind == "potential-gradient" and self.gradient is None:
            return {"kind": self.kind, "quadratic": self.matrix.tolist(), "linear": self.offset.tolist()}
        raise InputError(f"{self.kind} payoff built from callables cannot be serialized")

    @classmethod
    def from_dict(cls, d: dict, n: int | None = None) -> "PayoffSpec":
        kind = d.get("kind")
        if kind == "linear-matrix":
            spec = cls.linear(d["matrix"], d.get("offset"))
        elif kind == "potential-gradient":
            spec = cls.quadratic_potential(d["quadratic"], d.get("linear"))
        else:
            raise UnknownKind(kind, "payoff kind")
        if n is not None and spec.n != n:
            raise DimensionMismatch(f"payoff is {spec.n}x{spec.n} but n={n}")
        return spec


ATTACHMENT_KINDS = ("constant-weights", "imitative", "custom-table")


@dataclass(frozen=True, eq=False)
class AttachmentSpec:
    """Attachment weights ``w_ij(x) = f_j(x_j) * base_ij``.

    ``f_j(t) = exp(-offsets_j) * t**power`` with ``power = 0`` for
    constant weights and ``power >= 1`` for imitative ones.
    """

    kind: str
    base: np.ndarray | None = None
    power: float = 0.0
    offsets: np.ndarray | None = None
    table: Callable | None = None

    def __post_init__(self):
        if self.kind not in ATTACHMENT_KINDS:
            raise UnknownKind(self.kind, "attachment kind")
        if self.kind != "custom-table":
            if self.base is None or np.any(np.asarray(self.base) < 0):
                raise InputError("attachment weights must be nonnegative")
            if self.kind == "imitative" and self.power < 1:
                raise InputError("imitative attachment needs power >= 1")
            if self.kind == "constant-weights" and self.power != 0:
                raise InputError("constant weights cannot depend on x")

    @classmethod
    def constant(cls, base, offsets=None) -> "AttachmentSpec":
        base = _matrix(base, "attachment weights")
        off = None if offsets is None else _vector(offsets, "attachment offsets", base.shape[0])
        return cls("constant-weights", base=base, power=0.0, offsets=off)

    @classmethod
    def imitative(cls, base, power: float = 1.0, offsets=None) -> "AttachmentSpec":
        base = _matrix(base, "imitative weights")
        off = None if offsets is None else _vector(offsets, "attachment offsets", base.shape[0])
        return cls("imitative", base=base, power=float(power), offsets=off)

    @classmethod
    def uniform(cls, n) -> "AttachmentSpec":
        return cls.constant(np.ones((n, n)))

    @property
    def n(self) -> int | None:
        return None if self.base is None else self.base.shape[0]

    def self_weight(self, x) -> np.ndarray:
        """The factor ``f_j(x_j)``."""
        x = np.asarray(x, dtype=float)
        f = np.ones_like(x) if self.power == 0 else np.maximum(x, 0.0) ** self.power
        if self.offsets is not None:
            f = f * np.exp(-self.offsets)
        return f

    def log_self_weight_integral(self, x) -> np.ndarray:
        """``int_1^{x_j} log f_j(u) du`` in closed form."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        if self.power != 0:
            safe = np.where(x > 0, x, 1.0)
            out += self.power * np.where(x > 0, x * np.log(safe) - x + 1.0, 1.0)
        if self.offsets is not None:
            out += -self.offsets * (x - 1.0)
        return out

    def __call__(self, x) -> np.ndarray:
        if self.kind == "custom-table":
            return np.asarray(self.table(x), dtype=float)
        return self.base * self.self_weight(x)[None, :]

    def to_dict(self) -> dict:
        if self.kind == "custom-table":
            raise InputError("custom-table attachment cannot be serialized")
        d = {"kind": self.kind, "weights": self.base.tolist()}
        if self.kind == "imitative":
            d["power"] = self.power
        if self.offsets is not None:
            d["offsets"] = self.offsets.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict, n: int | None = None) -> "AttachmentSpec":
        kind = d.get("kind")
        if kind == "constant-weights":
            spec = cls.constant(d["weights"], d.get("offsets"))
        elif kind == "imitative":
            spec = cls.imitative(d["weights"], d.get("power", 1.0), d.get("offsets"))
        else:
            raise UnknownKind(kind, "attachment kind")
        if n is not None and spec.n != n:
            raise DimensionMismatch(f"attachment is {spec.n}x{spec.n} but n={n}")
        return spec


# ---------------------------------------------------------------------------
# target measures


def gibbs_measure(U0, U, beta: float, x) -> np.ndarray:
    """``pi_i ∝ exp(-(U0_i + beta * (U x)_i))``, max-shifted for overflow safety."""
    U = np.asarray(U, dtype=float)
    _require_symmetric(U, "interaction matrix U")
    if beta < 0:
        raise InputError("beta must be nonnegative")
    return _softmax(-(np.asarray(U0, dtype=float) + beta * (U @ np.asarray(x, dtype=float))))


def logit_measure(payoff: PayoffSpec, beta: float, x) -> np.ndarray:
    """``pi_i ∝ exp(beta * U_i(x))``."""
    if beta < 0:
        raise InputError("beta must be nonnegative")
    return _softmax(beta * payoff(x))


def potential_logit_measure(attachment: AttachmentSpec, payoff: PayoffSpec, beta: float, x) -> np.ndarray:
    """``pi_i ∝ f_i(x_i) exp(-beta dW/dx_i)`` for a potential game with ``U = -grad W``."""
    f = attachment.self_weight(x)
    z = beta * payoff(x)
    m = z[f > 0].max() if np.any(f > 0) else z.max()
    w = f * np.exp(z - m)
    return w / w.sum()


def vertex_reinforcement_invariant(A, gamma: float, x) -> np.ndarray:
    """``pi_i = x_i^g (A x^g)_i / sum_jk A_jk x_j^g x_k^g``; zero exactly where x is."""
    A = np.asarray(A, dtype=float)
    xg = np.maximum(np.asarray(x, dtype=float), 0.0) ** gamma
    num = xg * (A @ xg)
    total = num.sum()
    if total <= DENOM_FLOOR:
        raise DegenerateDenominator("vertex-reinforcement normalizer vanishes")
    return num / total


@dataclass(frozen=True, eq=False)
class TargetMeasure:
    """A named family ``x -> pi(x)`` with the parameters needed to rebuild it."""

    kind: str
    params: dict = field(default_factory=dict)
    fn: Callable | None = None

    def __call__(self, x) -> np.ndarray:
        return self.fn(np.asarray(x, dtype=float))

    def to_dict(self) -> dict:
        if self.kind == "custom":
            raise InputError("custom target measures cannot be serialized")
        out = {"kind": self.kind}
        for k, v in self.params.items():
            out[k] = v.to_dict() if hasattr(v, "to_dict") else (v.tolist() if isinstance(v, np.ndarray) else v)
        return out


def constant_target(pi) -> TargetMeasure:
    pi = _vector(pi, "target")
    if not np.all(pi > 0) or abs(pi.sum() - 1.0) > 1e-12:
        raise InputError("constant target must be a strictly positive probability vector")
    return TargetMeasure("constant", {"pi": pi}, lambda x: np.array(pi))


def gibbs_target(U0, U, beta: float) -> TargetMeasure:
    U = _matrix(U, "interaction matrix U")
    _require_symmetric(U, "interaction matrix U")
    U0 = _vector(U0, "U0", U.shape[0])
    beta = float(beta)
    return TargetMeasure("gibbs", {"U0": U0, "U": U, "beta": beta}, lambda x: gibbs_measure(U0, U, beta, x))


def logit_target(payoff: PayoffSpec, beta: float) -> TargetMeasure:
    beta = float(beta)
    return TargetMeasure("logit", {"payoff": payoff, "beta": beta}, lambda x: logit_measure(payoff, beta, x))


def vertex_reinforcement_target(A, gamma: float) -> TargetMeasure:
    A = _matrix(A, "reinforcement matrix A")
    gamma = float(gamma)
    return TargetMeasure("vertex-reinforcement", {"A": A, "gamma": gamma},
                         lambda x: vertex_reinforcement_invariant(A, gamma, x))


def custom_target(fn) -> TargetMeasure:
    return TargetMeasure("custom", {}, fn)


def target_from_dict(d: dict, n: int | None = None) -> TargetMeasure:
    kind = d.get("kind")
    if kind == "constant":
        t = constant_target(d["pi"])
        size = t.params["pi"].size
    elif kind == "gibbs":
        t = gibbs_target(d["U0"], d["U"], d["beta"])
        size = t.params["U"].shape[0]
    elif kind == "logit":
        p = PayoffSpec.from_dict(d["payoff"])
        t = logit_target(p, d["beta"])
        size = p.n
    elif kind == "vertex-reinforcement":
        t = vertex_reinforcement_target(d["A"], d["gamma"])
        size = t.params["A"].shape[0]
    elif kind == "counterexample":
        from .dynamics import counterexample_target

        t = counterexample_target(d["eta"], d["epsilon"])
        size = 3
    else:
        raise UnknownKind(kind, "target kind")
    if n is not None and size != n:
        raise DimensionMismatch(f"target measure has dimension {size} but n={n}")
    return t


# ---------------------------------------------------------------------------
# building generators


def reversible_rate_from_target(W, pi) -> np.ndarray:
    """``L_ij = W_ij pi_j`` off the diagonal; reversible with respect to ``pi``."""
    W = np.asarray(W, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if not np.all(pi > 0):
        raise BoundaryPoint("target measure must be strictly positive")
    return mc.generator_from_offdiagonal(W * pi[None, :])


def _check_reversible_weights(W):
    _require_symmetric(W, "W")
    off = ~np.eye(W.shape[0], dtype=bool)
    if np.any(W[off] <= 0):
        raise InputError("W needs positive off-diagonal entries")


def rate_from_kernel(K) -> mc.RateMatrix:
    """``L = -Id + K``."""
    K = np.asarray(K, dtype=float)
    L = K - np.eye(K.shape[0])
    np.fill_diagonal(L, 0.0)
    np.fill_diagonal(L, -L.sum(axis=1))
    return mc.RateMatrix(mc._frozen(L))


def vertex_reinforcement_kernel(A, gamma: float, x, on_degenerate: str = "absorb") -> np.ndarray:
    """``K_ij = A_ij x_j^g / sum_k A_ik x_k^g``.

    Rows whose normalizer vanishes become the basis row ``e_i`` when
    ``on_degenerate == "absorb"`` and raise otherwise.
    """
    A = np.asarray(A, dtype=float)
    xg = np.maximum(np.asarray(x, dtype=float), 0.0) ** gamma
    num = A * xg[None, :]
    den = num.sum(axis=1)
    bad = den <= DENOM_FLOOR
    if np.any(bad):
        if on_degenerate != "absorb":
            raise DegenerateDenominator(f"rows {np.flatnonzero(bad).tolist()} have a vanishing normalizer")
        num[bad] = np.eye(A.shape[0])[bad]
        den = np.where(bad, 1.0, den)
    return num / den[:, None]


def _g(name: str, beta: float, u, v):
    if name == "logit-pair":
        return expit(beta * (v - u))
    if name == "metropolis":
        return np.exp(np.minimum(0.0, beta * (v - u)))
    if name == "dissatisfaction":
        return np.exp(-beta * u) + 0.0 * v
    if name == "success":
        return np.exp(beta * v) + 0.0 * u
    if name == "proportional":
        return np.maximum(0.0, v - u)
    if name == "zero":
        return np.zeros(np.broadcast(u, v).shape)
    raise UnknownKind(name, "comparison function")


def _f(name: str, beta: float, shift: float, u):
    if name == "exp":
        return np.exp(beta * (u - u.max()))
    if name == "power":
        return np.maximum(u + shift, 0.0) ** beta
    if name == "identity":
        return np.maximum(u + shift, 0.0)
    raise UnknownKind(name, "sampling function")


@dataclass(frozen=True, eq=False)
class ProtocolSpec:
    """Declarative revision protocol; see the module docstring.

    Build instances with the classmethod constructors, which validate the
    parameters (and, for comparison protocols, fix the global rate scale).
    """

    kind: str
    n: int
    payoff: PayoffSpec | None = None
    attachment: AttachmentSpec | None = None
    beta: float = 0.0
    gamma: float = 1.0
    f: str = "exp"
    f_shift: float = 0.0
    g: str = "metropolis"
    rate_scale: float = 1.0
    U0: np.ndarray | None = None
    U: np.ndarray | None = None
    A: np.ndarray | None = None
    W: np.ndarray | None = None
    target: TargetMeasure | None = None

    # -- constructors -----------------------------------------------------

    @classmethod
    def sampling(cls, payoff: PayoffSpec, attachment: AttachmentSpec | None = None, f: str = "exp",
                 beta: float = 1.0, shift: float = 0.0) -> "ProtocolSpec":
        if f not in SAMPLING_F:
            raise UnknownKind(f, "sampling function")
        attachment = attachment or AttachmentSpec.uniform(payoff.n)
        if attachment.n not in (None, payoff.n):
            raise DimensionMismatch("attachment and payoff dimensions differ")
        if beta < 0:
            raise InputError("beta must be nonnegative")
        return cls("sampling", payoff.n, payoff=payoff, attachment=attachment, f=f, beta=float(beta),
                   f_shift=float(shift))

    @classmethod
    def comparison(cls, payoff: PayoffSpec, attachment: AttachmentSpec | None = None, g: str = "metropolis",
                   beta: float = 1.0, rate_scale: float | None = None, grid_points: int = 1000) -> "ProtocolSpec":
        if g not in COMPARISON_G:
            raise UnknownKind(g, "comparison function")
        attachment = attachment or AttachmentSpec.uniform(payoff.n)
        if attachment.n not in (None, payoff.n):
            raise DimensionMismatch("attachment and payoff dimensions differ")
        spec = cls("comparison", payoff.n, payoff=payoff, attachment=attachment, g=g, beta=float(beta))
        pts = _validation_grid(payoff.n, grid_points)
        if rate_scale is None:
            rate_scale = spec._default_rate_scale(pts)
        spec = cls("comparison", payoff.n, payoff=payoff, attachment=attachment, g=g, beta=float(beta),
                   rate_scale=float(rate_scale))
        for x in pts:
            spec.kernel(x)  # raises RowOverflow
        return spec

    @classmethod
    def replicator(cls, payoff: PayoffSpec, rate_scale: float | None = None,
                   grid_points: int = 1000) -> "ProtocolSpec":
        """Imitative pairwise-proportional comparison; its mean field is the replicator ODE."""
        base = cls.comparison(payoff, AttachmentSpec.imitative(np.ones((payoff.n, payoff.n))), g="proportional",
                              beta=0.0, rate_scale=rate_scale, grid_points=grid_points)
        return cls("replicator", payoff.n, payoff=payoff, attachment=base.attachment, g="proportional",
                   rate_scale=base.rate_scale)

    @classmethod
    def gibbs_direct(cls, U0, U, beta: float) -> "ProtocolSpec":
        t = gibbs_target(U0, U, beta)
        return cls("gibbs-direct", t.params["U"].shape[0], beta=float(beta), U0=t.params["U0"],
                   U=t.params["U"], target=t)

    @classmethod
    def vertex_reinforcement(cls, A, gamma: float = 1.0) -> "ProtocolSpec":
        A = _matrix(A, "reinforcement matrix A")
        if np.any(A < 0):
            raise InputError("A must be nonnegative")
        if gamma < 1:
            raise InputError("gamma must be >= 1")
        sym = np.max(np.abs(A - A.T)) <= SYM_TOL
        target = vertex_reinforcement_target(A, gamma) if sym and np.all(A > 0) else None
        return cls("vertex-reinforcement", A.shape[0], gamma=float(gamma), A=A, target=target)

    @classmethod
    def reversible_from_target(cls, W, target: TargetMeasure, n: int | None = None) -> "ProtocolSpec":
        W = _matrix(W, "W", n)
        _check_reversible_weights(W)
        return cls("reversible-from-target", W.shape[0], W=W, target=target)

    # -- evaluation -------------------------------------------------------

    def _default_rate_scale(self, pts) -> float:
        off = ~np.eye(self.n, dtype=bool)
        gmax = wmax = 0.0
        for x in pts:
            U = self.payoff(x)
            gmax = max(gmax, float(_g(self.g, self.beta, U[:, None], U[None, :])[off].max()))
            wmax = max(wmax, float(self.attachment(x)[off].max()))
        if gmax * wmax <= 0:
            return 1.0
        return 1.0 / (self.n * gmax * wmax)

    @property
    def uniformization(self) -> float:
        """Rate bound ``c`` used to turn a target-built generator into a kernel."""
        if self.kind != "reversible-from-target":
            return 1.0
        W = np.array(self.W)
        np.fill_diagonal(W, 0.0)
        return float(W.sum(axis=1).max())

    def kernel(self, x) -> np.ndarray:
        """Row-stochastic ``K(x)`` as a plain array."""
        x = np.asarray(x, dtype=float)
        k = self.kind
        if k == "sampling":
            U = self.payoff(x)
            fu = _f(self.f, self.beta, self.f_shift, U)
            num = self.attachment(x) * fu[None, :]
            den = num.sum(axis=1)
            if np.any(den <= DENOM_FLOOR):
                raise DegenerateDenominator(f"sampling normalizer vanishes in rows {np.flatnonzero(den <= DENOM_FLOOR).tolist()}")
            return num / den[:, None]
        if k in ("comparison", "replicator"):
            U = self.payoff(x)
            K = self.rate_scale * self.attachment(x) * _g(self.g, self.beta, U[:, None], U[None, :])
            np.fill_diagonal(K, 0.0)
            out = K.sum(axis=1)
            if np.any(out > 1.0 + 1e-12):
                i = int(np.argmax(out))
                raise RowOverflow(f"row {i} leaves with total probability {out[i]!r}")
            np.fill_diagonal(K, 1.0 - out)
            return K
        if k == "gibbs-direct":
            return np.tile(self.target(x), (self.n, 1))
        if k == "vertex-reinforcement":
            return vertex_reinforcement_kernel(self.A, self.gamma, x)
        if k == "reversible-from-target":
            L = self.rate(x)
            return np.eye(self.n) + L / self.uniformization
        raise UnknownKind(k, "protocol kind")

    def kernel_row(self, x, i: int) -> np.ndarray:
        """Row ``i`` of ``K(x)``; cheaper than :meth:`kernel` for sampling kinds."""
        if self.kind == "sampling":
            U = self.payoff(x)
            num = self.attachment(x)[i] * _f(self.f, self.beta, self.f_shift, U)
            den = num.sum()
            if den <= DENOM_FLOOR:
                raise DegenerateDenominator(f"sampling normalizer vanishes in row {i}")
            return num / den
        if self.kind == "gibbs-direct":
            return self.target(x)
        return self.kernel(x)[i]

    def rate(self, x) -> np.ndarray:
        """Generator ``L(x)``; ``-Id + K(x)`` except for target-built protocols."""
        if self.kind == "reversible-from-target":
            return reversible_rate_from_target(self.W, self.target(x))
        K = self.kernel(x)
        L = K - np.eye(self.n)
        np.fill_diagonal(L, 0.0)
        np.fill_diagonal(L, -L.sum(axis=1))
        return L

    @property
    def has_closed_form_invariant(self) -> bool:
        if self.target is not None:
            return True
        if self.kind == "comparison" and self.g in REVERSIBLE_G:
            return self._symmetric_attachment()
        return False

    def _symmetric_attachment(self) -> bool:
        a = self.attachment
        return a is not None and a.kind != "custom-table" and bool(np.max(np.abs(a.base - a.base.T)) <= SYM_TOL)

    def invariant(self, x) -> np.ndarray:
        """``pi(x)`` from the closed form when known, else by a linear solve on ``L(x)``."""
        if self.target is not None:
            return self.target(x)
        if self.kind == "comparison" and self.g in REVERSIBLE_G and self._symmetric_attachment():
            return potential_logit_measure(self.attachment, self.payoff, self.beta, x)
        return mc.invariant_probability(self.rate(x))

    def invariant_by_solve(self, x) -> np.ndarray:
        return mc.invariant_probability(self.rate(x))

    @property
    def imitative(self) -> bool:
        if self.kind == "vertex-reinforcement":
            return True
        return self.attachment is not None and self.attachment.kind == "imitative"

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        k = self.kind
        d: dict = {"kind": k}
        if k == "sampling":
            d.update(payoff=self.payoff.to_dict(), attachment=self.attachment.to_dict(), f=self.f, beta=self.beta)
            if self.f_shift:
                d["shift"] = self.f_shift
        elif k == "comparison":
            d.update(payoff=self.payoff.to_dict(), attachment=self.attachment.to_dict(), g=self.g, beta=self.beta,
                     rate_scale=self.rate_scale)
        elif k == "replicator":
            d.update(payoff=self.payoff.to_dict(), rate_scale=self.rate_scale)
        elif k == "gibbs-direct":
            d.update(U0=self.U0.tolist(), U=self.U.tolist(), beta=self.beta)
        elif k == "vertex-reinforcement":
            d.update(A=self.A.tolist(), gamma=self.gamma)
        elif k == "reversible-from-target":
            d.update(W=self.W.tolist(), target=self.target.to_dict())
        return d

    @classmethod
    def from_dict(cls, d: dict, n: int | None = None) -> "ProtocolSpec":
        kind = d.get("kind")
        if kind not in PROTOCOL_KINDS:
            raise UnknownKind(kind, "protocol kind")
        if kind == "sampling":
            payoff = PayoffSpec.from_dict(d["payoff"], n)
            att = AttachmentSpec.from_dict(d["attachment"], n) if "attachment" in d else None
            spec = cls.sampling(payoff, att, d.get("f", "exp"), d.get("beta", 1.0), d.get("shift", 0.0))
        elif kind == "comparison":
            payoff = PayoffSpec.from_dict(d["payoff"], n)
            att = AttachmentSpec.from_dict(d["attachment"], n) if "attachment" in d else None
            spec = cls.comparison(payoff, att, d.get("g", "metropolis"), d.get("beta", 1.0), d.get("rate_scale"))
        elif kind == "replicator":
            spec = cls.replicator(PayoffSpec.from_dict(d["payoff"], n), d.get("rate_scale"))
        elif kind == "gibbs-direct":
            spec = cls.gibbs_direct(d["U0"], d["U"], d["beta"])
        elif kind == "vertex-reinforcement":
            spec = cls.vertex_reinforcement(d["A"], d.get("gamma", 1.0))
        else:
            spec = cls.reversible_from_target(d["W"], target_from_dict(d["target"], n), n)
        if n is not None and spec.n != n:
            raise DimensionMismatch(f"protocol has dimension {spec.n} but n={n}")
        return spec


def _validation_grid(n: int, count: int) -> np.ndarray:
    pts = simplex_grid(n, count, interior_margin=0.0)
    return np.vstack([pts, np.eye(n), barycenter(n)[None, :]])


def markov_kernel(spec: ProtocolSpec, x) -> mc.MarkovMatrix:
    return mc.validate_markov_matrix(spec.kernel(x))
