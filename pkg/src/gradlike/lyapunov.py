"""Lyapunov functions for the fields x L(x) and their verification.

A :class:`LyapunovSpec` bundles V, an ambient gradient of V, the scalar
field alpha and the transform s with ``alpha(x) <h(x), u> = <grad V(x), u>``
on tangent vectors u, where ``h(x) = s(x / pi(x))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import markov_core as mc
from .dynamics import (
    HYPERBOLICITY,
    VectorFieldSpec,
    classify_equilibrium,
    eval_field,
    explicit_field,
    smooth_step,
)
from .errors import (
    BoundaryPoint,
    EquilibriaNotHyperbolic,
    FormulaMismatch,
    InputError,
    NotAnEquilibrium,
    NotIrreducible,
    NotReversible,
)
from .protocols import (
    REVERSIBLE_G,
    AttachmentSpec,
    PayoffSpec,
    ProtocolSpec,
    gibbs_measure,
    potential_logit_measure,
    vertex_reinforcement_invariant,
)
from .serialization import to_jsonable
from .simplex import Chart, require_interior, sample_simplex
from .transforms import MonotoneTransform, transform

FD_STEP = 1e-6


def transform_h(pi_eval, s: MonotoneTransform, x) -> np.ndarray:
    """``h^s(x) = s(x / pi(x))`` componentwise."""
    x = require_interior(x)
    pi = np.asarray(pi_eval(x), dtype=float)
    if not np.all(pi > 0):
        raise BoundaryPoint(f"pi(x) has a zero coordinate at {x!r}")
    return s(x / pi)


@dataclass(frozen=True, eq=False)
class LyapunovSpec:
    n: int
    V: Callable
    grad: Callable
    alpha: Callable
    s: MonotoneTransform
    pi: Callable
    name: str = ""
    h: Callable | None = None
    meta: dict = field(default_factory=dict)

    def h_of(self, x) -> np.ndarray:
        if self.h is not None:
            return np.asarray(self.h(x), dtype=float)
        return transform_h(self.pi, self.s, x)

    def tangent_grad(self, x) -> np.ndarray:
        g = np.asarray(self.grad(x), dtype=float)
        return g - g.mean()


# ---------------------------------------------------------------------------
# closed-form Lyapunov functions


def free_energy(U0, U, beta: float, x) -> float:
    """``sum x log x + U0.x + (beta/2) x'Ux``."""
    x = require_interior(x)
    U = np.asarray(U, dtype=float)
    return float(x @ np.log(x) + np.asarray(U0) @ x + 0.5 * beta * x @ U @ x)


def potential_game_V(attachment: AttachmentSpec, payoff: PayoffSpec, beta: float, x) -> float:
    """``sum x log x - sum int_1^{x_i} log f_i + beta W(x)`` with ``U = -grad W``."""
    x = require_interior(x)
    return float(x @ np.log(x) - attachment.log_self_weight_integral(x).sum() + beta * payoff.potential_value(x))


def reinforcement_W(A, gamma: float, x) -> float:
    xg = np.maximum(np.asarray(x, dtype=float), 0.0) ** gamma
    return float(xg @ np.asarray(A, dtype=float) @ xg)


def reinforcement_V(A, gamma: float, x) -> float:
    """``-sum_ij A_ij x_i^g x_j^g``; defined on the closed simplex."""
    return -reinforcement_W(A, gamma, x)


def reinforcement_dW(A, gamma: float, x) -> np.ndarray:
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    A = np.asarray(A, dtype=float)
    xg = x**gamma
    d = x ** (gamma - 1.0) if gamma != 1 else np.ones_like(x)
    return 2.0 * gamma * d * (A @ xg)


def reinforcement_alpha(A, gamma: float, x, beta: float = 1.0) -> float:
    """``[sum_j x_j (dW/dx_j)^beta]^(1/beta)``."""
    x = np.asarray(x, dtype=float)
    return float((x @ reinforcement_dW(A, gamma, x) ** beta) ** (1.0 / beta))


def gibbs_lyapunov(U0, U, beta: float) -> LyapunovSpec:
    U0 = np.asarray(U0, dtype=float)
    U = np.asarray(U, dtype=float)
    return LyapunovSpec(
        n=U0.size,
        V=lambda x: free_energy(U0, U, beta, x),
        grad=lambda x: np.log(require_interior(x)) + 1.0 + U0 + beta * (U @ x),
        alpha=lambda x: 1.0,
        s=transform("log"),
        pi=lambda x: gibbs_measure(U0, U, beta, x),
        name="gibbs",
    )


def relative_entropy_lyapunov(pi) -> LyapunovSpec:
    pi = np.asarray(pi, dtype=float)
    return LyapunovSpec(
        n=pi.size,
        V=lambda x: float(require_interior(x) @ np.log(x / pi)),
        grad=lambda x: np.log(require_interior(x) / pi) + 1.0,
        alpha=lambda x: 1.0,
        s=transform("log"),
        pi=lambda x: pi,
        name="relative-entropy",
    )


def potential_game_lyapunov(attachment: AttachmentSpec, payoff: PayoffSpec, beta: float) -> LyapunovSpec:
    if not payoff.is_potential:
        raise InputError("payoff is not a potential game")

    def grad(x):
        x = require_interior(x)
        return np.log(x) + 1.0 - np.log(attachment.self_weight(x)) + beta * payoff.potential_gradient(x)

    return LyapunovSpec(
        n=payoff.n,
        V=lambda x: potential_game_V(attachment, payoff, beta, x),
        grad=grad,
        alpha=lambda x: 1.0,
        s=transform("log"),
        pi=lambda x: potential_logit_measure(attachment, payoff, beta, x),
        name="potential-game",
    )


def reinforcement_lyapunov(A, gamma: float) -> LyapunovSpec:
    """``V = -W`` with ``s(t) = -1/t``; ``h`` uses the boundary-safe form ``-dW / sum x dW``."""
    A = np.asarray(A, dtype=float)

    def h(x):
        d = reinforcement_dW(A, gamma, x)
        return -d / float(np.asarray(x) @ d)

    return LyapunovSpec(
        n=A.shape[0],
        V=lambda x: reinforcement_V(A, gamma, x),
        grad=lambda x: -reinforcement_dW(A, gamma, x),
        alpha=lambda x: reinforcement_alpha(A, gamma, x),
        s=transform("neg-reciprocal"),
        pi=lambda x: vertex_reinforcement_invariant(A, gamma, x),
        name="vertex-reinforcement",
        h=h,
        meta={"boundary_ok": True},
    )


def lyapunov_for(protocol: ProtocolSpec) -> LyapunovSpec:
    """The Lyapunov function attached to a protocol family, when there is one."""
    k = protocol.kind
    if k == "gibbs-direct":
        return gibbs_lyapunov(protocol.U0, protocol.U, protocol.beta)
    if k == "vertex-reinforcement" and protocol.target is not None:
        return reinforcement_lyapunov(protocol.A, protocol.gamma)
    if k == "comparison" and protocol.g in REVERSIBLE_G and protocol.has_closed_form_invariant:
        return potential_game_lyapunov(protocol.attachment, protocol.payoff, protocol.beta)
    if k == "sampling" and protocol.f == "exp" and protocol.payoff.is_potential:
        a = protocol.attachment
        if a.kind == "constant-weights" and a.offsets is None and np.ptp(a.base) == 0:
            return potential_game_lyapunov(AttachmentSpec.uniform(protocol.n), protocol.payoff, protocol.beta)
    if k == "reversible-from-target" and protocol.target is not None:
        t = protocol.target
        if t.kind == "gibbs":
            return gibbs_lyapunov(t.params["U0"], t.params["U"], t.params["beta"])
        if t.kind == "constant":
            return relative_entropy_lyapunov(t.params["pi"])
        if t.kind == "logit" and t.params["payoff"].is_potential:
            return potential_game_lyapunov(AttachmentSpec.uniform(protocol.n), t.params["payoff"], t.params["beta"])
    raise InputError(f"no Lyapunov function is known for protocol kind {k!r}")


# ---------------------------------------------------------------------------
# checks


def _directional(fn, x, u, h=FD_STEP) -> float:
    return (fn(x + h * u) - fn(x - h * u)) / (2 * h)


@dataclass
class QuasigradientReport:
    samples: int
    max_violation: float
    max_gradient_error: float
    violations: list
    integrability_defect: float
    integrability_ok: bool
    tol: float

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return to_jsonable({
            "samples": self.samples,
            "max_violation": self.max_violation,
            "max_gradient_error": self.max_gradient_error,
            "violations": self.violations,
            "integrability_defect": self.integrability_defect,
            "integrability_status": "consistent" if self.integrability_ok else "inconsistent",
            "tol": self.tol,
            "ok": self.ok,
        })


def cyclic_defect(h, x, step: float = 1e-5) -> float:
    """Largest violation of the cyclic-sum identity for ``D h`` at ``x``.

    ``h`` is evaluated at ambient points ``x +- step e_j`` off the simplex.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    D = np.column_stack([(h(x + step * e) - h(x - step * e)) / (2 * step) for e in np.eye(n)])
    worst = 0.0
    for i in range(n):
        for j in range(n):
            for k in range(n):
                lhs = D[i, j] + D[j, k] + D[k, i]
                rhs = D[i, k] + D[k, j] + D[j, i]
                worst = max(worst, abs(lhs - rhs))
    return worst


def quasigradient_check(spec: LyapunovSpec, samples, tol: float = 1e-6, integrability_tol: float = 1e-5,
                        integrability_points: int = 20) -> QuasigradientReport:
    """Check ``alpha <h, u> = <grad V, u>`` on chart basis vectors at each sample.

    The gradient evaluator is also compared against central differences of
    V, and the cyclic integrability criterion is run on ``alpha * h`` at the
    first few samples (reported as a status only).
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    B = Chart(spec.n).basis()
    worst = worst_grad = 0.0
    violations = []
    for idx, x in enumerate(samples):
        a = float(spec.alpha(x))
        hx = spec.h_of(x)
        g = np.asarray(spec.grad(x), dtype=float)
        for k in range(spec.n - 1):
            u = B[:, k]
            lhs = a * float(hx @ u)
            rhs = float(g @ u)
            fd = _directional(spec.V, x, u)
            err = abs(lhs - rhs)
            gerr = abs(fd - rhs) / max(1.0, abs(rhs))
            worst = max(worst, err)
            worst_grad = max(worst_grad, gerr)
            if err > tol or gerr > 1e-5:
                violations.append({"sample": idx, "x": x, "direction": k, "identity_error": err,
                                   "gradient_error": gerr})

    def ah(y):
        return float(spec.alpha(y)) * spec.h_of(y)

    defect = 0.0
    for x in samples[:integrability_points]:
        try:
            defect = max(defect, cyclic_defect(ah, x))
        except (BoundaryPoint, ValueError, FloatingPointError):
            defect = float("nan")
            break
    ok = bool(np.isfinite(defect) and defect <= integrability_tol)
    return QuasigradientReport(len(samples), worst, worst_grad, violations, defect, ok, tol)


@dataclass
class AngleReport:
    samples: int
    skipped: int
    min_decrease: float
    angle_constant: float
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations and self.angle_constant > 0

    def to_dict(self) -> dict:
        return to_jsonable({"samples": self.samples, "skipped_near_equilibria": self.skipped,
                            "min_decrease_margin": self.min_decrease, "angle_constant": self.angle_constant,
                            "violations": self.violations, "ok": self.ok})


def decrease_and_angle(spec: LyapunovSpec, fld: VectorFieldSpec, delta: float, samples=10_000,
                       seed: int = 0) -> AngleReport:
    """Decrease margin and angle constant over ``K = {min x_i >= delta}``.

    ``samples`` is a count (uniform points of K drawn from ``seed``) or an
    explicit array of points.
    """
    if np.ndim(samples) == 0:
        rng = np.random.default_rng(seed)
        pts = sample_simplex(rng, int(samples), spec.n, min_coord=delta)
    else:
        pts = np.atleast_2d(np.asarray(samples, dtype=float))
    margin = np.inf
    c = np.inf
    skipped = 0
    violations = []
    for x in pts:
        F = eval_field(fld, x)
        nF = float(np.linalg.norm(F))
        if nF <= 1e-9:
            skipped += 1
            continue
        g = spec.tangent_grad(x)
        ip = float(g @ F)
        if ip >= 0:
            violations.append({"x": x, "inner_product": ip})
        margin = min(margin, -ip)
        c = min(c, -ip / (float(np.linalg.norm(g)) * nF))
    return AngleReport(len(pts), skipped, float(margin), float(c), violations)


@dataclass
class BilinearFormReport:
    matrix: np.ndarray
    symmetry_defect: float
    eigenvalues: np.ndarray
    signature: tuple
    fd_matrix: np.ndarray | None = None
    cross_check_error: float | None = None

    @property
    def index(self) -> int:
        return self.signature[1]

    def to_dict(self) -> dict:
        d = {"matrix": self.matrix, "symmetry_defect": self.symmetry_defect,
             "eigenvalues": [complex(z) for z in self.eigenvalues],
             "signature": {"positive": self.signature[0], "negative": self.signature[1],
                           "zero": self.signature[2]}}
        if self.fd_matrix is not None:
            d["fd_matrix"] = self.fd_matrix
            d["cross_check_error"] = self.cross_check_error
        return to_jsonable(d)


def _form_report(M, fd=None, err=None, zero_tol=1e-9) -> BilinearFormReport:
    defect = float(np.max(np.abs(M - M.T), initial=0.0))
    eig = np.linalg.eigvals(M)
    if np.max(np.abs(eig.imag), initial=0.0) <= 1e-9 * max(1.0, np.abs(eig).max(initial=0.0)):
        eig = np.sort(eig.real)
    scale = max(1.0, float(np.abs(eig).max(initial=0.0)))
    re = np.real(eig)
    sig = (int(np.sum(re > zero_tol * scale)), int(np.sum(re < -zero_tol * scale)),
           int(np.sum(np.abs(re) <= zero_tol * scale)))
    return BilinearFormReport(M, defect, eig, sig, fd, err)


def hessian_V(spec: LyapunovSpec, p, tol: float = 1e-4) -> BilinearFormReport:
    """Hessian of V at an interior equilibrium, by formula and by differences.

    Formula: ``alpha(p) s'(1) <(I - Dpi(p)) u, v>_{1/p}`` with Dpi by central
    differences; cross-checked against differences of the gradient evaluator.
    """
    p = require_interior(p)
    res = float(np.max(np.abs(p - spec.pi(p))))
    if res > 1e-8:
        raise NotAnEquilibrium(f"residual {res!r} exceeds 1e-8")
    chart = Chart(spec.n)
    B = chart.basis()
    m = spec.n - 1
    scale = float(spec.alpha(p)) * float(spec.s.derivative(1.0))

    h0 = 1e-5 * min(1.0, 10.0 * float(p.min()))

    def dpi(u, h=h0):
        return (spec.pi(p + h * u) - spec.pi(p - h * u)) / (2 * h)

    def dgrad(u, h):
        return (spec.grad(p + h * u) - spec.grad(p - h * u)) / (2 * h)

    M = np.empty((m, m))
    for k in range(m):
        w = B[:, k] - dpi(B[:, k])
        for l in range(m):
            M[k, l] = scale * float(np.sum(w * B[:, l] / p))

    def fd_matrix(h):
        return np.array([[float(dgrad(B[:, k], h) @ B[:, l]) for l in range(m)] for k in range(m)])

    H = fd_matrix(h0)
    err = float(np.max(np.abs(M - H)))
    if err > tol * max(1.0, np.abs(M).max()):
        # Richardson refinement of the difference path
        H = (4 * fd_matrix(h0 / 2) - H) / 3
        err = float(np.max(np.abs(M - H)))
        if err > tol * max(1.0, np.abs(M).max()):
            raise FormulaMismatch(f"Hessian formula and finite differences differ by {err!r}")
    return _form_report(M, H, err)


def _tangent_inverse(L, chart: Chart):
    """Chart matrix of ``u -> (L^T)^{-1} u`` where ``L^T u = u L`` on tangent vectors."""
    Lc = chart.operator(lambda u: u @ L)
    return np.linalg.inv(Lc)


def reversible_metric(L, p, tol: float = 1e-10) -> BilinearFormReport:
    """``g0(p)(u, v) = -<(L^T)^{-1} u, v>_{1/p}`` on the chart basis."""
    L = np.asarray(L, dtype=float)
    p = require_interior(p)
    if not mc.is_irreducible(L):
        raise NotIrreducible("L(p) is not irreducible")
    if not mc.is_reversible(L, p):
        raise NotReversible("L(p) is not reversible with respect to p")
    n = p.size
    chart = Chart(n)
    B = chart.basis()
    Linv = _tangent_inverse(L, chart)
    m = n - 1
    G = np.empty((m, m))
    for k in range(m):
        w = chart.tangent(Linv @ chart.to_chart(B[:, k]))
        for l in range(m):
            G[k, l] = -float(np.sum(w * B[:, l] / p))
    rep = _form_report(G)
    if rep.symmetry_defect > tol * max(1.0, np.abs(G).max()):
        raise FormulaMismatch(f"g0 symmetry defect {rep.symmetry_defect!r}")
    if rep.signature[0] != m:
        raise FormulaMismatch("g0 is not positive definite")
    return rep


def metric_pairing(G, J) -> np.ndarray:
    """Matrix of ``(u_k, u_l) -> g(J u_k, u_l)`` given chart matrices of g and J."""
    return np.asarray(J).T @ np.asarray(G)


# ---------------------------------------------------------------------------
# gradient approximation near equilibria


def plateau(t):
    """Smooth cutoff: 0 on [0, 1], 1 on [3, inf)."""
    return smooth_step((np.asarray(t, dtype=float) - 1.0) / 2.0)


def build_gradient_approximation(fld: VectorFieldSpec, spec: LyapunovSpec, equilibria, eps: float,
                                 threshold: float = HYPERBOLICITY) -> VectorFieldSpec:
    """Blend F with ``G0 = -grad_{g0} V`` inside ``3 eps`` of the equilibria.

    ``G = (1 - lam) G0 + lam F`` with ``lam = plateau(dist(x, E) / eps)``.
    G0 uses the constant metric ``alpha(p) s'(1) g0(p)`` of the nearest
    equilibrium p, so that ``DG0(p) = DF(p)``.
    """
    if fld.kind != "generator":
        raise InputError("the gradient approximation needs a generator field")
    eqs = [np.asarray(getattr(e, "location", e), dtype=float) for e in equilibria]
    if not eqs:
        raise InputError("no equilibria given")
    data = []
    for p in eqs:
        require_interior(p, "equilibrium")
        rep = classify_equilibrium(fld, p, threshold, pi_eval=spec.pi)
        if rep.classification == "nonhyperbolic":
            raise EquilibriaNotHyperbolic(f"equilibrium {p!r} is not hyperbolic")
        L = np.asarray(fld.rate(p), dtype=float)
        if not mc.is_reversible(L, p, tol=1e-8):
            raise NotReversible(f"L(p) is not reversible at {p!r}")
        data.append((p, L, float(spec.alpha(p)) * float(spec.s.derivative(1.0))))
    E = np.array(eqs)

    def nearest(x):
        d = np.linalg.norm(E - x, axis=1)
        i = int(np.argmin(d))
        return i, float(d[i])

    def G0(x, i):
        p, L, scale = data[i]
        g = np.asarray(spec.grad(x), dtype=float)
        z = p * (g - p @ g) / scale
        return z @ L

    def lam(x):
        return float(plateau(nearest(x)[1] / eps))

    def G(x):
        x = np.asarray(x, dtype=float)
        i, v = nearest(x)
        l = float(plateau(v / eps))
        F = eval_field(fld, x)
        if l == 1.0:
            return F
        return (1.0 - l) * G0(x, i) + l * F

    out = explicit_field(G, fld.n)
    out.meta.update(equilibria=E, epsilon=float(eps), cutoff=lam, G0=lambda x: G0(x, nearest(x)[0]))
    return out


def strict_decrease_along(spec: LyapunovSpec, fld: VectorFieldSpec, states, field_tol: float = 1e-6) -> list:
    """Indices k with ``V(x_{k+1}) >= V(x_k)`` although ``||F(x_k)|| > field_tol``."""
    states = np.asarray(states, dtype=float)
    values = np.array([spec.V(x) for x in states])
    bad = []
    for k in range(len(states) - 1):
        if np.linalg.norm(eval_field(fld, states[k])) > field_tol and not values[k + 1] < values[k]:
            bad.append(k)
    return bad
