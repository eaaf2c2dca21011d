"""Finite-state continuous-time Markov chain algebra.

Rate matrices act on row vectors: ``(xL)_i = sum_j x_j L_ji``. The
invariant probability solves ``pi L = 0``; the pi-weighted inner product is
``<f, g>_pi = sum_i f_i g_i pi_i``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (
    BoundaryPoint,
    FormulaMismatch,
    NegativeOffDiagonal,
    NotIrreducible,
    NotStochastic,
    RowSumViolation,
    SingularSystem,
)
from .transforms import ConvexFunction, MonotoneTransform

ALGEBRA_TOL = 1e-10


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RateMatrix:
    """Validated generator: nonnegative off-diagonal entries, zero row sums."""

    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __eq__(self, other):
        return isinstance(other, RateMatrix) and np.array_equal(self.entries, other.entries)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class MarkovMatrix:
    """Validated row-stochastic matrix."""

    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __eq__(self, other):
        return isinstance(other, MarkovMatrix) and np.array_equal(self.entries, other.entries)

    __hash__ = None


def _square(raw) -> np.ndarray:
    a = np.array(raw, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def validate_rate_matrix(raw, tol: float = 1e-12) -> RateMatrix:
    """Check generator structure and snap row sums within ``tol`` to zero.

    The diagonal is rewritten as minus the off-diagonal row sum, so accepted
    matrices have exactly zero row sums in the represented arithmetic.
    """
    L = _square(raw)
    off = ~np.eye(L.shape[0], dtype=bool)
    bad = np.argwhere((L < 0) & off)
    if bad.size:
        i, j = bad[0]
        raise NegativeOffDiagonal(int(i), int(j), float(L[i, j]))
    sums = L.sum(axis=1)
    for i, s in enumerate(sums):
        if abs(s) > tol:
            raise RowSumViolation(i, float(s))
    return RateMatrix(_frozen(generator_from_offdiagonal(L)))


def validate_markov_matrix(raw, tol: float = 1e-12) -> MarkovMatrix:
    K = _square(raw)
    if np.any(K < 0):
        i, j = np.argwhere(K < 0)[0]
        raise NotStochastic(f"negative entry at ({i}, {j})")
    sums = K.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > tol):
        i = int(np.argmax(np.abs(sums - 1.0)))
        raise NotStochastic(f"row {i} sums to {sums[i]!r}")
    return MarkovMatrix(_frozen(K))


def generator_from_offdiagonal(Q) -> np.ndarray:
    """Rate matrix with the off-diagonal part of ``Q`` and zero row sums."""
    L = np.array(Q, dtype=float)
    np.fill_diagonal(L, 0.0)
    np.fill_diagonal(L, -L.sum(axis=1))
    return L


def is_irreducible(L) -> bool:
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    if n == 1:
        return True
    adj = (L > 0) & ~np.eye(n, dtype=bool)
    ncomp, _ = connected_components(adj, directed=True, connection="strong")
    return ncomp == 1


def invariant_probability(L, check: bool = True) -> np.ndarray:
    """Unique ``pi`` with ``pi L = 0`` and unit mass, by a direct linear solve.

    The last balance equation is replaced with the normalization row.
    """
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    if check and not is_irreducible(L):
        raise NotIrreducible("rate matrix is not irreducible")
    A = L.T.copy()
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(pi)):
        raise SingularSystem("non-finite invariant probability")
    # roundoff can leave -1e-17 on tiny coordinates
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _positive(pi, what="pi") -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if not np.all(pi > 0):
        raise BoundaryPoint(f"{what} must be strictly positive")
    return pi


def is_reversible(L, pi, tol: float = ALGEBRA_TOL) -> bool:
    L = np.asarray(L, dtype=float)
    pi = _positive(pi)
    flux = pi[:, None] * L
    return bool(np.max(np.abs(flux - flux.T)) <= tol)


def adjoint(L, pi) -> np.ndarray:
    """Time reversal ``L*_ij = pi_j L_ji / pi_i``, the adjoint in <,>_pi."""
    L = np.asarray(L, dtype=float)
    pi = _positive(pi)
    return (L.T * pi[None, :]) / pi[:, None]


def inner(f, g, weights) -> float:
    return float(np.sum(np.asarray(f) * np.asarray(g) * np.asarray(weights)))


def variance(f, pi) -> float:
    f = np.asarray(f, dtype=float)
    pi = np.asarray(pi, dtype=float)
    m = np.dot(f, pi)
    return float(np.dot((f - m) ** 2, pi))


def dirichlet_form(L, pi, f, tol: float = ALGEBRA_TOL) -> float:
    """``E(f) = -<f, Lf>_pi``, cross-checked against the edge-sum formula."""
    L = np.asarray(L, dtype=float)
    pi = np.asarray(pi, dtype=float)
    f = np.asarray(f, dtype=float)
    quadratic = -inner(f, L @ f, pi)
    diff = f[:, None] - f[None, :]
    off = L - np.diag(np.diag(L))
    edges = 0.5 * float(np.sum(diff**2 * off * pi[:, None]))
    if abs(quadratic - edges) > tol * max(1.0, abs(edges)):
        raise FormulaMismatch(f"Dirichlet form routes disagree: {quadratic!r} vs {edges!r}")
    return edges


def symmetrized_generator(L, pi) -> np.ndarray:
    return 0.5 * (np.asarray(L, dtype=float) + adjoint(L, pi))


def spectral_gap(L, pi, check: bool = True) -> float:
    """Smallest nonzero eigenvalue of -(L + L*)/2 in the pi inner product.

    Equivalently the infimum of E(f) over pi-centered, pi-normalized f.
    """
    L = np.asarray(L, dtype=float)
    pi = _positive(pi)
    if check and not is_irreducible(L):
        raise NotIrreducible("rate matrix is not irreducible")
    S = symmetrized_generator(L, pi)
    r = np.sqrt(pi)
    # D^{1/2} S D^{-1/2} is symmetric because S is self-adjoint in <,>_pi
    M = -(r[:, None] * S / r[None, :])
    M = 0.5 * (M + M.T)
    eig = np.linalg.eigvalsh(M)
    return float(eig[1]) if eig.size > 1 else 0.0


def poincare_inequality_check(L, x, s: MonotoneTransform, pi=None) -> tuple[float, float]:
    """Return ``(<xL, s(f)>, -c_f * gap * Var_pi(f))`` with ``f = x / pi``.

    The contract is ``lhs <= rhs`` (up to roundoff); ``c_f = min_i s'(f_i)``.
    """
    L = np.asarray(L, dtype=float)
    x = np.asarray(x, dtype=float)
    if s.needs_positive:
        _positive(x, "x")
    if pi is None:
        pi = invariant_probability(L)
    pi = _positive(pi)
    f = x / pi
    lhs = float(np.dot(x @ L, s(f)))
    c_f = float(np.min(s.derivative(f)))
    var = float(np.dot((f - 1.0) ** 2, pi))
    rhs = -c_f * spectral_gap(L, pi, check=False) * var
    return lhs, rhs


def entropy_functional(pi, S: ConvexFunction, x) -> float:
    """``H^S_pi(x) = sum_i pi_i S(x_i / pi_i)``."""
    pi = _positive(pi)
    x = np.asarray(x, dtype=float)
    if S.needs_positive and not np.all(x > 0):
        raise BoundaryPoint(f"{S.id} entropy needs a strictly positive x")
    return float(np.dot(pi, S(x / pi)))


def entropy_dissipation(L, pi, S: ConvexFunction, x) -> tuple[float, float]:
    """Derivative of H^S_pi along ``x exp(tL)`` at t=0 and its upper bound.

    Returns ``(d/dt H, -alpha * gap * Var_pi(x/pi))`` with
    ``alpha = min_i S''(x_i/pi_i)``.
    """
    L = np.asarray(L, dtype=float)
    pi = _positive(pi)
    x = np.asarray(x, dtype=float)
    f = x / pi
    rate = float(np.dot(S.derivative(f), x @ L))
    alpha = float(np.min(S.second_derivative(f)))
    bound = -alpha * spectral_gap(L, pi, check=False) * variance(f, pi)
    return rate, bound

