"""Points, tangent vectors and coordinate charts on the probability simplex.

Simplex points and tangent vectors are plain 1-d float arrays; the helpers
here validate them and move between the ambient coordinates and the
(n-1)-dimensional chart that drops one coordinate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .errors import BoundaryPoint, NotInSimplex

SUM_TOL = 1e-12


def barycenter(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def vertex(n: int, i: int) -> np.ndarray:
    e = np.zeros(n)
    e[i] = 1.0
    return e


def as_simplex_point(x, tol: float = SUM_TOL) -> np.ndarray:
    """Validate ``x`` as a probability vector and return it as a float array."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise NotInSimplex(f"expected a non-empty vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NotInSimplex("non-finite coordinate")
    if x.min() < -tol:
        raise NotInSimplex(f"negative coordinate {x.min()!r}")
    if abs(x.sum() - 1.0) > tol:
        raise NotInSimplex(f"coordinates sum to {x.sum()!r}")
    return x


def as_tangent(u, tol: float = SUM_TOL) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    scale = max(1.0, float(np.abs(u).max(initial=0.0)))
    if abs(u.sum()) > tol * scale:
        raise NotInSimplex(f"tangent vector coordinates sum to {u.sum()!r}")
    return u


def support(x, threshold: float = 0.0) -> tuple[int, ...]:
    x = np.asarray(x, dtype=float)
    return tuple(int(i) for i in np.flatnonzero(x > threshold))


def is_interior(x) -> bool:
    return bool(np.all(np.asarray(x) > 0.0))


def require_interior(x, what: str = "point") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(x > 0.0):
        raise BoundaryPoint(f"{what} has a zero coordinate: {x!r}")
    return x


def tangent_part(v) -> np.ndarray:
    """Orthogonal projection of ``v`` onto the tangent space {sum u = 0}."""
    v = np.asarray(v, dtype=float)
    return v - v.mean()


def project_simplex(y) -> np.ndarray:
    """Euclidean projection of ``y`` onto the simplex (sorted-threshold rule)."""
    y = np.asarray(y, dtype=float)
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, y.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(y - theta, 0.0)


@dataclass(frozen=True)
class Chart:
    """Linear chart of the simplex dropping one coordinate.

    Points map by deleting coordinate ``drop``; the inverse restores it
    from the unit-sum constraint. Tangent vectors use the same rule with
    zero sum, so the chart is a linear bijection of the tangent space
    onto R^(n-1).
    """

    n: int
    drop: int = -1

    @property
    def index(self) -> int:
        return self.drop % self.n

    @property
    def keep(self) -> np.ndarray:
        return np.delete(np.arange(self.n), self.index)

    def to_chart(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float)[..., self.keep]

    def point(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        x = np.empty(y.shape[:-1] + (self.n,))
        x[..., self.keep] = y
        x[..., self.index] = 1.0 - y.sum(axis=-1)
        return x

    def tangent(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        u = np.empty(c.shape[:-1] + (self.n,))
        u[..., self.keep] = c
        u[..., self.index] = -c.sum(axis=-1)
        return u

    def basis(self) -> np.ndarray:
        """Columns are the tangent vectors e_k - e_drop (k kept)."""
        return self.tangent(np.eye(self.n - 1)).T

    def operator(self, apply) -> np.ndarray:
        """Chart matrix of a linear map ``apply`` of the tangent space."""
        B = self.basis()
        cols = [self.to_chart(apply(B[:, k])) for k in range(self.n - 1)]
        return np.column_stack(cols)


def simplex_grid(n: int, count: int, interior_margin: float = 1e-6) -> np.ndarray:
    """Deterministic low-discrepancy point set in the open simplex.

    Halton points in the unit cube are pushed to the simplex by sorted
    spacings, then shrunk toward the barycenter by ``interior_margin``.
    """
    if n == 1:
        return np.ones((1, 1))
    sampler = qmc.Halton(d=n - 1, scramble=False)
    sampler.fast_forward(1)  # skip the origin
    u = sampler.random(count)
    u.sort(axis=1)
    edges = np.hstack([np.zeros((count, 1)), u, np.ones((count, 1))])
    pts = np.diff(edges, axis=1)
    return (1.0 - interior_margin) * pts + interior_margin / n


def sample_simplex(rng: np.random.Generator, size: int, n: int, min_coord: float = 0.0) -> np.ndarray:
    """Uniform samples on {x in simplex : min_i x_i >= min_coord}."""
    if min_coord * n >= 1.0:
        raise ValueError("min_coord too large for the simplex dimension")
    y = rng.dirichlet(np.ones(n), size=size)
    return min_coord + (1.0 - n * min_coord) * y


def sample_ball(rng: np.random.Generator, center, radius: float, size: int) -> np.ndarray:
    """Uniform samples in the intersection of a Euclidean ball with aff(simplex).

    Points are not clipped to the simplex; callers keep ``radius`` below
    the distance from ``center`` to the boundary.
    """
    center = np.asarray(center, dtype=float)
    n = center.size
    chart = Chart(n)
    basis, _ = np.linalg.qr(chart.basis())  # orthonormal tangent frame
    d = n - 1
    g = rng.standard_normal((size, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(size) ** (1.0 / d)
    return center + (g * r[:, None]) @ basis.T
