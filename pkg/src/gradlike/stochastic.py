"""Finite-population and single-agent reinforcement simulations.

Randomness comes from a Philox counter-based generator keyed by the seed;
all uniforms a run needs are drawn up front, so a path depends only on
(spec, N, steps, seed, start).
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dynamics import StepperOptions, Trajectory, integrate
from .errors import DegenerateKernelRow, InputError
from .protocols import ProtocolSpec
from .serialization import to_jsonable, write_csv


def philox(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1)))


def _pick(cdf_row, u) -> int:
    return int(np.searchsorted(cdf_row, u, side="right"))


def _row_is_shared(spec: ProtocolSpec) -> bool:
    """True when every row of K(x) is the same vector (one evaluation per step)."""
    if spec.kind == "gibbs-direct":
        return True
    if spec.kind == "sampling":
        a = spec.attachment
        return a.kind != "custom-table" and bool(np.all(a.base == a.base[0]))
    return False


def kernel_mean_field(spec: ProtocolSpec):
    """Mean-field drift ``x (K(x) - Id)`` of the population chain."""

    def F(x):
        x = np.asarray(x, dtype=float)
        return x @ spec.kernel(x) - x

    return F


@dataclass
class PopulationPath:
    N: int
    seed: int
    counts: np.ndarray  # (steps + 1, n) integer array

    @property
    def states(self) -> np.ndarray:
        return self.counts / self.N

    @property
    def steps(self) -> int:
        return self.counts.shape[0] - 1

    def to_csv(self, path) -> None:
        n = self.counts.shape[1]
        write_csv(path, ["k"] + [f"c{i + 1}" for i in range(n)],
                  ([k] + [int(v) for v in row] for k, row in enumerate(self.counts)))


def as_counts(x0, N: int) -> np.ndarray:
    """Integer counts summing to N from counts or a simplex point (largest remainders)."""
    a = np.asarray(x0)
    if np.issubdtype(a.dtype, np.integer):
        if a.sum() != N or np.any(a < 0):
            raise InputError(f"counts must be nonnegative and sum to N={N}")
        return a.astype(np.int64)
    raw = np.asarray(a, dtype=float) * N
    c = np.floor(raw).astype(np.int64)
    short = N - int(c.sum())
    order = np.argsort(-(raw - c), kind="stable")
    c[order[:short]] += 1
    return c


def simulate_population(spec: ProtocolSpec, N: int, steps: int, seed: int, x0) -> PopulationPath:
    """One revision per step: an agent of type i (prob x_i) switches to j (prob K_ij(x))."""
    if N < 1:
        raise InputError("N must be positive")
    counts = as_counts(x0, N)
    n = counts.size
    u = philox(seed).random((steps, 2))
    out = np.empty((steps + 1, n), dtype=np.int64)
    out[0] = counts
    shared = _row_is_shared(spec)
    c = counts.copy()
    for k in range(steps):
        x = c / N
        i = _pick(np.cumsum(c), u[k, 0] * N)
        row = spec.kernel_row(x, 0 if shared else i)
        cdf = np.cumsum(row)
        if not np.isfinite(cdf[-1]) or abs(cdf[-1] - 1.0) > 1e-9:
            raise DegenerateKernelRow(f"row {i} of K(x) sums to {cdf[-1]!r}")
        j = min(_pick(cdf, u[k, 1] * cdf[-1]), n - 1)
        if j != i:
            c[i] -= 1
            c[j] += 1
        out[k + 1] = c
    return PopulationPath(N, seed, out)


def meanfield_solution(spec: ProtocolSpec, x0, T: float, opts: StepperOptions | None = None) -> Trajectory:
    return integrate(kernel_mean_field(spec), np.asarray(x0, dtype=float), T, opts)


def meanfield_deviation(path: PopulationPath, spec: ProtocolSpec, T: float, ode: Trajectory | None = None) -> float:
    """``sup_{k <= N T} ||X_k / N - x(k / N)||_inf`` with x the mean-field solution from the path start."""
    if not T > 0:
        raise InputError("T must be positive")
    kmax = min(path.steps, int(np.floor(path.N * T + 1e-9)))
    X = path.states[: kmax + 1]
    if ode is None:
        F = kernel_mean_field(spec)
        if np.max(np.abs(F(X[0]))) == 0.0 and np.all(X == X[0]):
            return 0.0
        ode = meanfield_solution(spec, X[0], T)
    x = ode.at(np.arange(kmax + 1) / path.N)
    return float(np.max(np.abs(X - x)))


@dataclass
class OccupationPath:
    visits: np.ndarray  # X_1, ..., X_K (strategy indices)
    mu: np.ndarray  # mu_1, ..., mu_K
    prior: np.ndarray
    seed: int

    def exact_mu(self, k: int) -> list[Fraction]:
        """``mu_k`` in rational arithmetic: ``(prior + #visits among X_2..X_k) / k``."""
        pri = [Fraction(float(p)) for p in self.prior]
        counts = np.bincount(self.visits[1:k], minlength=self.prior.size)
        return [(pri[i] + int(counts[i])) / k for i in range(self.prior.size)]

    def to_csv(self, path) -> None:
        n = self.mu.shape[1]
        write_csv(path, ["k", "X"] + [f"mu{i + 1}" for i in range(n)],
                  ([k + 1, int(x)] + [float(v) for v in m] for k, (x, m) in enumerate(zip(self.visits, self.mu))))


def simulate_reinforcement(spec: ProtocolSpec, steps: int, seed: int, x_start: int, mu_prior) -> OccupationPath:
    """``X_{k+1} ~ K(mu_k)[X_k]`` and ``mu_{k+1} = mu_k + (delta_{X_{k+1}} - mu_k) / (k + 1)``.

    The prior counts as the first observation (``mu_1 = prior``).
    """
    prior = np.asarray(mu_prior, dtype=float)
    if not np.all(prior > 0) or abs(prior.sum() - 1.0) > 1e-12:
        raise InputError("mu_prior must be an interior probability vector")
    n = prior.size
    u = philox(seed).random(steps)
    visits = np.empty(steps + 1, dtype=np.int64)
    mu = np.empty((steps + 1, n))
    visits[0] = x_start
    mu[0] = prior
    m = prior.copy()
    x = int(x_start)
    for k in range(1, steps + 1):
        row = spec.kernel_row(m, x)
        cdf = np.cumsum(row)
        if not np.all(np.isfinite(row)) or abs(cdf[-1] - 1.0) > 1e-9:
            raise DegenerateKernelRow(f"row {x} of K(mu) sums to {cdf[-1]!r}")
        x = min(_pick(cdf, u[k - 1] * cdf[-1]), n - 1)
        m = m + (np.eye(n)[x] - m) / (k + 1)
        visits[k] = x
        mu[k] = m
    return OccupationPath(visits, mu, prior, seed)


def summary(values) -> dict:
    v = np.sort(np.asarray(values, dtype=float))
    return to_jsonable({"count": v.size, "median": float(np.median(v)), "mean": float(v.mean()),
                        "min": float(v[0]), "max": float(v[-1])})
