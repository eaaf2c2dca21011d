"""Vector fields on the simplex, their integration and their equilibria.

Two fields matter throughout: the generator field ``F(x) = x L(x)`` and the
pi-field ``F_pi(x) = -x + pi(x)``. They share their interior zeros, and at
a common zero ``p`` the chart Jacobians satisfy ``DF(p) u = -(DF_pi(p) u) L(p)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DomainViolation,
    EpsilonTooLarge,
    FormulaMismatch,
    InputError,
    NotAnEquilibrium,
    StepsizeUnderflow,
    UnknownKind,
)
from .protocols import PayoffSpec, ProtocolSpec, TargetMeasure, _check_reversible_weights, reversible_rate_from_target
from .serialization import to_jsonable, write_csv
from .simplex import Chart, barycenter, is_interior, project_simplex, simplex_grid

FIELD_KINDS = ("generator", "pi", "replicator", "explicit")
HYPERBOLICITY = 1e-7
EQ_RESIDUAL = 1e-8


@dataclass(frozen=True, eq=False)
class VectorFieldSpec:
    kind: str
    n: int
    rate: Callable | None = None
    pi: Callable | None = None
    payoff: PayoffSpec | None = None
    fn: Callable | None = None
    scale: float = 1.0
    interior_only: bool = False
    protocol: ProtocolSpec | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise UnknownKind(self.kind, "vector field kind")

    def __call__(self, x) -> np.ndarray:
        return eval_field(self, x)

    @property
    def has_pi(self) -> bool:
        return self.pi is not None


def generator_field(protocol: ProtocolSpec) -> VectorFieldSpec:
    return VectorFieldSpec("generator", protocol.n, rate=protocol.rate, pi=protocol.invariant, protocol=protocol)


def generator_field_from_rate(rate, n: int, pi=None, interior_only: bool = False) -> VectorFieldSpec:
    return VectorFieldSpec("generator", n, rate=rate, pi=pi, interior_only=interior_only)


def pi_field(pi, n: int, interior_only: bool = False) -> VectorFieldSpec:
    return VectorFieldSpec("pi", n, pi=pi, interior_only=interior_only)


def replicator_field(payoff: PayoffSpec, scale: float = 1.0) -> VectorFieldSpec:
    return VectorFieldSpec("replicator", payoff.n, payoff=payoff, scale=float(scale))


def explicit_field(fn, n: int) -> VectorFieldSpec:
    return VectorFieldSpec("explicit", n, fn=fn)


def eval_field(spec: VectorFieldSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if spec.interior_only and not is_interior(x):
        raise DomainViolation(f"field is only defined on the open simplex, got {x!r}")
    if spec.kind == "generator":
        return x @ np.asarray(spec.rate(x), dtype=float)
    if spec.kind == "pi":
        return spec.pi(x) - x
    if spec.kind == "replicator":
        U = spec.payoff(x)
        return spec.scale * x * (U - x @ U)
    return np.asarray(spec.fn(x), dtype=float)


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4)

_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# dense-output coefficients (Shampine's continuous extension)
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


@dataclass
class StepperOptions:
    rtol: float = 1e-9
    atol: float = 1e-12
    first_step: float | None = None
    min_step: float = 1e-12
    max_step: float = math.inf
    max_steps: int = 2_000_000
    clamp_tol: float = 1e-12


@dataclass
class Trajectory:
    """Accepted steps of one integration plus the dense-output polynomials."""

    times: np.ndarray
    states: np.ndarray
    steps: np.ndarray
    errors: np.ndarray
    _coef: np.ndarray = field(repr=False, default=None)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def at(self, ts) -> np.ndarray:
        """Dense output at times ``ts`` (clamped to the simplex like accepted states)."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if ts.min() < self.times[0] - 1e-12 or ts.max() > self.times[-1] + 1e-12:
            raise InputError("requested time outside the integrated interval")
        idx = np.clip(np.searchsorted(self.times, ts, side="right") - 1, 0, len(self.steps) - 1)
        h = self.steps[idx]
        th = (ts - self.times[idx]) / h
        powers = th[:, None] ** np.arange(1, 5)[None, :]
        y = self.states[idx] + h[:, None] * np.einsum("knj,kj->kn", self._coef[idx], powers)
        y = np.maximum(y, 0.0)
        out = y / y.sum(axis=1, keepdims=True)
        return out

    def to_csv(self, path, times=None) -> None:
        states = self.states if times is None else self.at(times)
        ts = self.times if times is None else np.asarray(times, dtype=float)
        n = states.shape[1]
        write_csv(path, ["t"] + [f"x{i + 1}" for i in range(n)],
                  ([float(t)] + [float(v) for v in row] for t, row in zip(ts, states)))


def _stage_eval(f, y):
    if y.min() < 0.0:
        y = project_simplex(y)
    return f(y)


def integrate(spec, x0, T: float, opts: StepperOptions | None = None) -> Trajectory:
    """Adaptive Dormand-Prince 4(5) integration of ``spec`` on ``[0, T]``.

    After each accepted step, negative coordinates of size at most
    ``clamp_tol`` are clamped to zero and the state renormalized; larger
    excursions reject the step and shrink it.
    """
    opts = opts or StepperOptions()
    if not T > 0:
        raise InputError("T must be positive")
    f = spec if callable(spec) else (lambda x: eval_field(spec, x))
    y = np.array(x0, dtype=float)
    n = y.size
    k1 = np.asarray(f(y), dtype=float)

    def err_norm(v, y0, y1):
        sc = opts.atol + opts.rtol * np.maximum(np.abs(y0), np.abs(y1))
        return float(np.sqrt(np.mean((v / sc) ** 2)))

    h = opts.first_step
    if h is None:
        d0 = np.linalg.norm(y / (opts.atol + opts.rtol * np.abs(y))) / math.sqrt(n)
        d1 = np.linalg.norm(k1 / (opts.atol + opts.rtol * np.abs(y))) / math.sqrt(n)
        h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h = min(h, T, opts.max_step)
    times, states, steps, errs, coefs = [0.0], [y.copy()], [], [], []
    t = 0.0
    K = np.empty((7, n))
    for _ in range(opts.max_steps):
        if t >= T:
            break
        h = min(h, T - t, opts.max_step)
        while True:
            if h < opts.min_step and T - t > opts.min_step:
                raise StepsizeUnderflow(f"step size {h!r} below minimum at t={t!r}")
            K[0] = k1
            for s in range(1, 6):
                K[s] = _stage_eval(f, y + h * (np.dot(_A[s], K[:s])))
            y_new = y + h * (_B @ K[:6])
            K[6] = _stage_eval(f, y_new) if y_new.min() < 0 else f(y_new)
            err = err_norm(h * (_E @ K), y, y_new)
            bad_sign = y_new.min() < -opts.clamp_tol
            if err <= 1.0 and not bad_sign:
                break
            factor = 0.5 if bad_sign else max(0.2, 0.9 * err ** -0.2)
            h *= factor
        coefs.append(K.T @ _P)
        y_raw = y_new
        y_new = np.maximum(y_new, 0.0)
        y_new = y_new / y_new.sum()
        t_new = T if T - (t + h) < 1e-14 * max(1.0, T) else t + h
        steps.append(t_new - t)
        errs.append(err)
        t, y = t_new, y_new
        times.append(t)
        states.append(y.copy())
        k1 = K[6].copy() if np.array_equal(y, y_raw) else np.asarray(f(y), dtype=float)
        h *= min(10.0, 0.9 * err ** -0.2) if err > 0 else 10.0
    else:
        raise StepsizeUnderflow(f"exceeded {opts.max_steps} steps before T={T!r}")
    return Trajectory(np.array(times), np.array(states), np.array(steps), np.array(errs), np.array(coefs))


# ---------------------------------------------------------------------------
# equilibria


@dataclass
class EquilibriumReport:
    location: np.ndarray
    residual: float
    jacobian_spectrum: np.ndarray
    unstable_dim: int
    classification: str
    hessian_index: int | None = None

    def to_dict(self) -> dict:
        return to_jsonable({
            "location": self.location,
            "residual": self.residual,
            "jacobian_spectrum": [complex(z) for z in self.jacobian_spectrum],
            "unstable_dim": self.unstable_dim,
            "classification": self.classification,
            "hessian_index": self.hessian_index,
        })


class EquilibriumList(list):
    """Roots found by :func:`find_equilibria`, with seed bookkeeping."""

    def __init__(self, items=(), n_seeds: int = 0, dropped: int = 0):
        super().__init__(items)
        self.n_seeds = n_seeds
        self.dropped = dropped

    @property
    def locations(self) -> np.ndarray:
        return np.array([r.location for r in self])


def _residual(pi_eval, x) -> float:
    return float(np.max(np.abs(x - pi_eval(x))))


def _newton(pi_eval, x0, tol, known, chart, max_iter=60, snap=1e-4):
    """Damped chart Newton for ``x = pi(x)``; returns (root or None, hit_known)."""
    y = chart.to_chart(x0)
    m = y.size

    def r(yy):
        x = chart.point(yy)
        return chart.to_chart(x - pi_eval(x))

    ry = r(y)
    nr = float(np.max(np.abs(ry)))
    for _ in range(max_iter):
        x = chart.point(y)
        if nr <= tol and _residual(pi_eval, x) <= tol:
            return x, False
        for k in known:
            if np.max(np.abs(x - k)) < snap and nr < 1e-3:
                return None, True
        h = 1e-7
        J = np.empty((m, m))
        for k in range(m):
            e = np.zeros(m)
            e[k] = h
            J[:, k] = (r(y + e) - r(y - e)) / (2 * h)
        try:
            d = -np.linalg.solve(J, ry)
        except np.linalg.LinAlgError:
            return None, False
        step = 1.0
        for _ in range(31):
            y_try = y + step * d
            x_try = chart.point(y_try)
            if is_interior(x_try):
                r_try = r(y_try)
                n_try = float(np.max(np.abs(r_try)))
                if n_try < nr:
                    break
            step *= 0.5
        else:
            x = chart.point(y)
            return (x, False) if _residual(pi_eval, x) <= tol else (None, False)
        y, ry, nr = y_try, r_try, n_try
    x = chart.point(y)
    return (x, False) if _residual(pi_eval, x) <= tol else (None, False)


def find_equilibria(pi_eval, n: int | None = None, seeds=(), tol: float = 1e-12, grid: int | None = None,
                    field: VectorFieldSpec | None = None, threshold: float = HYPERBOLICITY,
                    dedup: float = 1e-6) -> EquilibriumList:
    """Interior fixed points of ``pi_eval`` by damped Newton from many seeds.

    Seeds are the user's plus ``grid`` low-discrepancy points (default
    ``10**(n-1)``, capped at 10**4) and the barycenter. Each root is
    classified with ``field`` when given, else with the pi-field.
    """
    seeds = [np.asarray(s, dtype=float) for s in seeds]
    if n is None:
        if not seeds:
            raise InputError("pass n or at least one seed")
        n = seeds[0].size
    count = min(10 ** (n - 1), 10**4) if grid is None else grid
    all_seeds = seeds + [barycenter(n)] + (list(simplex_grid(n, count, interior_margin=1e-3)) if count else [])
    chart = Chart(n)
    roots: list[np.ndarray] = []
    dropped = 0
    for s in all_seeds:
        if not is_interior(s):
            dropped += 1
            continue
        x, hit = _newton(pi_eval, s, tol, roots, chart)
        if x is None:
            dropped += 0 if hit else 1
            continue
        if all(np.max(np.abs(x - k)) > dedup for k in roots):
            roots.append(x)
    roots.sort(key=lambda r: tuple(-r))
    fld = field if field is not None else pi_field(pi_eval, n)
    reports = [classify_equilibrium(fld, r, threshold, pi_eval=pi_eval) for r in roots]
    return EquilibriumList(reports, n_seeds=len(all_seeds), dropped=dropped)


def _fd_step(p) -> float:
    return 1e-6 * max(1.0, float(np.linalg.norm(p)))


def chart_jacobian(f, p, chart: Chart | None = None, h: float | None = None) -> np.ndarray:
    """Central differences of ``f`` in chart coordinates."""
    p = np.asarray(p, dtype=float)
    chart = chart or Chart(p.size)
    h = _fd_step(p) if h is None else h
    B = chart.basis()
    cols = [chart.to_chart((f(p + h * B[:, k]) - f(p - h * B[:, k])) / (2 * h)) for k in range(p.size - 1)]
    return np.column_stack(cols)


def factorized_jacobian(spec: VectorFieldSpec, p, chart: Chart | None = None) -> np.ndarray:
    """``DF(p) = -L^T(p) DF_pi(p)`` on the chart, valid at equilibria."""
    if spec.kind != "generator" or spec.pi is None:
        raise InputError("factorized Jacobian needs a generator field with a known pi")
    p = np.asarray(p, dtype=float)
    chart = chart or Chart(p.size)
    if _residual(spec.pi, p) > EQ_RESIDUAL:
        raise NotAnEquilibrium(f"residual {_residual(spec.pi, p)!r} exceeds {EQ_RESIDUAL}")
    Jpi = chart_jacobian(lambda x: spec.pi(x) - x, p, chart)
    L = np.asarray(spec.rate(p), dtype=float)
    return chart.operator(lambda u: -(chart.tangent(Jpi @ chart.to_chart(u)) @ L))


def jacobian(spec: VectorFieldSpec, p, chart: Chart | None = None, check_factorized: bool | None = None,
             tol: float = 1e-5) -> np.ndarray:
    """Chart Jacobian by central differences.

    For generator fields at an equilibrium the factorized form is computed
    as well and must agree within ``tol``. ``check_factorized=True`` forces
    that path (and raises off equilibria); ``False`` skips it.
    """
    p = np.asarray(p, dtype=float)
    chart = chart or Chart(p.size)
    J = chart_jacobian(lambda x: eval_field(spec, x), p, chart)
    if check_factorized is False or spec.kind != "generator" or spec.pi is None:
        if check_factorized:
            raise InputError("factorized Jacobian needs a generator field with a known pi")
        return J
    if check_factorized is None and _residual(spec.pi, p) > EQ_RESIDUAL:
        return J
    Jf = factorized_jacobian(spec, p, chart)
    gap = float(np.max(np.abs(J - Jf)))
    if gap > tol:
        raise FormulaMismatch(f"finite-difference and factorized Jacobians differ by {gap!r}")
    return J


def classify_equilibrium(spec: VectorFieldSpec, p, threshold: float = HYPERBOLICITY,
                         residual_tol: float = EQ_RESIDUAL, pi_eval=None) -> EquilibriumReport:
    p = np.asarray(p, dtype=float)
    pi_eval = pi_eval or spec.pi
    fres = float(np.max(np.abs(eval_field(spec, p))))
    res = _residual(pi_eval, p) if pi_eval is not None else fres
    if max(fres, res) > residual_tol:
        raise NotAnEquilibrium(f"residual {max(fres, res)!r} exceeds {residual_tol}")
    J = jacobian(spec, p, check_factorized=False)
    eig = np.linalg.eigvals(J) if J.size else np.array([], dtype=complex)
    eig = eig[np.lexsort((eig.imag, eig.real))]
    unstable = int(np.sum(eig.real > threshold))
    if np.any(np.abs(eig.real) <= threshold):
        kind = "nonhyperbolic"
    elif unstable == 0:
        kind = "sink"
    elif unstable == eig.size:
        kind = "source"
    else:
        kind = "saddle"
    return EquilibriumReport(p, res, eig, unstable, kind)


# ---------------------------------------------------------------------------
# omega-limit diagnostics


@dataclass
class OmegaOptions:
    burn_in: float = 0.0
    window: float | None = None
    samples: int = 4000
    fixed_tol: float = 1e-6
    spread_tol: float = 1e-4
    period_rtol: float = 0.01
    min_crossings: int = 4


@dataclass
class OmegaSummary:
    kind: str  # fixed-point | periodic | undecided
    point: np.ndarray | None = None
    period: float | None = None
    orbit: np.ndarray | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return to_jsonable({"kind": self.kind, "point": self.point, "period": self.period,
                            "orbit_sample": self.orbit, **self.details})


def omega_limit_summary(traj: Trajectory, opts: OmegaOptions | None = None) -> OmegaSummary:
    """Classify the tail of ``traj`` as a fixed point, a periodic orbit or undecided.

    The Poincare section passes through the tail mean with normal equal to
    the velocity at the first tail sample (the mean velocity over a cycle
    is nearly zero, so it is a poor normal).
    """
    opts = opts or OmegaOptions()
    t_end = traj.t_end
    window = opts.window if opts.window is not None else t_end - opts.burn_in
    if window <= 0 or t_end < opts.burn_in + window - 1e-9:
        return OmegaSummary("undecided", details={"reason": "trajectory shorter than burn-in + window"})
    t0 = t_end - window
    ts = np.linspace(t0, t_end, opts.samples)
    X = traj.at(ts)
    diam = float(np.max(X.max(axis=0) - X.min(axis=0)))
    if diam <= opts.fixed_tol:
        return OmegaSummary("fixed-point", point=X[-1], details={"tail_diameter": diam})

    m = X.mean(axis=0)
    v = X[1] - X[0]
    v = v - v.mean()
    if np.linalg.norm(v) == 0:
        return OmegaSummary("undecided", details={"reason": "stalled tail", "tail_diameter": diam})
    v /= np.linalg.norm(v)
    s = (X - m) @ v
    idx = np.flatnonzero((s[:-1] < 0) & (s[1:] >= 0))

    def sec(t):
        return float((traj.at(t)[0] - m) @ v)

    cross_t = []
    for i in idx:
        a, b = ts[i], ts[i + 1]
        cross_t.append(a if sec(a) == 0 else brentq(sec, a, b, xtol=1e-13, rtol=1e-14))
    details = {"tail_diameter": diam, "crossings": len(cross_t)}
    if len(cross_t) < opts.min_crossings:
        return OmegaSummary("undecided", details={**details, "reason": "too few section crossings"})
    cross_t = np.array(cross_t)
    pts = traj.at(cross_t)
    periods = np.diff(cross_t)
    last = periods[-3:]
    period_var = float((last.max() - last.min()) / last.mean())
    spread = float(np.max(np.abs(pts[-1] - pts[-2])))
    # amplitude over the last two revolutions: a shrinking spiral is not periodic
    amps = []
    for a, b in ((cross_t[-3], cross_t[-2]), (cross_t[-2], cross_t[-1])):
        seg = traj.at(np.linspace(a, b, 400))
        amps.append(float(np.max(seg.max(axis=0) - seg.min(axis=0))))
    amp_change = abs(amps[1] / amps[0] - 1.0) if amps[0] > 0 else math.inf
    details.update(period_variation=period_var, return_spread=spread, amplitude=amps[1],
                   amplitude_change=amp_change, periods=periods[-5:].tolist())
    if (spread <= opts.spread_tol and period_var <= opts.period_rtol and amp_change <= opts.period_rtol
            and amps[1] > 100 * opts.spread_tol):
        period = float(cross_t[-1] - cross_t[-2])
        orbit = traj.at(np.linspace(cross_t[-2], cross_t[-1], 200))
        return OmegaSummary("periodic", point=pts[-1], period=period, orbit=orbit, details=details)
    return OmegaSummary("undecided", details={**details, "reason": "return map not settled"})


# ---------------------------------------------------------------------------
# the non-gradient-like counterexample


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, built from exp(-1/t)."""
    t = np.asarray(t, dtype=float)

    def phi(u):
        safe = np.where(u > 0, u, 1.0)
        return np.where(u > 0, np.exp(-1.0 / safe), 0.0)

    a, b = phi(t), phi(1.0 - t)
    return a / (a + b)


@dataclass(frozen=True)
class SpiralField:
    """Tangent field G on the 3-simplex: a linear spiral near the barycenter,
    blended with the inward field ``p - x`` where ``27 x1 x2 x3`` is small.

    The blend weight is 0 wherever ``27 x1 x2 x3 >= q_hi`` so that the
    linearization at the barycenter is exactly ``[[-eta, -1], [1, -eta]]``
    in the chart dropping the last coordinate.
    """

    eta: float
    q_lo: float = 0.25
    q_hi: float = 0.5

    def blend(self, x) -> float:
        q = 27.0 * float(np.prod(x))
        return float(smooth_step((self.q_hi - q) / (self.q_hi - self.q_lo)))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p = barycenter(3)
        d = x[:2] - p[:2]
        s = np.array([-self.eta * d[0] - d[1], d[0] - self.eta * d[1]])
        spiral = np.array([s[0], s[1], -s[0] - s[1]])
        chi = self.blend(x)
        return (1.0 - chi) * spiral + chi * (p - x)


def _counterexample_pi(G: SpiralField, eps: float):
    def pi(x):
        return np.asarray(x, dtype=float) + eps * G(x)

    return pi


def _validate_counterexample(pi, grid: int = 4000):
    pts = np.vstack([simplex_grid(3, grid, interior_margin=0.0), np.eye(3)])
    worst = min(float(pi(x).min()) for x in pts)
    if worst <= 0:
        raise EpsilonTooLarge(f"x + eps*G(x) leaves the open simplex (min coordinate {worst!r})")


def counterexample_target(eta: float, eps: float) -> TargetMeasure:
    if not eta > 0 or not eps > 0:
        raise InputError("eta and epsilon must be positive")
    G = SpiralField(float(eta))
    pi = _counterexample_pi(G, float(eps))
    _validate_counterexample(pi)
    return TargetMeasure("counterexample", {"eta": float(eta), "epsilon": float(eps)}, pi)


def build_counterexample(eta: float, eps: float, W=None) -> tuple[VectorFieldSpec, VectorFieldSpec]:
    """Generator field F and pi-field F_pi sharing ``pi(x) = x + eps G(x)``.

    F uses ``L_ij(x) = W_ij pi_j(x)``; default ``W`` has W12 = W23 = 1, W13 = 2.
    """
    if W is None:
        W = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]])
    W = np.asarray(W, dtype=float)
    if W.shape != (3, 3):
        raise InputError("the counterexample lives on the 3-strategy simplex")
    _check_reversible_weights(W)
    target = counterexample_target(eta, eps)
    G = SpiralField(float(eta))
    meta = {"eta": float(eta), "epsilon": float(eps), "W": W, "G": G}
    F = VectorFieldSpec("generator", 3, rate=lambda x: reversible_rate_from_target(W, target(x)), pi=target,
                        meta=meta)
    F_pi = VectorFieldSpec("pi", 3, pi=target, meta=meta)
    return F, F_pi


def counterexample_trace(eta: float, eps: float, W) -> float:
    """Closed-form trace of the chart Jacobian of F at the barycenter."""
    W = np.asarray(W, dtype=float)
    b, c, d = eps * W[0, 1] / 3, eps * W[0, 2] / 3, eps * W[1, 2] / 3
    return (c - d) - 2 * eta * (b + c + d)


def rate_bound_along(spec: VectorFieldSpec, states) -> float:
    """``sup_x max_i (-L_ii(x))`` over the given states (generator fields)."""
    return max(float(np.max(-np.diag(np.asarray(spec.rate(x))))) for x in states)

