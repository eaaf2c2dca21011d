"""Nash equilibria of population games and their perturbed (logit) counterparts."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .dynamics import EquilibriumList, find_equilibria, generator_field
from .errors import InputError
from .protocols import AttachmentSpec, PayoffSpec, ProtocolSpec
from .serialization import to_jsonable, write_csv
from .simplex import Chart, support

NASH_TOL = 1e-9
COND_LIMIT = 1e10
DEFAULT_LADDER = (1.0, 5.0, 10.0, 25.0, 50.0, 100.0)


@dataclass
class NashCertificate:
    ok: bool
    max_violation: float
    average_payoff: float
    support_gaps: dict

    def __bool__(self):
        return self.ok


@dataclass
class NashPoint:
    location: np.ndarray
    support: tuple
    kind: str = ""
    strict: bool = False
    nondegenerate: bool | None = None
    flagged: bool = False
    extrinsic: np.ndarray | None = None

    def to_dict(self) -> dict:
        return to_jsonable({"location": self.location, "support": list(self.support), "kind": self.kind,
                            "strict": self.strict, "nondegenerate": self.nondegenerate, "flagged": self.flagged})


def is_nash(payoff: PayoffSpec, x, tol: float = NASH_TOL) -> NashCertificate:
    """``U_i(x) <= <U(x), x> + tol`` for every i."""
    x = np.asarray(x, dtype=float)
    U = payoff(x)
    avg = float(U @ x)
    excess = U - avg
    gaps = {int(i): float(excess[i]) for i in support(x, 0.0)}
    worst = float(excess.max())
    return NashCertificate(worst <= tol, worst, avg, gaps)


def _affine(payoff: PayoffSpec):
    """``(M, c)`` with ``U(x) = M x + c``."""
    if payoff.kind == "linear-matrix":
        c = payoff.offset if payoff.offset is not None else np.zeros(payoff.n)
        return np.asarray(payoff.matrix), np.asarray(c)
    if payoff.kind == "potential-gradient" and payoff.gradient is None:
        return -np.asarray(payoff.matrix), -np.asarray(payoff.offset)
    raise InputError("Nash enumeration needs linear payoffs")


def _support_solutions(M, c, T):
    """Points with support in T that equalize the payoffs on T, and whether T was left unresolved."""
    r = len(T)
    A = np.zeros((r + 1, r + 1))
    A[:r, :r] = M[np.ix_(T, T)]
    A[:r, r] = -1.0
    A[r, :r] = 1.0
    b = np.concatenate([-c[list(T)], [1.0]])
    sol, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    if np.max(np.abs(A @ sol - b)) > 1e-9:
        return [], False
    if rank == r + 1:
        return [sol[:r]], False
    # singular: the solution set is sol + null(A); enumerate vertices of {x_T >= 0}
    _, sv, vt = np.linalg.svd(A)
    null = vt[rank:].T
    d = null.shape[1]
    if d > 2:
        # unresolved: report the minimum-norm particular solution, flagged
        return [sol[:r]], True
    X0, N = sol[:r], null[:r]
    out = []
    for rows in itertools.combinations(range(r), d):
        S = N[list(rows)]
        if abs(np.linalg.det(S)) < 1e-12:
            continue
        t = np.linalg.solve(S, -X0[list(rows)])
        out.append(X0 + N @ t)
    return out, False


def enumerate_nash(payoff: PayoffSpec, tol: float = NASH_TOL) -> list[NashPoint]:
    """Support enumeration for linear payoffs (n <= 6)."""
    M, c = _affine(payoff)
    n = M.shape[0]
    if n > 6:
        raise InputError("support enumeration is limited to n <= 6")
    found: list[NashPoint] = []
    for r in range(1, n + 1):
        for T in itertools.combinations(range(n), r):
            sols, unresolved = _support_solutions(M, c, T)
            for xT in sols:
                if np.any(xT < -1e-12):
                    continue
                x = np.zeros(n)
                x[list(T)] = np.maximum(xT, 0.0)
                x /= x.sum()
                if not is_nash(payoff, x, tol):
                    continue
                if any(np.max(np.abs(x - q.location)) <= 1e-9 for q in found):
                    continue
                found.append(classify_nash(payoff, NashPoint(x, support(x, 1e-12), flagged=unresolved)))
    return found


def extrinsic_matrix(payoff: PayoffSpec, x, supp=None, h: float = 1e-6) -> np.ndarray:
    """``[d h^r_i / d x_j]`` with ``h^r_i = U_i - U_r`` on the support face, r its last index."""
    x = np.asarray(x, dtype=float)
    supp = list(support(x, 1e-12) if supp is None else supp)
    r = supp[-1]
    rest = supp[:-1]
    m = len(rest)
    D = np.empty((m, m))
    for jj, j in enumerate(rest):
        e = np.zeros_like(x)
        e[j], e[r] = 1.0, -1.0
        dU = (payoff(x + h * e) - payoff(x - h * e)) / (2 * h)
        D[:, jj] = dU[rest] - dU[r]
    return D


def classify_nash(payoff: PayoffSpec, point: NashPoint, tol: float = NASH_TOL) -> NashPoint:
    x = point.location
    n = x.size
    supp = support(x, 1e-12)
    if len(supp) == 1:
        kind = "pure"
    elif len(supp) == n:
        kind = "fully-mixed"
    else:
        kind = "partially-mixed"
    U = payoff(x)
    avg = float(U @ x)
    off = [i for i in range(n) if i not in supp]
    strict = all(U[i] < avg - tol for i in off)
    nondeg = None
    D = None
    if len(supp) > 1:
        D = extrinsic_matrix(payoff, x, supp)
        nondeg = bool(np.linalg.cond(D) < COND_LIMIT)
    return NashPoint(x, supp, kind, strict, nondeg, point.flagged, D)


def best_reply_set(payoff: PayoffSpec, x, tol: float = NASH_TOL):
    """Indices within ``tol`` of the best payoff and the vertices of their face."""
    U = payoff(np.asarray(x, dtype=float))
    idx = tuple(int(i) for i in np.flatnonzero(U >= U.max() - tol))
    return idx, np.eye(U.size)[list(idx)]


def potential_index(payoff: PayoffSpec, x, face=None) -> int:
    """Negative directions of Hess W (= -DU) on the tangent space of a face."""
    x = np.asarray(x, dtype=float)
    face = list(support(x, 1e-12) if face is None else face)
    if len(face) < 2:
        return 0
    n = x.size
    H = -payoff.jacobian(x)
    H = 0.5 * (H + H.T)
    B = np.zeros((n, len(face) - 1))
    for k, i in enumerate(face[:-1]):
        B[i, k], B[face[-1], k] = 1.0, -1.0
    Q, _ = np.linalg.qr(B)
    eig = np.linalg.eigvalsh(Q.T @ H @ Q)
    return int(np.sum(eig < -1e-9 * max(1.0, np.abs(eig).max())))


# ---------------------------------------------------------------------------
# beta ladder


def logit_protocol(payoff: PayoffSpec, beta: float) -> ProtocolSpec:
    """Sampling protocol with uniform attachment and exponential weights (rows = logit measure)."""
    return ProtocolSpec.sampling(payoff, AttachmentSpec.uniform(payoff.n), "exp", beta)


def _tangent_frame(n):
    Q, _ = np.linalg.qr(Chart(n).basis())
    return Q


def contraction_diagnostic(pi_eval, center, radius: float, samples: int = 200, seed: int = 0,
                           h: float = 1e-7) -> float:
    """``sup ||D pi||`` (operator 2-norm on tangent vectors) over sampled points of the
    ball of given radius around ``center`` intersected with the simplex."""
    center = np.asarray(center, dtype=float)
    n = center.size
    rng = np.random.default_rng(seed)
    Q = _tangent_frame(n)
    worst = 0.0
    pts = [center]
    while len(pts) < samples:
        y = rng.dirichlet(np.ones(n))
        t = radius * rng.random() / max(np.linalg.norm(y - center), 1e-300)
        pts.append(center + min(1.0, t) * (y - center))
    for x in pts:
        cols = []
        for k in range(n - 1):
            u = Q[:, k]
            cols.append((pi_eval(x + h * u) - pi_eval(x - h * u)) / (2 * h))
        D = Q.T @ np.column_stack(cols)
        worst = max(worst, float(np.linalg.norm(D, 2)))
    return worst


@dataclass
class CorrespondenceRow:
    beta: float
    root: np.ndarray
    nash_id: int | None
    distance: float
    classification: str
    unstable_dim: int
    tie: bool = False
    contraction: float | None = None


@dataclass
class CorrespondenceTable:
    nash: list
    rows: list = field(default_factory=list)
    radius: float = 0.1

    def roots_at(self, beta: float) -> list:
        return [r for r in self.rows if r.beta == beta]

    def unmatched(self) -> list:
        return [r for r in self.rows if r.nash_id is None]

    def to_csv(self, path) -> None:
        n = self.nash[0].location.size if self.nash else (self.rows[0].root.size if self.rows else 0)
        header = ["beta"] + [f"x{i + 1}" for i in range(n)] + ["nash_id", "distance", "classification",
                                                               "unstable_dim", "contraction"]
        body = []
        for r in self.rows:
            body.append([float(r.beta)] + [float(v) for v in r.root]
                        + ["" if r.nash_id is None else r.nash_id, float(r.distance), r.classification,
                           r.unstable_dim, "" if r.contraction is None else float(r.contraction)])
        write_csv(path, header, body)

    def to_dict(self) -> dict:
        return to_jsonable({
            "radius": self.radius,
            "nash": [q.to_dict() for q in self.nash],
            "rows": [{"beta": r.beta, "root": r.root, "nash_id": r.nash_id, "distance": r.distance,
                      "classification": r.classification, "unstable_dim": r.unstable_dim, "tie": r.tie,
                      "contraction": r.contraction} for r in self.rows],
        })


def beta_correspondence(payoff: PayoffSpec, betas=DEFAULT_LADDER, protocol_factory=None, radius: float = 0.1,
                        nash=None, grid: int | None = None, contraction_samples: int = 100) -> CorrespondenceTable:
    """Match the equilibria of the beta-perturbed dynamics to the Nash set."""
    betas = [float(b) for b in betas]
    if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
        raise InputError("beta ladder must be increasing")
    factory = protocol_factory or (lambda b: logit_protocol(payoff, b))
    nash = enumerate_nash(payoff) if nash is None else nash
    table = CorrespondenceTable(list(nash), radius=radius)
    locs = np.array([q.location for q in nash]) if nash else np.zeros((0, payoff.n))
    for beta in betas:
        proto = factory(beta)
        roots: EquilibriumList = find_equilibria(proto.invariant, payoff.n, grid=grid, field=generator_field(proto))
        for rep in roots:
            x = rep.location
            nid, dist, tie = None, float("inf"), False
            if len(locs):
                d = np.linalg.norm(locs - x, axis=1)
                order = np.argsort(d)
                dist = float(d[order[0]])
                tie = len(d) > 1 and abs(d[order[1]] - d[order[0]]) <= 1e-9
                if dist <= radius:
                    nid = int(order[0])
            contraction = None
            if nid is not None and nash[nid].kind == "pure" and nash[nid].strict:
                contraction = contraction_diagnostic(proto.invariant, nash[nid].location, radius,
                                                     samples=contraction_samples)
            table.rows.append(CorrespondenceRow(beta, x, nid, dist, rep.classification, rep.unstable_dim, tie,
                                                contraction))
    return table
