"""Scenario files: parsing, normalization and execution.

A scenario is a JSON object::

    {"format_version": 1, "name": ..., "n": ..., "seed": ..., "output": ...,
     "protocol": {...}, "analyses": [{"type": ..., ...}, ...]}

Parsing fills every analysis option with its default, so a parsed scenario
serializes to a complete, normalized document.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import dynamics as dyn
from . import games, lyapunov, stochastic
from .errors import (
    DimensionMismatch,
    FormulaMismatch,
    GradlikeError,
    InputError,
    SchemaError,
    UnknownKind,
)
from .protocols import ProtocolSpec
from .serialization import dump_json, to_jsonable, write_csv
from .simplex import as_simplex_point, barycenter, sample_simplex

FORMAT_VERSION = 1
TOP_KEYS = ("format_version", "name", "n", "seed", "output", "protocol", "analyses")

ANALYSIS_DEFAULTS = {
    "integrate": {"x0": None, "T": 50.0, "samples": 201, "rtol": 1e-9},
    "equilibria": {"seeds": [], "tol": 1e-12, "grid": None},
    "lyapunov-check": {"samples": 200, "delta": 0.05, "angle_samples": 10000, "starts": [], "T": 50.0,
                       "tol": 1e-6, "candidate": None},
    "beta-ladder": {"betas": list(games.DEFAULT_LADDER), "radius": 0.1},
    "stochastic": {"mode": "population", "x0": None, "N": [100, 10000], "T": 5.0, "seeds": 50,
                   "ratio_range": None, "steps": 10000, "prior": None, "start": 0, "checkpoints": [],
                   "expect_decrease": False},
    "counterexample": {"x0": [0.5, 0.3, 0.2], "T": 3000.0, "burn_in": 2000.0, "pi_T": 4000.0,
                       "starts": 100, "start_T": 3000.0, "converge_tol": 1e-5},
}
REQUIRED = {"integrate": ("x0",), "stochastic": ("x0",)}
SAMPLE_KEYS = {"lyapunov-check": ("samples", "angle_samples"), "stochastic": ("seeds",),
               "counterexample": ("starts",)}

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4


@dataclass
class Scenario:
    name: str
    n: int
    seed: int
    output: str | None
    protocol: ProtocolSpec
    analyses: list
    raw_protocol: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "name": self.name,
            "n": self.n,
            "seed": self.seed,
            "output": self.output,
            "protocol": self.protocol.to_dict(),
            "analyses": copy.deepcopy(self.analyses),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def __eq__(self, other):
        return isinstance(other, Scenario) and self.to_dict() == other.to_dict()


def _require(obj, key, path, types=None):
    if key not in obj:
        raise SchemaError(path, f"missing key {key!r}")
    v = obj[key]
    if types is not None and (not isinstance(v, types) or (isinstance(v, bool) and types is not bool)):
        raise SchemaError(f"{path}.{key}", f"expected {types}, got {type(v).__name__}")
    return v


def _check_vector(v, n, path):
    a = np.asarray(v, dtype=float)
    if a.ndim != 1:
        raise SchemaError(path, "expected a vector")
    if a.size != n:
        raise DimensionMismatch(f"{path} has length {a.size} but n={n}")


def _parse_analysis(a, i, n, protocol) -> dict:
    path = f"analyses[{i}]"
    if not isinstance(a, dict):
        raise SchemaError(path, "expected an object")
    kind = _require(a, "type", path, str)
    if kind not in ANALYSIS_DEFAULTS:
        raise UnknownKind(kind, "analysis type")
    defaults = ANALYSIS_DEFAULTS[kind]
    extra = set(a) - set(defaults) - {"type"}
    if extra:
        raise SchemaError(path, f"unknown keys {sorted(extra)}")
    for key in REQUIRED.get(kind, ()):
        _require(a, key, path)
    out = {"type": kind}
    for key, dv in defaults.items():
        out[key] = copy.deepcopy(a.get(key, dv))
    for key in ("x0", "prior"):
        if out.get(key) is not None:
            _check_vector(out[key], n, f"{path}.{key}")
            as_simplex_point(np.asarray(out[key], dtype=float), tol=1e-9)
    for key in ("seeds", "starts"):
        if isinstance(out.get(key), list):
            for k, s in enumerate(out[key]):
                _check_vector(s, n, f"{path}.{key}[{k}]")
    if kind == "counterexample":
        t = protocol.target
        if protocol.kind != "reversible-from-target" or t is None or t.kind != "counterexample":
            raise SchemaError(path, "counterexample analysis needs a reversible-from-target protocol "
                                    "with a counterexample target")
    if kind == "beta-ladder" and protocol.payoff is None:
        raise SchemaError(path, "beta-ladder needs a protocol with a payoff")
    if kind == "stochastic" and out["mode"] not in ("population", "reinforcement"):
        raise UnknownKind(out["mode"], "stochastic mode")
    return out


def parse_scenario_dict(obj) -> Scenario:
    if not isinstance(obj, dict):
        raise SchemaError("$", "scenario must be a JSON object")
    extra = set(obj) - set(TOP_KEYS)
    if extra:
        raise SchemaError("$", f"unknown top-level keys {sorted(extra)}")
    version = obj.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise SchemaError("$.format_version", f"unsupported version {version!r}")
    n = _require(obj, "n", "$", int)
    if n < 2:
        raise SchemaError("$.n", "n must be at least 2")
    proto_raw = _require(obj, "protocol", "$", dict)
    if "kind" not in proto_raw:
        raise SchemaError("$.protocol", "missing key 'kind'")
    try:
        protocol = ProtocolSpec.from_dict(proto_raw, n)
    except KeyError as exc:
        raise SchemaError("$.protocol", f"missing key {exc.args[0]!r}") from None
    analyses_raw = _require(obj, "analyses", "$", list)
    analyses = [_parse_analysis(a, i, n, protocol) for i, a in enumerate(analyses_raw)]
    seed = obj.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise SchemaError("$.seed", "seed must be a nonnegative integer")
    name = obj.get("name", "scenario")
    if not isinstance(name, str):
        raise SchemaError("$.name", "expected a string")
    output = obj.get("output")
    return Scenario(name, n, seed, output, protocol, analyses, proto_raw)


def parse_scenario(text: str) -> Scenario:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from None
    return parse_scenario_dict(obj)


def load_scenario(path) -> Scenario:
    p = Path(path)
    if not p.exists():
        bundled = bundled_scenario_path(str(path))
        if bundled is None:
            raise InputError(f"no such scenario file: {path}")
        p = bundled
    return parse_scenario(p.read_text(encoding="utf-8"))


def bundled_scenarios() -> dict:
    root = resources.files("gradlike") / "scenarios"
    return {Path(str(f)).stem: Path(str(f)) for f in root.iterdir() if str(f).endswith(".json")}


def bundled_scenario_path(name: str):
    return bundled_scenarios().get(Path(name).stem)


# ---------------------------------------------------------------------------
# execution


@dataclass
class RunResult:
    exit_code: int
    report: dict
    output: Path


def _check(report, index, kind, name, passed, **values):
    report["verifications"].append(to_jsonable({"analysis": index, "type": kind, "check": name,
                                                "passed": bool(passed), **values}))


def _sub_seed(seed: int, *parts) -> int:
    return int(np.random.SeedSequence([seed, *parts]).generate_state(1, dtype=np.uint64)[0])


def _negated(spec: lyapunov.LyapunovSpec) -> lyapunov.LyapunovSpec:
    return lyapunov.LyapunovSpec(spec.n, lambda x: -spec.V(x), lambda x: -np.asarray(spec.grad(x)), spec.alpha,
                                 spec.s, spec.pi, name=f"negated-{spec.name}", h=spec.h)


def _run_integrate(sc, i, a, out, report):
    F = dyn.generator_field(sc.protocol)
    traj = dyn.integrate(F, a["x0"], a["T"], dyn.StepperOptions(rtol=a["rtol"]))
    ts = np.linspace(0.0, a["T"], a["samples"])
    path = out / f"{i:02d}_trajectory.csv"
    traj.to_csv(path, ts)
    S = traj.states
    ok = bool(S.min() >= -1e-12 and np.max(np.abs(S.sum(axis=1) - 1.0)) <= 1e-12)
    _check(report, i, "integrate", "simplex_invariance", ok, min_coordinate=float(S.min()))
    return {"trajectory_csv": path.name, "accepted_steps": len(traj.steps), "final_state": traj.states[-1]}


def _run_equilibria(sc, i, a, out, report):
    F = dyn.generator_field(sc.protocol)
    roots = dyn.find_equilibria(sc.protocol.invariant, sc.n, seeds=a["seeds"], tol=a["tol"], grid=a["grid"],
                                field=F)
    try:
        ly = lyapunov.lyapunov_for(sc.protocol)
    except InputError:
        ly = None
    fact_ok, index_ok = True, True
    for rep in roots:
        try:
            dyn.jacobian(F, rep.location, check_factorized=True)
        except FormulaMismatch:
            fact_ok = False
        if ly is not None and rep.classification != "nonhyperbolic" and np.all(rep.location > 0):
            rep.hessian_index = lyapunov.hessian_V(ly, rep.location).index
            index_ok &= rep.hessian_index == rep.unstable_dim
    path = out / f"{i:02d}_equilibria.json"
    dump_json({"equilibria": [r.to_dict() for r in roots], "n_seeds": roots.n_seeds, "dropped": roots.dropped},
              path)
    _check(report, i, "equilibria", "residuals", all(r.residual <= max(a["tol"], 1e-10) for r in roots),
           count=len(roots))
    _check(report, i, "equilibria", "factorized_jacobian", fact_ok)
    if ly is not None:
        _check(report, i, "equilibria", "index_matches_unstable_dim", index_ok)
    return {"equilibria_json": path.name, "count": len(roots)}


def _run_lyapunov(sc, i, a, out, report):
    ly = lyapunov.lyapunov_for(sc.protocol)
    cand = a["candidate"]
    if cand is not None:
        if cand != "negated":
            raise UnknownKind(cand, "Lyapunov candidate")
        ly = _negated(ly)
    F = dyn.generator_field(sc.protocol)
    rng = stochastic.philox(_sub_seed(sc.seed, i, 1))
    pts = sample_simplex(rng, a["samples"], sc.n, min_coord=0.01 / sc.n)
    qg = lyapunov.quasigradient_check(ly, pts, tol=a["tol"])
    ang = lyapunov.decrease_and_angle(ly, F, a["delta"], a["angle_samples"], seed=_sub_seed(sc.seed, i, 2))
    starts = a["starts"] or [barycenter(sc.n) * 0.5 + 0.5 * np.eye(sc.n)[0]]
    bad = []
    for k, x0 in enumerate(starts):
        traj = dyn.integrate(F, x0, a["T"])
        v = lyapunov.strict_decrease_along(ly, F, traj.states)
        if v:
            bad.append({"start": k, "steps": v[:10], "count": len(v)})
    path = out / f"{i:02d}_lyapunov.json"
    dump_json({"lyapunov": ly.name, "quasigradient": qg.to_dict(), "angle": ang.to_dict(),
               "strict_decrease_violations": bad}, path)
    _check(report, i, "lyapunov-check", "quasigradient", qg.ok, max_violation=qg.max_violation)
    _check(report, i, "lyapunov-check", "angle_condition", ang.ok, angle_constant=ang.angle_constant)
    _check(report, i, "lyapunov-check", "strict_decrease", not bad)
    return {"lyapunov_json": path.name}


def _run_ladder(sc, i, a, out, report):
    base = sc.protocol.to_dict()

    def factory(beta):
        d = dict(base, beta=beta)
        return ProtocolSpec.from_dict(d, sc.n)

    table = games.beta_correspondence(sc.protocol.payoff, a["betas"], factory, radius=a["radius"])
    csv_path = out / f"{i:02d}_ladder.csv"
    json_path = out / f"{i:02d}_ladder.json"
    table.to_csv(csv_path)
    dump_json(table.to_dict(), json_path)
    top = table.roots_at(float(a["betas"][-1]))
    _check(report, i, "beta-ladder", "roots_near_nash_at_max_beta", all(r.nash_id is not None for r in top),
           max_distance=max((r.distance for r in top), default=0.0))
    return {"ladder_csv": csv_path.name, "ladder_json": json_path.name, "nash_count": len(table.nash)}


def _run_stochastic(sc, i, a, out, report):
    if a["mode"] == "population":
        x0 = np.asarray(a["x0"], dtype=float)
        rows, medians = [], {}
        for N in a["N"]:
            counts = stochastic.as_counts(x0, N)
            ode = stochastic.meanfield_solution(sc.protocol, counts / N, a["T"])
            devs = []
            for s in range(a["seeds"]):
                path = stochastic.simulate_population(sc.protocol, N, int(round(N * a["T"])),
                                                      _sub_seed(sc.seed, i, N, s), counts)
                d = stochastic.meanfield_deviation(path, sc.protocol, a["T"], ode)
                devs.append(d)
                rows.append([N, s, d])
            medians[N] = float(np.median(devs))
        path = out / f"{i:02d}_meanfield.csv"
        write_csv(path, ["N", "seed_index", "deviation"], rows)
        _check(report, i, "stochastic", "deviation_finite", all(np.isfinite(r[2]) and r[2] >= 0 for r in rows))
        if a["ratio_range"] is not None and len(a["N"]) >= 2:
            ratio = medians[a["N"][0]] / max(medians[a["N"][-1]], 1e-300)
            lo, hi = a["ratio_range"]
            _check(report, i, "stochastic", "deviation_ratio", lo <= ratio <= hi, ratio=ratio)
        return {"meanfield_csv": path.name, "median_deviation": {str(k): v for k, v in medians.items()}}
    prior = np.asarray(a["prior"] if a["prior"] is not None else a["x0"], dtype=float)
    roots = dyn.find_equilibria(sc.protocol.invariant, sc.n).locations
    checkpoints = a["checkpoints"] or [a["steps"]]
    dist = {c: [] for c in checkpoints}
    in_simplex = True
    for s in range(a["seeds"]):
        occ = stochastic.simulate_reinforcement(sc.protocol, a["steps"], _sub_seed(sc.seed, i, s), a["start"], prior)
        in_simplex &= bool(occ.mu.min() >= 0 and np.max(np.abs(occ.mu.sum(axis=1) - 1)) <= 1e-12)
        for c in checkpoints:
            m = occ.mu[min(c, a["steps"]) - 1]
            dist[c].append(float(np.min(np.linalg.norm(roots - m, axis=1))))
    med = [float(np.median(dist[c])) for c in checkpoints]
    path = out / f"{i:02d}_reinforcement.csv"
    write_csv(path, ["k", "median_distance"], [[c, m] for c, m in zip(checkpoints, med)])
    _check(report, i, "stochastic", "occupation_in_simplex", in_simplex)
    if a["expect_decrease"]:
        _check(report, i, "stochastic", "distance_decreasing", all(b < a_ for a_, b in zip(med, med[1:])),
               medians=med)
    return {"reinforcement_csv": path.name, "median_distance": med}


def _run_counterexample(sc, i, a, out, report):
    proto = sc.protocol
    t = proto.target
    eta, eps = t.params["eta"], t.params["epsilon"]
    F = dyn.generator_field(proto)
    Fpi = dyn.pi_field(t, 3)
    p = barycenter(3)
    J = dyn.jacobian(F, p)
    Jpi = dyn.jacobian(Fpi, p)
    trace, expected = float(np.trace(J)), dyn.counterexample_trace(eta, eps, proto.W)
    eig, eig_pi = np.linalg.eigvals(J), np.linalg.eigvals(Jpi)
    _check(report, i, "counterexample", "trace_formula", abs(trace - expected) <= 1e-8, trace=trace,
           expected=expected)
    _check(report, i, "counterexample", "pi_field_stable", bool(np.all(eig_pi.real < 0)), spectrum=eig_pi)
    _check(report, i, "counterexample", "generator_field_unstable", bool(np.any(eig.real > 0)), spectrum=eig)

    opts = dyn.OmegaOptions(burn_in=a["burn_in"])
    verdicts = {}
    periods = []
    for rtol in (1e-9, 5e-10):
        traj = dyn.integrate(F, a["x0"], a["T"], dyn.StepperOptions(rtol=rtol, atol=rtol * 1e-3))
        om = dyn.omega_limit_summary(traj, opts)
        periods.append(om.period)
        if rtol == 1e-9:
            verdicts["F"] = om.to_dict()
            traj.to_csv(out / f"{i:02d}_F_trajectory.csv", np.linspace(0, a["T"], 3001))
    stable = None not in periods and abs(periods[0] - periods[1]) <= 0.01 * periods[0]
    _check(report, i, "counterexample", "F_periodic", verdicts["F"]["kind"] == "periodic" and stable,
           periods=periods)

    traj = dyn.integrate(Fpi, a["x0"], a["pi_T"])
    om = dyn.omega_limit_summary(traj, dyn.OmegaOptions(burn_in=a["pi_T"] - 1000.0, window=1000.0))
    verdicts["F_pi"] = om.to_dict()
    near = om.point is not None and float(np.max(np.abs(om.point - p))) <= 1e-6
    _check(report, i, "counterexample", "F_pi_fixed_point", om.kind == "fixed-point" and near)

    rng = stochastic.philox(_sub_seed(sc.seed, i, 3))
    starts = sample_simplex(rng, a["starts"], 3)
    worst = 0.0
    for x0 in starts:
        tr = dyn.integrate(Fpi, x0, a["start_T"], dyn.StepperOptions(rtol=1e-8, atol=1e-11))
        worst = max(worst, float(np.max(np.abs(tr.states[-1] - p))))
    _check(report, i, "counterexample", "F_pi_converges", worst <= a["converge_tol"], worst_distance=worst,
           starts=len(starts))
    path = out / f"{i:02d}_counterexample.json"
    dump_json({"eta": eta, "epsilon": eps, "trace": trace, "expected_trace": expected,
               "spectrum_F": [complex(z) for z in eig], "spectrum_F_pi": [complex(z) for z in eig_pi],
               "omega": verdicts}, path)
    return {"counterexample_json": path.name, "verdicts": {k: v["kind"] for k, v in verdicts.items()}}


RUNNERS = {
    "integrate": _run_integrate,
    "equilibria": _run_equilibria,
    "lyapunov-check": _run_lyapunov,
    "beta-ladder": _run_ladder,
    "stochastic": _run_stochastic,
    "counterexample": _run_counterexample,
}


def apply_overrides(sc: Scenario, seed: int | None = None, samples: int | None = None) -> Scenario:
    sc = copy.copy(sc)
    sc.analyses = copy.deepcopy(sc.analyses)
    if seed is not None:
        sc.seed = int(seed)
    if samples is not None:
        for a in sc.analyses:
            for key in SAMPLE_KEYS.get(a["type"], ()):
                a[key] = int(samples)
    return sc


def run_scenario(sc: Scenario, output=None) -> RunResult:
    """Run the analyses in order; write artifacts and ``report.json`` into the output directory."""
    out = Path(output or sc.output or Path("gradlike-out") / sc.name)
    out.mkdir(parents=True, exist_ok=True)
    report = {"scenario": sc.name, "seed": sc.seed, "analyses": [], "verifications": [], "status": "ok"}
    code = EXIT_OK
    for i, a in enumerate(sc.analyses):
        try:
            result = RUNNERS[a["type"]](sc, i, a, out, report)
            report["analyses"].append(to_jsonable({"index": i, "type": a["type"], **result}))
        except GradlikeError as exc:
            code = EXIT_INPUT if isinstance(exc, InputError) else EXIT_NUMERIC
            report["analyses"].append({"index": i, "type": a["type"], "error": type(exc).__name__,
                                       "message": str(exc)})
            report["status"] = "error"
            break
    if code == EXIT_OK and not all(v["passed"] for v in report["verifications"]):
        code = EXIT_VERIFY
        report["status"] = "verification-failed"
    report["exit_code"] = code
    dump_json(report, out / "report.json")
    return RunResult(code, report, out)

