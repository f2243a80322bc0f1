"""Batch front-end: ``modfix certify | solve | sweep | report``.

Exit codes: 0 success, 1 mathematical failure (non-convergence, rejected
certificate, violated bound row), 2 usage or configuration error.
Outputs go to ``--out``, else the config's ``out``, else ``$MODFIX_OUT``,
else ``./modfix_out``.
"""

from __future__ import annotations

import argparse
import copy
import math
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import serialize
from .contraction import (
    DEFAULT_MAX_ITER,
    FixedPointResult,
    IterationTrace,
    StrictContractionCertificate,
    StrongContractionCertificate,
    certify_strict,
    certify_strong,
    solve_strict_delta2,
    solve_strong,
)
from .errors import CertificationError, ModfixError, OracleError, PreconditionError, SolverError
from .modular import (
    Delta2Certificate,
    check_regular_growth,
    estimate_delta2,
    power_exponent,
    replay_delta2,
    verify_modular_axioms,
)
from .nonexpansive import (
    Schedule,
    approximating_sequence,
    certify_nonexpansive,
    proposition31_solve,
    schauder_fixed_point,
    segment_solve,
)
from .problems import AffineMapSpec, affine_contraction_constant, brute_force_fixed_point

SOLVERS = ("strong", "strict_delta2", "segment", "approx_schedule", "schauder", "prop31")
CERTIFICATIONS = ("axioms", "growth", "delta2", "strong", "strict", "nonexpansive")
SWEEP_PARAMS = ("k", "c", "l", "beta", "schedule_length", "grid_size")
ENV_OUT = "MODFIX_OUT"

# constants each solver cannot run without (others are certified or defaulted)
REQUIRED = {
    "strong": ("c", "l"),
    "strict_delta2": ("c", "delta"),
    "segment": ("beta",),
    "approx_schedule": (),
    "schauder": (),
    "prop31": ("k",),
}


class UsageError(PreconditionError):
    pass


@dataclass
class RunConfig:
    """Everything one run needs.

    ``modular`` and ``problem`` are inline dicts or JSON paths (relative
    paths resolve against the config file).  For Volterra problems the
    modular may be omitted: the operator's own weighted p=1 modular is
    used.  ``constants`` holds ``c, k, l, s, delta, L, M, beta, mode, z, x0``
    as the solver needs them.
    """

    problem: object = None
    modular: object = None
    solver: str = "strong"
    constants: dict = field(default_factory=dict)
    schedule: dict | None = None
    certify: list = field(default_factory=lambda: ["strong"])
    tol: float = 1e-10
    max_iter: int = DEFAULT_MAX_ITER
    seed: int = 0
    out: str | None = None
    pair_count: int = 1000
    sample_count: int = 1000
    oracle: str | None = None
    base_dir: str = "."

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise UsageError(f"unknown solver {self.solver!r}; expected one of {SOLVERS}")
        if not (isinstance(self.tol, (int, float)) and self.tol > 0):
            raise UsageError("tol must be positive")
        if int(self.max_iter) < 1:
            raise UsageError("max_iter must be >= 1")
        bad = [c for c in self.certify if c not in CERTIFICATIONS]
        if bad:
            raise UsageError(f"unknown certification(s) {bad}; expected a subset of {CERTIFICATIONS}")
        if self.problem is None:
            raise UsageError("config needs a problem")

    @classmethod
    def from_file(cls, path):
        d = serialize.read_json(path)
        if not isinstance(d, dict):
            raise UsageError(f"{path}: config must be a JSON object")
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise UsageError(f"{path}: unknown config keys {sorted(extra)}")
        d.setdefault("base_dir", str(Path(path).resolve().parent))
        return cls(**d)

    def replace(self, **changes):
        d = {f.name: copy.deepcopy(getattr(self, f.name)) for f in fields(self)}
        d.update(changes)
        return RunConfig(**d)

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.pop("base_dir")
        d.pop("out")
        return d

    def resolve(self, ref):
        if isinstance(ref, str):
            p = Path(ref)
            return p if p.is_absolute() else Path(self.base_dir) / p
        return ref

    def require(self, *names):
        missing = [n for n in names if n not in self.constants]
        if missing:
            raise UsageError(f"solver {self.solver!r} needs constants {missing}")


def _output_dir(cfg, override):
    out = override or cfg.out or os.environ.get(ENV_OUT) or "modfix_out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def build(cfg):
    """``(T, rho)`` for a config."""
    T = serialize.load_problem(cfg.resolve(cfg.problem))
    if cfg.modular is None:
        rho = T.meta.get("modular")
        if rho is None:
            raise UsageError("config needs a modular for this problem")
    else:
        rho = serialize.load_modular(cfg.resolve(cfg.modular))
    if rho.dimension != T.dimension:
        raise UsageError(f"modular dimension {rho.dimension} does not match problem dimension {T.dimension}")
    return T, rho


def _schedule(cfg):
    if cfg.schedule is None:
        return Schedule.from_rule("harmonic", 10)
    return Schedule.from_dict(cfg.schedule)


def _growth(cfg, rho):
    return check_regular_growth(rho, np.linspace(0.0, 0.99, 34), cfg.sample_count, cfg.seed)


def _delta2(cfg, rho):
    """Inline ``L`` (with ``M``, default 0) is replayed on fresh samples; otherwise it is estimated."""
    k = cfg.constants
    delta = float(k["delta"])
    if "L" in k:
        try:
            cert = Delta2Certificate(delta, float(k["L"]), float(k.get("M", 0.0)), 0.0, True)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"malformed Delta_2 constants: {exc}") from exc
        if not (delta > 0 and cert.L >= 0 and cert.M >= 0):
            raise UsageError("invalid Delta_2 certificate: need delta > 0, L >= 0, M >= 0")
        excess, ok = replay_delta2(cert, rho, cfg.sample_count, cfg.seed + 1)
        if not ok:
            raise UsageError(f"invalid Delta_2 certificate: sampled excess {excess:.6g}")
        return cert
    cert = estimate_delta2(rho, delta, cfg.sample_count, cfg.seed, M=float(k.get("M", 0.0)))
    if not cert.valid:
        raise UsageError("invalid Delta_2 certificate: estimation failed")
    return cert


def _x0(cfg, T):
    x0 = cfg.constants.get("x0")
    return np.zeros(T.dimension) if x0 is None else np.asarray(x0, dtype=float)


def _center(cfg, T):
    z = cfg.constants.get("z")
    if z is not None:
        return np.asarray(z, dtype=float)
    sc = T.domain.star_center
    return np.zeros(T.dimension) if sc is None else sc


def run_solver(cfg, T, rho):
    """Dispatch to the selected solver; returns ``(FixedPointResult, trace)``."""
    cfg.require(*REQUIRED[cfg.solver])
    k = cfg.constants
    if cfg.solver == "strong":
        c, l = float(k["c"]), float(k["l"])
        s = float(k.get("s", 1.0))
        if not c > l > 0:
            raise UsageError(f"strong contraction needs c > l > 0, got c={c}, l={l}")
        if "k" in k:
            cert = StrongContractionCertificate(c, l, float(k["k"]), s)
        else:
            cert = certify_strong(T, rho, c, l, cfg.pair_count, cfg.seed, s=s)
        mode = k.get("mode", "theorem_1_1")
        d2 = _delta2(cfg, rho) if mode == "theorem_1_2_ii" else None
        res = solve_strong(T, rho, cert, _x0(cfg, T), cfg.tol, cfg.max_iter, mode=mode, delta2=d2)
        return res, res.trace
    if cfg.solver == "strict_delta2":
        c = float(k["c"])
        d2 = _delta2(cfg, rho)
        if "k" in k:
            cert = StrictContractionCertificate(c, float(k["k"]))
        elif "k" in T.meta and c == 1.0 and cfg.modular is None:
            # analytic constant of the operator under its own modular beats a sampled one
            cert = StrictContractionCertificate(c, float(T.meta["k"]))
        else:
            cert = certify_strict(T, rho, c, cfg.pair_count, cfg.seed)
        res = solve_strict_delta2(T, rho, cert, d2, _x0(cfg, T), cfg.tol, cfg.max_iter)
        return res, res.trace
    if cfg.solver == "segment":
        res = segment_solve(T, _center(cfg, T), float(k["beta"]), rho, _growth(cfg, rho), cfg.tol,
                            max_iter=cfg.max_iter)
        return res, res.trace
    if cfg.solver == "approx_schedule":
        seq = approximating_sequence(T, _center(cfg, T), _schedule(cfg), rho, _growth(cfg, rho), cfg.tol,
                                     max_iter=cfg.max_iter)
        res_val = float(seq.residual[-1])
        res = FixedPointResult(seq.points[-1], res_val, int(seq.inner_iterations.sum()), seq.to_iteration_trace(), None,
                               bool(res_val <= cfg.tol), "approximating", None, 1.0,
                               info={"tau_bounded": seq.tau_bounded(), "final_k": float(seq.k[-1])})
        return res, seq
    if cfg.solver == "schauder":
        res = schauder_fixed_point(T, None, _schedule(cfg), rho, _growth(cfg, rho), cfg.tol, max_iter=cfg.max_iter)
        return res, res.info["approx_trace"]
    res = proposition31_solve(T, rho, float(k["k"]), _schedule(cfg), cfg.tol, max_iter=cfg.max_iter)
    return res, res.trace


def _oracle_distance(cfg, T, rho, point):
    """Modular distance to the oracle fixed point, when one is configured."""
    if cfg.oracle is None:
        return None
    if cfg.oracle == "reference":
        spec = T.meta.get("spec")
        if spec is None or not hasattr(spec, "reference_values"):
            raise UsageError("reference oracle needs a problem with a registered reference")
        return float(rho(point - spec.reference_values()))
    try:
        ref = brute_force_fixed_point(T, cfg.oracle).point
    except OracleError:
        return math.nan
    return float(rho(point - ref))


def _empty_trace():
    e = np.array([])
    return IterationTrace(np.array([], dtype=int), e, e, 0.0)


def cmd_certify(cfg, out):
    T, rho = build(cfg)
    k = cfg.constants
    report = {"config": cfg.to_dict(), "checks": {}}
    ok_all = True
    for name in cfg.certify:
        entry = {}
        try:
            if name == "axioms":
                rep = verify_modular_axioms(rho, cfg.sample_count, cfg.seed)
                entry = {"passed": rep.ok, "report": rep}
            elif name == "growth":
                prof = _growth(cfg, rho)
                entry = {"passed": prof.regular_growth_ok, "table": [[s.t, s.estimate] for s in prof.samples],
                         "min_gap": prof.min_gap}
            elif name == "delta2":
                cfg.require("delta")
                cert = estimate_delta2(rho, float(k["delta"]), cfg.sample_count, cfg.seed, M=float(k.get("M", 0.0)))
                entry = {"passed": cert.valid, "certificate": cert}
            elif name == "strong":
                cfg.require("c", "l")
                c, l = float(k["c"]), float(k["l"])
                if not c > l > 0:
                    raise UsageError(f"strong contraction needs c > l > 0, got c={c}, l={l}")
                cert = certify_strong(T, rho, c, l, cfg.pair_count, cfg.seed, s=float(k.get("s", 1.0)))
                entry = {"passed": True, "k_hat": cert.k_hat, "certificate": cert}
            elif name == "strict":
                cfg.require("c")
                cert = certify_strict(T, rho, float(k["c"]), cfg.pair_count, cfg.seed)
                entry = {"passed": True, "k_hat": cert.k_hat, "certificate": cert}
            else:
                rep = certify_nonexpansive(T, rho, cfg.pair_count, cfg.seed)
                entry = {"passed": rep.passed, "report": rep}
        except CertificationError as exc:
            entry = {"passed": False, "reason": str(exc), "witness": exc.witness}
        report["checks"][name] = entry
        ok_all = ok_all and entry["passed"]
        print(f"{name}: {'pass' if entry['passed'] else 'FAIL'}")
    report["passed"] = ok_all
    serialize.write_json(out / "certify.json", report)
    return 0 if ok_all else 1


def _solve_once(cfg):
    """Run one solve; returns ``(status, document, trace)`` without touching the filesystem."""
    T, rho = build(cfg)
    try:
        res, trace = run_solver(cfg, T, rho)
    except SolverError as exc:
        trace = exc.trace if exc.trace is not None else _empty_trace()
        doc = {"converged": False, "reason": str(exc), "info": exc.info}
        return 1, doc, trace
    except CertificationError as exc:
        doc = {"converged": False, "reason": str(exc), "witness": exc.witness}
        return 1, doc, _empty_trace()
    doc = serialize.result_to_dict(res)
    dist = _oracle_distance(cfg, T, rho, res.point)
    if dist is not None:
        doc["oracle_distance"] = dist
    compliant = bool(res.trace.compliant and getattr(trace, "compliant", True))
    doc["compliant"] = compliant
    return (0 if res.converged and compliant else 1), doc, trace


def cmd_solve(cfg, out):
    status, doc, trace = _solve_once(cfg)
    doc["config"] = cfg.to_dict()
    serialize.write_json(out / "result.json", doc)
    serialize.write_trace(out / "trace.csv", trace)
    print(f"{cfg.solver}: {'converged' if status == 0 else 'FAILED'}"
          + ("" if status == 0 else f" ({doc.get('reason', 'bound or tolerance not met')})"))
    return status


def _rescale_affine(cfg, kval):
    """Rescale ``A`` so the analytic power-modular constant equals ``kval``."""
    T, rho = build(cfg)
    if T.affine is None:
        raise UsageError("sweeping k needs an affine problem")
    try:
        p = power_exponent(rho)
    except PreconditionError as exc:
        raise UsageError("sweeping k needs a power modular") from exc
    c, l = float(cfg.constants["c"]), float(cfg.constants["l"])
    A, b = T.affine
    cur = affine_contraction_constant(A, c, l, p, rho.weights)
    if cur <= 0:
        raise UsageError("cannot rescale a zero matrix")
    A2 = A * (kval / cur) ** (1.0 / p)
    prob = AffineMapSpec(A2, b).to_dict()
    consts = dict(cfg.constants, k=float(kval))
    return cfg.replace(problem=prob, constants=consts)


def _sweep_config(cfg, param, value):
    if param == "k":
        cfg.require("c", "l")
        return _rescale_affine(cfg, value)
    if param in ("c", "l", "beta"):
        return cfg.replace(constants=dict(cfg.constants, **{param: float(value)}))
    if param == "schedule_length":
        sched = dict(cfg.schedule or {"rule": "harmonic"})
        if sched.get("rule", "explicit") == "explicit":
            raise UsageError("schedule_length sweeps need a rule-based schedule")
        sched["length"] = int(value)
        return cfg.replace(schedule=sched)
    prob = cfg.resolve(cfg.problem)
    prob = serialize.read_json(prob) if not isinstance(prob, dict) else dict(prob)
    if prob.get("type") != "volterra":
        raise UsageError("grid_size sweeps need a Volterra problem")
    prob["grid_size"] = int(value)
    return cfg.replace(problem=prob)


def cmd_sweep(cfg, out, param, values):
    if param not in SWEEP_PARAMS:
        raise UsageError(f"unknown sweep parameter {param!r}; expected one of {SWEEP_PARAMS}")
    if not values:
        raise UsageError("sweep needs at least one value")
    rows_dir = out / "sweep_rows"
    rows_dir.mkdir(exist_ok=True)
    lines = ["value,iterations,residual,compliant,converged,oracle_distance,status"]
    failed = False
    for i, v in enumerate(values):
        row_cfg = _sweep_config(cfg, param, v)
        status, doc, trace = _solve_once(row_cfg)
        serialize.write_trace(rows_dir / f"row_{i:03d}.csv", trace)
        failed |= status != 0
        dist = doc.get("oracle_distance")
        lines.append(",".join([
            repr(float(v)),
            str(doc.get("iterations", -1)),
            repr(float(doc.get("residual", math.nan))),
            str(bool(doc.get("compliant", False))).lower(),
            str(bool(doc.get("converged", False))).lower(),
            repr(float(dist)) if dist is not None else "nan",
            "ok" if status == 0 else "failed",
        ]))
        print(lines[-1])
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    return 1 if failed else 0


def summarize_trace(data):
    """Compliance, worst row and log-residual slope of a parsed trace."""
    res, bnd = data["residual"], data["bound"]
    idx = data.get("index", data.get("n", np.arange(len(res))))
    n = len(res)
    ok = res <= bnd * (1.0 + 1e-9)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bnd > 0, res / bnd, np.where(res > 0, np.inf, 0.0))
    worst = int(np.argmax(ratio)) if n else None
    summary = {
        "rows": n,
        "within_bound": int(ok.sum()),
        "percent": 100.0 * ok.sum() / n if n else 100.0,
        "violations": [int(idx[i]) for i in np.flatnonzero(~ok)],
        "worst_row": int(idx[worst]) if worst is not None else None,
        "worst_margin": float(res[worst] - bnd[worst]) if worst is not None else None,
        "worst_ratio": float(ratio[worst]) if worst is not None else None,
        "slope": None,
        "bound_slope": None,
    }
    live = (res > 0) & (res > res.max() * 1e-10) if n else np.zeros(0, bool)
    if live.sum() >= 3:
        summary["slope"] = float(np.polyfit(idx[live], np.log(res[live]), 1)[0])
    blive = (bnd > 0) & np.isfinite(bnd)
    if blive.sum() >= 3:
        summary["bound_slope"] = float(np.polyfit(idx[blive], np.log(bnd[blive]), 1)[0])
    return summary


def cmd_report(paths):
    status = 0
    for p in paths:
        s = summarize_trace(serialize.read_trace(p))
        print(f"{p}: {s['percent']:g}% rows within bound ({s['within_bound']}/{s['rows']})")
        if s["violations"]:
            status = 1
            print(f"  violated rows: {s['violations']}")
        if s["worst_row"] is not None:
            print(f"  worst margin at row {s['worst_row']}: residual - bound = {s['worst_margin']:.6g}"
                  f" (ratio {s['worst_ratio']:.6g})")
        if s["slope"] is not None:
            line = f"  log-residual slope {s['slope']:.6g} per step"
            if s["bound_slope"] is not None:
                line += f" vs log k = {s['bound_slope']:.6g}"
            print(line)
    return status


def _parse_values(text):
    if text is None or not text.strip():
        return []
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"--values must be comma-separated numbers: {exc}") from exc


def make_parser():
    ap = argparse.ArgumentParser(prog="modfix", description="Certify and solve modular fixed-point problems.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help=f"output directory (default: ${ENV_OUT} or ./modfix_out)")
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iter", type=int)

    common(sub.add_parser("certify", help="run the requested certifications"))
    common(sub.add_parser("solve", help="run the configured solver and write result and trace"))
    sw = sub.add_parser("sweep", help="one solve per parameter value")
    common(sw)
    sw.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    sw.add_argument("--values", required=True, help="comma-separated values")
    rp = sub.add_parser("report", help="summarise CSV traces")
    rp.add_argument("traces", nargs="+")
    return ap


def main(argv=None):
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        if args.command == "report":
            return cmd_report(args.traces)
        cfg = RunConfig.from_file(args.config)
        over = {}
        if args.seed is not None:
            over["seed"] = args.seed
        if args.tol is not None:
            over["tol"] = args.tol
        if args.max_iter is not None:
            over["max_iter"] = args.max_iter
        if over:
            cfg = cfg.replace(**over)
        out = _output_dir(cfg, args.out)
        if args.command == "certify":
            return cmd_certify(cfg, out)
        if args.command == "solve":
            return cmd_solve(cfg, out)
        return cmd_sweep(cfg, out, args.param, _parse_values(args.values))
    except (PreconditionError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ModfixError as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
