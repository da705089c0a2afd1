"""Command line interface: ``qcqp-exact <subcommand> ...``.

Exit status is 0 on success, 1 on a domain error (a JSON record with ``error``
and ``message`` goes to stderr) and 2 on a usage error (also JSON on stderr).
Set ``QCQP_EXACT_LOG`` to a logging level name for diagnostics.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import certify, dual, experiments, oracle, structured
from .errors import QcqpError
from .model import EpigraphPoint, load_instance

log = logging.getLogger("qcqp_exact")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _clean(o):
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, np.ndarray):
        return _clean(o.tolist())
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        f = float(o)
        # JSON has no infinities; spell them as strings
        return f if math.isfinite(f) else ("inf" if f > 0 else "-inf" if f < 0 else "nan")
    if hasattr(o, "value") and hasattr(o, "name"):  # enums
        return o.value
    return o


def _emit(args, payload=None, text=None):
    if text is None:
        text = json.dumps(_clean(payload), indent=2) + "\n"
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _opts(args) -> dual.SolverOptions:
    if getattr(args, "tol", None) is None:
        return dual.DEFAULT_OPTIONS
    return dual.SolverOptions(membership_tol=args.tol)


def _point(args, inst) -> EpigraphPoint:
    x = np.asarray(args.x, dtype=float)
    if x.shape != (inst.n,):
        raise UsageError(f"--x needs {inst.n} values")
    return EpigraphPoint(x, float(args.t))


# --- handlers --------------------------------------------------------------------


def cmd_solve(args):
    inst = load_instance(args.instance)
    sol = dual.solve_sdp(inst, _opts(args))
    _emit(args, sol.to_dict())


def cmd_membership(args):
    inst = load_instance(args.instance)
    opts = _opts(args)
    p = _point(args, inst)
    hr = dual.epigraph_height_detail(inst, p.x, opts)
    m = dual.classify(2.0 * p.t, hr.tau, opts.membership_tol)
    _emit(args, {"tau": hr.tau, "two_t": 2.0 * p.t, "membership": m, "status": hr.status})


def cmd_certify_point(args):
    inst = load_instance(args.instance)
    c = certify.certify_convex_hull_point(inst, _point(args, inst), _opts(args))
    _emit(args, c.to_dict())


def cmd_certify_hull(args):
    inst = load_instance(args.instance)
    lo, hi = _box(args, inst.n)
    c = certify.certify_convex_hull(inst, lo, hi, args.samples, args.seed, _opts(args))
    _emit(args, c.to_dict())


def cmd_certify_objective(args):
    inst = load_instance(args.instance)
    sol = dual.solve_sdp(inst, _opts(args))
    out = {"solution": sol.to_dict(), "dual_interior": certify.dual_interior_certificate(inst, sol, args.delta).to_dict()}
    if sol.status is dual.Status.CONVERGED:
        out["kernel_obstruction"] = certify.kernel_obstruction(inst, sol.gamma_star, rank_tol=1e-6).to_dict()
    _emit(args, out)


def _box(args, n):
    lo = np.asarray(args.lower, dtype=float)
    hi = np.asarray(args.upper, dtype=float)
    if lo.shape == (1,):
        lo = np.full(n, lo[0])
    if hi.shape == (1,):
        hi = np.full(n, hi[0])
    if lo.shape != (n,) or hi.shape != (n,):
        raise UsageError(f"--lower/--upper need 1 or {n} values")
    return lo, hi


def cmd_polyhedral(args):
    inst = load_instance(args.instance)
    gens = [np.asarray(g, dtype=float) for g in args.generator]
    samples = []
    for pt in args.point or []:
        if len(pt) != inst.n + 1:
            raise UsageError(f"--point needs {inst.n + 1} values (x then t)")
        samples.append(EpigraphPoint(np.asarray(pt[:-1], dtype=float), pt[-1]))
    if args.samples:
        lo, hi = _box(args, inst.n)
        rng = np.random.default_rng(args.seed)
        for _ in range(args.samples):
            x = rng.uniform(lo, hi)
            tau = dual.epigraph_height(inst, x)
            if math.isfinite(tau):
                samples.append(EpigraphPoint(x, 0.5 * tau))
    c = certify.polyhedral_certify(inst, gens, samples, opts=_opts(args))
    _emit(args, c.to_dict())


def cmd_partition(args):
    pi = structured.PartitionInstance(np.asarray(args.a, dtype=float))
    out = {"a": pi.a, "opt_sdp": structured.partition_opt_sdp(pi), "balanced": structured.partition_balanced(pi)}
    if pi.n <= 24:
        out["opt"] = oracle.partition_enumerate(pi)
    if args.x is not None:
        x = np.asarray(args.x, dtype=float)
        out["tau"] = structured.partition_tau(pi, x)
        if args.t is not None:
            out["ssdp"] = structured.partition_ssdp_membership(pi, x, args.t)
    if args.witness:
        w = structured.partition_nonexactness_witness(pi)
        out["witness"] = {"x": w.x, "t": w.t, "second_difference": w.second_difference}
    if args.solve:
        out["solver_opt_sdp"] = dual.solve_sdp(structured.partition_instance(pi)).opt_sdp
    _emit(args, out)


def cmd_mixed_binary(args):
    x1, x2, t = args.point
    out = {
        "ssdp": structured.mixed_binary_ssdp(x1, x2, t),
        "perspective": structured.mixed_binary_perspective(x1, x2, t),
        "soc_margin": structured.mixed_binary_soc_margin(x1, x2, t),
    }
    case = structured.mixed_binary_face_case(x1, x2, t)
    out["face_case"] = case
    out["boundary"] = case in ("apex", "ray")
    if case == "ray":
        out["rounding_dim"] = structured.mixed_binary_rounding_space(x1, x2, t).shape[1]
    elif case == "interior":
        out["rounding_dim"] = 3
    _emit(args, out)


def cmd_qmp(args):
    rng = np.random.default_rng(args.seed)
    counts = {"verified": 0, "unverified": 0, "trivial": 0, "face_failed": 0, "skipped": 0}
    for _ in range(args.instances):
        inst = structured.qmp_build(structured.random_qmp(args.r, args.k, args.m, rng))
        for _ in range(args.points):
            x = rng.standard_normal(inst.n)
            tau = dual.epigraph_height(inst, x)
            p = EpigraphPoint(x, 0.5 * tau)
            if not math.isfinite(tau) or certify.in_epigraph(inst, p):
                counts["skipped"] += 1
                continue
            try:
                face = certify.face_multiplier(inst, p)
            except QcqpError:
                counts["face_failed"] += 1
                continue
            d = structured.qmp_rounding_direction(inst, p, face)
            if d is None:
                counts["trivial"] += 1
            elif certify.verify_rounding_direction(inst, p, d) is None:
                counts["unverified"] += 1
            else:
                counts["verified"] += 1
    _emit(args, {"r": args.r, "k": args.k, "m": args.m, "seed": args.seed, "counts": counts})


def _report_out(args, rep):
    if args.format == "csv":
        _emit(args, text=rep.to_csv(timings=args.timings))
        sys.stderr.write(json.dumps(_clean(rep.summary())) + "\n")
    else:
        _emit(args, text=rep.to_json() + "\n")


def cmd_experiment(args):
    if args.kind == "edm":
        rep = experiments.edm_exactness_experiment(args.n, args.m, args.trials, args.seed, args.delta, args.workers)
    elif args.kind == "semirandom":
        rep = experiments.semirandom_experiment(args.n[0], args.m, args.eps, args.trials, args.seed, args.workers)
    else:
        rep = experiments.concentration_sweep(args.n[0], args.m, args.radii, args.directions, args.seed)
    _report_out(args, rep)


def cmd_oracle(args):
    inst = load_instance(args.instance)
    lo, hi = _box(args, inst.n)
    spec = oracle.GridSpec(lo, hi, args.points, args.tol)
    res = oracle.grid_opt(inst, spec, seed=args.seed)
    out = {"value": res.value, "argmin": res.argmin, "tol": res.tol, "label": res.label,
           "error_bound": oracle.grid_error_bound(inst, spec)}
    if args.format == "csv":
        arg = "" if res.argmin is None else " ".join(experiments.fmt(v) for v in res.argmin)
        text = "value,argmin,tol,label\n" + ",".join([experiments.fmt(res.value), arg, experiments.fmt(res.tol), res.label]) + "\n"
        _emit(args, text=text)
    else:
        _emit(args, out)


def cmd_phi(args):
    out = [{"r": r, "phi": experiments.phi(r), **({"quadrature": experiments.phi_quadrature(r)} if args.quadrature else {})} for r in args.r]
    _emit(args, out)


# --- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qcqp-exact", description="Exactness tools for SDP relaxations of QCQPs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, instance=True):
        if instance:
            sp.add_argument("--instance", required=True, help="instance JSON file")
        sp.add_argument("--tol", type=float, default=None, help="membership tolerance")
        sp.add_argument("--out", help="write output here instead of stdout")
        return sp

    def point(sp):
        sp.add_argument("--x", type=float, nargs="+", required=True)
        sp.add_argument("--t", type=float, required=True)

    def box(sp, required=True):
        sp.add_argument("--lower", type=float, nargs="+", required=required)
        sp.add_argument("--upper", type=float, nargs="+", required=required)

    sp = common(sub.add_parser("solve", help="solve the SDP relaxation"))
    sp.set_defaults(func=cmd_solve)

    sp = common(sub.add_parser("membership", help="classify (x, t) against the relaxation epigraph"))
    point(sp)
    sp.set_defaults(func=cmd_membership)

    sp = common(sub.add_parser("certify-point", help="convex hull test at one point"))
    point(sp)
    sp.set_defaults(func=cmd_certify_point)

    sp = common(sub.add_parser("certify-hull", help="convex hull test on sampled boundary points"))
    box(sp)
    sp.add_argument("--samples", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_certify_hull)

    sp = common(sub.add_parser("certify-objective", help="dual-interior and kernel certificates"))
    sp.add_argument("--delta", type=float, default=1e-6)
    sp.set_defaults(func=cmd_certify_objective)

    sp = common(sub.add_parser("polyhedral", help="convex hull test with user generators"))
    sp.add_argument("--generator", type=float, nargs="+", action="append", required=True,
                    help="generator (gamma_obj, gamma_1, ...); repeat the flag")
    sp.add_argument("--point", type=float, nargs="+", action="append", help="sample x_1 .. x_n t; repeatable")
    box(sp, required=False)
    sp.add_argument("--samples", type=int, default=0, help="boundary samples drawn from the box")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_polyhedral)

    sp = common(sub.add_parser("partition", help="partition QCQP closed forms"), instance=False)
    sp.add_argument("--a", type=float, nargs="+", required=True)
    sp.add_argument("--x", type=float, nargs="+")
    sp.add_argument("--t", type=float)
    sp.add_argument("--witness", action="store_true")
    sp.add_argument("--solve", action="store_true", help="also run the barrier solver")
    sp.set_defaults(func=cmd_partition)

    sp = common(sub.add_parser("mixed-binary", help="mixed-binary closed forms"), instance=False)
    sp.add_argument("--point", type=float, nargs=3, required=True, metavar=("X1", "X2", "T"))
    sp.set_defaults(func=cmd_mixed_binary)

    sp = common(sub.add_parser("qmp", help="rounding directions on random QMPs"), instance=False)
    sp.add_argument("--r", type=int, default=3)
    sp.add_argument("--k", type=int, default=3)
    sp.add_argument("--m", type=int, default=2)
    sp.add_argument("--instances", type=int, default=5)
    sp.add_argument("--points", type=int, default=5)
    sp.add_argument("--seed", type=int, required=True)
    sp.set_defaults(func=cmd_qmp)

    sp = common(sub.add_parser("experiment", help="random-model experiments"), instance=False)
    sp.add_argument("kind", choices=["edm", "semirandom", "concentration"])
    sp.add_argument("--n", type=int, nargs="+", required=True)
    sp.add_argument("--m", type=int, default=2)
    sp.add_argument("--trials", type=int, default=50)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--delta", type=float, default=1e-6)
    sp.add_argument("--eps", type=float, default=0.25)
    sp.add_argument("--radii", type=float, nargs="+", default=[0.3, 0.5, 0.8])
    sp.add_argument("--directions", type=int, default=20)
    sp.add_argument("--format", choices=["json", "csv"], default="csv")
    sp.add_argument("--timings", action="store_true", help="include the wall-clock column in CSV")
    sp.set_defaults(func=cmd_experiment)

    sp = common(sub.add_parser("oracle", help="grid search ground truth"))
    box(sp)
    sp.add_argument("--points", type=int, default=101)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    sp.set_defaults(func=cmd_oracle)

    sp = common(sub.add_parser("phi", help="sphere-cap limit function"), instance=False)
    sp.add_argument("--r", type=float, nargs="+", required=True)
    sp.add_argument("--quadrature", action="store_true")
    sp.set_defaults(func=cmd_phi)
    return p


def _fail(code: int, record: dict) -> int:
    sys.stderr.write(json.dumps(record) + "\n")
    return code


def run(argv=None) -> int:
    level = os.environ.get("QCQP_EXACT_LOG")
    if level:
        logging.basicConfig(level=level.upper(), stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except UsageError as exc:
        return _fail(2, {"error": "usage", "message": str(exc)})
    except QcqpError as exc:
        return _fail(1, exc.to_dict())
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(1, {"error": "io_error", "message": str(exc)})
    except ValueError as exc:
        return _fail(1, {"error": "invalid_input", "message": str(exc)})
    return 0


def main() -> None:
    sys.exit(run())
