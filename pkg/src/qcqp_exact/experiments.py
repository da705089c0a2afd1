"""Random and semi-random QCQP experiments.

NGOE matrices have independent ``N(0, 1/2n)`` diagonal and ``N(0, 1/4n)``
off-diagonal entries, so their spectrum fills ``[-1, 1]`` with the semicircle
law.  The experiments check spectral concentration of ``I + sum gamma_i A_i``
on spheres of multipliers, the rate at which the dual optimum of random
minimum-norm problems is attained at a definite aggregation, and the
near-feasible rounding that underlies almost exactness in the semi-random
model.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from threadpoolctl import threadpool_limits

from . import linalg
from .certify import Verdict, dual_interior_certificate
from .dual import DEFAULT_OPTIONS, SolverOptions, solve_sdp
from .errors import QcqpError, SubspaceTooSmall
from .model import QcqpInstance, QuadraticForm, Sense, make_instance
from .rng import stream

CSV_VERSION = 1


def fmt(x) -> str:
    """17 significant digits, the repr used in every report."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


# --- sampling --------------------------------------------------------------------


def sample_ngoe(n: int, rng: np.random.Generator, method: str = "direct") -> np.ndarray:
    """Draw from NGOE(n).

    ``method="direct"`` fills the upper triangle with independent normals of
    the right variance; ``method="symmetrize"`` uses ``(M + M^T) / 2`` for a
    standard Gaussian ``M`` scaled by ``1 / sqrt(2n)``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if method == "symmetrize":
        M = rng.standard_normal((n, n)) / math.sqrt(2.0 * n)
        return 0.5 * (M + M.T)
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    A = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    A[iu] = rng.standard_normal(len(iu[0])) / math.sqrt(4.0 * n)
    A = A + A.T
    A[np.diag_indices(n)] = rng.standard_normal(n) / math.sqrt(2.0 * n)
    return A


def gen_edm_instance(n: int, m: int, rng: np.random.Generator) -> QcqpInstance:
    """Minimum-norm point on ``m`` random quadrics (all equalities)."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    cons = []
    for _ in range(m):
        A = sample_ngoe(n, rng)
        b = rng.standard_normal(n) / math.sqrt(n)
        c = float(rng.standard_normal())
        cons.append((A, b, c, "eq"))
    return make_instance((np.eye(n), np.zeros(n), 0.0), cons, name=f"edm-n{n}-m{m}")


def default_adversary(A_list):
    """Stress-case linear and constant terms: ``b`` along the top eigenvector of
    each quadratic term, ``c = 1``."""
    bs, cs = [], []
    for A in A_list:
        _, V = np.linalg.eigh(A)
        v = V[:, -1]
        # fix the sign so the choice is a deterministic function of A
        v = v if v[np.argmax(np.abs(v))] > 0 else -v
        bs.append(v)
        cs.append(1.0)
    return bs, cs


def gen_semirandom_instance(n: int, m: int, rng: np.random.Generator, b_list=None, c_list=None) -> QcqpInstance:
    """Semi-random instance: NGOE quadratic terms, supplied linear/constant terms.

    ``b_list`` and ``c_list`` hold ``m + 1`` entries, objective first.  When
    omitted, :func:`default_adversary` picks them after the quadratic terms are
    drawn.  The unit-ball constraint is appended as an inequality.
    """
    A_list = [sample_ngoe(n, rng) for _ in range(m + 1)]
    if b_list is None and c_list is None:
        b_list, c_list = default_adversary(A_list)
    if b_list is None or c_list is None:
        raise ValueError("supply both b_list and c_list or neither")
    if len(b_list) != m + 1 or len(c_list) != m + 1:
        raise ValueError(f"expected {m + 1} linear and constant terms")
    bs = [np.array(b, dtype=float) for b in b_list]
    if any(b.shape != (n,) for b in bs):
        raise ValueError(f"linear terms must have length {n}")
    cons = [(np.eye(n), np.zeros(n), -1.0, "le")]
    cons += [(A_list[i + 1], bs[i + 1], float(c_list[i + 1]), "eq") for i in range(m)]
    return make_instance((A_list[0], bs[0], float(c_list[0])), cons, name=f"semirandom-n{n}-m{m}")


def phi(r: float) -> float:
    """Sphere-cap limit ``2 (sqrt(1 - r^2) - 1)``."""
    if not 0.0 <= r < 1.0:
        raise ValueError("r must lie in [0, 1)")
    return 2.0 * (math.sqrt(1.0 - r * r) - 1.0)


def phi_quadrature(r: float) -> float:
    """``-r^2 * integral of 1/(1 + r s)`` against the semicircle law on [-1, 1]."""
    val, _ = integrate.quad(lambda s: math.sqrt(1.0 - s * s) / (1.0 + r * s), -1.0, 1.0, epsabs=1e-13, epsrel=1e-13)
    return -r * r * (2.0 / math.pi) * val


def instance_hash(inst: QcqpInstance) -> str:
    h = hashlib.sha256()
    for arr in (inst.A_all, inst.b_all, inst.c_all):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()[:16]


# --- reports ---------------------------------------------------------------------


@dataclass
class ExperimentReport:
    """Per-trial records plus aggregates.

    ``columns`` fixes the CSV column order; aggregates are recomputed from the
    records by the experiment that built the report.
    """

    kind: str
    config: dict
    columns: list
    records: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)

    def to_csv(self, timings: bool = False) -> str:
        cols = [c for c in self.columns if timings or c != "millis"]
        buf = io.StringIO()
        buf.write(f"# qcqp-exact {self.kind} csv v{CSV_VERSION}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for rec in self.records:
            w.writerow([fmt(rec.get(c, "")) for c in cols])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"kind": self.kind, "config": self.config, "trials": len(self.records), "aggregates": self.aggregates}

    def to_json(self) -> str:
        def enc(o):
            if isinstance(o, (np.floating, np.integer)):
                return o.item()
            raise TypeError(type(o))

        return json.dumps({**self.summary(), "records": self.records}, default=enc, indent=2)


def _run_tasks(fn, tasks, workers: int):
    """Ordered map; each task pins BLAS to one thread so results are identical
    for any worker count."""
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


# --- concentration ---------------------------------------------------------------


def _concentration_task(task):
    n, m, radii, k, seed = task
    with threadpool_limits(1):
        rng = stream(seed, 0)
        inst = gen_edm_instance(n, m, rng)
        As, bs = inst.A_all[1:], inst.b_all[1:]
        out = []
        for ri, r in enumerate(radii):
            drng = stream(seed, 1 + ri)
            for j in range(k):
                u = drng.standard_normal(m)
                g = r * u / np.linalg.norm(u)
                A = np.eye(n) + np.tensordot(g, As, axes=1)
                b = g @ bs
                lam = float(linalg.lambda_min(A))
                cap = -float(b @ linalg.solve_pd(A, b)) if lam > 0 else -math.inf
                out.append(
                    {
                        "seed": seed, "n": n, "m": m, "r": float(r), "direction": j,
                        "lambda_min": lam, "lambda_dev": lam - (1.0 - r),
                        "cap": cap, "cap_dev": cap - phi(r),
                    }
                )
        return out


def concentration_sweep(n: int, m: int, radii, directions_per_radius: int, seed: int) -> ExperimentReport:
    """Spectral and sphere-cap concentration on one random EDM instance."""
    radii = [float(r) for r in radii]
    if any(not 0.0 <= r < 1.0 for r in radii):
        raise ValueError("radii must lie in [0, 1)")
    recs = _concentration_task((n, m, radii, directions_per_radius, seed))
    agg = {}
    for r in radii:
        sel = [x for x in recs if x["r"] == r]
        agg[f"{r:g}"] = {
            "max_abs_lambda_dev": max(abs(x["lambda_dev"]) for x in sel),
            "max_abs_cap_dev": max(abs(x["cap_dev"]) for x in sel),
            "phi": phi(r),
        }
    cfg = {"n": n, "m": m, "radii": radii, "directions_per_radius": directions_per_radius, "seed": seed}
    cols = ["seed", "n", "m", "r", "direction", "lambda_min", "lambda_dev", "cap", "cap_dev"]
    return ExperimentReport("concentration", cfg, cols, recs, agg)


# --- random EDM ------------------------------------------------------------------


def _edm_task(task):
    seed, trial, n, m, delta, feas_tol = task
    with threadpool_limits(1):
        rng = stream(seed, trial)
        inst = gen_edm_instance(n, m, rng)
        rec = {"seed": seed, "trial": trial, "n": n, "m": m, "hash": instance_hash(inst)}
        t0 = time.perf_counter()
        try:
            sol = solve_sdp(inst)
            cert = dual_interior_certificate(inst, sol, delta, tol=feas_tol)
            res = cert.diagnostics.get("feasibility_residual", math.nan)
            gap = cert.diagnostics.get("objective_gap", math.nan)
            success = cert.verdict is Verdict.CERTIFIED and res <= feas_tol and gap <= feas_tol * (1.0 + abs(sol.opt_sdp))
            rec.update(
                opt_sdp=sol.opt_sdp, verdict=cert.verdict.value, margin=sol.lambda_min_at_star,
                residual=res, objective_gap=gap, success=bool(success), error="",
            )
        except QcqpError as exc:
            rec.update(opt_sdp=math.nan, verdict="error", margin=math.nan, residual=math.nan,
                       objective_gap=math.nan, success=False, error=exc.code)
        rec["millis"] = 1e3 * (time.perf_counter() - t0)
        return rec


def edm_exactness_experiment(
    n_list, m: int, trials: int, seed: int, delta: float = 1e-6, workers: int = 1, feas_tol: float = 1e-5
) -> ExperimentReport:
    """Fraction of random EDM instances whose relaxation optimum is attained at
    a definite aggregation (so the SDP optimizer is the QCQP optimizer).

    Trial ``j`` at the ``i``-th size draws from stream ``i * trials + j``.
    """
    n_list = [int(n) for n in n_list]
    tasks = [(seed, i * trials + j, n, m, delta, feas_tol) for i, n in enumerate(n_list) for j in range(trials)]
    recs = _run_tasks(_edm_task, tasks, workers)
    agg = {}
    for n in n_list:
        sel = [r for r in recs if r["n"] == n]
        agg[str(n)] = {
            "success_fraction": sum(r["success"] for r in sel) / len(sel),
            "mean_margin": float(np.nanmean([r["margin"] for r in sel])),
        }
    cfg = {"n_list": n_list, "m": m, "trials": trials, "seed": seed, "delta": delta}
    cols = ["seed", "trial", "n", "m", "hash", "opt_sdp", "verdict", "margin", "residual", "success", "error", "millis"]
    return ExperimentReport("edm", cfg, cols, recs, agg)


# --- semi-random -----------------------------------------------------------------


@dataclass(frozen=True)
class SemirandomResult:
    x_tilde: np.ndarray
    residual_vector: np.ndarray  # q_i(x_tilde) for the m equalities
    obj_gap: float  # q_obj(x_tilde) - opt_sdp
    opt_sdp: float
    subspace_dim: int
    orthogonality: float


def semirandom_construction(inst: QcqpInstance, eps: float, opts: SolverOptions = DEFAULT_OPTIONS) -> SemirandomResult:
    """Near-feasible point built from the relaxation's saddle point.

    The relaxation optimizer ``x*`` and value ``2 t*`` give a normalized face
    direction ``f``; unit vectors in the eigenspace of ``A(f_obj, f, 1)`` with
    eigenvalues in ``[-eps, eps]`` that are orthogonal to every constraint
    gradient at ``x*`` and to ``x*`` itself are added with the step
    ``sqrt(1 - ||x*||^2)``.

    Raises
    ------
    SubspaceTooSmall
        If the eigenspace has dimension below ``m + 3``.
    """
    if inst.m_I != 1 or not np.allclose(inst.A_all[1], np.eye(inst.n)) or inst.c_all[1] != -1.0:
        raise ValueError("expected a semi-random instance with the unit-ball constraint first")
    sol = solve_sdp(inst, opts)
    if not math.isfinite(sol.opt_sdp):
        raise QcqpError("relaxation is infeasible or unbounded")
    x = sol.x_star if sol.x_star is not None else sol.x_primal
    t2 = sol.opt_sdp
    q = inst.evaluate_all(x)
    eq = np.arange(2, inst.m + 1)  # equality constraints in the full vector
    r = np.concatenate(([q[0] - t2], q[eq]))
    tau = float(np.linalg.norm(r))
    m = len(eq)
    if tau <= 1e-12:
        return SemirandomResult(x.copy(), q[eq].copy(), float(q[0] - t2), t2, inst.n, 0.0)
    f = r / tau
    M = np.eye(inst.n) + f[0] * inst.A_all[0] + np.tensordot(f[1:], inst.A_all[eq], axes=1)
    w_all, V = np.linalg.eigh(M)
    W = V[:, np.abs(w_all) <= eps]
    if W.shape[1] < m + 3:
        raise SubspaceTooSmall(f"eigenspace has dimension {W.shape[1]} < {m + 3}")
    G = np.einsum("kij,j->ki", inst.A_all, x) + inst.b_all  # row k: A_k x + b_k, ball row is x
    Z = linalg.nullspace(G @ W, rel_tol=1e-12)
    w = W @ Z[:, 0]
    w /= np.linalg.norm(w)
    alpha = math.sqrt(max(0.0, 1.0 - float(x @ x)))
    xt = x + alpha * w
    qt = inst.evaluate_all(xt)
    orth = float(np.max(np.abs(G @ w)))
    return SemirandomResult(xt, qt[eq], float(qt[0] - t2), t2, W.shape[1], orth)


def _semirandom_task(task):
    seed, trial, n, m, eps = task
    with threadpool_limits(1):
        rng = stream(seed, trial)
        inst = gen_semirandom_instance(n, m, rng)
        rec = {"seed": seed, "trial": trial, "n": n, "m": m, "eps": eps, "hash": instance_hash(inst)}
        t0 = time.perf_counter()
        try:
            res = semirandom_construction(inst, eps)
            mx = float(np.max(np.abs(res.residual_vector)))
            rec.update(
                opt_sdp=res.opt_sdp, max_residual=mx, obj_gap=res.obj_gap,
                norm=float(np.linalg.norm(res.x_tilde)), subspace_dim=res.subspace_dim,
                constant=max(mx, res.obj_gap) / math.sqrt(eps), orthogonality=res.orthogonality, error="",
            )
        except QcqpError as exc:
            rec.update(opt_sdp=math.nan, max_residual=math.nan, obj_gap=math.nan, norm=math.nan,
                       subspace_dim=0, constant=math.nan, orthogonality=math.nan, error=exc.code)
        rec["millis"] = 1e3 * (time.perf_counter() - t0)
        return rec


def semirandom_experiment(n: int, m: int, eps: float, trials: int, seed: int, workers: int = 1) -> ExperimentReport:
    """Run the semi-random construction with the default adversary."""
    recs = _run_tasks(_semirandom_task, [(seed, j, n, m, eps) for j in range(trials)], workers)
    ok = [r for r in recs if not r["error"]]
    agg = {
        "succeeded": len(ok),
        "max_residual": max((r["max_residual"] for r in ok), default=math.nan),
        "max_obj_gap": max((r["obj_gap"] for r in ok), default=math.nan),
        "max_norm": max((r["norm"] for r in ok), default=math.nan),
        "measured_constant": max((r["constant"] for r in ok), default=math.nan),
    }
    cfg = {"n": n, "m": m, "eps": eps, "trials": trials, "seed": seed}
    cols = ["seed", "trial", "n", "m", "eps", "hash", "opt_sdp", "max_residual", "obj_gap", "norm",
            "subspace_dim", "constant", "orthogonality", "error", "millis"]
    return ExperimentReport("semirandom", cfg, cols, recs, agg)
