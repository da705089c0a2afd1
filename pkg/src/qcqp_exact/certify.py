"""Exactness certificates.

Convex hull exactness is decided point by point through rounding directions:
a boundary point of the relaxation's epigraph that is not in the epigraph
itself is harmless exactly when a segment through it stays in the relaxation.
The subspace of such directions contains

    {(x', t') : x' in ker A[f],  <A[eta] x + b[eta], x'> - eta_obj t' = 0
                for all eta in G^perp}

where ``(1, f)`` is a relative-interior point of the optimal multiplier face
and ``G^perp`` is the orthogonal complement of the minimal polar face holding
the residual ``q(x) - 2t e_obj``.  ``G^perp`` is known exactly when the
multiplier cone is second-order (a one-dimensional polar face gives
``G^perp = residual^perp``) or polyhedral (generators on the exposed face).
Otherwise only the span of the optimal face is computable; it is contained in
``G^perp`` so the resulting space is a superset, and the verdict is reported
as inconclusive.

Objective and optimizer exactness use the dual side: a definite ``A[gamma*]``
at the dual optimum, kernel obstructions, and the steepness inequality.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import linalg
from .dual import (
    DEFAULT_OPTIONS,
    DualSolution,
    Membership,
    SolverOptions,
    Status,
    classify,
    epigraph_height,
    epigraph_height_detail,
)
from .errors import (
    FaceExtractionFailed,
    GeneratorNotInGamma,
    NotInGammaP,
    NotInSsdp,
    NotOnBoundary,
    NotStrictlyFeasible,
)
from .model import (
    EpigraphPoint,
    Multiplier,
    QcqpInstance,
    as_full_weights,
    feasible,
    gamma_membership,
    residual,
)


class Verdict(str, enum.Enum):
    CERTIFIED = "certified"
    REFUTED = "refuted"
    INCONCLUSIVE = "inconclusive"


class Kind(str, enum.Enum):
    CONVEX_HULL_POINT = "convex_hull_point"
    CONVEX_HULL = "convex_hull"
    DUAL_INTERIOR = "dual_interior"
    KERNEL_OBSTRUCTION = "kernel_obstruction"
    POLYHEDRAL = "polyhedral"
    STEEPNESS = "steepness"


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, enum.Enum):
        return v.value
    if isinstance(v, dict):
        return {k: _jsonable(w) for k, w in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(w) for w in v]
    return v


@dataclass(frozen=True)
class Certificate:
    verdict: Verdict
    kind: Kind
    witness: dict | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.verdict is Verdict.CERTIFIED

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "kind": self.kind.value,
            "witness": _jsonable(self.witness),
            "diagnostics": _jsonable(self.diagnostics),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


class FaceMode(str, enum.Enum):
    SOC = "soc"
    POLYHEDRAL = "polyhedral"
    RELINT = "relint"


@dataclass(frozen=True)
class FaceDescription:
    """Optimal multiplier face at a boundary point.

    Attributes
    ----------
    mode : FaceMode
    f : ndarray
        Projective multiplier near the relative interior of the optimal face.
    residual : ndarray
        ``q(x) - 2 t e_obj``.
    eta_basis : ndarray, shape (1 + m, d)
        Columns span the multipliers used in the linear rounding equations:
        ``G^perp`` in exact modes, the span of the optimal face in relint mode.
    exact : bool
        Whether ``eta_basis`` spans ``G^perp`` exactly.
    primal_slack : ndarray or None
        ``mu A[f]^{-1}`` from the barrier, an estimate of the lifted primal part.
    generators : ndarray or None
        Active generators (rows) in polyhedral mode.
    """

    mode: FaceMode
    f: np.ndarray
    residual: np.ndarray
    eta_basis: np.ndarray
    exact: bool
    primal_slack: np.ndarray | None = None
    generators: np.ndarray | None = None


@dataclass(frozen=True)
class RoundingSpace:
    basis: np.ndarray  # shape (n + 1, d), orthonormal columns
    relaxed: bool
    kernel_dim: int

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def _orth_complement(v: np.ndarray) -> np.ndarray:
    """Orthonormal basis of ``v^perp`` as columns."""
    return linalg.nullspace(v.reshape(1, -1), rel_tol=1e-12)


def _relint_span(inst: QcqpInstance, f: np.ndarray, ell: np.ndarray, rank_tol: float) -> np.ndarray:
    """Span of the smallest face of the multiplier cone containing ``(1, f)``.

    Linear conditions: ``A(eta) V = 0`` for ``V = ker A[f]``, ``eta_i = 0`` on
    inequalities whose multiplier vanishes, and ``<eta, ell> = 0``.
    """
    full = np.concatenate(([1.0], f))
    A = np.tensordot(full, inst.A_all, axes=1)
    V = linalg.kernel_basis(A, rank_tol).vectors
    cols = []
    for j in range(inst.m + 1):
        cols.append((inst.A_all[j] @ V).reshape(-1))
    rows = [np.array(cols).T] if V.shape[1] else []
    scale = max(1.0, float(np.linalg.norm(full)))
    for i in range(inst.m_I):
        if f[i] <= 1e-6 * scale:
            e = np.zeros(inst.m + 1)
            e[1 + i] = 1.0
            rows.append(e[None, :])
    rows.append(ell[None, :] / max(1.0, float(np.linalg.norm(ell))))
    M = np.vstack(rows)
    return linalg.nullspace(M, rel_tol=1e-7)


def face_multiplier(
    inst: QcqpInstance,
    p: EpigraphPoint,
    opts: SolverOptions = DEFAULT_OPTIONS,
    rank_tol: float = 1e-6,
) -> FaceDescription:
    """Multiplier face at a boundary point of the relaxation's epigraph.

    The relative-interior point is the last barrier iterate of the support
    problem; the central path tends to the analytic center of the optimal face.

    Raises
    ------
    NotOnBoundary
        If ``2 t > tau(x)`` beyond the membership band.
    NotInSsdp
        If the point lies outside the relaxation.
    FaceExtractionFailed
        If the barrier did not converge.
    """
    hr = epigraph_height_detail(inst, p.x, opts)
    cls = classify(2.0 * p.t, hr.tau, opts.membership_tol)
    if cls is Membership.OUT:
        raise NotInSsdp(f"2t = {2 * p.t:.6g} is below tau(x) = {hr.tau:.6g}")
    if cls is Membership.IN:
        raise NotOnBoundary(f"2t = {2 * p.t:.6g} exceeds tau(x) = {hr.tau:.6g}")
    if hr.status is not Status.CONVERGED or hr.gamma is None:
        raise FaceExtractionFailed(f"support problem ended with status {hr.status.value}")
    f = hr.gamma
    ell = residual(inst, p)
    comp = float(np.concatenate(([1.0], f)) @ ell)
    if abs(comp) > 1e-6 * max(1.0, float(np.max(np.abs(ell))), abs(hr.tau)):
        raise FaceExtractionFailed(f"complementarity residual {comp:.3e} too large")
    if inst.cone == "soc":
        return FaceDescription(FaceMode.SOC, f, ell, _orth_complement(ell), True, hr.primal_slack)
    span = _relint_span(inst, f, ell, rank_tol)
    return FaceDescription(FaceMode.RELINT, f, ell, span, False, hr.primal_slack)


def residual_perp_face(face: FaceDescription) -> FaceDescription:
    """Same face with the rounding equations imposed for every multiplier
    orthogonal to the residual.  Since ``G^perp`` is contained in
    ``residual^perp`` the resulting space is contained in R'."""
    return replace(face, eta_basis=_orth_complement(face.residual), exact=True)


def rounding_system(inst: QcqpInstance, x: np.ndarray, V: np.ndarray, etas: np.ndarray) -> np.ndarray:
    """Rows ``[(A(eta) x + b(eta))^T V, -eta_obj]`` for each column ``eta`` of ``etas``."""
    rows = []
    for eta in etas.T:
        A = np.tensordot(eta, inst.A_all, axes=1)
        b = eta @ inst.b_all
        rows.append(np.concatenate(((A @ x + b) @ V, [-eta[0]])))
    return np.array(rows).reshape(len(rows), V.shape[1] + 1)


def rounding_space(
    inst: QcqpInstance,
    p: EpigraphPoint,
    face: FaceDescription,
    rank_tol: float = 1e-6,
) -> RoundingSpace:
    """Orthonormal basis of the rounding-direction space described by ``face``.

    ``relaxed`` is set when the face only carries the span of the optimal
    multiplier face, in which case the space may be too large.
    """
    full = np.concatenate(([1.0], face.f))
    A = np.tensordot(full, inst.A_all, axes=1)
    V = linalg.kernel_basis(A, rank_tol).vectors
    n = inst.n
    # unknowns (z, t') with x' = V z
    if face.eta_basis.shape[1]:
        M = rounding_system(inst, p.x, V, face.eta_basis)
        Z = linalg.nullspace(M, rel_tol=1e-7)
    else:
        Z = np.eye(V.shape[1] + 1)
    lift = np.zeros((n + 1, V.shape[1] + 1))
    lift[:n, : V.shape[1]] = V
    lift[n, V.shape[1]] = 1.0
    basis = linalg.orthonormalize(lift @ Z) if Z.shape[1] else np.zeros((n + 1, 0))
    return RoundingSpace(basis, relaxed=not face.exact, kernel_dim=V.shape[1])


def verify_rounding_direction(
    inst: QcqpInstance,
    p: EpigraphPoint,
    direction: np.ndarray,
    opts: SolverOptions = DEFAULT_OPTIONS,
    alpha0: float = 1.0,
    alpha_min: float = 1e-6,
) -> float | None:
    """Largest ``alpha`` in ``alpha0 * 2^-k`` with both ``(x, t) +- alpha (x', t')``
    in the relaxation, or ``None`` if ``alpha`` drops below ``alpha_min``."""
    d = np.asarray(direction, dtype=float)
    dx, dt = d[:-1], d[-1]
    alpha = alpha0
    while alpha >= alpha_min:
        ok = True
        for s in (1.0, -1.0):
            tau = epigraph_height(inst, p.x + s * alpha * dx, opts)
            if classify(2.0 * (p.t + s * alpha * dt), tau, opts.membership_tol) is Membership.OUT:
                ok = False
                break
        if ok:
            return alpha
        alpha *= 0.5
    return None


def in_epigraph(inst: QcqpInstance, p: EpigraphPoint, tol: float = 1e-7) -> bool:
    """Whether ``(x, t)`` is in the QCQP epigraph itself."""
    q0 = inst.evaluate_all(p.x)[0]
    return feasible(inst, p.x, tol) and q0 <= 2.0 * p.t + tol * (1.0 + abs(q0))


def certify_convex_hull_point(
    inst: QcqpInstance,
    p: EpigraphPoint,
    opts: SolverOptions = DEFAULT_OPTIONS,
) -> Certificate:
    """Decide whether ``(x, t)`` is a non-extreme point of the relaxation's epigraph.

    Certified points come with a rounding direction re-verified by membership
    solves in both directions.  Refuted is returned only in exact face modes
    when the rounding space is trivial.
    """
    kind = Kind.CONVEX_HULL_POINT
    if in_epigraph(inst, p):
        return Certificate(Verdict.CERTIFIED, kind, {"in_epigraph": True})
    hr = epigraph_height_detail(inst, p.x, opts)
    cls = classify(2.0 * p.t, hr.tau, opts.membership_tol)
    if cls is Membership.OUT:
        raise NotInSsdp(f"2t = {2 * p.t:.6g} is below tau(x) = {hr.tau:.6g}")
    if cls is Membership.IN:
        d = np.zeros(inst.n + 1)
        d[-1] = 1.0
        alpha = 0.5 * (2.0 * p.t - hr.tau)
        return Certificate(Verdict.CERTIFIED, kind, {"direction": d, "alpha": alpha}, {"tau": hr.tau})
    try:
        face = face_multiplier(inst, p, opts)
    except FaceExtractionFailed as exc:
        return Certificate(Verdict.INCONCLUSIVE, kind, None, {"reason": str(exc)})
    diag = {"tau": hr.tau, "mode": face.mode}
    if not face.exact:
        # Equations over all of residual^perp (which contains G^perp) cut out a
        # subspace of R', so a verified direction there is a sound certificate.
        sub = rounding_space(inst, p, residual_perp_face(face))
        diag["residual_perp_dim"] = sub.dim
        for j in range(sub.dim):
            d = sub.basis[:, j]
            alpha = verify_rounding_direction(inst, p, d, opts)
            if alpha is not None:
                witness = {"direction": d, "alpha": alpha, "basis": sub.basis}
                return Certificate(Verdict.CERTIFIED, kind, witness, dict(diag, subspace="residual_perp"))
    space = rounding_space(inst, p, face)
    diag.update(rounding_dim=space.dim, kernel_dim=space.kernel_dim)
    if space.dim == 0:
        if face.exact:
            return Certificate(Verdict.REFUTED, kind, {"face_multiplier": face.f}, diag)
        diag["reason"] = "relaxed rounding space is trivial; facial exposure not checked"
        return Certificate(Verdict.INCONCLUSIVE, kind, None, diag)
    for j in range(space.dim):
        d = space.basis[:, j]
        alpha = verify_rounding_direction(inst, p, d, opts)
        if alpha is not None:
            witness = {"direction": d, "alpha": alpha, "basis": space.basis}
            if face.exact:
                return Certificate(Verdict.CERTIFIED, kind, witness, diag)
            diag["reason"] = "direction verified, but the space was computed in relaxed mode"
            diag["verified_direction"] = d
            return Certificate(Verdict.INCONCLUSIVE, kind, None, diag)
    diag["reason"] = "no basis direction passed the two-sided membership check"
    return Certificate(Verdict.INCONCLUSIVE, kind, None, diag)


def certify_convex_hull(
    inst: QcqpInstance,
    lower,
    upper,
    samples: int = 200,
    seed: int = 0,
    opts: SolverOptions = DEFAULT_OPTIONS,
) -> Certificate:
    """Sample ``x`` in a box, lift to ``(x, tau(x)/2)`` and certify each point.

    Lifted points that already lie in the QCQP epigraph count as certified
    (tallied separately under ``in_epigraph``); points with ``tau(x) = inf``
    are skipped.
    """
    rng = np.random.default_rng(seed)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    counts = {v.value: 0 for v in Verdict}
    skipped = in_s = 0
    first_refuted = None
    for _ in range(samples):
        x = rng.uniform(lower, upper)
        tau = epigraph_height(inst, x, opts)
        if not math.isfinite(tau):
            skipped += 1
            continue
        p = EpigraphPoint(x, 0.5 * tau)
        if in_epigraph(inst, p):
            in_s += 1
            counts[Verdict.CERTIFIED.value] += 1
            continue
        c = certify_convex_hull_point(inst, p, opts)
        counts[c.verdict.value] += 1
        if c.verdict is Verdict.REFUTED and first_refuted is None:
            first_refuted = {"x": x, "t": p.t, "face_multiplier": c.witness["face_multiplier"]}
    diag = {"counts": counts, "in_epigraph": in_s, "skipped": skipped, "samples": samples}
    if first_refuted is not None:
        return Certificate(Verdict.REFUTED, Kind.CONVEX_HULL, first_refuted, diag)
    checked = sum(counts.values())
    if checked and counts[Verdict.CERTIFIED.value] == checked:
        return Certificate(Verdict.CERTIFIED, Kind.CONVEX_HULL, {"checked": checked}, diag)
    return Certificate(Verdict.INCONCLUSIVE, Kind.CONVEX_HULL, None, diag)


# --- objective / optimizer exactness ---------------------------------------------


def dual_interior_certificate(
    inst: QcqpInstance,
    sol: DualSolution,
    delta: float = 1e-6,
    tol: float = 1e-6,
) -> Certificate:
    """Certify optimizer exactness from a definite aggregation at the dual optimum.

    Requires ``lambda_min(A[gamma*]) >= delta``; the recovered
    ``x* = -A[gamma*]^{-1} b[gamma*]`` must then be feasible and attain the
    relaxation value, both within ``tol`` (relative).
    """
    kind = Kind.DUAL_INTERIOR
    diag = {"lambda_min": sol.lambda_min_at_star, "delta": delta, "status": sol.status}
    if sol.status is not Status.CONVERGED or sol.x_star is None or sol.lambda_min_at_star < delta:
        return Certificate(Verdict.INCONCLUSIVE, kind, None, diag)
    q = inst.evaluate_all(sol.x_star)
    mi = inst.m_I
    viol = max(
        float(np.max(q[1 : 1 + mi], initial=0.0)),
        float(np.max(np.abs(q[1 + mi :]), initial=0.0)),
        0.0,
    )
    gap = abs(q[0] - sol.opt_sdp)
    diag.update(feasibility_residual=viol, objective_gap=gap)
    if viol <= tol * (1.0 + float(np.max(np.abs(inst.c_all)))) and gap <= tol * (1.0 + abs(sol.opt_sdp)):
        return Certificate(
            Verdict.CERTIFIED, kind, {"x_star": sol.x_star, "margin": sol.lambda_min_at_star, "opt": sol.opt_sdp}, diag
        )
    diag["reason"] = "recovered point failed verification"
    return Certificate(Verdict.INCONCLUSIVE, kind, None, diag)


def kernel_obstruction(inst: QcqpInstance, gamma, tol: float = 1e-8, rank_tol: float = 1e-9) -> Certificate:
    """Kernel test at a projective multiplier.

    ``ObstructionHolds`` (certified): some kernel vector ``v`` of ``A[gamma]``
    has ``<v, b[gamma]> != 0``, so ``gamma`` cannot be a dual maximizer with a
    stationary primal point.  ``KernelOrthogonal`` (refuted): the kernel is
    orthogonal to ``b[gamma]``.  ``FullRank`` (inconclusive): empty kernel.
    """
    full = as_full_weights(inst, gamma)
    if abs(full[0] - 1.0) > 1e-12:
        raise ValueError("expected a projective multiplier")
    if not gamma_membership(inst, full, 1e-8):
        raise NotInGammaP("multiplier is outside the projective slice")
    A = np.tensordot(full, inst.A_all, axes=1)
    b = full @ inst.b_all
    ker = linalg.kernel_basis(A, rank_tol)
    kind = Kind.KERNEL_OBSTRUCTION
    if ker.empty:
        return Certificate(Verdict.INCONCLUSIVE, kind, None, {"outcome": "full_rank", "kernel_dim": 0})
    proj = ker.vectors.T @ b
    norm = float(np.linalg.norm(proj))
    diag = {"kernel_dim": ker.dim, "projection_norm": norm}
    if norm > tol * (1.0 + float(np.linalg.norm(b))):
        v = ker.vectors @ (proj / norm)
        return Certificate(Verdict.CERTIFIED, kind, {"kernel_vector": v, "inner_product": float(v @ b)}, dict(diag, outcome="obstruction_holds"))
    return Certificate(Verdict.REFUTED, kind, {"kernel_vector": ker.vectors[:, 0]}, dict(diag, outcome="kernel_orthogonal"))


def polyhedral_certify(
    inst: QcqpInstance,
    generators,
    samples,
    tol: float = 1e-8,
    opts: SolverOptions = DEFAULT_OPTIONS,
    rank_tol: float = 1e-6,
) -> Certificate:
    """Convex hull test for a polyhedral multiplier cone with known generators.

    For each sample ``(x, t)`` on the boundary and outside the epigraph, the
    exposed face is the set of generators orthogonal to the residual.  With
    ``f`` their sum, the point passes when
    ``{x' in ker A(f), <b(g), x'> - g_obj t' = 0 for active g}`` is nontrivial.

    Raises
    ------
    GeneratorNotInGamma
        If a generator is not in the multiplier cone.
    """
    G = np.array([as_full_weights(inst, g) for g in generators], dtype=float)
    for g in G:
        if not gamma_membership(inst, g, tol):
            raise GeneratorNotInGamma(f"generator {g.tolist()} is not in the multiplier cone")
    kind = Kind.POLYHEDRAL
    checked, skipped = 0, []
    for idx, p in enumerate(samples):
        ell = residual(inst, p)
        scale = 1.0 + float(np.max(np.abs(ell)))
        if in_epigraph(inst, p):
            skipped.append((idx, "in_epigraph"))
            continue
        tau = epigraph_height(inst, p.x, opts)
        if classify(2.0 * p.t, tau, opts.membership_tol) is not Membership.BOUNDARY:
            skipped.append((idx, "not_on_boundary"))
            continue
        gnorm = np.linalg.norm(G, axis=1)
        active = np.abs(G @ ell) <= 1e-7 * scale * np.maximum(gnorm, 1.0)
        if not np.any(active):
            skipped.append((idx, "empty_face"))
            continue
        F = G[active]
        fsum = F.sum(axis=0)
        A = np.tensordot(fsum, inst.A_all, axes=1)
        V = linalg.kernel_basis(A, rank_tol).vectors
        rows = np.array([np.concatenate(((g @ inst.b_all) @ V, [-g[0]])) for g in F])
        Z = linalg.nullspace(rows, rel_tol=1e-9)
        checked += 1
        if Z.shape[1] == 0:
            return Certificate(
                Verdict.REFUTED,
                kind,
                {"sample": idx, "face_generators": F, "x": p.x, "t": p.t},
                {"checked": checked, "skipped": skipped},
            )
    diag = {"checked": checked, "skipped": skipped}
    if checked == 0:
        return Certificate(Verdict.INCONCLUSIVE, kind, None, diag)
    return Certificate(Verdict.CERTIFIED, kind, {"faces_checked": checked}, diag)


def _strictly_inside(inst: QcqpInstance, gamma: np.ndarray) -> bool:
    if inst.m_I and np.any(gamma[: inst.m_I] <= 0):
        return False
    A = inst.A_all[0] + np.tensordot(gamma, inst.A_all[1:], axes=1)
    try:
        linalg.cholesky(A)
    except Exception:
        return False
    return True


def _quad_term(inst: QcqpInstance, gamma: np.ndarray) -> float:
    A = inst.A_all[0] + np.tensordot(gamma, inst.A_all[1:], axes=1)
    b = inst.b_all[0] + gamma @ inst.b_all[1:]
    return -float(b @ linalg.solve_pd(A, b))


def steepness_certificate(inst: QcqpInstance, gamma, delta) -> Certificate:
    """Steepness test along ``delta`` from a projective multiplier.

    Certified when the drop of ``-b^T A^{-1} b`` from ``gamma + delta`` to
    ``gamma + 2 delta`` is at least ``||delta|| * ||(c_1, ..., c_m)||``.

    Raises
    ------
    NotStrictlyFeasible
        If ``delta = 0`` or either shifted multiplier is not strictly inside.
    """
    g = as_full_weights(inst, gamma)[1:]
    d = np.asarray(delta, dtype=float).reshape(-1)
    if d.shape != g.shape:
        raise ValueError("delta must have length m")
    if not np.any(d):
        raise NotStrictlyFeasible("delta must be nonzero")
    g1, g2 = g + d, g + 2.0 * d
    if not (_strictly_inside(inst, g1) and _strictly_inside(inst, g2)):
        raise NotStrictlyFeasible("gamma + delta and gamma + 2 delta must be strictly inside")
    lhs = _quad_term(inst, g1) - _quad_term(inst, g2)
    rhs = -float(np.linalg.norm(d)) * float(np.linalg.norm(inst.c_all[1:]))
    diag = {"lhs": lhs, "rhs": rhs}
    if lhs <= rhs:
        return Certificate(Verdict.CERTIFIED, Kind.STEEPNESS, {"delta": d, "lhs": lhs, "rhs": rhs}, diag)
    return Certificate(Verdict.INCONCLUSIVE, Kind.STEEPNESS, None, diag)
