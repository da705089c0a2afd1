"""Dual function, barrier solver over the projective multiplier slice, and
membership in the projected SDP epigraph.

Two problems share one damped-Newton log-barrier routine:

* the dual problem, maximize ``d(gamma) = -b[g]^T A[g]^{-1} b[g] + c[g]``;
* the support problem, maximize ``<gamma, q(x)>`` (a linear function), whose
  value ``tau(x)`` decides membership: ``(x, t)`` is in the relaxation's
  epigraph iff ``2 t >= tau(x)``.

The barrier is ``logdet A[gamma] + sum_{i <= m_I} log gamma_i`` plus a large
ball term ``log(R^2 - ||gamma||^2)``.  The ball keeps every centering problem
bounded, including when the optimal face is unbounded, and its multiplier
reveals divergence: the sensitivity of the optimal value to ``R^2`` is
``nu = mu / (R^2 - ||gamma||^2)``.  When ``nu * R^2`` is a sizeable fraction of
the value, the value is still growing with ``R`` and the problem is declared
unbounded.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from . import linalg
from .errors import NotInGammaP
from .model import (
    EpigraphPoint,
    Multiplier,
    QcqpInstance,
    as_full_weights,
    gamma_membership,
    strictly_feasible_multiplier,
)

log = logging.getLogger(__name__)


class Status(str, enum.Enum):
    CONVERGED = "converged"
    UNBOUNDED = "unbounded"
    MAX_ITER = "max_iter"


class Membership(str, enum.Enum):
    IN = "in"
    OUT = "out"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class SolverOptions:
    """Barrier schedule and tolerances.

    Attributes
    ----------
    mu0, mu_shrink, mu_final : float
        The barrier weight starts at ``mu0`` and is multiplied by
        ``mu_shrink`` until it drops below ``mu_final``.
    newton_tol : float
        Centering stops when half the squared Newton decrement is below this.
    max_outer, max_newton : int
        Caps on barrier updates and on Newton steps per update.
    membership_tol : float
        Relative band for classifying a point as on the boundary.
    gamma_bound : float
        Radius factor of the enclosing ball, relative to the starting point.
    unbounded_ratio : float
        Threshold on ``nu * R^2 / (1 + |value|)`` for declaring divergence.
    """

    mu0: float = 1.0
    mu_shrink: float = 0.2
    mu_final: float = 1e-9
    newton_tol: float = 1e-10
    max_outer: int = 60
    max_newton: int = 300
    membership_tol: float = 1e-6
    gamma_bound: float = 1e8
    unbounded_ratio: float = 0.05

    def __post_init__(self):
        for name in ("mu0", "mu_final", "newton_tol", "membership_tol", "gamma_bound"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.mu_shrink < 1:
            raise ValueError("mu_shrink must lie in (0, 1)")
        if self.max_outer < 1 or self.max_newton < 1:
            raise ValueError("iteration caps must be positive")


DEFAULT_OPTIONS = SolverOptions()


@dataclass(frozen=True)
class BarrierResult:
    """Raw output of the barrier routine."""

    value: float
    gamma: np.ndarray
    mu: float
    status: Status
    newton_steps: int
    ball_sensitivity: float
    # -mu * gradient of logdet, i.e. mu * A[gamma]^{-1}: a primal slack estimate
    primal_slack: np.ndarray | None = None
    x: np.ndarray | None = None


@dataclass(frozen=True)
class DualSolution:
    """Result of :func:`solve_sdp`.

    ``x_star`` is only present when ``A[gamma*]`` is numerically definite;
    ``x_primal`` is the primal point read off the central path, which exists
    in either case.
    """

    opt_sdp: float
    gamma_star: Multiplier
    x_star: np.ndarray | None
    lambda_min_at_star: float
    status: Status
    x_primal: np.ndarray | None = None
    newton_steps: int = 0

    def to_dict(self) -> dict:
        return {
            "opt_sdp": self.opt_sdp,
            "gamma_star": self.gamma_star.gamma.tolist(),
            "x_star": None if self.x_star is None else self.x_star.tolist(),
            "lambda_min_at_star": self.lambda_min_at_star,
            "status": self.status.value,
        }


class _Problem:
    """Evaluates objective, gradient and Hessian of one barrier subproblem."""

    def __init__(self, inst: QcqpInstance, lin: np.ndarray | None, const: float, radius: float):
        self.inst = inst
        self.lin = lin  # None selects the dual function
        self.const = const
        self.A0 = inst.A_all[0]
        self.Ai = inst.A_all[1:]
        self.b0 = inst.b_all[0]
        self.bi = inst.b_all[1:]
        self.c0 = inst.c_all[0]
        self.ci = inst.c_all[1:]
        self.mI = inst.m_I
        self.R = radius
        self.R2 = radius * radius

    def ball_slack(self, gamma) -> float:
        # factored form avoids cancellation when ||gamma|| is close to R
        r = float(np.linalg.norm(gamma))
        return (self.R - r) * (self.R + r)

    def factor(self, gamma):
        """Cholesky factor of ``A[gamma]`` or ``None`` outside the barrier domain."""
        if self.mI and np.any(gamma[: self.mI] <= 0.0):
            return None
        if self.ball_slack(gamma) <= 0.0:
            return None
        A = self.A0 + np.tensordot(gamma, self.Ai, axes=1)
        try:
            L = np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.diag(L) > 0):
            return None
        return L

    def objective(self, gamma, L):
        if self.lin is not None:
            return float(self.lin @ gamma) + self.const, None
        b = self.b0 + gamma @ self.bi
        x = -sla.cho_solve((L, True), b)
        return float(b @ x) + self.c0 + float(self.ci @ gamma), x

    def barrier(self, gamma, L):
        val = 2.0 * float(np.sum(np.log(np.diag(L))))
        if self.mI:
            val += float(np.sum(np.log(gamma[: self.mI])))
        val += math.log(self.ball_slack(gamma))
        return val

    def merit(self, gamma, L, mu):
        return self.objective(gamma, L)[0] + mu * self.barrier(gamma, L)

    def derivatives(self, gamma, L, mu):
        """Value, gradient and Hessian of ``objective + mu * barrier``."""
        m = gamma.shape[0]
        P = sla.cho_solve((L, True), np.eye(L.shape[0]))
        PA = P @ self.Ai  # (m, n, n)
        g_bar = np.trace(PA, axis1=1, axis2=2)
        H_bar = -np.einsum("iab,jba->ij", PA, PA)
        if self.mI:
            gi = gamma[: self.mI]
            g_bar[: self.mI] += 1.0 / gi
            H_bar[: self.mI, : self.mI] -= np.diag(1.0 / gi**2)
        slack = self.ball_slack(gamma)
        g_bar += -2.0 * gamma / slack
        H_bar += -2.0 * np.eye(m) / slack - 4.0 * np.outer(gamma, gamma) / slack**2
        obj, x = self.objective(gamma, L)
        if self.lin is not None:
            g_obj = self.lin
            H_obj = 0.0
        else:
            G = np.einsum("kij,j->ki", self.Ai, x) + self.bi  # rows g_i = A_i x + b_i
            g_obj = np.einsum("i,kij,j->k", x, self.Ai, x) + 2.0 * (self.bi @ x) + self.ci
            H_obj = -2.0 * G @ P @ G.T
        value = obj + mu * self.barrier(gamma, L)
        return value, g_obj + mu * g_bar, H_obj + mu * H_bar, P, x


def _center(prob: _Problem, gamma, L, mu, opts: SolverOptions):
    """Damped Newton centering for fixed ``mu``.  Returns (gamma, L, steps, ok)."""
    steps = 0
    for _ in range(opts.max_newton):
        value, g, H, _, _ = prob.derivatives(gamma, L, mu)
        try:
            cf = sla.cho_factor(-H)
            delta = sla.cho_solve(cf, g)
        except (np.linalg.LinAlgError, ValueError):
            delta = np.linalg.lstsq(-H, g, rcond=None)[0]
        dec = float(g @ delta)
        if not np.isfinite(dec):
            return gamma, L, steps, False
        if 0.5 * dec <= opts.newton_tol * max(1.0, mu):
            return gamma, L, steps, True
        s = 1.0
        accepted = False
        while s > 1e-14:
            trial = gamma + s * delta
            Lt = prob.factor(trial)
            if Lt is not None:
                vt = prob.merit(trial, Lt, mu)
                if vt >= value + 0.25 * s * dec:
                    accepted = True
                    break
            s *= 0.5
        steps += 1
        if not accepted:
            # no ascent is measurable any more: treat as centered
            return gamma, L, steps, dec < 1e-6 * max(1.0, abs(value))
        gamma, L = trial, Lt
    return gamma, L, steps, False


_DIVERGENCE_MU = 1e-3


def _ball_sensitivity(prob: _Problem, gamma, L, mu) -> float:
    """``nu R^2 / (1 + |value|)`` with ``nu = mu / (R^2 - ||gamma||^2)``.

    About 1/2 when the objective grows linearly up to the ball, at most about
    ``mu`` when the optimum is well inside it.
    """
    value = prob.objective(gamma, L)[0]
    return mu / prob.ball_slack(gamma) * prob.R2 / (1.0 + abs(value))


def _rising_at_ball(prob: _Problem, gamma) -> bool:
    """Linear objective still increasing along ``gamma`` after reaching ``R / 2``.

    Covers the case where centering cannot keep up with a multiplier pushed
    against the ball, so the sensitivity ratio is not yet meaningful.  A flat
    direction (zero slope) is left alone: there the log-det term alone drives
    ``gamma`` outwards and the value stays finite.
    """
    if prob.lin is None:
        return False
    r = float(np.linalg.norm(gamma))
    if r < 0.5 * prob.R:
        return False
    return float(prob.lin @ gamma) / r > 1e-6 * (1.0 + float(np.linalg.norm(prob.lin)))


def barrier_maximize(
    inst: QcqpInstance,
    lin: np.ndarray | None = None,
    const: float = 0.0,
    opts: SolverOptions = DEFAULT_OPTIONS,
    gamma0: np.ndarray | None = None,
) -> BarrierResult:
    """Maximize the dual function (``lin is None``) or ``lin . gamma + const``
    over the projective multiplier slice.

    Raises
    ------
    AssumptionFailed
        When no strictly feasible starting multiplier is available.
    """
    if gamma0 is None:
        gamma0 = strictly_feasible_multiplier(inst).gamma
    gamma = np.array(gamma0, dtype=float)
    radius = opts.gamma_bound * max(1.0, float(np.linalg.norm(gamma)))
    prob = _Problem(inst, lin, const, radius)
    L = prob.factor(gamma)
    if L is None:
        raise NotInGammaP("starting multiplier is not strictly feasible")
    mu = opts.mu0
    total = 0
    status = Status.CONVERGED
    sensitivity = 0.0
    for outer in range(opts.max_outer):
        gamma, L, steps, ok = _center(prob, gamma, L, mu, opts)
        total += steps
        if not ok:
            status = Status.MAX_ITER
        if mu <= _DIVERGENCE_MU:
            # Once mu is small the ball term only matters if the objective
            # keeps growing towards it.  Checking here, rather than only at the
            # final mu, avoids the regime where R - ||gamma|| drops below the
            # floating-point spacing near R and centering stalls.
            sensitivity = _ball_sensitivity(prob, gamma, L, mu)
            if sensitivity > opts.unbounded_ratio:
                break
            if _rising_at_ball(prob, gamma):
                sensitivity = math.inf
                break
        if mu <= opts.mu_final:
            break
        mu = max(mu * opts.mu_shrink, opts.mu_final * 0.999)
    else:
        status = Status.MAX_ITER
    if sensitivity > opts.unbounded_ratio:
        status = Status.UNBOUNDED
    if status is Status.CONVERGED:
        # a few extra Newton steps at the final mu: the centering tolerance
        # bounds the decrement, not the gradient, and the gradient is what
        # the recovered primal point's feasibility depends on
        polish = replace(opts, newton_tol=1e-24, max_newton=8)
        gamma, L, steps, _ = _center(prob, gamma, L, mu, polish)
        total += steps
    value, x = prob.objective(gamma, L)
    if status is not Status.UNBOUNDED:
        sensitivity = _ball_sensitivity(prob, gamma, L, mu)
        if sensitivity > opts.unbounded_ratio or _rising_at_ball(prob, gamma):
            status = Status.UNBOUNDED
    slack = mu * sla.cho_solve((L, True), np.eye(inst.n))
    if status is Status.MAX_ITER:
        log.debug("barrier stopped without full centering (mu=%.1e)", mu)
    return BarrierResult(value, gamma, mu, status, total, sensitivity, slack, x)


# --- dual function -------------------------------------------------------------


def _projective(inst: QcqpInstance, gamma) -> np.ndarray:
    full = as_full_weights(inst, gamma)
    if abs(full[0] - 1.0) > 1e-12:
        raise ValueError("expected a projective multiplier (gamma_obj = 1)")
    return full[1:]


def dual_value(inst: QcqpInstance, gamma, tol: float = 1e-8) -> dict:
    """Evaluate ``d(gamma) = inf_x [gamma, q(x)]`` at a projective multiplier.

    Returns
    -------
    dict
        ``{"value": float, "minimizer": ndarray or None}``; the value is
        ``-inf`` when ``b[gamma]`` has a component in ``ker A[gamma]``.

    Raises
    ------
    NotInGammaP
        If ``gamma`` is not in the projective slice up to ``tol``.
    """
    g = _projective(inst, gamma)
    if not gamma_membership(inst, g, tol):
        raise NotInGammaP("multiplier is outside the projective slice")
    full = np.concatenate(([1.0], g))
    A = np.tensordot(full, inst.A_all, axes=1)
    b = full @ inst.b_all
    c = float(full @ inst.c_all)
    try:
        x = -linalg.solve_pd(A, b)
        return {"value": float(b @ x) + c, "minimizer": x}
    except Exception:
        pass
    ker = linalg.kernel_basis(A, 1e-9)
    if np.linalg.norm(ker.vectors.T @ b) > 1e-8 * (1.0 + np.linalg.norm(b)):
        return {"value": -math.inf, "minimizer": None}
    x = -np.linalg.pinv(A, rcond=1e-10, hermitian=True) @ b
    return {"value": float(b @ x) + c, "minimizer": x}


def dual_gradient(inst: QcqpInstance, gamma) -> np.ndarray:
    """``(q_i(x(gamma)))_i`` with ``x(gamma) = -A[gamma]^{-1} b[gamma]``; interior only."""
    x = dual_value(inst, gamma)["minimizer"]
    return inst.evaluate_all(x)[1:]


def solve_sdp(inst: QcqpInstance, opts: SolverOptions = DEFAULT_OPTIONS) -> DualSolution:
    """Maximize the dual function over the projective slice.

    The optimal value equals the optimal value of the Shor relaxation.
    ``status`` is ``UNBOUNDED`` when the dual diverges (relaxation infeasible).
    """
    res = barrier_maximize(inst, None, 0.0, opts)
    gamma = res.gamma
    A = inst.A_all[0] + np.tensordot(gamma, inst.A_all[1:], axes=1)
    lam = linalg.lambda_min(A)
    x_star = None
    value = res.value
    if res.status is Status.UNBOUNDED:
        value = math.inf
    elif lam > 1e-7 * inst.scale:
        b = inst.b_all[0] + gamma @ inst.b_all[1:]
        x_star = -linalg.solve_pd(A, b)
    return DualSolution(value, Multiplier(gamma), x_star, lam, res.status, res.x, res.newton_steps)


# --- membership ---------------------------------------------------------------


def _recession_rays(inst: QcqpInstance) -> list:
    """Coordinate rays ``(i, sign)`` contained in the recession cone of the slice."""
    key = "recession_rays"
    if key not in inst._cache:
        rays = []
        tol = 1e-12 * inst.scale
        for i in range(inst.m):
            Ai = inst.A_all[1 + i]
            ev = np.linalg.eigvalsh(Ai)
            if ev[0] >= -tol:
                rays.append((i, 1.0))
            if i >= inst.m_I and ev[-1] <= tol:
                rays.append((i, -1.0))
        inst._cache[key] = rays
    return inst._cache[key]


@dataclass(frozen=True)
class HeightResult:
    """Support value ``tau(x)`` with the multiplier that attains it."""

    tau: float
    gamma: np.ndarray | None
    status: Status
    primal_slack: np.ndarray | None = None
    ray: tuple | None = None


def epigraph_height_detail(inst: QcqpInstance, x, opts: SolverOptions = DEFAULT_OPTIONS) -> HeightResult:
    q = inst.evaluate_all(x)
    ell = q[1:]
    tol = 1e-12 * (1.0 + np.max(np.abs(q)))
    for i, sgn in _recession_rays(inst):
        if sgn * ell[i] > tol:
            return HeightResult(math.inf, None, Status.UNBOUNDED, ray=(i, sgn))
    res = barrier_maximize(inst, ell, float(q[0]), opts)
    tau = math.inf if res.status is Status.UNBOUNDED else res.value
    return HeightResult(tau, res.gamma, res.status, res.primal_slack)


def epigraph_height(inst: QcqpInstance, x, opts: SolverOptions = DEFAULT_OPTIONS) -> float:
    """``tau(x) = sup over the projective slice of [gamma, q(x)]``; may be ``inf``.

    ``(x, t)`` belongs to the relaxation's epigraph exactly when ``2 t >= tau(x)``.
    """
    return epigraph_height_detail(inst, x, opts).tau


def classify(two_t: float, tau: float, tol: float) -> Membership:
    if math.isinf(tau):
        return Membership.OUT
    gap = two_t - tau
    if abs(gap) <= tol * (1.0 + abs(tau)):
        return Membership.BOUNDARY
    return Membership.IN if gap > 0 else Membership.OUT


def membership(inst: QcqpInstance, p: EpigraphPoint, opts: SolverOptions = DEFAULT_OPTIONS) -> Membership:
    """Classify ``(x, t)`` against the projected SDP epigraph."""
    tau = epigraph_height(inst, p.x, opts)
    return classify(2.0 * p.t, tau, opts.membership_tol)
