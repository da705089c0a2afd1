"""Brute-force ground truth used to cross-check the solver.

Nothing here calls the barrier solver: grid search and local multistart for
the QCQP value, sign enumeration for the partition problem, and central
differences for the dual gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import GridTooLarge, NotInterior, TooLarge
from .model import QcqpInstance, Sense

MAX_GRID_POINTS = 10**8
MAX_GRID_DIM = 6
_CHUNK = 1 << 16


@dataclass(frozen=True)
class GridSpec:
    lower: np.ndarray
    upper: np.ndarray
    points: int
    tol: float | None = None  # None selects the Lipschitz-scaled default

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be vectors of equal length")
        if np.any(lo >= hi):
            raise ValueError("need lower < upper in every coordinate")
        if self.points < 2:
            raise ValueError("need at least 2 points per axis")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    @property
    def step(self) -> float:
        return float(np.max(self.upper - self.lower)) / (self.points - 1)

    @property
    def size(self) -> int:
        return self.points**self.n


@dataclass(frozen=True)
class OracleResult:
    value: float
    argmin: np.ndarray | None
    tol: float
    label: str  # "grid" or "upper_bound_only"


def _box_radius(spec: GridSpec) -> float:
    return float(np.linalg.norm(np.maximum(np.abs(spec.lower), np.abs(spec.upper))))


def default_tol(inst: QcqpInstance, spec: GridSpec) -> float:
    """``5 * step * max_i (||A_i||_2 ||box|| + ||b_i||)`` over the constraints."""
    if inst.m == 0:
        return 0.0
    rad = _box_radius(spec)
    lip = max(np.linalg.norm(A, 2) * rad + np.linalg.norm(b) for A, b in zip(inst.A_all[1:], inst.b_all[1:]))
    return 5.0 * spec.step * float(lip)


def _feasible_rows(Q: np.ndarray, m_I: int, tol: float) -> np.ndarray:
    ok = np.ones(Q.shape[0], dtype=bool)
    if m_I:
        ok &= np.all(Q[:, 1 : 1 + m_I] <= tol, axis=1)
    if Q.shape[1] > 1 + m_I:
        ok &= np.all(np.abs(Q[:, 1 + m_I :]) <= tol, axis=1)
    return ok


def grid_opt(inst: QcqpInstance, spec: GridSpec, starts: int = 64, seed: int = 0) -> OracleResult:
    """Minimum of ``q_obj`` over grid points that are feasible within the tolerance.

    Above six dimensions the grid is replaced by :func:`multistart_upper_bound`
    and the result is labelled ``upper_bound_only``.

    Raises
    ------
    GridTooLarge
        If the grid has more than ``10^8`` points.
    """
    if spec.n != inst.n:
        raise ValueError("grid dimension does not match the instance")
    if spec.n > MAX_GRID_DIM:
        return multistart_upper_bound(inst, spec.lower, spec.upper, starts, seed)
    if spec.size > MAX_GRID_POINTS:
        raise GridTooLarge(f"{spec.size} grid points exceed {MAX_GRID_POINTS}")
    tol = default_tol(inst, spec) if spec.tol is None else float(spec.tol)
    axes = [np.linspace(lo, hi, spec.points) for lo, hi in zip(spec.lower, spec.upper)]
    best, arg = math.inf, None
    total = spec.size
    shape = (spec.points,) * spec.n
    A, b, c = inst.A_all, inst.b_all, inst.c_all
    for start in range(0, total, _CHUNK):
        idx = np.unravel_index(np.arange(start, min(total, start + _CHUNK)), shape)
        X = np.stack([axes[d][idx[d]] for d in range(spec.n)], axis=1)
        Q = np.einsum("pi,kij,pj->pk", X, A, X) + 2.0 * X @ b.T + c
        ok = _feasible_rows(Q, inst.m_I, tol)
        if not np.any(ok):
            continue
        vals = np.where(ok, Q[:, 0], np.inf)
        j = int(np.argmin(vals))
        if vals[j] < best:
            best, arg = float(vals[j]), X[j].copy()
    return OracleResult(best, arg, tol, "grid")


def grid_error_bound(inst: QcqpInstance, spec: GridSpec, multiplier_bound: float = 0.0) -> float:
    """Resolution error of :func:`grid_opt`.

    Upward error: the nearest grid point to an optimizer is at most
    ``step * sqrt(n) / 2`` away and (by the tolerance choice) stays feasible,
    so the objective moves by at most its Lipschitz constant times that.
    Downward error: loosening the constraints by ``tol`` lowers the optimum by
    about ``multiplier_bound * tol`` to first order.
    """
    tol = default_tol(inst, spec) if spec.tol is None else float(spec.tol)
    rad = _box_radius(spec)
    lip = 2.0 * (np.linalg.norm(inst.A_all[0], 2) * rad + np.linalg.norm(inst.b_all[0]))
    return float(lip * spec.step * math.sqrt(spec.n) / 2.0 + multiplier_bound * tol)


def multistart_upper_bound(inst: QcqpInstance, lower, upper, starts: int = 64, seed: int = 0, feas_tol: float = 1e-8) -> OracleResult:
    """Best feasible objective value found by SLSQP from uniform random starts."""
    rng = np.random.default_rng(seed)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    cons = []
    for i, form in enumerate(inst.forms[1:]):
        typ = "ineq" if i < inst.m_I else "eq"
        cons.append({"type": typ, "fun": (lambda x, f=form: -f(x)), "jac": (lambda x, f=form: -f.gradient(x))})
        if typ == "eq":
            cons[-1]["fun"] = lambda x, f=form: f(x)
            cons[-1]["jac"] = lambda x, f=form: f.gradient(x)
    obj = inst.objective
    best, arg = math.inf, None
    for _ in range(starts):
        x0 = rng.uniform(lower, upper)
        res = optimize.minimize(obj, x0, jac=obj.gradient, constraints=cons, method="SLSQP",
                                options={"ftol": 1e-13, "maxiter": 500})
        x = res.x
        q = inst.evaluate_all(x)
        viol = max(float(np.max(q[1 : 1 + inst.m_I], initial=0.0)), float(np.max(np.abs(q[1 + inst.m_I :]), initial=0.0)))
        if viol <= feas_tol and q[0] < best:
            best, arg = float(q[0]), x
    return OracleResult(best, arg, feas_tol, "upper_bound_only")


def partition_enumerate(a) -> float:
    """``min (a^T x)^2`` over ``x in {-1, 1}^n`` by enumeration (``n <= 24``)."""
    a = np.asarray(getattr(a, "a", a), dtype=float)
    n = a.shape[0]
    if n > 24:
        raise TooLarge(f"n = {n} exceeds the enumeration limit of 24")
    if n == 0:
        return 0.0
    # x_0 = +1 by symmetry
    best = math.inf
    rest = a[1:]
    k = rest.shape[0]
    for start in range(0, 1 << k, _CHUNK):
        codes = np.arange(start, min(1 << k, start + _CHUNK), dtype=np.int64)
        bits = (codes[:, None] >> np.arange(k)) & 1
        s = a[0] + (1 - 2 * bits) @ rest
        best = min(best, float(np.min(s * s)))
    return best


def fd_gradient_check(inst: QcqpInstance, gamma, h: float = 1e-6) -> float:
    """Max relative error between central differences of the dual function and
    the constraint values at its minimizer.

    Raises
    ------
    NotInterior
        If ``lambda_min(A[gamma]) <= 10 h`` or an inequality multiplier is
        within ``h`` of zero.
    """
    g = np.asarray(getattr(gamma, "gamma", gamma), dtype=float).reshape(-1)
    if g.shape[0] != inst.m:
        raise ValueError(f"expected {inst.m} multipliers")
    A0, As, b0, bs, c0, cs = inst.A_all[0], inst.A_all[1:], inst.b_all[0], inst.b_all[1:], inst.c_all[0], inst.c_all[1:]

    def parts(gg):
        A = A0 + np.tensordot(gg, As, axes=1)
        return A, b0 + gg @ bs, c0 + gg @ cs

    A, b, _ = parts(g)
    lam = float(np.linalg.eigvalsh(A)[0])
    if lam <= 10.0 * h or (inst.m_I and np.any(g[: inst.m_I] <= h)):
        raise NotInterior(f"lambda_min = {lam:.3e} is not above 10 h = {10 * h:.1e}")

    def d(gg):
        A, b, c = parts(gg)
        return float(-b @ np.linalg.solve(A, b) + c)

    x = -np.linalg.solve(A, b)
    grad = inst.evaluate_all(x)[1:]
    fd = np.empty_like(g)
    for i in range(g.shape[0]):
        e = np.zeros_like(g)
        e[i] = h
        fd[i] = (d(g + e) - d(g - e)) / (2.0 * h)
    return float(np.max(np.abs(fd - grad)) / max(1.0, float(np.max(np.abs(grad)))))
