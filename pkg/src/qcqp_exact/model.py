"""QCQP instances, quadratic forms, multipliers and the multiplier cone.

A quadratic form is ``q(x) = x^T A x + 2 b^T x + c``.  An instance stores one
objective form and ``m`` constraint forms; inequality constraints
(``q_i(x) <= 0``) are indexed before equality constraints (``q_i(x) = 0``).

Multipliers are written ``(gamma_obj, gamma)``.  The aggregated form is
``gamma_obj * q_obj + sum_i gamma_i * q_i`` and the cone of convex multipliers
is the set where the aggregated matrix is PSD, ``gamma_obj >= 0`` and the
inequality multipliers are nonnegative.  Fixing ``gamma_obj = 1`` gives the
projective slice.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import linalg
from .errors import AssumptionFailed, DimensionMismatch, InvalidInstance

log = logging.getLogger(__name__)

DEFAULT_MEMBERSHIP_TOL = 1e-8
SYMMETRY_TOL = 1e-12


class Sense(str, enum.Enum):
    """Constraint sense: ``LE`` means ``q(x) <= 0`` and ``EQ`` means ``q(x) = 0``."""

    LE = "le"
    EQ = "eq"


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """``x -> x^T A x + 2 b^T x + c`` with ``A`` symmetrized at construction."""

    A: np.ndarray
    b: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        A = linalg.symmetrize(self.A)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if b.shape[0] != A.shape[0]:
            raise DimensionMismatch(f"A is {A.shape[0]}x{A.shape[0]} but b has length {b.shape[0]}")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @classmethod
    def zero(cls, n: int) -> "QuadraticForm":
        return cls(np.zeros((n, n)), np.zeros(n), 0.0)

    def __call__(self, x) -> float:
        return evaluate(self, x)

    def gradient(self, x) -> np.ndarray:
        """``2 (A x + b)``."""
        x = np.asarray(x, dtype=float)
        return 2.0 * (self.A @ x + self.b)

    def __add__(self, other: "QuadraticForm") -> "QuadraticForm":
        return QuadraticForm(self.A + other.A, self.b + other.b, self.c + other.c)

    def scaled(self, s: float) -> "QuadraticForm":
        return QuadraticForm(s * self.A, s * self.b, s * self.c)

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "b": self.b.tolist(), "c": self.c}


def evaluate(f: QuadraticForm, x) -> float:
    """Evaluate ``x^T A x + 2 b^T x + c``.

    Examples
    --------
    >>> q = QuadraticForm(np.eye(2), np.zeros(2), -1.0)
    >>> evaluate(q, [1.0, 0.0])
    0.0
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != f.n:
        raise DimensionMismatch(f"x has length {x.shape[0]}, form has dimension {f.n}")
    return float(x @ f.A @ x + 2.0 * (f.b @ x) + f.c)


class Constraint(NamedTuple):
    form: QuadraticForm
    sense: Sense


@dataclass(frozen=True, eq=False)
class Multiplier:
    """Homogeneous multiplier ``(gamma_obj, gamma)``; projective when ``gamma_obj == 1``."""

    gamma: np.ndarray
    gamma_obj: float = 1.0

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float).reshape(-1)
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "gamma_obj", float(self.gamma_obj))

    @classmethod
    def from_full(cls, w) -> "Multiplier":
        w = np.asarray(w, dtype=float).reshape(-1)
        return cls(w[1:], w[0])

    def full(self) -> np.ndarray:
        """Stacked vector ``(gamma_obj, gamma_1, ..., gamma_m)``."""
        return np.concatenate(([self.gamma_obj], self.gamma))

    def projective(self) -> "Multiplier":
        if self.gamma_obj <= 0:
            raise ValueError("multiplier has no projective representative (gamma_obj <= 0)")
        return Multiplier(self.gamma / self.gamma_obj, 1.0)


@dataclass(frozen=True)
class EpigraphPoint:
    """A point ``(x, t)``; it lies in the epigraph set when ``q_obj(x) <= 2t`` and ``x`` is feasible."""

    x: np.ndarray
    t: float

    def __post_init__(self):
        object.__setattr__(self, "x", np.array(self.x, dtype=float).reshape(-1))
        object.__setattr__(self, "t", float(self.t))

    def stacked(self) -> np.ndarray:
        return np.concatenate((self.x, [self.t]))


@dataclass(frozen=True, eq=False)
class QcqpInstance:
    """Objective plus ordered constraints, inequalities first.

    Parameters
    ----------
    objective : QuadraticForm
    constraints : sequence of (QuadraticForm, Sense)
        Inequalities must precede equalities.  Use :meth:`build` to have them
        reordered automatically.
    cone : str, optional
        Structural hint about the multiplier cone.  ``"soc"`` asserts that the
        cone is linearly isomorphic to a second-order cone, which switches the
        certifier to its exact face mode.
    name : str, optional
    """

    objective: QuadraticForm
    constraints: tuple = ()
    cone: str | None = None
    name: str | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        cons = tuple(Constraint(f, Sense(s)) for f, s in self.constraints)
        object.__setattr__(self, "constraints", cons)
        n = self.objective.n
        seen_eq = False
        for i, (f, s) in enumerate(cons):
            if f.n != n:
                raise DimensionMismatch(f"constraint {i} has dimension {f.n}, objective has {n}")
            if s is Sense.EQ:
                seen_eq = True
            elif seen_eq:
                raise InvalidInstance("inequality constraints must precede equality constraints")
        if self.cone not in (None, "soc"):
            raise InvalidInstance(f"unknown cone hint {self.cone!r}")

    @classmethod
    def build(cls, objective, constraints: Iterable, **kw) -> "QcqpInstance":
        """Construct after stably moving inequality constraints to the front."""
        cons = [(f, Sense(s)) for f, s in constraints]
        cons = [c for c in cons if c[1] is Sense.LE] + [c for c in cons if c[1] is Sense.EQ]
        return cls(objective, tuple(cons), **kw)

    @property
    def n(self) -> int:
        return self.objective.n

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def m_I(self) -> int:
        return sum(1 for _, s in self.constraints if s is Sense.LE)

    @property
    def m_E(self) -> int:
        return self.m - self.m_I

    @cached_property
    def forms(self) -> tuple:
        """``(q_obj, q_1, ..., q_m)``."""
        return (self.objective,) + tuple(f for f, _ in self.constraints)

    @cached_property
    def A_all(self) -> np.ndarray:
        """Stack of shape ``(1 + m, n, n)``; index 0 is the objective."""
        return np.stack([f.A for f in self.forms])

    @cached_property
    def b_all(self) -> np.ndarray:
        return np.stack([f.b for f in self.forms])

    @cached_property
    def c_all(self) -> np.ndarray:
        return np.array([f.c for f in self.forms])

    @cached_property
    def scale(self) -> float:
        """Magnitude used to make tolerances scale-aware: ``max(1, max_i ||A_i||_F)``."""
        return max(1.0, float(np.max(np.linalg.norm(self.A_all, axis=(1, 2)))))

    def evaluate_all(self, x) -> np.ndarray:
        """``(q_obj(x), q_1(x), ..., q_m(x))``."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.n:
            raise DimensionMismatch(f"x has length {x.shape[0]}, instance has n={self.n}")
        return np.einsum("i,kij,j->k", x, self.A_all, x) + 2.0 * (self.b_all @ x) + self.c_all

    def to_dict(self) -> dict:
        d = {
            "n": self.n,
            "objective": self.objective.to_dict(),
            "constraints": [dict(f.to_dict(), sense=s.value) for f, s in self.constraints],
        }
        if self.cone is not None:
            d["cone"] = self.cone
        if self.name is not None:
            d["name"] = self.name
        return d


def as_full_weights(inst: QcqpInstance, w) -> np.ndarray:
    """Normalize ``w`` to the stacked vector ``(gamma_obj, gamma)``.

    Accepts a :class:`Multiplier`, a length ``1 + m`` array (homogeneous) or a
    length ``m`` array (projective, ``gamma_obj = 1``).
    """
    if isinstance(w, Multiplier):
        full = w.full()
    else:
        w = np.asarray(w, dtype=float).reshape(-1)
        if w.shape[0] == inst.m + 1:
            full = w
        elif w.shape[0] == inst.m:
            full = np.concatenate(([1.0], w))
        else:
            raise DimensionMismatch(f"multiplier has length {w.shape[0]}, instance has m={inst.m}")
    if full.shape[0] != inst.m + 1:
        raise DimensionMismatch(f"multiplier has {full.shape[0] - 1} entries, instance has m={inst.m}")
    return full


def residual(inst: QcqpInstance, p: EpigraphPoint) -> np.ndarray:
    """``q(x) - 2 t e_obj`` in R^{1+m}."""
    r = inst.evaluate_all(p.x)
    r[0] -= 2.0 * p.t
    return r


def aggregate_matrix(inst: QcqpInstance, w) -> np.ndarray:
    full = as_full_weights(inst, w)
    return np.tensordot(full, inst.A_all, axes=1)


def aggregate(inst: QcqpInstance, w) -> QuadraticForm:
    """Aggregated form ``gamma_obj * q_obj + sum_i gamma_i * q_i``."""
    full = as_full_weights(inst, w)
    return QuadraticForm(
        np.tensordot(full, inst.A_all, axes=1), full @ inst.b_all, float(full @ inst.c_all)
    )


def gamma_membership(inst: QcqpInstance, w, tol: float = DEFAULT_MEMBERSHIP_TOL) -> bool:
    """Membership of ``w`` in the cone of convex multipliers, up to ``tol``.

    The PSD test is ``lambda_min >= -tol * max(1, lambda_max)``; the sign tests
    are ``gamma_obj >= -tol`` and ``gamma_i >= -tol`` for inequalities.
    """
    full = as_full_weights(inst, w)
    if full[0] < -tol or np.any(full[1 : 1 + inst.m_I] < -tol):
        return False
    ev = linalg.eigh(np.tensordot(full, inst.A_all, axes=1)).eigenvalues
    return bool(ev[0] >= -tol * max(1.0, float(ev[-1])))


def feasible(inst: QcqpInstance, x, tol: float = 1e-9) -> bool:
    """``q_i(x) <= tol`` for inequalities and ``|q_i(x)| <= tol`` for equalities."""
    q = inst.evaluate_all(x)[1:]
    mi = inst.m_I
    return bool(np.all(q[:mi] <= tol) and np.all(np.abs(q[mi:]) <= tol))


def _strict_level(inst: QcqpInstance, gamma):
    """Concave function ``min(lambda_min(A[gamma]), gamma_i for i <= m_I)`` and a supergradient."""
    A = inst.A_all[0] + np.tensordot(gamma, inst.A_all[1:], axes=1)
    w, V = linalg.eigh(A, method="lapack")
    lam, v = float(w[0]), V[:, 0]
    mi = inst.m_I
    if mi and np.min(gamma[:mi]) < lam:
        i = int(np.argmin(gamma[:mi]))
        g = np.zeros_like(gamma)
        g[i] = 1.0
        return float(gamma[i]), lam, g
    g = np.einsum("i,kij,j->k", v, inst.A_all[1:], v)
    return lam, lam, g


def strictly_feasible_multiplier(
    inst: QcqpInstance,
    delta: float | None = None,
    max_iter: int = 500,
) -> Multiplier:
    """Find a projective multiplier with ``A[gamma]`` definite.

    Runs Polyak-step supergradient ascent on the concave function
    ``min(lambda_min(A[gamma]), min_{i <= m_I} gamma_i)`` from ``0`` and from
    each inequality unit vector.  The first pass aims at a comfortable margin,
    the second at ``2 * delta``.

    Returns
    -------
    Multiplier
        With ``lambda_min(A[gamma]) >= delta`` and ``gamma_i >= delta`` for
        inequalities, where ``delta = 1e-6 * inst.scale`` by default.

    Raises
    ------
    AssumptionFailed
        If no start reaches ``delta``.  A failure does not show that no such
        multiplier exists.
    """
    key = ("strict", delta, max_iter)
    if key in inst._cache:
        cached = inst._cache[key]
        if isinstance(cached, AssumptionFailed):
            raise cached
        return cached
    if delta is None:
        delta = 1e-6 * inst.scale
    m = inst.m
    starts = [np.zeros(m)] + [np.eye(m)[i] for i in range(inst.m_I)]
    best_val, best = -np.inf, None
    for target in (max(delta, 1e-2 * inst.scale), 2.0 * delta):
        for g0 in starts:
            gamma = g0.astype(float)
            for _ in range(max_iter):
                h, _, g = _strict_level(inst, gamma)
                if h > best_val:
                    best_val, best = h, gamma.copy()
                if h >= target:
                    break
                gg = float(g @ g)
                if gg == 0.0:
                    break
                gamma = gamma + (target - h) / gg * g
            if best_val >= delta:
                result = Multiplier(best, 1.0)
                inst._cache[key] = result
                log.debug("strict multiplier found with margin %.3e", best_val)
                return result
    err = AssumptionFailed(
        f"no definite aggregation found (best margin {best_val:.3e} < {delta:.3e}); inconclusive"
    )
    inst._cache[key] = err
    raise err


# --- JSON -------------------------------------------------------------------

_TOP_KEYS = {"n", "objective", "constraints", "cone", "name"}
_FORM_KEYS = {"A", "b", "c"}


def _form_from_dict(d: dict, n: int, where: str) -> QuadraticForm:
    extra = set(d) - _FORM_KEYS - {"sense"}
    if extra:
        raise InvalidInstance(f"{where}: unknown keys {sorted(extra)}")
    try:
        A = np.asarray(d["A"], dtype=float)
        b = np.asarray(d.get("b", np.zeros(n)), dtype=float)
        c = float(d.get("c", 0.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInstance(f"{where}: {exc}") from None
    if A.shape != (n, n) or b.shape != (n,):
        raise InvalidInstance(f"{where}: expected A {n}x{n} and b of length {n}")
    if not np.all(np.isfinite(A)) or not np.all(np.isfinite(b)) or not np.isfinite(c):
        raise InvalidInstance(f"{where}: non-finite entries")
    if np.max(np.abs(A - A.T), initial=0.0) > SYMMETRY_TOL:
        raise InvalidInstance(f"{where}: A is not symmetric")
    return QuadraticForm(A, b, c)


def instance_from_dict(d: dict) -> QcqpInstance:
    """Validate and build an instance from the JSON schema.

    Constraints are stably reordered so that inequalities come first.
    """
    if not isinstance(d, dict):
        raise InvalidInstance("instance must be a JSON object")
    extra = set(d) - _TOP_KEYS
    if extra:
        raise InvalidInstance(f"unknown keys {sorted(extra)}")
    try:
        n = int(d["n"])
        obj = d["objective"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInstance(f"missing or bad field: {exc}") from None
    if n < 1:
        raise InvalidInstance("n must be positive")
    objective = _form_from_dict(obj, n, "objective")
    cons = []
    for i, cd in enumerate(d.get("constraints", [])):
        sense = cd.get("sense", "le")
        if sense not in ("le", "eq"):
            raise InvalidInstance(f"constraint {i}: sense must be 'le' or 'eq'")
        cons.append((_form_from_dict(cd, n, f"constraint {i}"), Sense(sense)))
    return QcqpInstance.build(objective, cons, cone=d.get("cone"), name=d.get("name"))


def load_instance(path) -> QcqpInstance:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInstance(f"{path}: invalid JSON ({exc})") from None
    return instance_from_dict(data)


def save_instance(inst: QcqpInstance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(inst.to_dict(), fh, indent=1)


def make_instance(
    objective: tuple,
    constraints: Sequence[tuple] = (),
    cone: str | None = None,
    name: str | None = None,
) -> QcqpInstance:
    """Convenience constructor from ``(A, b, c)`` and ``(A, b, c, sense)`` tuples."""
    obj = QuadraticForm(*objective)
    cons = [(QuadraticForm(A, b, c), Sense(s)) for A, b, c, s in constraints]
    return QcqpInstance.build(obj, cons, cone=cone, name=name)
