"""Closed forms for the structured families: the two-variable example with a
circular multiplier cone, the on/off mixed-binary set, quadratic matrix
programs and the partition QCQP.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DimensionMismatch, InvalidInstance, WrongFaceCase
from .model import EpigraphPoint, QcqpInstance, QuadraticForm, Sense, make_instance

SQRT2 = math.sqrt(2.0)
BOUNDARY_TOL = 1e-9

# --- two-variable example --------------------------------------------------------


def example1_instance() -> QcqpInstance:
    """``q_obj = 2 x1 x2 - x2 - 1/4``, ``q1 = x1^2 - x2^2 - x1 + x2 - 1 <= 0``,
    ``q2 = x1^2 + x2^2 - 1 <= 0``."""
    return make_instance(
        (np.array([[0.0, 1.0], [1.0, 0.0]]), [0.0, -0.5], -0.25),
        [
            (np.diag([1.0, -1.0]), [-0.5, 0.5], -1.0, "le"),
            (np.eye(2), [0.0, 0.0], -1.0, "le"),
        ],
        cone="soc",
        name="example1",
    )


def example1_gamma_membership(gamma_obj: float, gamma1: float, gamma2: float) -> bool:
    """Closed-form cone test ``gamma2 >= sqrt(gamma_obj^2 + gamma1^2)`` with nonnegative signs."""
    if gamma_obj < 0 or gamma1 < 0 or gamma2 < 0:
        return False
    return gamma2 >= math.hypot(gamma_obj, gamma1)


def example1_ssdp(x1: float, x2: float, t: float) -> bool:
    """Closed-form epigraph test ``-q2 >= sqrt((q_obj - 2t)_+^2 + (q1)_+^2)``."""
    inst = example1_instance()
    q = inst.evaluate_all([x1, x2])
    return -q[2] >= math.hypot(max(q[0] - 2 * t, 0.0), max(q[1], 0.0))


# --- mixed-binary ----------------------------------------------------------------


def mixed_binary_instance() -> QcqpInstance:
    """``q_obj = x2^2``, ``q1 = x1 (x1 - 1) = 0``, ``q2 = sqrt(2) x2 (x1 - 1) = 0``."""
    h = 1.0 / SQRT2
    return make_instance(
        (np.diag([0.0, 1.0]), [0.0, 0.0], 0.0),
        [
            (np.diag([1.0, 0.0]), [-0.5, 0.0], 0.0, "eq"),
            (np.array([[0.0, h], [h, 0.0]]), [0.0, -h], 0.0, "eq"),
        ],
        cone="soc",
        name="mixed_binary",
    )


def _mb_forms(x1, x2):
    return x2 * x2, x1 * (x1 - 1.0), SQRT2 * x2 * (x1 - 1.0)


def mixed_binary_soc_margin(x1: float, x2: float, t: float) -> float:
    """``LHS - RHS`` of the second-order cone description; nonnegative inside."""
    q0, q1, q2 = _mb_forms(x1, x2)
    u = q0 - 2.0 * t
    return (-u - q1) - math.sqrt((u - q1) ** 2 + 2.0 * q2 * q2)


def mixed_binary_ssdp(x1: float, x2: float, t: float, tol: float = 0.0) -> bool:
    """Second-order cone description of the relaxation's epigraph.

    Examples
    --------
    >>> mixed_binary_ssdp(0.5, 0.5, 0.25)
    True
    >>> mixed_binary_ssdp(0.5, 0.5, 0.2)
    False
    """
    return mixed_binary_soc_margin(x1, x2, t) >= -tol


def mixed_binary_perspective(x1: float, x2: float, t: float) -> bool:
    """Perspective description ``x2^2 - 2 t x1 <= 0`` and ``0 <= x1 <= 1``.

    The formula admits ``t < 0`` at ``x = (0, 0)``, where the cone description
    requires ``t >= 0``; the two differ only on that ray.
    """
    return x2 * x2 - 2.0 * t * x1 <= 0.0 and 0.0 <= x1 <= 1.0


def mixed_binary_tau(x1: float, x2: float) -> float:
    """Closed-form support value: ``x2^2 / x1`` on ``0 < x1 <= 1``, ``0`` at the origin, else ``inf``."""
    if 0.0 < x1 <= 1.0:
        return x2 * x2 / x1
    if x1 == 0.0 and x2 == 0.0:
        return 0.0
    return math.inf


def mixed_binary_face_case(x1: float, x2: float, t: float, tol: float = BOUNDARY_TOL) -> str:
    """``"apex"`` (residual zero), ``"interior"``, ``"ray"`` (one-dimensional face) or ``"outside"``."""
    q0, q1, q2 = _mb_forms(x1, x2)
    res = np.array([q0 - 2.0 * t, q1, q2])
    scale = 1.0 + float(np.max(np.abs(res)))
    if np.max(np.abs(res)) <= tol * scale:
        return "apex"
    margin = mixed_binary_soc_margin(x1, x2, t)
    if margin > tol * scale:
        return "interior"
    if margin < -tol * scale:
        return "outside"
    return "ray"


def mixed_binary_defining_vectors(x1: float, x2: float, t: float) -> np.ndarray:
    """Rows are the four vectors whose orthogonal complement is the rounding space."""
    return np.array(
        [
            [2.0 * t, -x2, 0.0],
            [-x2, x1, 0.0],
            [t, -x2, x1],
            [x2 * (x1 - 1.0 + 2.0 * t), -x1 * x1 + x1 - 2.0 * t * x1 - 2.0 * t, 2.0 * x2],
        ]
    )


def mixed_binary_rounding_space(x1: float, x2: float, t: float, tol: float = BOUNDARY_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of the rounding space at a one-dimensional-face point.

    Raises
    ------
    WrongFaceCase
        If the residual is zero, interior to the polar cone, or outside it.
    """
    case = mixed_binary_face_case(x1, x2, t, tol)
    if case != "ray":
        raise WrongFaceCase(f"point lies in the {case!r} case, not on a one-dimensional face")
    V = mixed_binary_defining_vectors(x1, x2, t)
    return linalg.nullspace(V, rel_tol=1e-6)


# --- quadratic matrix programs -----------------------------------------------------


@dataclass(frozen=True)
class QmpBlocks:
    """Data of a quadratic matrix program in ``X in R^{r x k}``.

    Each form is ``tr(X^T AA X) + 2 tr(B^T X) + c``; ``blocks[0]`` is the
    objective.  Senses list the constraint senses in order.
    """

    r: int
    k: int
    blocks: tuple
    B: tuple
    c: tuple
    senses: tuple

    def __post_init__(self):
        if not (len(self.blocks) == len(self.B) == len(self.c) == len(self.senses) + 1):
            raise DimensionMismatch("blocks, B, c must have one entry more than senses")
        for Ab, Bb in zip(self.blocks, self.B):
            if np.shape(Ab) != (self.r, self.r) or np.shape(Bb) != (self.r, self.k):
                raise DimensionMismatch("block shapes do not match (r, k)")

    @property
    def m(self) -> int:
        return len(self.senses)


def qmp_build(blocks: QmpBlocks) -> QcqpInstance:
    """Vectorized instance with ``A_i = I_k (x) AA_i`` and ``b_i = vec(B_i)`` (column stacking)."""
    forms = [
        QuadraticForm(linalg.kron_identity(blocks.k, Ab), np.asarray(Bb, float).reshape(-1, order="F"), cc)
        for Ab, Bb, cc in zip(blocks.blocks, blocks.B, blocks.c)
    ]
    cons = [(f, Sense(s)) for f, s in zip(forms[1:], blocks.senses)]
    inst = QcqpInstance.build(forms[0], cons, name=f"qmp_r{blocks.r}_k{blocks.k}")
    inst._cache["qmp"] = blocks
    return inst


def random_qmp(r: int, k: int, m: int, rng: np.random.Generator) -> QmpBlocks:
    """Random QMP with a definite objective block and ``m`` inequality constraints.

    The objective block is shifted to be positive definite so that the
    strict-feasibility assumption holds at ``gamma = 0``; constraint blocks
    are Gaussian and ``c_i < 0`` makes ``X = 0`` strictly feasible.
    """
    def sym(M):
        return 0.5 * (M + M.T)

    A0 = sym(rng.normal(size=(r, r)))
    A0 += (1.0 - np.linalg.eigvalsh(A0)[0]) * np.eye(r)
    blocks = [A0] + [sym(rng.normal(size=(r, r))) for _ in range(m)]
    B = [rng.normal(size=(r, k)) for _ in range(m + 1)]
    c = [0.0] + [-1.0 - rng.uniform() for _ in range(m)]
    return QmpBlocks(r, k, tuple(blocks), tuple(B), tuple(c), tuple("le" for _ in range(m)))


# --- partition ----------------------------------------------------------------------


@dataclass(frozen=True)
class PartitionInstance:
    """Weights ``a`` of the partition QCQP ``min (a^T x)^2 s.t. x_i^2 = 1``."""

    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float).reshape(-1)
        if a.shape[0] < 2:
            raise InvalidInstance("partition needs n >= 2")
        if not np.all(a > 0):
            raise InvalidInstance("partition weights must be strictly positive")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def n(self) -> int:
        return self.a.shape[0]


def partition_instance(pi: PartitionInstance) -> QcqpInstance:
    n = pi.n
    cons = [(np.diag(np.eye(n)[i]), np.zeros(n), -1.0, "eq") for i in range(n)]
    return make_instance(
        (np.outer(pi.a, pi.a), np.zeros(n), 0.0),
        cons,
        cone="soc" if n == 2 else None,
        name="partition",
    )


def partition_opt_sdp(pi: PartitionInstance) -> float:
    """``max_i (a_i - sum_{j != i} a_j)_+^2``."""
    a = pi.a
    return float(np.max(np.maximum(2.0 * a - a.sum(), 0.0)) ** 2)


def partition_balanced(pi: PartitionInstance) -> bool:
    """``a_i <= sum_{j != i} a_j`` for every ``i``."""
    a = pi.a
    return bool(np.all(a <= a.sum() - a))


def partition_tau(pi: PartitionInstance, x) -> float:
    """Support value ``(a^T x)^2 + max_i (a_i s_i - sum_{j != i} a_j s_j)_+^2`` with
    ``s_i = sqrt(1 - x_i^2)``; ``inf`` outside the box ``[-1, 1]^n``."""
    x = np.asarray(x, dtype=float)
    if x.shape != pi.a.shape:
        raise DimensionMismatch("x and a differ in length")
    if np.any(np.abs(x) > 1.0):
        return math.inf
    s = pi.a * np.sqrt(1.0 - x * x)
    return float((pi.a @ x) ** 2 + np.max(np.maximum(2.0 * s - s.sum(), 0.0)) ** 2)


def partition_ssdp_membership(pi: PartitionInstance, x, t: float) -> bool:
    """Closed-form membership of ``(x, t)`` in the relaxation's epigraph."""
    return partition_tau(pi, x) <= 2.0 * t


@dataclass(frozen=True)
class NonexactnessWitness:
    x: np.ndarray
    t: float
    second_difference: float
    index: int
    delta: float
    h: float


def partition_nonexactness_witness(pi: PartitionInstance, h: float = 1e-3, delta: float = 0.01) -> NonexactnessWitness:
    """A point where the relaxation's boundary is curved.

    Puts ``x_i = 0`` at ``i = argmax a`` and ``1 - delta`` elsewhere, halving
    ``delta`` until ``a_i (1 - x_i^2) > sum_{j != i} a_j (1 - x_j^2)``.  On that
    open region the boundary function is smooth, and a nonzero normalized
    second difference ``(f(x+h e_i) - 2 f(x) + f(x-h e_i)) / h^2`` shows it is not
    piecewise linear, so the relaxation differs from the (polyhedral) convex hull.
    """
    a = pi.a
    i = int(np.argmax(a))
    while True:
        x = np.full(pi.n, 1.0 - delta)
        x[i] = 0.0
        slack = a * (1.0 - x * x)
        lhs, rhs = slack[i], slack.sum() - slack[i]
        if lhs > rhs and lhs - rhs > 1e-3 * lhs:
            break
        delta *= 0.5
    e = np.zeros(pi.n)
    e[i] = h
    f0 = partition_tau(pi, x)
    sd = (partition_tau(pi, x + e) - 2.0 * f0 + partition_tau(pi, x - e)) / (h * h)
    return NonexactnessWitness(x, 0.5 * f0, float(sd), i, delta, h)


def qmp_rounding_direction(inst: QcqpInstance, p: EpigraphPoint, face, rank_tol: float = 1e-6):
    """Rounding direction ``(w kron y, t')`` for a QMP boundary point.

    ``y`` spans the dominant direction of the summed diagonal blocks of the
    barrier's primal slack, projected onto ``ker A[f]`` of the ``r x r``
    aggregated block.  The equations are imposed for every multiplier
    orthogonal to the residual; there are ``m`` of them in ``k + 1`` unknowns,
    so a nonzero solution exists whenever ``k >= m``.

    Returns
    -------
    ndarray of shape (n + 1,) with unit norm, or None when the aggregated
    block has no kernel.
    """
    qb = inst._cache.get("qmp")
    if qb is None:
        raise ValueError("instance was not produced by qmp_build")
    r, k = qb.r, qb.k
    full = np.concatenate(([1.0], face.f))
    Ablk = np.tensordot(full, np.asarray(qb.blocks), axes=1)
    ker = linalg.kernel_basis(Ablk, rank_tol)
    if ker.empty:
        return None
    if face.primal_slack is not None:
        Y = face.primal_slack
        Ysum = sum(Y[j * r:(j + 1) * r, j * r:(j + 1) * r] for j in range(k))
        K = ker.vectors
        _, vecs = np.linalg.eigh(K.T @ Ysum @ K)
        y = K @ vecs[:, -1]
    else:
        y = ker.vectors[:, 0]
    y = y / np.linalg.norm(y)
    ell = face.residual
    etas = linalg.nullspace(ell.reshape(1, -1), rel_tol=1e-12)
    rows = []
    for eta in etas.T:
        g = np.tensordot(eta, inst.A_all, axes=1) @ p.x + eta @ inst.b_all
        rows.append(np.concatenate((g.reshape(k, r) @ y, [-eta[0]])))
    Z = linalg.nullspace(np.array(rows).reshape(-1, k + 1), rel_tol=1e-9)
    if Z.shape[1] == 0:
        return None
    sol = Z[:, 0]
    d = np.concatenate((np.kron(sol[:k], y), [sol[k]]))
    return d / np.linalg.norm(d)
