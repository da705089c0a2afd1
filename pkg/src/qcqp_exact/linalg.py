"""Dense symmetric linear algebra used throughout the package.

The eigensolver is a cyclic Jacobi method.  The rotation loop lives in a
compiled extension when one is available; otherwise a vectorized numpy
implementation is used.  ``HAVE_COMPILED`` reports which one was loaded.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from .errors import EighNotConverged, NotPositiveDefinite, NotPsd

try:
    from ._jacobi import jacobi_sweeps as _compiled_sweeps
except ImportError:  # pragma: no cover - depends on the build
    _compiled_sweeps = None
from ._jacobi_py import jacobi_sweeps as _python_sweeps

HAVE_COMPILED = _compiled_sweeps is not None
_sweeps = _compiled_sweeps if HAVE_COMPILED else _python_sweeps

log = logging.getLogger(__name__)

JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 30
JACOBI_MAX_DIM = 64
DEFAULT_RANK_TOL = 1e-6


def symmetrize(M) -> np.ndarray:
    """Return ``(M + M.T) / 2`` as a float array; the result is exactly symmetric."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    return 0.5 * (M + M.T)


class EigenDecomposition(NamedTuple):
    """Ascending eigenvalues and matching orthonormal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def jacobi_eigh(S, backend: str | None = None) -> EigenDecomposition:
    """Cyclic Jacobi eigendecomposition.

    Parameters
    ----------
    S : array_like, shape (n, n)
        Symmetric input (symmetrized on entry).
    backend : {"compiled", "python", None}
        Force a kernel; ``None`` picks the compiled one when present.

    Returns
    -------
    EigenDecomposition

    Raises
    ------
    EighNotConverged
        If the sweep cap is reached before the off-diagonal mass falls below
        ``1e-14 * ||S||_F``.
    """
    a = np.ascontiguousarray(symmetrize(S))
    n = a.shape[0]
    if backend == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled Jacobi kernel is not available")
        kernel = _compiled_sweeps
    elif backend == "python":
        kernel = _python_sweeps
    else:
        kernel = _sweeps
    v = np.eye(n)
    tol = JACOBI_TOL * np.linalg.norm(a)
    sweeps = kernel(a, v, tol, JACOBI_MAX_SWEEPS)
    if sweeps < 0:
        raise EighNotConverged(f"Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps (n={n})")
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return EigenDecomposition(w[order], np.ascontiguousarray(v[:, order]))


def eigh(S, method: str | None = None) -> EigenDecomposition:
    """Symmetric eigendecomposition with ascending eigenvalues.

    ``method`` may be ``"jacobi"``, ``"lapack"`` or ``None``.  The default uses
    Jacobi up to dimension ``JACOBI_MAX_DIM`` and LAPACK beyond it.
    """
    S = symmetrize(S)
    if method is None:
        method = "jacobi" if S.shape[0] <= JACOBI_MAX_DIM else "lapack"
    if method == "jacobi":
        return jacobi_eigh(S)
    if method == "lapack":
        w, V = sla.eigh(S)
        return EigenDecomposition(w, V)
    raise ValueError(f"unknown eigh method {method!r}")


def lambda_min(S) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    S = symmetrize(S)
    if S.shape[0] == 1:
        return float(S[0, 0])
    return float(sla.eigh(S, eigvals_only=True, subset_by_index=[0, 0])[0])


def pd_tol(S) -> float:
    """Pivot tolerance ``1e-10 * max(1, trace(S) / n)`` for Cholesky-based checks."""
    S = np.asarray(S)
    return 1e-10 * max(1.0, float(np.trace(S)) / S.shape[0])


def cholesky(S):
    """Lower Cholesky factor of ``S``.

    Raises
    ------
    NotPositiveDefinite
        If the factorization fails or a squared pivot falls below ``pd_tol(S)``.
    """
    S = symmetrize(S)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    if np.min(np.diag(L)) ** 2 < pd_tol(S):
        raise NotPositiveDefinite("Cholesky pivot below pd_tol")
    return L


def solve_pd(S, v) -> np.ndarray:
    """Solve ``S u = v`` for symmetric positive definite ``S`` via Cholesky.

    Examples
    --------
    >>> solve_pd(np.diag([2.0, 4.0]), np.array([2.0, 4.0]))
    array([1., 1.])
    """
    L = cholesky(S)
    y = sla.solve_triangular(L, np.asarray(v, dtype=float), lower=True)
    return sla.solve_triangular(L.T, y, lower=False)


@dataclass(frozen=True)
class KernelBasis:
    """Orthonormal basis (columns of ``vectors``) of a numerical kernel."""

    vectors: np.ndarray
    threshold: float

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def empty(self) -> bool:
        return self.dim == 0


def kernel_basis(S, rel_tol: float = DEFAULT_RANK_TOL) -> KernelBasis:
    """Eigenspace of eigenvalues at most ``rel_tol * max(1, lambda_max)``.

    Raises
    ------
    NotPsd
        If ``lambda_min < -rel_tol * max(1, lambda_max)``.
    """
    w, V = eigh(S)
    threshold = rel_tol * max(1.0, float(w[-1]))
    if w[0] < -threshold:
        raise NotPsd(f"lambda_min = {w[0]:.3e} below -{threshold:.3e}")
    keep = w <= threshold
    return KernelBasis(V[:, keep].copy(), threshold)


def kron_identity(k: int, A) -> np.ndarray:
    """Block-diagonal ``I_k (x) A``."""
    if k < 1:
        raise ValueError("k must be positive")
    return np.kron(np.eye(k), symmetrize(A))


def nullspace(M, rel_tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis of the right nullspace of ``M`` via SVD."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    ncols = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(ncols)
    _, s, Vt = np.linalg.svd(M)
    scale = max(1.0, s[0]) if s.size else 1.0
    rank = int(np.sum(s > rel_tol * scale))
    return Vt[rank:].T.copy()


def orthonormalize(B, rel_tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis for the column span of ``B``."""
    B = np.asarray(B, dtype=float)
    if B.size == 0:
        return B.reshape(B.shape[0], 0)
    U, s, _ = np.linalg.svd(B, full_matrices=False)
    rank = int(np.sum(s > rel_tol * max(1.0, s[0])))
    return U[:, :rank].copy()
