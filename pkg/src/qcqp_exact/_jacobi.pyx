# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled cyclic-by-row Jacobi sweeps for dense symmetric matrices."""

from libc.math cimport sqrt, fabs


def jacobi_sweeps(double[:, ::1] a, double[:, ::1] v, double tol, int max_sweeps):
    """Run cyclic Jacobi sweeps in place.

    Parameters
    ----------
    a : ndarray, shape (n, n), C-contiguous
        Symmetric work matrix. On return its diagonal holds the eigenvalues
        (unsorted) and the off-diagonal part is below ``tol``.
    v : ndarray, shape (n, n), C-contiguous
        Accumulated rotations; pass the identity.
    tol : float
        Absolute stopping threshold on the off-diagonal Frobenius norm.
    max_sweeps : int
        Sweep cap.

    Returns
    -------
    int
        Number of sweeps performed, or ``-1`` if the cap was hit.
    """
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t p, q, k
    cdef int sweep
    cdef double off, apq, theta, t, c, s, akp, akq, tol2 = tol * tol
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        off *= 2.0
        if off <= tol2:
            return sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + sqrt(1.0 + theta * theta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    akp = a[p, k]
                    akq = a[q, k]
                    a[p, k] = c * akp - s * akq
                    a[q, k] = s * akp + c * akq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    akp = v[k, p]
                    akq = v[k, q]
                    v[k, p] = c * akp - s * akq
                    v[k, q] = s * akp + c * akq
    return -1
