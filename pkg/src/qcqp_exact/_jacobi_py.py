"""Pure numpy fallback for the Jacobi kernel.

Uses a round-robin (tournament) ordering so that each step applies ``n // 2``
disjoint rotations at once through fancy indexing.  The rotation formula is the
same as in the compiled kernel, only the visiting order differs.
"""

import numpy as np


def _tournament(n):
    """Round-robin pairings of ``range(n)``; ``n`` must be even."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        left, right = players[:half], players[half:][::-1]
        p = np.array([min(a, b) for a, b in zip(left, right)])
        q = np.array([max(a, b) for a, b in zip(left, right)])
        rounds.append((p, q))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_sweeps(a, v, tol, max_sweeps):
    """Same contract as the compiled ``jacobi_sweeps``; works in place."""
    n = a.shape[0]
    if n == 1:
        return 0
    m = n + (n % 2)
    rounds = _tournament(m)
    if m != n:
        # drop pairs involving the phantom index n
        rounds = [(p[q < n], q[q < n]) for p, q in rounds]
    iu = np.triu_indices(n, 1)
    for sweep in range(max_sweeps + 1):
        off = 2.0 * np.sum(a[iu] ** 2)
        if off <= tol * tol:
            return sweep
        if sweep == max_sweeps:
            break
        for p, q in rounds:
            apq = a[p, q]
            live = apq != 0.0
            if not np.any(live):
                continue
            p, q, apq = p[live], q[live], apq[live]
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = np.where(theta >= 0.0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(1.0 + theta * theta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * ap - s * aq
            a[:, q] = s * ap + c * aq
            ap, aq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * ap - s[:, None] * aq
            a[q, :] = s[:, None] * ap + c[:, None] * aq
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
    return -1
