"""End-to-end acceptance checks, one test per criterion.

Each test stores a one-line outcome through the ``record`` fixture; the lines
are printed in the terminal summary under "acceptance criteria".
"""

import math
import time

import numpy as np
import pytest

from qcqp_exact import linalg
from qcqp_exact.certify import (
    dual_interior_certificate,
    face_multiplier,
    in_epigraph,
    verify_rounding_direction,
)
from qcqp_exact.dual import dual_value, epigraph_height, solve_sdp
from qcqp_exact.errors import QcqpError
from qcqp_exact.experiments import (
    concentration_sweep,
    edm_exactness_experiment,
    phi,
    phi_quadrature,
    semirandom_experiment,
)
from qcqp_exact.model import EpigraphPoint, gamma_membership, make_instance
from qcqp_exact.oracle import GridSpec, fd_gradient_check, grid_error_bound, grid_opt, multistart_upper_bound, partition_enumerate
from qcqp_exact.structured import (
    PartitionInstance,
    example1_gamma_membership,
    example1_instance,
    mixed_binary_instance,
    mixed_binary_perspective,
    mixed_binary_rounding_space,
    mixed_binary_ssdp,
    mixed_binary_tau,
    partition_balanced,
    partition_instance,
    partition_nonexactness_witness,
    partition_opt_sdp,
    qmp_build,
    qmp_rounding_direction,
    random_qmp,
)

from conftest import random_sym

pytestmark = pytest.mark.acceptance


def test_criterion_01_example1_cone(record):
    t0 = time.perf_counter()
    inst = example1_instance()
    rng = np.random.default_rng(101)
    G = rng.uniform(-2, 2, size=(10_000, 3))
    band = 1e-9
    mismatches = skipped = 0
    for g in G:
        g0, g1, g2 = g
        if min(abs(g0), abs(g1), abs(g2 - math.hypot(g0, g1))) <= band:
            skipped += 1
            continue
        mismatches += gamma_membership(inst, g, tol=0.0) != example1_gamma_membership(*g)
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 5.0
    record(1, ok, f"mismatches={mismatches} in_band={skipped} time={elapsed:.2f}s")
    assert mismatches == 0
    assert elapsed < 5.0


def test_criterion_02_mixed_binary(record):
    t0 = time.perf_counter()
    inst = mixed_binary_instance()
    rng = np.random.default_rng(102)
    band = 1e-6
    closed_mismatch = solver_mismatch = in_band = 0
    for x1, x2, t in rng.uniform(-1, 2, size=(10_000, 3)):
        tau = mixed_binary_tau(x1, x2)
        soc = mixed_binary_ssdp(x1, x2, t)
        persp = mixed_binary_perspective(x1, x2, t)
        if math.isfinite(tau) and abs(2 * t - tau) <= band * max(1.0, abs(tau)):
            in_band += 1
            continue
        closed_mismatch += soc != persp
        solver_tau = epigraph_height(inst, [x1, x2])
        solver_mismatch += (2 * t >= solver_tau) != soc
    verified = 0
    for _ in range(1000):
        x1, x2 = rng.uniform(0.05, 0.95), rng.uniform(-1, 2)
        t = x2 * x2 / (2 * x1)
        B = mixed_binary_rounding_space(x1, x2, t)
        d = B @ rng.standard_normal(B.shape[1])
        d /= np.linalg.norm(d)
        verified += verify_rounding_direction(inst, EpigraphPoint(np.array([x1, x2]), t), d) is not None
    elapsed = time.perf_counter() - t0
    ok = closed_mismatch == 0 and solver_mismatch == 0 and verified == 1000 and elapsed < 120
    record(2, ok, f"closed-form mismatches={closed_mismatch} solver mismatches={solver_mismatch} "
                  f"in_band={in_band} rounding verified={verified}/1000 time={elapsed:.1f}s")
    assert closed_mismatch == 0 and solver_mismatch == 0
    assert verified == 1000
    assert elapsed < 120


def test_criterion_03_partition(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(103)
    worst_a = 0.0
    bad = []
    for j in range(100):
        n = 2 + j % 7
        a = rng.uniform(0.0, 1.0, n)
        a[a == 0.0] = 1.0  # keep a in (0, 1]
        pi = PartitionInstance(a)
        closed = partition_opt_sdp(pi)
        solved = solve_sdp(partition_instance(pi)).opt_sdp
        worst_a = max(worst_a, abs(closed - solved))
        if abs(closed - solved) > 1e-5:
            bad.append(("a", j))
        if partition_balanced(pi) != (closed <= 1e-10):
            bad.append(("b", j))
        if partition_enumerate(pi) < closed - 1e-12:
            bad.append(("c", j))
        if abs(partition_nonexactness_witness(pi).second_difference) <= 1e-4:
            bad.append(("e", j))
    gap_ok = partition_enumerate([1, 1, 1]) == 1.0 and partition_opt_sdp(PartitionInstance([1, 1, 1])) == 0.0
    if not gap_ok:
        bad.append(("d", 0))
    elapsed = time.perf_counter() - t0
    record(3, not bad and elapsed < 120, f"failures={bad[:5]} max|closed-solver|={worst_a:.2e} time={elapsed:.1f}s")
    assert not bad
    assert elapsed < 120


def _trust_region_instance(n, rng):
    A0 = random_sym(rng, n)
    b0 = rng.standard_normal(n)
    M = rng.standard_normal((n, n))
    A1 = M @ M.T / n + 0.5 * np.eye(n)
    b1 = rng.standard_normal(n)
    inv = np.linalg.inv(A1)
    c1 = float(b1 @ inv @ b1) - 1.0  # feasible set is an ellipsoid of "radius" 1
    inst = make_instance((A0, b0, 0.0), [(A1, b1, c1, "le")])
    center = -inv @ b1
    half = np.sqrt(np.diag(inv)) * 1.001
    return inst, center - half, center + half


def test_criterion_04_trust_region(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(104)
    points = {1: 3001, 2: 401, 3: 101, 4: 41}
    worst_ratio = 0.0
    for j in range(100):
        n = 1 + j % 4
        inst, lo, hi = _trust_region_instance(n, rng)
        sol = solve_sdp(inst)
        spec = GridSpec(lo, hi, points[n])
        g = grid_opt(inst, spec)
        bound = grid_error_bound(inst, spec, multiplier_bound=float(sol.gamma_star.gamma[0]))
        worst_ratio = max(worst_ratio, abs(sol.opt_sdp - g.value) / bound)
    elapsed = time.perf_counter() - t0
    ok = worst_ratio <= 2.0 and elapsed < 300
    record(4, ok, f"max |solver-grid|/bound={worst_ratio:.3f} (limit 2) time={elapsed:.1f}s")
    assert worst_ratio <= 2.0
    assert elapsed < 300


def _interior_instance(rng):
    n, m = int(rng.integers(2, 5)), int(rng.integers(1, 4))
    m_I = int(rng.integers(0, m + 1))
    gamma = rng.uniform(0.2, 2.0, m)
    As = [random_sym(rng, n) for _ in range(m)]
    R = random_sym(rng, n)
    R += (0.5 - np.linalg.eigvalsh(R)[0]) * np.eye(n)
    A0 = R - sum(g * A for g, A in zip(gamma, As))
    cons = [(A, rng.standard_normal(n), float(rng.normal()), "le" if i < m_I else "eq") for i, A in enumerate(As)]
    return make_instance((A0, rng.standard_normal(n), 0.0), cons), gamma


def test_criterion_05_dual_calculus(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(105)
    worst_fd = 0.0
    worst_concavity = 0.0
    for _ in range(100):
        inst, gamma = _interior_instance(rng)
        worst_fd = max(worst_fd, fd_gradient_check(inst, gamma, h=1e-6))
        other = gamma + rng.uniform(-0.15, 0.15, gamma.shape)
        if not gamma_membership(inst, np.concatenate(([1.0], other)), 0.0):
            continue
        d1 = dual_value(inst, gamma)["value"]
        d2 = dual_value(inst, other)["value"]
        dm = dual_value(inst, 0.5 * (gamma + other))["value"]
        avg = 0.5 * (d1 + d2)
        worst_concavity = max(worst_concavity, (avg - dm) / max(1.0, abs(avg)))
    elapsed = time.perf_counter() - t0
    ok = worst_fd <= 1e-5 and worst_concavity <= 1e-9
    record(5, ok, f"max fd rel err={worst_fd:.2e} max concavity violation={worst_concavity:.2e} time={elapsed:.1f}s")
    assert worst_fd <= 1e-5
    assert worst_concavity <= 1e-9


def test_criterion_06_qmp(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(106)
    total = verified = 0
    gaps = []
    for _ in range(20):
        inst = qmp_build(random_qmp(3, 3, 2, rng))
        sampled = 0
        while sampled < 5:
            x = rng.standard_normal(inst.n)
            tau = epigraph_height(inst, x)
            p = EpigraphPoint(x, 0.5 * tau)
            if not math.isfinite(tau) or in_epigraph(inst, p):
                continue
            sampled += 1
            total += 1
            try:
                d = qmp_rounding_direction(inst, p, face_multiplier(inst, p))
            except QcqpError:
                continue
            if d is not None and verify_rounding_direction(inst, p, d) is not None:
                verified += 1
        sol = solve_sdp(inst)
        if dual_interior_certificate(inst, sol, delta=1e-6, tol=1e-6).certified:
            gaps.append(0.0)
        else:
            ub = multistart_upper_bound(inst, -3 * np.ones(inst.n), 3 * np.ones(inst.n), starts=32, seed=0)
            gaps.append(ub.value - sol.opt_sdp)
    frac = verified / total
    worst_gap = max(gaps)
    elapsed = time.perf_counter() - t0
    ok = frac >= 0.99 and worst_gap <= 1e-5 and elapsed < 300
    record(6, ok, f"verified={verified}/{total} ({frac:.3f}) max|Opt-Opt_SDP|={worst_gap:.2e} time={elapsed:.1f}s")
    assert frac >= 0.99
    assert worst_gap <= 1e-5
    assert elapsed < 300


def test_criterion_07_edm(record):
    t0 = time.perf_counter()
    rep = edm_exactness_experiment([50, 100, 200], 2, 50, seed=7)
    fr = [rep.aggregates[str(n)]["success_fraction"] for n in (50, 100, 200)]
    elapsed = time.perf_counter() - t0
    monotone = all(b >= a - 0.1 for a, b in zip(fr, fr[1:]))
    ok = fr[-1] >= 0.9 and monotone and elapsed < 600
    record(7, ok, f"success fractions n=50,100,200: {fr} time={elapsed:.1f}s")
    assert fr[-1] >= 0.9
    assert monotone
    assert elapsed < 600


def test_criterion_08_concentration(record):
    t0 = time.perf_counter()
    rep = concentration_sweep(400, 2, [0.3, 0.5, 0.8], 20, seed=7)
    lam = max(v["max_abs_lambda_dev"] for v in rep.aggregates.values())
    cap = max(v["max_abs_cap_dev"] for v in rep.aggregates.values())
    quad = max(abs(phi_quadrature(r) - phi(r)) for r in np.arange(1, 10) / 10)
    elapsed = time.perf_counter() - t0
    ok = lam <= 0.1 and cap <= 0.1 and quad <= 1e-6 and elapsed < 300
    record(8, ok, f"max lambda dev={lam:.4f} max cap dev={cap:.4f} max quadrature err={quad:.1e} time={elapsed:.1f}s")
    assert lam <= 0.1 and cap <= 0.1
    assert quad <= 1e-6
    assert elapsed < 300


def test_criterion_09_semirandom(record):
    t0 = time.perf_counter()
    eps = 0.25
    rep = semirandom_experiment(300, 2, eps, 20, seed=7)
    agg = rep.aggregates
    elapsed = time.perf_counter() - t0
    lim = 5 * math.sqrt(eps)
    ok = (agg["succeeded"] == 20 and agg["max_norm"] <= 1 + 1e-9 and agg["max_residual"] <= lim
          and agg["max_obj_gap"] <= lim and elapsed < 600)
    record(9, ok, f"succeeded={agg['succeeded']}/20 max|q_i|={agg['max_residual']:.2e} "
                  f"max obj gap={agg['max_obj_gap']:.2e} measured constant={agg['measured_constant']:.2e} "
                  f"time={elapsed:.1f}s")
    assert agg["succeeded"] == 20
    assert agg["max_norm"] <= 1 + 1e-9
    assert agg["max_residual"] <= lim and agg['max_obj_gap'] <= lim
    assert elapsed < 600


def test_criterion_10_infrastructure(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(110)
    worst_rec = worst_orth = 0.0
    for n in range(2, 41):
        for _ in range(1000):
            S = random_sym(rng, n)
            w, V = linalg.jacobi_eigh(S)
            worst_rec = max(worst_rec, np.linalg.norm(V @ (w[:, None] * V.T) - S) / max(1.0, np.linalg.norm(S)))
            worst_orth = max(worst_orth, np.linalg.norm(V.T @ V - np.eye(n)))
    csv_same = True
    for run in (
        lambda w: edm_exactness_experiment([20, 30], 2, 8, seed=5, workers=w),
        lambda w: semirandom_experiment(80, 2, 0.25, 4, seed=5, workers=w),
    ):
        csv_same &= run(1).to_csv() == run(8).to_csv()
    elapsed = time.perf_counter() - t0
    ok = worst_rec <= 1e-10 and worst_orth <= 1e-10 and csv_same
    record(10, ok, f"max reconstruction={worst_rec:.1e} max orthogonality={worst_orth:.1e} "
                   f"csv identical 1 vs 8 workers={csv_same} time={elapsed:.1f}s")
    assert worst_rec <= 1e-10 and worst_orth <= 1e-10
    assert csv_same
