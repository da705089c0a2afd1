import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcqp_exact.certify import face_multiplier, in_epigraph, verify_rounding_direction
from qcqp_exact.dual import epigraph_height, solve_sdp
from qcqp_exact.errors import InvalidInstance, WrongFaceCase
from qcqp_exact.model import EpigraphPoint
from qcqp_exact.oracle import partition_enumerate
from qcqp_exact.structured import (
    PartitionInstance,
    QmpBlocks,
    example1_gamma_membership,
    example1_instance,
    example1_ssdp,
    mixed_binary_defining_vectors,
    mixed_binary_face_case,
    mixed_binary_instance,
    mixed_binary_perspective,
    mixed_binary_rounding_space,
    mixed_binary_ssdp,
    mixed_binary_tau,
    partition_balanced,
    partition_instance,
    partition_nonexactness_witness,
    partition_opt_sdp,
    partition_ssdp_membership,
    partition_tau,
    qmp_build,
    qmp_rounding_direction,
    random_qmp,
)


def test_example1_gamma_examples():
    assert example1_gamma_membership(0, 0, 1)
    assert example1_gamma_membership(1, 0, 1)
    assert not example1_gamma_membership(1, 1, 1)


def test_example1_ssdp_matches_solver():
    inst = example1_instance()
    rng = np.random.default_rng(5)
    for _ in range(40):
        x = rng.uniform(-1.2, 1.2, 2)
        t = rng.uniform(-2, 2)
        tau = epigraph_height(inst, x)
        if math.isfinite(tau) and abs(2 * t - tau) < 1e-5 * (1 + abs(tau)):
            continue
        assert example1_ssdp(*x, t) == (2 * t >= tau)


@pytest.mark.parametrize(
    "point,expected",
    [((0.5, 0.5, 0.25), True), ((0.5, 0.5, 0.2), False), ((1.0, 0.7, 0.245), True)],
)
def test_mixed_binary_examples(point, expected):
    assert mixed_binary_ssdp(*point, tol=1e-12) == expected
    assert mixed_binary_perspective(*point) == expected


def test_mixed_binary_boundary_substitution():
    # q_obj - 2t = -0.25, q1 = -0.25, q2 = -sqrt(2)/4: both sides equal 0.5
    q0, q1 = 0.25 - 0.5, 0.5 * (0.5 - 1)
    q2 = math.sqrt(2) * 0.5 * (0.5 - 1)
    lhs = -q0 - q1
    rhs = math.sqrt((q0 - q1) ** 2 + 2 * q2 * q2)
    assert lhs == 0.5 and abs(rhs - 0.5) < 1e-15
    assert mixed_binary_face_case(0.5, 0.5, 0.25) == "ray"


def test_mixed_binary_rounding_space():
    B = mixed_binary_rounding_space(0.5, 0.5, 0.25)
    assert B.shape[1] >= 1
    assert np.allclose(mixed_binary_defining_vectors(0.5, 0.5, 0.25) @ B, 0.0, atol=1e-12)
    v = np.array([0.5, 0.5, 0.25])
    assert np.allclose(mixed_binary_defining_vectors(0.5, 0.5, 0.25) @ v, 0.0, atol=1e-15)
    with pytest.raises(WrongFaceCase):
        mixed_binary_rounding_space(0.5, 0.5, 0.4)


def test_mixed_binary_tau_matches_solver():
    inst = mixed_binary_instance()
    for x in [(0.5, 0.5), (0.2, -0.7), (0.9, 1.3), (1.0, 0.0)]:
        assert abs(epigraph_height(inst, x) - mixed_binary_tau(*x)) < 1e-7 * (1 + mixed_binary_tau(*x))


@settings(max_examples=200)
@given(st.floats(-1, 2), st.floats(-1, 2), st.floats(-1, 2))
def test_mixed_binary_closed_forms_agree(x1, x2, t):
    margin = mixed_binary_tau(x1, x2) - 2 * t if 0 < x1 <= 1 else 1.0
    if abs(x1) < 1e-9 or abs(margin) < 1e-9:
        return
    assert mixed_binary_ssdp(x1, x2, t) == mixed_binary_perspective(x1, x2, t)


def test_qmp_build_small_cases():
    one = QmpBlocks(1, 2, [np.eye(1), np.eye(1)], [np.zeros((1, 2)), np.zeros((1, 2))], [0.0, -1.0], ["le"])
    inst = qmp_build(one)
    assert np.array_equal(inst.A_all[0], np.eye(2))
    blk = np.array([[2.0, 1.0], [1.0, 3.0]])
    two = QmpBlocks(2, 1, [blk, np.eye(2)], [np.zeros((2, 1)), np.zeros((2, 1))], [0.0, -1.0], ["le"])
    assert np.array_equal(qmp_build(two).A_all[0], blk)


def test_qmp_spectrum_is_k_fold():
    qb = random_qmp(3, 4, 2, np.random.default_rng(0))
    inst = qmp_build(qb)
    for j in range(3):
        got = np.sort(np.linalg.eigvalsh(inst.A_all[j]))
        want = np.sort(np.repeat(np.linalg.eigvalsh(qb.blocks[j]), 4))
        assert np.allclose(got, want, atol=1e-12)


def test_qmp_linear_term_is_column_stacked():
    rng = np.random.default_rng(3)
    qb = random_qmp(2, 3, 1, rng)
    inst = qmp_build(qb)
    X = rng.standard_normal((2, 3))
    x = X.reshape(-1, order="F")
    val = np.trace(X.T @ qb.blocks[1] @ X) + 2 * np.trace(qb.B[1].T @ X) + qb.c[1]
    assert abs(inst.evaluate_all(x)[1] - val) < 1e-12


def test_qmp_rounding_direction_verifies():
    rng = np.random.default_rng(11)
    inst = qmp_build(random_qmp(3, 2, 1, rng))  # k = 1 would also do; k >= m
    found = 0
    for _ in range(6):
        x = rng.standard_normal(inst.n)
        p = EpigraphPoint(x, 0.5 * epigraph_height(inst, x))
        if in_epigraph(inst, p):
            continue
        d = qmp_rounding_direction(inst, p, face_multiplier(inst, p))
        assert d is not None and abs(np.linalg.norm(d) - 1) < 1e-12
        assert verify_rounding_direction(inst, p, d) is not None
        found += 1
    assert found > 0


def test_partition_examples():
    assert partition_opt_sdp(PartitionInstance([1, 1, 1])) == 0.0
    assert partition_opt_sdp(PartitionInstance([3, 1, 1])) == 1.0
    assert partition_opt_sdp(PartitionInstance([5, 1, 1])) == 9.0
    assert partition_enumerate([5, 1, 1]) == 9.0
    assert partition_balanced(PartitionInstance([1, 1, 1]))
    assert not partition_balanced(PartitionInstance([3, 1, 1]))
    assert partition_balanced(PartitionInstance([2, 1, 1]))
    with pytest.raises(InvalidInstance):
        PartitionInstance([1.0])
    with pytest.raises(InvalidInstance):
        PartitionInstance([1.0, -1.0])


def test_partition_membership_examples():
    pi = PartitionInstance([1.0, 1.0])
    assert partition_ssdp_membership(pi, [0.0, 0.0], 0.0)
    assert partition_ssdp_membership(pi, [1.0, 1.0], 2.0)
    assert not partition_ssdp_membership(pi, [1.5, 0.0], 100.0)


def test_partition_witness_examples():
    for a in ([1.0, 1.0], [2.0, 1.0, 1.0]):
        w = partition_nonexactness_witness(PartitionInstance(a))
        assert abs(w.second_difference) > 1e-4
    base = partition_nonexactness_witness(PartitionInstance([2.0, 1.0, 1.0]))
    scaled = partition_nonexactness_witness(PartitionInstance([20.0, 10.0, 10.0]))
    assert np.array_equal(base.x, scaled.x)
    assert abs(scaled.second_difference - 100 * base.second_difference) < 1e-6 * abs(scaled.second_difference)


@settings(max_examples=30)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_partition_tau_matches_solver(n, seed):
    rng = np.random.default_rng(seed)
    pi = PartitionInstance(rng.uniform(0.1, 1.0, n))
    x = rng.uniform(-1, 1, n)
    tau = epigraph_height(partition_instance(pi), x)
    assert abs(tau - partition_tau(pi, x)) < 1e-6 * (1 + abs(tau))


@settings(max_examples=30)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_partition_bounds(n, seed):
    pi = PartitionInstance(np.random.default_rng(seed).uniform(0.05, 1.0, n))
    opt_sdp = partition_opt_sdp(pi)
    assert partition_enumerate(pi) >= opt_sdp - 1e-12
    assert partition_balanced(pi) == (opt_sdp <= 1e-10)
