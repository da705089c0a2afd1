import math

import numpy as np
import pytest
from scipy import stats

from qcqp_exact.experiments import (
    ExperimentReport,
    concentration_sweep,
    edm_exactness_experiment,
    gen_edm_instance,
    gen_semirandom_instance,
    phi,
    phi_quadrature,
    sample_ngoe,
    semirandom_construction,
)
from qcqp_exact.errors import SubspaceTooSmall
from qcqp_exact.rng import stream


def test_stream_is_deterministic_and_distinct():
    a = stream(7, 3).standard_normal(5)
    assert np.array_equal(a, stream(7, 3).standard_normal(5))
    assert not np.array_equal(a, stream(7, 4).standard_normal(5))
    with pytest.raises(ValueError):
        stream(-1)


def test_ngoe_moments():
    n, draws = 50, 200
    rng = stream(1)
    mats = np.array([sample_ngoe(n, rng) for _ in range(draws)])
    assert np.all(mats == np.transpose(mats, (0, 2, 1)))
    diag = mats[:, np.arange(n), np.arange(n)]
    assert abs(diag.var() - 1 / (2 * n)) < 0.3 / (2 * n)
    off = mats[:, 0, 1:]
    assert abs(off.var() - 1 / (4 * n)) < 0.3 / (4 * n)
    sigma = math.sqrt(1 / (4 * n))
    assert abs(mats.mean()) < 3 * sigma / math.sqrt(draws)


def test_ngoe_construction_variants_match():
    rng = stream(2)
    a = np.concatenate([np.diag(sample_ngoe(40, rng)) for _ in range(50)])
    b = np.concatenate([np.diag(sample_ngoe(40, rng, method="symmetrize")) for _ in range(50)])
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_ngoe_operator_norm():
    rng = stream(3)
    ok = 0
    for _ in range(50):
        w = np.linalg.eigvalsh(sample_ngoe(500, rng))
        ok += 0.9 <= max(-w[0], w[-1]) <= 1.1
    assert ok >= 0.95 * 50


def test_edm_instance_shape():
    inst = gen_edm_instance(400, 2, stream(4))
    assert inst.m_E == 2 and inst.m_I == 0
    assert np.array_equal(inst.A_all[0], np.eye(400))
    for b in inst.b_all[1:]:
        assert 0.85 <= np.linalg.norm(b) <= 1.15


def test_semirandom_instance():
    n, m = 20, 2
    bs = [np.arange(n, dtype=float) * (i + 1) for i in range(m + 1)]
    cs = [0.5, -1.0, 2.0]
    inst = gen_semirandom_instance(n, m, stream(5), bs, cs)
    assert inst.m_I == 1 and np.array_equal(inst.A_all[1], np.eye(n)) and inst.c_all[1] == -1.0
    assert np.array_equal(inst.b_all[0], bs[0]) and np.array_equal(inst.b_all[2:], np.array(bs[1:]))
    assert inst.c_all[0] == 0.5 and list(inst.c_all[2:]) == [-1.0, 2.0]
    homog = gen_semirandom_instance(n, m, stream(5), [np.zeros(n)] * 3, [0.0] * 3)
    assert np.all(homog.evaluate_all(np.zeros(n)) == [0.0, -1.0, 0.0, 0.0])


def test_phi_values():
    assert phi(0.0) == 0.0
    assert abs(phi(0.6) + 0.4) < 1e-15
    assert abs(phi_quadrature(0.5) + 0.2679492) < 1e-6
    with pytest.raises(ValueError):
        phi(1.0)


def test_concentration_zero_radius():
    rep = concentration_sweep(30, 2, [0.0], 3, seed=1)
    assert all(r["lambda_min"] == pytest.approx(1.0, abs=1e-14) for r in rep.records)
    assert len(rep.records) == 3


def test_edm_report_roundtrip():
    rep = edm_exactness_experiment([20], 2, 4, seed=3)
    assert len(rep.records) == 4
    frac = sum(r["success"] for r in rep.records) / 4
    assert rep.aggregates["20"]["success_fraction"] == frac
    csv = rep.to_csv()
    assert csv.startswith("# qcqp-exact edm csv v1") and csv.count("\n") == 6
    assert "millis" not in csv.splitlines()[1]
    assert "millis" in rep.to_csv(timings=True).splitlines()[1]
    for r in rep.records:
        if r["success"]:
            assert r["residual"] <= 1e-5


def test_semirandom_construction_invariants():
    inst = gen_semirandom_instance(120, 2, stream(6))
    res = semirandom_construction(inst, 0.25)
    assert np.linalg.norm(res.x_tilde) <= 1 + 1e-9
    assert res.orthogonality <= 1e-8


def test_semirandom_homogeneous_instance():
    n = 60
    inst = gen_semirandom_instance(n, 2, stream(8), [np.zeros(n)] * 3, [0.0] * 3)
    res = semirandom_construction(inst, 0.25)
    assert np.linalg.norm(res.x_tilde) <= 1 + 1e-9
    assert np.max(np.abs(res.residual_vector)) <= 5 * math.sqrt(0.25)
    assert res.obj_gap <= 5 * math.sqrt(0.25)


def test_semirandom_small_n_raises():
    inst = gen_semirandom_instance(6, 2, stream(9))
    with pytest.raises(SubspaceTooSmall):
        semirandom_construction(inst, 1e-6)
