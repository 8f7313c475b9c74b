import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cplab import cpset, prob
from cplab import learning as lr
from cplab.errors import ValidationError
from cplab.rng import RandomStream


@pytest.fixture(scope="module")
def ens4():
    return lr.build_packing(4, 0.2, None, RandomStream(1))


@pytest.fixture(scope="module")
def ens8():
    return lr.build_packing(8, 0.1, 12, RandomStream(2))


def oracle_member(d, eps, omega):
    """p_omega rebuilt from the verbal construction, independent of PackingEnsemble."""
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
    m = len(pairs) // 2
    tilde = np.zeros((d, d))
    for k in range(m):
        (i0, j0), (i1, j1) = pairs[k], pairs[k + m]
        w0 = (1 + eps) / 2 if omega[k] == 0 else (1 - eps) / 2
        for (i, j), w in (((i0, j0), w0), ((i1, j1), 1 - w0)):
            for a in (i, j):
                for b in (i, j):
                    tilde[a, b] += w / 4 / m
    delta = 2 * d * np.diag(tilde) - 1
    u = np.diag((1 - delta / 2) / d)
    return 0.5 * tilde + 0.5 * u


def test_base_product():
    q = lr.base_product(0, 1, 4)
    expect = np.zeros((4, 4))
    expect[:2, :2] = 0.25
    assert np.array_equal(q.mass, expect)
    mix = cpset.MixtureOfProducts(np.ones(1), np.array([[0.5, 0.5, 0, 0]]))
    assert cpset.mixture_to_distribution(mix) == q
    for x in ((1, -1, 1, 1), (1, 1, -1, -1), (-1, 1, 1, -1)):
        assert cpset.cut_value(q, x).quad_form >= 0
    with pytest.raises(ValidationError):
        lr.base_product(2, 2, 4)


def test_edge_pair():
    e = ((0, 1), (2, 3))
    r0 = lr.edge_pair(e, 0, 0.2, 4)
    assert r0.mass[0, 1] == pytest.approx(0.15, abs=1e-15)
    assert lr.edge_pair(e, 0, 0.0, 4) == lr.edge_pair(e, 1, 0.0, 4)
    assert prob.tv_distance(r0, lr.edge_pair(e, 1, 0.2, 4)) == pytest.approx(0.2, abs=1e-15)


def test_structure_d4(ens4):
    assert ens4.m == 3
    assert ens4.pairs == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    assert ens4.matching == [((0, 1), (1, 2)), ((0, 2), (1, 3)), ((0, 3), (2, 3))]
    covered = sorted(p for e in ens4.matching for p in e)
    assert covered == ens4.pairs


@pytest.mark.parametrize("d", [4, 8, 12])
def test_members_valid(d):
    eps = 0.3
    ens = lr.build_packing(d, eps, 8, RandomStream(d))
    dmin = math.ceil(0.4 * ens.m)
    for a in range(ens.N):
        for b in range(a + 1, ens.N):
            assert lr.hamming(ens.code[a], ens.code[b]) >= dmin
    for k in range(ens.N):
        p = ens.member(k)
        assert np.allclose(np.diag(p.mass), 3 / (4 * d), rtol=0, atol=1e-15)
        assert np.array_equal(p.mass, p.mass.T)
        assert cpset.doubly_nonnegative_check(p).passed
        assert np.max(np.abs(p.mass - oracle_member(d, eps, ens.code[k]))) <= 1e-15
        delta = ens.diagonal_shift(ens.code[k])
        assert np.all(np.abs(delta) <= eps + 1e-12)
        assert abs(math.fsum(delta)) <= 1e-12
        u = ens.correction(ens.code[k])
        assert u.min() >= 0 and math.fsum(u.ravel()) == pytest.approx(1.0, abs=1e-14)
        assert np.count_nonzero(u - np.diag(np.diag(u))) == 0
        B = cpset.mixture_to_distribution(ens.member_mixture(k))
        assert np.abs(B.mass - p.mass).sum() <= 1e-12


def test_packing_tv_kl_examples(ens4):
    assert lr.packing_tv(ens4, 0, 0) == 0
    assert lr.packing_kl(ens4, 0, 0) == 0
    # closed form with Δ = 1 at m = 3 (the d=4 packing)
    e = lr.build_packing(4, 0.12, 2, RandomStream(0))
    e.code = np.array([[0, 0, 0], [1, 0, 0]], dtype=np.int8)
    e._cache.clear()
    assert lr.packing_tv(e, 0, 1) == pytest.approx(0.01, abs=1e-15)
    assert prob.tv_distance(e.member(0), e.member(1)) == pytest.approx(0.01, abs=1e-15)


def _pin_code(eps, code):
    e = lr.build_packing(4, eps, 2, RandomStream(0))
    e.code = np.array(code, dtype=np.int8)
    e._cache.clear()
    return e


def test_kl_direct_d4():
    # direct values frozen from cell-by-cell summation
    e = _pin_code(0.1, [[0, 0, 0], [1, 0, 0], [1, 1, 1]])
    direct1 = prob.kl_divergence(e.member(0), e.member(1))
    direct3 = prob.kl_divergence(e.member(0), e.member(2))
    assert direct1 == pytest.approx(0.0016722557955150084, rel=1e-10)
    assert direct3 == pytest.approx(0.005016767386545025, rel=1e-10)
    assert lr.packing_kl(e, 0, 1) == pytest.approx(direct1, rel=1e-10)
    assert lr.packing_kl(e, 0, 2) == pytest.approx(direct3, rel=1e-10)


def test_kl_upper_triangle_is_half():
    # the D/(8m) form counts only one triangle of the off-diagonal cells
    e = _pin_code(0.1, [[0, 0, 0], [1, 0, 0]])
    p, q = e.member(0).mass, e.member(1).mass
    iu = np.triu_indices(4, 1)
    upper = math.fsum(p[iu] * np.log(p[iu] / q[iu]))
    assert upper == pytest.approx(0.1 * math.log(1.1 / 0.9) / 24, rel=1e-10)


def test_closed_forms_match_direct_d8(ens8):
    g = np.random.default_rng(0)
    for _ in range(50):
        a, b = (int(x) for x in g.choice(ens8.N, 2, replace=False))
        p, q = ens8.member(a), ens8.member(b)
        assert lr.packing_tv(ens8, a, b) == pytest.approx(prob.tv_distance(p, q), abs=1e-12)
        assert lr.packing_kl(ens8, a, b) == pytest.approx(prob.kl_divergence(p, q), abs=1e-10)
        assert lr.upper_triangle_tv(p, q) == pytest.approx(prob.tv_distance(p, q), abs=1e-12)


@given(st.floats(0.01, 0.49))
def test_kl_quadratic_bound(eps):
    # eps ln((1+eps)/(1-eps)) <= 3 eps^2 / 2 for eps < 1/2, so KL <= 3Δ eps^2/(4m)
    m, D = 10, 4
    kl = D * eps * math.log((1 + eps) / (1 - eps)) / (4 * m)
    assert kl <= 3 * D * eps * eps / (4 * m) + 1e-15


def test_tv_separation_biconditional():
    for m in range(3, 60):
        for D in range(0, m + 1):
            eps = 0.2
            tv = D * eps / (4 * m)
            assert (tv >= 0.1 * eps - 1e-15) == (D >= 0.4 * m - 1e-12)


def test_code_distance(ens8):
    dmin = math.ceil(0.4 * ens8.m)
    C = ens8.code
    for a in range(ens8.N):
        for b in range(a + 1, ens8.N):
            assert lr.hamming(C[a], C[b]) >= dmin


def test_code_shortfall_reported():
    ens = lr.build_packing(4, 0.2, 50, RandomStream(0))
    # {0,1}^3 with distance >= 2 holds at most 4 words
    assert ens.N <= 4 and ens.shortfall == 50 - ens.N


def test_code_reproducible():
    a = lr.build_packing(8, 0.2, 10, RandomStream(9))
    b = lr.build_packing(8, 0.2, 10, RandomStream(9))
    assert np.array_equal(a.code, b.code)


def test_validation():
    with pytest.raises(ValidationError):
        lr.build_packing(6, 0.2)
    with pytest.raises(ValidationError):
        lr.build_packing(4, 0.5)


def test_export_roundtrip(ens4):
    obj = json.loads(json.dumps(ens4.to_dict(materialize=True)))
    assert obj["m"] == 3 and len(obj["distributions"]) == ens4.N
    assert np.array_equal(np.array(obj["distributions"][0]), ens4.member(0).mass)


def test_fano():
    assert lr.fano_sample_bound(2, 1.0, 0.99) == 0
    n1 = lr.fano_sample_bound(2**20, 0.01, 1 / 3)
    assert n1 == math.ceil((2 / 3 * 20 * math.log(2) - math.log(2)) / 0.01)
    # doubling ln N (minus the ln 2 offset) doubles the bound
    big = lr.fano_sample_bound(2**40, 0.01, 0.5)
    small = lr.fano_sample_bound(2**20, 0.01, 0.5)
    assert (big + 100 * math.log(2)) / (small + 100 * math.log(2)) == pytest.approx(2.0, rel=1e-3)
    with pytest.raises(ValidationError):
        lr.fano_sample_bound(1, 1.0, 0.5)


def test_fano_scaling_d2_over_eps2():
    def bound(d, eps):
        m = d * (d - 1) // 4
        N = 2 ** (0.05 * m)
        kl = 3 * eps * eps / 8
        return ((2 / 3) * math.log(N) - math.log(2)) / kl
    r = bound(80, 0.1) / bound(40, 0.1)
    assert 3.5 < r < 4.5
    assert bound(40, 0.05) / bound(40, 0.1) == pytest.approx(4.0, rel=1e-12)


def test_learner_baselines(ens4):
    res = lr.plugin_learner_experiment(ens4, [0, 10**6], 20, RandomStream(3))
    base = res[0]
    expect = np.mean([prob.tv_distance(prob.uniform_grid(4), ens4.member(k)) for k in range(ens4.N)])
    assert base.tv_mean == pytest.approx(expect, abs=0.05)
    assert res[1].tv_mean < 0.01
    assert res[1].ident_error == 0.0
    for r in res:
        assert 0 <= r.tv_q10 <= r.tv_q50 <= r.tv_q90 <= 1


def test_knee_helper():
    rows = [lr.LearnerResult(n, 10, 0, 0, 0, 0, e) for n, e in [(1, 0.9), (5, 0.5), (9, 0.2), (20, 0.4)]]
    assert lr.identification_knee(rows) == 9
    assert lr.identification_knee(rows[:2]) is None


def test_learner_deterministic(ens8):
    a = lr.plugin_learner_experiment(ens8, [50, 100], 30, RandomStream(4))
    b = lr.plugin_learner_experiment(ens8, [50, 100], 30, RandomStream(4))
    assert a == b
