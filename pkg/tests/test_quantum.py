import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from cplab import quantum as qm
from cplab.errors import ValidationError
from cplab.quantum import DensityMatrix, PureProductState, UnitaryMatrix
from cplab.rng import RandomStream
from cplab.sep_instances import make_instance

seeds = st.integers(0, 2**32 - 1)


def test_density_validation():
    with pytest.raises(ValidationError):
        DensityMatrix(np.array([[0.5, 0.1], [0.0, 0.5]]))
    with pytest.raises(ValidationError):
        DensityMatrix(np.eye(2))
    with pytest.raises(ValidationError):
        DensityMatrix(np.diag([1.5, -0.5]))
    with pytest.raises(ValidationError):
        DensityMatrix(np.eye(4) / 4, (2, 3))


def test_density_json_roundtrip():
    rho = qm.random_density(4, np.random.default_rng(0))
    back = DensityMatrix.from_json(rho.to_json())
    assert np.array_equal(back.entries, rho.entries)


def test_maximally_mixed():
    assert np.array_equal(qm.maximally_mixed(4).entries, np.diag([0.25] * 4))
    d = 3
    assert np.allclose(qm.maximally_mixed(d * d).entries, np.kron(np.eye(d) / d, np.eye(d) / d), atol=1e-17)
    mm = qm.maximally_mixed(5)
    assert qm.trace_distance(mm, mm) == 0


def test_trace_distance_examples():
    a = np.zeros((3, 3))
    a[0, 0] = 1
    b = np.zeros((3, 3))
    b[2, 2] = 1
    assert qm.trace_distance(a, b) == pytest.approx(1.0, abs=1e-15)
    inst = make_instance(2, 0.1, rotate=False)
    assert qm.trace_distance(inst.rho, qm.maximally_mixed(4)) == pytest.approx(0.1, abs=1e-15)
    with pytest.raises(ValidationError):
        qm.trace_distance(np.eye(2) / 2, np.eye(3) / 3)


@given(seeds, st.integers(2, 6))
@settings(max_examples=30)
def test_trace_distance_metric_properties(seed, dim):
    g = np.random.default_rng(seed)
    r, s, t = (qm.random_density(dim, g) for _ in range(3))
    U = qm.haar_unitary(dim, g)
    d_rs = qm.trace_distance(r, s)
    assert d_rs == pytest.approx(qm.trace_distance(s, r), abs=1e-14)
    assert d_rs <= qm.trace_distance(r, t) + qm.trace_distance(t, s) + 1e-12
    assert 0 <= d_rs <= 1 + 1e-12
    assert qm.trace_distance(qm.conjugate(r, U), qm.conjugate(s, U)) == pytest.approx(d_rs, abs=1e-10)
    # independent route: nuclear norm from singular values
    assert d_rs == pytest.approx(0.5 * np.linalg.norm(r.entries - s.entries, "nuc"), abs=1e-12)


def test_schatten_examples():
    assert qm.schatten_norm(np.eye(4), math.inf) == 1
    assert qm.schatten_norm(np.diag([1.0, -1.0]), 1) == 2
    assert qm.schatten_norm(np.diag([3.0, 4.0]), 2) == pytest.approx(5.0)
    for d, eps in ((2, 0.1), (4, 0.3)):
        inst = make_instance(d, eps, rotate=True, rng=RandomStream(d))
        assert qm.schatten_norm(inst.W, math.inf) == pytest.approx(2 * eps / d**2, abs=1e-12)
    with pytest.raises(ValidationError):
        qm.schatten_norm(np.eye(2), 3)


@given(seeds, st.integers(1, 6))
@settings(max_examples=25)
def test_schatten_against_numpy(seed, dim):
    g = np.random.default_rng(seed)
    T = qm.ginibre(dim, g)
    assert qm.schatten_norm(T, 1) == pytest.approx(np.linalg.norm(T, "nuc"), rel=1e-12)
    assert qm.schatten_norm(T, 2) == pytest.approx(np.linalg.norm(T, "fro"), rel=1e-12)
    assert qm.schatten_norm(T, math.inf) == pytest.approx(np.linalg.norm(T, 2), rel=1e-12)


def test_haar_unitarity():
    assert qm.haar_unitary(16, RandomStream(0)).entries.shape == (16, 16)
    assert qm.unitarity_defect(qm.haar_unitary(16, RandomStream(0)).entries) <= 1e-12
    with pytest.raises(ValidationError):
        UnitaryMatrix(np.array([[1.0, 1.0], [0.0, 1.0]]))


def _haar_batch(n, dim, seed, fn=qm.haar_unitary):
    g = np.random.default_rng(seed)
    out = [fn(dim, g) for _ in range(n)]
    return np.array([u.entries if isinstance(u, UnitaryMatrix) else u for u in out])


def test_haar_second_moment():
    U = _haar_batch(100_000, 4, 1)
    assert np.mean(np.abs(U[:, 0, 0]) ** 2) == pytest.approx(0.25, abs=0.005)


def test_haar_first_moment_kills_naive_qr():
    # Haar: E[U_11] = 0. The unphased Q has a real, nonpositive-biased diagonal.
    n = 20_000
    haar = _haar_batch(n, 4, 2)
    naive = _haar_batch(n, 4, 2, qm.naive_qr_unitary)
    se = math.sqrt(0.25 / n)
    assert abs(np.mean(haar[:, 0, 0].real)) < 4 * se
    assert abs(np.mean(naive[:, 0, 0].real)) > 10 * se


def test_haar_first_column_uniform_on_sphere():
    # |U_11|^2 of a uniform unit vector in C^k is Beta(1, k-1)
    U = _haar_batch(20_000, 4, 3)
    res = stats.kstest(np.abs(U[:, 0, 0]) ** 2, stats.beta(1, 3).cdf)
    assert res.pvalue > 0.01


def test_haar_left_invariance():
    g = np.random.default_rng(11)
    V = qm.haar_unitary(4, g).entries
    a = _haar_batch(5000, 4, 4)
    b = np.einsum("ij,njk->nik", V, _haar_batch(5000, 4, 5))
    res = stats.ks_2samp(np.abs(a[:, 1, 2]), np.abs(b[:, 1, 2]))
    assert res.pvalue > 0.01


def test_conjugate_examples():
    rho = qm.random_density(6, np.random.default_rng(0))
    same = qm.conjugate(rho, np.eye(6))
    assert np.allclose(same.entries, rho.entries, atol=1e-16)
    U = qm.haar_unitary(36, RandomStream(1))
    big = qm.random_density(36, np.random.default_rng(1))
    c = qm.conjugate(big, U)
    assert np.trace(c.entries).real == pytest.approx(1.0, abs=1e-12)
    inst = make_instance(6, 0.3, rotate=False)
    rot = qm.conjugate(inst.rho, U)
    assert np.allclose(np.sort(rot.spectrum()), np.sort(inst.rho.spectrum()), atol=1e-9)
    with pytest.raises(ValidationError):
        qm.conjugate(rho, np.eye(4))


def test_product_pure_density():
    e = np.array([1.0, 0.0])
    r = qm.product_pure_density(PureProductState(e, e))
    assert np.array_equal(r.entries.real, np.diag([1.0, 0, 0, 0]))
    g = np.random.default_rng(3)
    x, y = qm.random_unit_vectors(2, 3, g)
    s = PureProductState(x, y)
    r = qm.product_pure_density(s)
    assert r.purity() == pytest.approx(1.0, abs=1e-12)
    M = qm.ginibre(9, g)
    M = M + M.conj().T
    dense = np.trace(r.entries @ M).real
    contracted = np.einsum("i,j,ijkl,k,l->", x.conj(), y.conj(), M.reshape(3, 3, 3, 3), x, y).real
    assert dense == pytest.approx(contracted, abs=1e-12)
    with pytest.raises(ValidationError):
        PureProductState(np.array([1.0, 1.0]), e)


def test_measurement_probabilities():
    g = np.random.default_rng(5)
    for _ in range(20):
        rho = qm.random_density(4, g)
        H = qm.ginibre(4, g)
        H = H + H.conj().T
        lam, V = np.linalg.eigh(H)
        E0 = (V[:, lam > 0] @ V[:, lam > 0].conj().T)
        E1 = np.eye(4) - E0
        p = [np.trace(E @ rho.entries).real for E in (E0, E1)]
        assert min(p) >= -1e-10 and sum(p) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("d", [2, 4, 6])
@pytest.mark.parametrize("eps", [0.1, 0.3, 0.5])
def test_purity_of_rotated_instances(d, eps):
    inst = make_instance(d, eps, rotate=True, rng=RandomStream(d))
    assert inst.rho.purity() == pytest.approx((1 + 4 * eps**2) / d**2, abs=1e-10)
