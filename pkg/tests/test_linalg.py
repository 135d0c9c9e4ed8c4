import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from manovaboot import linalg as la
from manovaboot.errors import DimensionError, ShapeError
from manovaboot.fixtures import COV_AD, DIAGNOSIS_COVARIANCES

from .helpers import exact_rank


def kron_by_definition(a, b):
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    out = np.zeros((a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            for k in range(b.shape[0]):
                for l in range(b.shape[1]):
                    out[i * b.shape[0] + k, j * b.shape[1] + l] = a[i, j] * b[k, l]
    return out


small = arrays(np.float64, st.tuples(st.integers(1, 3), st.integers(1, 3)),
               elements=st.floats(-5, 5, allow_nan=False))


class TestKronecker:
    def test_identity_case(self):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(la.kronecker(np.eye(1), m), m)

    def test_scalar_scaling(self):
        np.testing.assert_array_equal(la.kronecker([[2]], np.eye(2)), [[2, 0], [0, 2]])

    def test_centering_times_identity(self):
        p2 = np.array([[0.5, -0.5], [-0.5, 0.5]])
        expected = kron_by_definition(p2, np.eye(2))
        np.testing.assert_array_equal(la.kronecker(p2, np.eye(2)), expected)
        np.testing.assert_array_equal(expected[:2, :2], 0.5 * np.eye(2))
        np.testing.assert_array_equal(expected[:2, 2:], -0.5 * np.eye(2))

    @given(small, small)
    def test_matches_definition(self, a, b):
        np.testing.assert_allclose(la.kronecker(a, b), kron_by_definition(a, b))

    @given(small, small, small)
    def test_associative(self, a, b, c):
        lhs = la.kronecker(la.kronecker(a, b), c)
        rhs = la.kronecker(a, la.kronecker(b, c))
        assert np.abs(lhs - rhs).max() < 1e-12

    @given(small, small, st.floats(-3, 3))
    def test_bilinear(self, a, b, s):
        np.testing.assert_allclose(la.kronecker(s * a, b), s * la.kronecker(a, b), atol=1e-12)
        np.testing.assert_allclose(la.kronecker(a + a, b), la.kronecker(a, b) + la.kronecker(a, b), atol=1e-12)

    def test_size_cap(self):
        with pytest.raises(DimensionError):
            la.kronecker(np.eye(100), np.eye(100), max_entries=10_000)


class TestStructuredMatrices:
    def test_centering_small(self):
        np.testing.assert_array_equal(la.centering_matrix(1), [[0.0]])
        np.testing.assert_array_equal(la.centering_matrix(2), [[0.5, -0.5], [-0.5, 0.5]])

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
    def test_centering_properties(self, n):
        p = la.centering_matrix(n)
        np.testing.assert_allclose(p, p.T)
        np.testing.assert_allclose(p @ p, p, atol=1e-14)
        np.testing.assert_allclose(p.sum(axis=1), 0, atol=1e-14)
        assert la.numerical_rank(p) == n - 1 if n > 1 else True
        assert np.trace(p) == pytest.approx(n - 1)

    def test_averaging(self):
        np.testing.assert_array_equal(la.averaging_matrix(1), [[1.0]])
        np.testing.assert_array_equal(la.averaging_matrix(2), [[0.5, 0.5], [0.5, 0.5]])
        np.testing.assert_allclose(la.averaging_matrix(3) @ [1, 2, 3], [2, 2, 2])

    @pytest.mark.parametrize("n", [1, 2, 4, 7])
    def test_averaging_properties(self, n):
        j = la.averaging_matrix(n)
        np.testing.assert_allclose(j @ j, j, atol=1e-14)
        assert la.numerical_rank(j) == 1
        assert np.abs(la.centering_matrix(n) @ j).max() < 1e-14

    @pytest.mark.parametrize("fn", [la.centering_matrix, la.averaging_matrix])
    def test_zero_order_rejected(self, fn):
        with pytest.raises(DimensionError):
            fn(0)

    @pytest.mark.parametrize("n", [1, 2, 3, 6])
    def test_bases_reproduce_projections(self, n):
        c = la.centering_basis(n)
        np.testing.assert_allclose(c.T @ c, la.centering_matrix(n), atol=1e-14)
        a = la.averaging_basis(n)
        np.testing.assert_allclose(a.T @ a, la.averaging_matrix(n), atol=1e-14)


def assert_penrose(m, mp, tol):
    scale = max(1.0, np.abs(m).max())
    assert np.abs(m @ mp @ m - m).max() <= tol * scale
    assert np.abs(mp @ m @ mp - mp).max() <= tol * max(1.0, np.abs(mp).max())
    assert np.abs((m @ mp).T - m @ mp).max() <= tol
    assert np.abs((mp @ m).T - mp @ m).max() <= tol


class TestPseudoInverse:
    def test_diagonal(self):
        inv, rank = la.pseudo_inverse(np.diag([2.0, 0.0]))
        np.testing.assert_allclose(inv, np.diag([0.5, 0.0]))
        assert rank == 1

    def test_identity(self):
        inv, rank = la.pseudo_inverse(np.eye(3))
        np.testing.assert_allclose(inv, np.eye(3))
        assert rank == 3

    def test_centering_is_own_inverse(self):
        p3 = la.centering_matrix(3)
        inv, rank = la.pseudo_inverse(p3)
        assert rank == 2
        np.testing.assert_allclose(inv, p3, atol=1e-14)
        assert_penrose(p3, inv, 1e-12)

    def test_zero_matrix(self):
        inv, rank = la.pseudo_inverse(np.zeros((2, 3)))
        assert rank == 0 and inv.shape == (3, 2) and not inv.any()

    @settings(max_examples=60)
    @given(st.integers(1, 7), st.integers(1, 7), st.integers(0, 7), st.integers(0, 2**32 - 1))
    def test_penrose_conditions_random(self, m, n, r, seed):
        rng = np.random.default_rng(seed)
        r = min(r, m, n)
        a = rng.standard_normal((m, r)) @ rng.standard_normal((r, n)) if r else rng.standard_normal((m, n))
        inv, _ = la.pseudo_inverse(a)
        assert_penrose(a, inv, 1e-8)

    @settings(max_examples=60)
    @given(arrays(np.int64, st.tuples(st.integers(1, 5), st.integers(1, 5)), elements=st.integers(-3, 3)))
    def test_rank_matches_exact_elimination(self, a):
        if not a.any():
            assert la.numerical_rank(a.astype(float)) == 0
            return
        assert la.numerical_rank(a.astype(float)) == exact_rank(a.tolist())


class TestSymSqrt:
    def test_identity(self):
        a = la.sym_sqrt(np.eye(2))
        np.testing.assert_allclose(a @ a.T, np.eye(2), atol=1e-14)

    def test_diagonal(self):
        a = la.sym_sqrt(np.diag([4.0, 9.0]))
        np.testing.assert_allclose(a @ a.T, np.diag([4.0, 9.0]), atol=1e-13)

    @pytest.mark.parametrize("name", ["AD", "MCI", "SCC"])
    def test_eeg_covariances(self, name):
        s = DIAGNOSIS_COVARIANCES[name]
        a = la.sym_sqrt(s)
        assert np.abs(a @ a.T - s).max() < 1e-10

    def test_ad_fixture_values(self):
        assert COV_AD[5, 5] == 13.84 and COV_AD[0, 0] == 5.14 and COV_AD[2, 5] == 6.63

    def test_negative_eigenvalues_clipped(self):
        s = np.diag([1.0, -1e-9])
        a = la.sym_sqrt(s)
        np.testing.assert_allclose(a @ a.T, np.diag([1.0, 0.0]), atol=1e-15)

    def test_asymmetric_rejected(self):
        with pytest.raises(ShapeError):
            la.sym_sqrt(np.array([[1.0, 0.5], [0.0, 1.0]]))

    @settings(max_examples=50)
    @given(st.integers(1, 6), st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_random_psd(self, p, k, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((p, k))
        s = x @ x.T
        lam, u = np.linalg.eigh(s)
        clipped = (u * np.clip(lam, 0, None)) @ u.T
        a = la.sym_sqrt(s)
        assert np.abs(a @ a.T - clipped).max() < 1e-10 * max(1.0, np.abs(s).max())


class TestQuadraticForms:
    @settings(max_examples=40)
    @given(st.integers(1, 8), st.integers(0, 10), st.integers(0, 2**32 - 1))
    def test_matches_pseudo_inverse(self, r, k, seed):
        rng = np.random.default_rng(seed)
        mats, ys, expected = [], [], []
        for _ in range(5):
            x = rng.standard_normal((r, k))
            kk = x @ x.T
            y = rng.standard_normal(r)
            inv, _ = la.pseudo_inverse(kk) if kk.any() else (np.zeros((r, r)), 0)
            mats.append(kk)
            ys.append(y)
            expected.append(y @ inv @ y)
        got = la.pinv_quadratic_forms(np.array(mats), np.array(ys))
        np.testing.assert_allclose(got, expected, rtol=1e-6, atol=1e-8)
