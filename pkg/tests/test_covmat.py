import math

import numpy as np
import pytest

from hyperkernel.covmat import (
    CholFactor,
    PointSet,
    assemble,
    cholesky,
    pairwise_dist,
    simple_krige,
    solve,
)
from hyperkernel.errors import DomainError, InvalidKernelError, NotPositiveDefiniteError
from hyperkernel.kernels import GeneralizedWendland, Hypergeometric, Matern


def gaussian_elimination_solve(a, b):
    """Independent dense solver: plain Gaussian elimination with pivoting."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    n = a.shape[0]
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if p != k:
            a[[k, p]] = a[[p, k]]
            b[[k, p]] = b[[p, k]]
        for i in range(k + 1, n):
            f = a[i, k] / a[k, k]
            a[i, k:] -= f * a[k, k:]
            b[i] -= f * b[k]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - a[i, i + 1 :] @ x[i + 1 :]) / a[i, i]
    return x


class TestPointSet:
    def test_shape_and_validation(self):
        ps = PointSet(np.array([[0.0, 0.0], [1.0, 1.0]]))
        assert ps.n == 2 and ps.dim == 2
        with pytest.raises(DomainError):
            PointSet(np.array([[np.nan, 0.0]]))

    def test_one_dimensional_input_is_promoted(self):
        ps = PointSet(np.array([0.0, 1.0, 2.0]))
        assert ps.n == 3 and ps.dim == 1


class TestPairwiseDist:
    def test_single_point(self):
        assert pairwise_dist(PointSet(np.array([[1.0, 2.0]]))).tolist() == [[0.0]]

    def test_three_four_five(self):
        d = pairwise_dist(PointSet(np.array([[0.0, 0.0], [3.0, 4.0]])))
        assert d[0, 1] == pytest.approx(5.0)
        assert d[1, 0] == d[0, 1]
        assert d[0, 0] == 0.0

    def test_triangle_inequality(self):
        rng = np.random.default_rng(0)
        pts = PointSet(rng.random((12, 3)))
        d = pairwise_dist(pts)
        for i in range(12):
            for j in range(12):
                for k in range(12):
                    assert d[i, j] <= d[i, k] + d[k, j] + 1e-12


class TestAssemble:
    def test_single_point(self):
        cov = assemble(Hypergeometric(0, 1, 1, 1), 2.0, 0.5, PointSet(np.array([[0.0]])))
        assert cov.to_dense().tolist() == [[2.5]]

    def test_two_far_points(self):
        pts = PointSet(np.array([[0.0, 0.0], [5.0, 0.0]]))
        cov = assemble(Hypergeometric(0, 1, 1, 2), 1.5, 0.25, pts)
        assert np.allclose(cov.to_dense(), np.diag([1.75, 1.75]))
        assert cov.pct_zero == pytest.approx(50.0)

    def test_pct_zero_matches_brute_force_pair_count(self):
        xs = np.linspace(0.0, 9.0, 10)
        gx, gy = np.meshgrid(xs, xs)
        pts = PointSet(np.column_stack([gx.ravel(), gy.ravel()]))
        spec = Hypergeometric(0, 1, 1.5, 2)
        cov = assemble(spec, 1.0, 0.0, pts, storage="csr")
        d = pairwise_dist(pts)
        expected = 100.0 * np.count_nonzero(d >= 1.5) / pts.n**2
        assert cov.pct_zero == pytest.approx(expected, abs=1e-12)

    def test_csr_equals_dense_exactly(self):
        rng = np.random.default_rng(5)
        pts = PointSet(rng.random((60, 2)))
        for spec in (Hypergeometric(0.5, 2, 0.4, 2), GeneralizedWendland(0, 4, 0.3, 2)):
            dense = assemble(spec, 1.7, 0.1, pts, storage="dense")
            sparse = assemble(spec, 1.7, 0.1, pts, storage="csr")
            np.testing.assert_array_equal(sparse.to_dense(), dense.to_dense())
            assert sparse.pct_zero == dense.pct_zero

    def test_sparse_assembly_examines_fewer_pairs(self):
        rng = np.random.default_rng(6)
        pts = PointSet(rng.random((400, 2)))
        cov = assemble(Hypergeometric(0, 1, 0.1, 2), 1.0, 0.0, pts, storage="csr")
        assert cov.pairs_examined < 0.2 * pts.n**2

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(7)
        coords = rng.random((25, 2))
        perm = rng.permutation(25)
        spec = Hypergeometric(0, 2, 0.5, 2)
        c1 = assemble(spec, 1.0, 0.2, PointSet(coords)).to_dense()
        c2 = assemble(spec, 1.0, 0.2, PointSet(coords[perm])).to_dense()
        np.testing.assert_array_equal(c2, c1[np.ix_(perm, perm)])

    def test_matern_csr_falls_back_to_all_pairs(self):
        rng = np.random.default_rng(8)
        pts = PointSet(rng.random((15, 2)))
        cov = assemble(Matern(0.5, 0.3, 2), 1.0, 0.0, pts, storage="csr")
        np.testing.assert_array_equal(
            cov.to_dense(), assemble(Matern(0.5, 0.3, 2), 1.0, 0.0, pts).to_dense()
        )

    def test_preconditions(self):
        pts = PointSet(np.array([[0.0]]))
        with pytest.raises(InvalidKernelError):
            assemble(Hypergeometric(0, 0.5, 1, 1), 1.0, 0.0, pts)
        with pytest.raises(DomainError):
            assemble(Hypergeometric(0, 1, 1, 1), 0.0, 0.0, pts)
        with pytest.raises(DomainError):
            assemble(Hypergeometric(0, 1, 1, 1), 1.0, -0.1, pts)

    def test_duplicate_points_need_a_nugget(self):
        pts = PointSet(np.array([[0.2, 0.2], [0.2, 0.2]]))
        spec = Hypergeometric(0, 1, 1, 2)
        with pytest.raises(NotPositiveDefiniteError):
            cholesky(assemble(spec, 1.0, 0.0, pts))
        cholesky(assemble(spec, 1.0, 0.1, pts))  # honest fix: positive nugget


class TestCholesky:
    def test_identity(self):
        f = cholesky(np.eye(3))
        np.testing.assert_array_equal(f.lower, np.eye(3))
        assert f.log_det == 0.0

    def test_two_by_two_determinant(self):
        f = cholesky(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert f.log_det == pytest.approx(math.log(3.0), rel=1e-12)

    def test_reconstruction(self):
        rng = np.random.default_rng(9)
        a = rng.random((20, 20))
        spd = a @ a.T + 20 * np.eye(20)
        f = cholesky(spd)
        rel = np.linalg.norm(f.lower @ f.lower.T - spd) / np.linalg.norm(spd)
        assert rel <= 1e-10

    def test_non_positive_definite_error_names_pivot(self):
        with pytest.raises(NotPositiveDefiniteError) as info:
            cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))
        assert info.value.pivot == 1
        assert "pivot" in str(info.value)

    def test_covmatrix_csr_input_is_densified(self):
        rng = np.random.default_rng(10)
        pts = PointSet(rng.random((30, 2)))
        cov = assemble(Hypergeometric(0, 1, 0.3, 2), 1.0, 0.1, pts, storage="csr")
        f = cholesky(cov)
        rel = np.linalg.norm(f.lower @ f.lower.T - cov.to_dense()) / np.linalg.norm(cov.to_dense())
        assert rel <= 1e-12


class TestSolve:
    def test_identity(self):
        f = CholFactor(np.eye(4), 0.0)
        rhs = np.arange(4.0)
        np.testing.assert_array_equal(solve(f, rhs), rhs)

    def test_against_gaussian_elimination(self):
        rng = np.random.default_rng(11)
        a = rng.random((20, 20))
        spd = a @ a.T + 20 * np.eye(20)
        rhs = rng.random(20)
        x = solve(cholesky(spd), rhs)
        x_oracle = gaussian_elimination_solve(spd, rhs)
        assert np.linalg.norm(x - x_oracle) <= 1e-8 * np.linalg.norm(rhs)

    def test_round_trip(self):
        rng = np.random.default_rng(12)
        a = rng.random((15, 15))
        spd = a @ a.T + 15 * np.eye(15)
        f = cholesky(spd)
        v = rng.random(15)
        np.testing.assert_allclose(solve(f, spd @ v), v, atol=1e-8)

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            solve(CholFactor(np.eye(4), 0.0), np.arange(3.0))


class TestSimpleKrige:
    def test_interpolates_data_without_nugget(self):
        rng = np.random.default_rng(13)
        pts = PointSet(rng.random((20, 2)))
        vals = rng.standard_normal(20)
        preds, variances = simple_krige(
            Hypergeometric(0, 1, 0.7, 2), 1.0, 0.0, pts, vals, PointSet(pts.coords[:4])
        )
        np.testing.assert_allclose(preds, vals[:4], atol=1e-8)
        np.testing.assert_allclose(variances, 0.0, atol=1e-8)

    def test_beyond_support_reverts_to_prior(self):
        rng = np.random.default_rng(14)
        pts = PointSet(rng.random((10, 2)))
        vals = rng.standard_normal(10)
        preds, variances = simple_krige(
            Hypergeometric(0, 1, 0.2, 2), 2.0, 0.5, pts, vals, PointSet(np.array([[9.0, 9.0]]))
        )
        assert preds[0] == 0.0
        assert variances[0] == pytest.approx(2.5)

    def test_against_dense_linear_algebra_oracle(self):
        rng = np.random.default_rng(15)
        pts = PointSet(rng.random((25, 2)))
        vals = rng.standard_normal(25)
        targets = PointSet(rng.random((5, 2)))
        spec = Hypergeometric(0.5, 2, 0.6, 2)
        sigma2, nugget = 1.3, 0.2
        preds, variances = simple_krige(spec, sigma2, nugget, pts, vals, targets)

        from hyperkernel.covmat import cross_dist
        from hyperkernel.kernels import correlation

        big = sigma2 * correlation(spec, pairwise_dist(pts)) + nugget * np.eye(25)
        cross = sigma2 * correlation(spec, cross_dist(targets.coords, pts.coords))
        inv = np.linalg.inv(big)
        np.testing.assert_allclose(preds, cross @ inv @ vals, atol=1e-8)
        np.testing.assert_allclose(
            variances, sigma2 + nugget - np.einsum("ij,jk,ik->i", cross, inv, cross), atol=1e-8
        )

    def test_variance_stays_in_prior_band(self):
        rng = np.random.default_rng(16)
        pts = PointSet(rng.random((40, 2)))
        vals = rng.standard_normal(40)
        targets = PointSet(rng.random((30, 2)))
        _, variances = simple_krige(Hypergeometric(0, 4, 0.4, 2), 2.0, 0.3, pts, vals, targets)
        assert np.all(variances >= -1e-8)
        assert np.all(variances <= 2.3 + 1e-8)
