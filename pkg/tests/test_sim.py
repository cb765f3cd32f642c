import numpy as np
import pytest

from hyperkernel.covmat import PointSet, assemble
from hyperkernel.errors import DomainError
from hyperkernel.kernels import Hypergeometric
from hyperkernel.sim import (
    GridDesign,
    McStudyConfig,
    empirical_semivariogram,
    perturbed_grid,
    run_mc_study,
    simulate_gaussian,
    tukey_h,
)


class TestGridDesign:
    def test_unit_square_standard_increments(self):
        design = GridDesign(0.025, ((0.0, 1.0), (0.0, 1.0)))
        pts = perturbed_grid(design)
        assert pts.n == 1681  # 41 x 41
        assert pts.dim == 2

    def test_perturbation_stays_within_halfwidth(self):
        design = GridDesign(0.025, ((0.0, 1.0), (0.0, 1.0)), 0.01, seed=3)
        base = perturbed_grid(GridDesign(0.025, ((0.0, 1.0), (0.0, 1.0))))
        moved = perturbed_grid(design)
        assert np.max(np.abs(moved.coords - base.coords)) <= 0.01

    def test_same_seed_same_points(self):
        design = GridDesign(0.1, ((0.0, 1.0),), 0.04, seed=9)
        np.testing.assert_array_equal(perturbed_grid(design).coords, perturbed_grid(design).coords)
        other = GridDesign(0.1, ((0.0, 1.0),), 0.04, seed=10)
        assert np.any(perturbed_grid(other).coords != perturbed_grid(design).coords)

    def test_invariants(self):
        with pytest.raises(DomainError):
            GridDesign(0.3, ((0.0, 1.0),))  # does not divide
        with pytest.raises(DomainError):
            GridDesign(0.1, ((0.0, 1.0),), perturbation_halfwidth=0.05)
        with pytest.raises(DomainError):
            GridDesign(0.1, ((1.0, 0.0),))


class TestSimulateGaussian:
    def test_sample_covariance_matches_target(self):
        rng_pts = np.random.default_rng(0)
        pts = PointSet(rng_pts.random((5, 2)))
        spec = Hypergeometric(0, 2, 0.8, 2)
        sigma2 = 1.5
        n_reps = 100_000
        fields = simulate_gaussian(spec, sigma2, 0.0, pts, n_reps, seed=123)
        sample_cov = fields @ fields.T / n_reps
        target = assemble(spec, sigma2, 0.0, pts).to_dense()
        # Wick: var of a sample covariance entry is (c_ii c_jj + c_ij^2)/R
        mc_se = np.sqrt(
            (np.outer(np.diag(target), np.diag(target)) + target**2) / n_reps
        )
        assert np.all(np.abs(sample_cov - target) <= 4.0 * mc_se)

    def test_zero_mean_within_mc_error(self):
        pts = PointSet(np.random.default_rng(1).random((4, 2)))
        fields = simulate_gaussian(Hypergeometric(0, 1, 0.5, 2), 1.0, 0.0, pts, 20_000, seed=5)
        se = 1.0 / np.sqrt(20_000)
        assert np.all(np.abs(fields.mean(axis=1)) <= 5 * se)

    def test_variance_scales_linearly(self):
        pts = PointSet(np.random.default_rng(2).random((6, 2)))
        f1 = simulate_gaussian(Hypergeometric(0, 2, 0.5, 2), 1.0, 0.0, pts, 5000, seed=7)
        f2 = simulate_gaussian(Hypergeometric(0, 2, 0.5, 2), 2.0, 0.0, pts, 5000, seed=7)
        assert f2.var() / f1.var() == pytest.approx(2.0, rel=1e-12)

    def test_deterministic_per_seed(self):
        pts = PointSet(np.random.default_rng(3).random((4, 1)))
        a = simulate_gaussian(Hypergeometric(0, 1, 0.5, 1), 1.0, 0.0, pts, 3, seed=11)
        b = simulate_gaussian(Hypergeometric(0, 1, 0.5, 1), 1.0, 0.0, pts, 3, seed=11)
        np.testing.assert_array_equal(a, b)

    def test_rejects_zero_replicates(self):
        pts = PointSet(np.zeros((1, 1)))
        with pytest.raises(DomainError):
            simulate_gaussian(Hypergeometric(0, 1, 0.5, 1), 1.0, 0.0, pts, 0, seed=0)


class TestTukeyH:
    def test_identity_at_h_zero(self):
        z = np.linspace(-3, 3, 11)
        np.testing.assert_array_equal(tukey_h(z, 2.0, 0.0), 2.0 * z)

    def test_zero_maps_to_zero(self):
        assert tukey_h(np.array([0.0]), 1.7, 0.3)[0] == 0.0

    def test_strictly_increasing(self):
        z = np.linspace(-5, 5, 401)
        for h in (0.0, 0.2, 0.49):
            out = tukey_h(z, 1.0, h)
            assert np.all(np.diff(out) > 0)

    def test_domain(self):
        with pytest.raises(DomainError):
            tukey_h(np.zeros(1), 1.0, 0.5)
        with pytest.raises(DomainError):
            tukey_h(np.zeros(1), 1.0, -0.01)


class TestEmpiricalSemivariogram:
    def test_constant_field_is_zero(self):
        pts = PointSet(np.random.default_rng(4).random((30, 2)))
        centers, gamma, counts = empirical_semivariogram(pts, np.ones(30), 5, 1.0)
        assert np.all(gamma[counts > 0] == 0.0)

    def test_two_points(self):
        pts = PointSet(np.array([[0.0], [0.5]]))
        _, gamma, counts = empirical_semivariogram(pts, np.array([0.0, 2.0]), 1, 1.0)
        assert counts[0] == 1
        assert gamma[0] == pytest.approx(2.0)

    def test_pure_noise_sill(self):
        rng = np.random.default_rng(5)
        pts = PointSet(rng.random((300, 2)))
        z = rng.standard_normal(300)
        _, gamma, counts = empirical_semivariogram(pts, z, 6, 1.0)
        got = gamma[counts > 500]
        assert np.all(np.abs(got - 1.0) <= 0.15)

    def test_empty_bins_flagged(self):
        pts = PointSet(np.array([[0.0], [1.0]]))
        _, gamma, counts = empirical_semivariogram(pts, np.array([0.0, 1.0]), 4, 4.0)
        assert counts[0] == 0 and np.isnan(gamma[0])
        assert counts[1] == 1 and not np.isnan(gamma[1])


class TestMcStudy:
    @staticmethod
    def _design():
        return GridDesign(0.1, ((0.0, 1.0), (0.0, 1.0)), 0.01, seed=0)  # 11x11

    def test_report_shape_and_determinism(self):
        configs = [McStudyConfig(0.0, 4.0, 0.25)]
        r1 = run_mc_study(configs, self._design(), 6, seed=90, restarts=1, threads=1)
        r2 = run_mc_study(configs, self._design(), 6, seed=90, restarts=1, threads=1)
        assert r1 == r2
        row = r1.rows[0]
        assert row.n_used + row.n_failed == 6
        assert np.isfinite(row.bias_sigma2) and np.isfinite(row.sd_microergodic)

    def test_worker_count_does_not_change_results(self):
        configs = [McStudyConfig(0.0, 4.0, 0.25)]
        serial = run_mc_study(configs, self._design(), 4, seed=91, restarts=1, threads=1)
        parallel = run_mc_study(configs, self._design(), 4, seed=91, restarts=1, threads=2)
        assert serial == parallel

    def test_thread_cap_env(self, monkeypatch):
        from hyperkernel.sim import worker_count

        monkeypatch.setenv("HYPERKERNEL_THREADS", "1")
        assert worker_count(8) == 1
        monkeypatch.delenv("HYPERKERNEL_THREADS")
        assert worker_count(3) == 3

    def test_zero_replicates_rejected(self):
        with pytest.raises(DomainError):
            run_mc_study([McStudyConfig(0.0, 4.0, 0.25)], self._design(), 0, seed=0)

    def test_invalid_config_rejected(self):
        from hyperkernel.errors import InvalidKernelError

        with pytest.raises(InvalidKernelError):
            run_mc_study([McStudyConfig(0.0, 0.5, 0.25)], self._design(), 2, seed=0)
