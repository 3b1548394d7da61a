import numpy as np
import pytest

from facegen.errors import InvalidParam, SingularComponent
from facegen.gmm import GaussianMixture, fit_gmm, sample_identity


def two_cluster_data(rng, n=400, d=3, sep=8.0):
    a = rng.standard_normal((n // 2, d)) + sep
    b = rng.standard_normal((n // 2, d)) - sep
    return np.concatenate([a, b])


class TestFitGmm:
    def test_k1_closed_form(self, rng):
        data = rng.standard_normal((50, 4)) * np.array([1.0, 2.0, 0.5, 1.5])
        ridge = 1e-6
        gmm = fit_gmm(data, K=1, seed=0, ridge=ridge)
        assert np.allclose(gmm.means[0], data.mean(axis=0), atol=1e-12)
        expect = np.cov(data, rowvar=False, bias=True) + ridge * np.eye(4)
        assert np.allclose(gmm.covariances[0], expect, atol=1e-12)
        assert gmm.weights[0] == 1.0

    def test_two_separated_clusters(self, rng):
        data = two_cluster_data(rng)
        gmm = fit_gmm(data, K=2, seed=1)
        means = gmm.means[np.argsort(gmm.means[:, 0])]
        assert np.abs(means[0] - (-8.0)).max() < 0.05 * 8.0
        assert np.abs(means[1] - 8.0).max() < 0.05 * 8.0
        assert np.allclose(gmm.weights, 0.5, atol=0.05)

    def test_ll_trajectory_non_decreasing(self, rng):
        data = two_cluster_data(rng, n=200)
        gmm = fit_gmm(data, K=3, seed=2)
        traj = np.asarray(gmm.ll_trajectory)
        assert len(traj) >= 2
        assert np.all(np.diff(traj) >= -1e-9 * np.maximum(1.0, np.abs(traj[:-1])))

    def test_responsibilities_sum_to_one(self, rng):
        from scipy.special import logsumexp
        data = two_cluster_data(rng, n=100)
        gmm = fit_gmm(data, K=2, seed=3)
        log_joint = gmm._log_joint(data)
        resp = np.exp(log_joint - logsumexp(log_joint, axis=1, keepdims=True))
        assert np.abs(resp.sum(axis=1) - 1.0).max() < 1e-12

    def test_needs_more_samples_than_components(self, rng):
        with pytest.raises(InvalidParam):
            fit_gmm(rng.standard_normal((3, 2)), K=3, seed=0)

    def test_deterministic(self, rng):
        data = two_cluster_data(rng, n=100)
        g1 = fit_gmm(data, K=2, seed=7)
        g2 = fit_gmm(data, K=2, seed=7)
        assert np.array_equal(g1.means, g2.means)
        assert np.array_equal(g1.covariances, g2.covariances)


class TestGaussianMixtureValidation:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(InvalidParam):
            GaussianMixture(np.array([0.6, 0.6]), np.zeros((2, 2)),
                            np.stack([np.eye(2)] * 2))

    def test_covariance_must_be_spd(self):
        cov = np.array([[[1.0, 0.0], [0.0, -1.0]]])
        with pytest.raises(SingularComponent):
            GaussianMixture(np.array([1.0]), np.zeros((1, 2)), cov)

    def test_covariance_must_be_symmetric(self):
        cov = np.array([[[1.0, 0.5], [0.0, 1.0]]])
        with pytest.raises(InvalidParam):
            GaussianMixture(np.array([1.0]), np.zeros((1, 2)), cov)


class TestSampleIdentity:
    def test_sigma_zero_returns_component_mean(self, rng):
        gmm = GaussianMixture(np.array([1.0]), np.array([[3.0, -1.0]]),
                              np.eye(2)[None])
        x = sample_identity(gmm, sigma=0.0, rng=5)
        assert np.array_equal(x, np.array([3.0, -1.0]))

    def test_fixed_seed_reproducible(self, rng):
        data = two_cluster_data(rng, n=100)
        gmm = fit_gmm(data, K=2, seed=0)
        a = sample_identity(gmm, sigma=0.8, rng=42, size=10)
        b = sample_identity(gmm, sigma=0.8, rng=42, size=10)
        assert np.array_equal(a, b)

    def test_sigma_scales_standard_deviation(self, rng):
        cov = np.array([[2.0, 0.3], [0.3, 0.5]])
        gmm = GaussianMixture(np.array([1.0]), np.zeros((1, 2)), cov[None])
        draws = sample_identity(gmm, sigma=0.8, rng=11, size=50_000)
        sample_cov = np.cov(draws, rowvar=False)
        rel = np.linalg.norm(sample_cov - 0.64 * cov) / np.linalg.norm(0.64 * cov)
        assert rel < 0.03

    def test_var_mode(self, rng):
        cov = np.eye(2) * 4.0
        gmm = GaussianMixture(np.array([1.0]), np.zeros((1, 2)), cov[None])
        draws = sample_identity(gmm, sigma=0.25, rng=13, size=50_000,
                                sigma_mode="var")
        sample_cov = np.cov(draws, rowvar=False)
        assert np.allclose(np.diag(sample_cov), 1.0, rtol=0.05)

    def test_unknown_mode_rejected(self):
        gmm = GaussianMixture(np.array([1.0]), np.zeros((1, 2)), np.eye(2)[None])
        with pytest.raises(InvalidParam):
            sample_identity(gmm, sigma_mode="bogus")

    def test_components_drawn_by_weight(self, rng):
        means = np.array([[0.0], [100.0]])
        covs = np.stack([np.eye(1) * 1e-6] * 2)
        gmm = GaussianMixture(np.array([0.25, 0.75]), means, covs)
        draws = sample_identity(gmm, sigma=1.0, rng=3, size=20_000)
        frac_high = float((draws[:, 0] > 50).mean())
        assert frac_high == pytest.approx(0.75, abs=0.02)
