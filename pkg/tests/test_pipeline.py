import numpy as np
import pytest

from spdalign.covariance import shrunk_covariances
from spdalign.errors import ConfigError
from spdalign.manifold import tangent_dim, tangent_project_many
from spdalign.pipeline import (PipelineConfig, apply_pca,
                               cross_montage_reduce, feature_dimension,
                               features_parallel, features_sequential,
                               filtered_covariances, fit_pca,
                               pca_component_count)
from spdalign.spatial import SpatialFilter


def identity_filter(e: int) -> SpatialFilter:
    return SpatialFilter(weights=np.eye(e), eigenvalues=np.full(e, 0.5))


class TestDimensionBookkeeping:
    def test_sequential_dims(self):
        assert feature_dimension("sequential", "none", 108) == 5886
        assert feature_dimension("sequential", "itsa", 108) == 5886
        assert feature_dimension("sequential", "none", 2) == 3

    def test_parallel_dims(self):
        assert feature_dimension("parallel", "none", 108) == 5994
        assert feature_dimension("parallel", "adaptive_m", 108) == 5994
        assert feature_dimension("parallel", "itsa", 108) == 11772
        assert feature_dimension("parallel", "ts", 108) == 11772
        assert feature_dimension("parallel", "none", 2) == 5

    def test_montage_tangent_dims(self):
        assert tangent_dim(19) == 190
        assert tangent_dim(60) == 1830

    def test_pca_retained_counts(self):
        assert pca_component_count(5886, 0.25) == 1472
        assert pca_component_count(5994, 0.25) == 1498
        assert pca_component_count(5886, 0.01) == 59
        assert pca_component_count(5994, 0.01) == 60
        with pytest.raises(ValueError):
            pca_component_count(10, 0.0)

    def test_small_scale_dims_match_actual_features(self, rng):
        trials = rng.standard_normal((6, 4, 30))
        filt = identity_filter(4)
        ref = np.eye(4)
        seq, _ = features_sequential(trials, filt, reference=ref)
        assert seq.shape[1] == feature_dimension("sequential", "none", 4)
        par, _ = features_parallel(trials, filt, spatial_branch="logvar",
                                   raw_reference=ref)
        assert par.shape[1] == feature_dimension("parallel", "none", 4)
        par2, _ = features_parallel(trials, filt, spatial_branch="tangent")
        assert par2.shape[1] == feature_dimension("parallel", "itsa", 4)


class TestPca:
    def test_collinear_rank_one(self):
        t = np.linspace(-1, 1, 10)
        X = np.outer(t, [1.0, 2.0, -1.0])
        model = fit_pca(X, retain=1.0)
        projected = apply_pca(model, X)
        total_var = X.var(axis=0).sum()
        assert projected[:, 0].var() / total_var > 1.0 - 1e-12

    def test_variances_non_increasing(self, rng):
        X = rng.standard_normal((40, 8)) * np.linspace(3, 0.5, 8)
        model = fit_pca(X, retain=1.0)
        variances = apply_pca(model, X).var(axis=0)
        assert np.all(np.diff(variances) <= 1e-12)

    def test_reconstruction_error_monotone_in_k(self, rng):
        X = rng.standard_normal((30, 6))
        errors = []
        for k in range(1, 7):
            model = fit_pca(X, n_components=k)
            Z = apply_pca(model, X)
            recon = Z @ model.components.T + model.mean
            errors.append(np.linalg.norm(X - recon))
        assert all(a >= b - 1e-12 for a, b in zip(errors, errors[1:]))

    def test_orthonormal_components_and_sign(self, rng):
        X = rng.standard_normal((25, 5))
        model = fit_pca(X, retain=0.8)
        k = model.n_components
        assert np.allclose(model.components.T @ model.components, np.eye(k),
                           atol=1e-10)
        for j in range(k):
            col = model.components[:, j]
            assert col[np.abs(col).argmax()] > 0

    def test_deterministic(self, rng):
        X = rng.standard_normal((20, 6))
        m1 = fit_pca(X, retain=0.5)
        m2 = fit_pca(X.copy(), retain=0.5)
        assert np.array_equal(m1.components, m2.components)
        assert np.array_equal(m1.mean, m2.mean)

    def test_needs_two_rows(self):
        with pytest.raises(ValueError):
            fit_pca(np.ones((1, 4)), retain=0.5)


class TestCrossMontageReduce:
    def test_same_dims_retain_all(self, rng):
        train = rng.standard_normal((30, 6))
        test = rng.standard_normal((25, 6))
        tr, te, m_train, m_test = cross_montage_reduce(train, test, 1.0)
        assert tr.shape == (30, 6) and te.shape == (25, 6)
        # Pure rotations about the mean: pairwise distances preserved.
        d0 = np.linalg.norm(train[0] - train[1])
        assert abs(np.linalg.norm(tr[0] - tr[1]) - d0) < 1e-10

    def test_reduces_both_to_k(self, rng):
        train = rng.standard_normal((40, 20))
        test = rng.standard_normal((30, 8))
        tr, te, _, _ = cross_montage_reduce(train, test, 0.25)
        assert tr.shape[1] == 5 and te.shape[1] == 5

    def test_infeasible_reduction_names_dims(self, rng):
        train = rng.standard_normal((40, 100))
        test = rng.standard_normal((30, 8))
        with pytest.raises(ConfigError) as excinfo:
            cross_montage_reduce(train, test, 0.5)
        assert "50" in str(excinfo.value) and "8" in str(excinfo.value)

    def test_seeded_parity_of_subspaces(self):
        rng = np.random.default_rng(5)
        basis = rng.standard_normal((10, 3))
        train = rng.standard_normal((200, 3)) @ basis.T
        train += 0.01 * rng.standard_normal(train.shape)
        test = rng.standard_normal((200, 3)) @ basis.T
        test += 0.01 * rng.standard_normal(test.shape)
        _, _, m_train, m_test = cross_montage_reduce(train, test, 0.3)
        # Both models should span (nearly) the same 3-dim subspace.
        overlap = np.linalg.svd(m_train.components.T @ m_test.components,
                                compute_uv=False)
        assert np.all(overlap > 0.99)


class TestFeaturePaths:
    def test_identity_filter_reduces_to_plain_tangent(self, rng):
        trials = rng.standard_normal((5, 3, 40))
        feats, _ = features_sequential(trials, identity_filter(3),
                                       reference=np.eye(3))
        covs = shrunk_covariances(trials)
        expected = tangent_project_many(covs, np.eye(3))
        assert np.allclose(feats, expected, atol=1e-10)

    def test_sequential_recentred_returns_reference(self, rng):
        trials = rng.standard_normal((5, 3, 40))
        feats, ref = features_sequential(trials, identity_filter(3),
                                         recentred=True)
        assert ref.shape == (3, 3)
        assert np.linalg.norm(feats.mean(axis=0)) < 1.0  # centred-ish cloud

    def test_sequential_requires_reference_when_not_recentred(self, rng):
        with pytest.raises(ValueError):
            features_sequential(rng.standard_normal((4, 3, 20)),
                                identity_filter(3))

    def test_parallel_branches_consume_same_covariances(self, rng):
        # The spatial and Riemannian branches must see identical upstream
        # objects: same filter, same shrinkage.
        trials = rng.standard_normal((4, 3, 30))
        filt = identity_filter(3)
        covs_a = filtered_covariances(trials, filt)
        covs_b = filtered_covariances(trials, filt)
        assert np.array_equal(covs_a, covs_b)

    def test_parallel_logvar_requires_raw_reference(self, rng):
        with pytest.raises(ValueError):
            features_parallel(rng.standard_normal((4, 3, 20)),
                              identity_filter(3), spatial_branch="logvar")


class TestPipelineConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            PipelineConfig(fusion="both")
        with pytest.raises(ConfigError):
            PipelineConfig(alignment="extra")
        with pytest.raises(ConfigError):
            PipelineConfig(pca_retain=0.0)
        with pytest.raises(ConfigError):
            PipelineConfig(svm_c=-1.0)
        with pytest.raises(ConfigError):
            PipelineConfig(adaptive_m_test="noop")

    def test_fingerprint_round_trip(self):
        cfg = PipelineConfig(fusion="parallel", alignment="ts",
                             montage=("a", "b"), pca_retain=0.5, seed=3)
        fp = cfg.fingerprint()
        assert fp["fusion"] == "parallel"
        assert fp["montage"] == ["a", "b"]
        assert fp["seed"] == 3
