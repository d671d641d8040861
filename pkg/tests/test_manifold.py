import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spdalign.errors import ConvergenceError, NumericalError
from spdalign.manifold import (frechet_mean, half_vectorize,
                               log_euclidean_mean, matrix_exp, matrix_invsqrt,
                               matrix_log, matrix_sqrt, riemannian_distance,
                               tangent_dim, tangent_project,
                               tangent_project_many, unvectorize,
                               validate_spd)

from conftest import make_spd


def rel_err(A, B):
    return np.linalg.norm(A - B) / max(np.linalg.norm(B), 1e-300)


class TestMatrixFunctions:
    def test_log_identity_is_zero(self):
        assert np.allclose(matrix_log(np.eye(2)), 0.0, atol=1e-14)

    def test_log_diagonal(self):
        out = matrix_log(np.diag([1.0, np.e]))
        assert np.allclose(out, np.diag([0.0, 1.0]), atol=1e-14)

    def test_exp_zero_is_identity(self):
        assert np.allclose(matrix_exp(np.zeros((3, 3))), np.eye(3), atol=1e-14)

    def test_sqrt_diagonal(self):
        assert np.allclose(matrix_sqrt(np.diag([4.0, 9.0])),
                           np.diag([2.0, 3.0]), atol=1e-14)

    def test_exp_log_round_trip_8x8(self, rng):
        C = make_spd(rng, 8)
        assert rel_err(matrix_exp(matrix_log(C)), C) < 1e-10

    def test_invsqrt_whitens_16x16(self, rng):
        C = make_spd(rng, 16)
        S = matrix_invsqrt(C)
        assert np.linalg.norm(S @ C @ S - np.eye(16)) < 1e-10

    def test_sqrt_squares_back(self, rng):
        for dim in (2, 5, 32):
            C = make_spd(rng, dim)
            R = matrix_sqrt(C)
            assert rel_err(R @ R, C) < 1e-10

    def test_rejects_non_finite(self):
        C = np.eye(3)
        C[0, 0] = np.nan
        with pytest.raises(ValueError):
            matrix_log(C)

    def test_rejects_asymmetric(self, rng):
        C = rng.standard_normal((4, 4))
        with pytest.raises(ValueError):
            matrix_log(C + 10 * np.eye(4))

    def test_rejects_indefinite(self):
        with pytest.raises(NumericalError):
            matrix_log(np.diag([1.0, -1.0]))
        with pytest.raises(NumericalError):
            matrix_sqrt(np.diag([1.0, 0.0]))

    def test_validate_spd_passes_and_fails(self, rng):
        C = make_spd(rng, 5)
        validate_spd(C)
        with pytest.raises(NumericalError):
            validate_spd(np.diag([1.0, -2.0]))


class TestRiemannianDistance:
    def test_self_distance_zero(self, rng):
        C = make_spd(rng, 6)
        assert riemannian_distance(C, C) < 1e-10

    def test_closed_form_scaled_identity(self):
        d = riemannian_distance(np.eye(2), 4.0 * np.eye(2))
        assert abs(d - np.sqrt(2.0) * np.log(4.0)) < 1e-12

    def test_symmetry(self, rng):
        A, B = make_spd(rng, 7), make_spd(rng, 7)
        assert abs(riemannian_distance(A, B) - riemannian_distance(B, A)) < 1e-10

    def test_congruence_invariance(self, rng):
        A, B = make_spd(rng, 6), make_spd(rng, 6)
        W = rng.standard_normal((6, 6)) + 3 * np.eye(6)
        d0 = riemannian_distance(A, B)
        d1 = riemannian_distance(W @ A @ W.T, W @ B @ W.T)
        assert abs(d0 - d1) < 1e-8

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError):
            riemannian_distance(make_spd(rng, 3), make_spd(rng, 4))


class TestMeans:
    def test_log_euclidean_single(self, rng):
        C = make_spd(rng, 5)
        assert rel_err(log_euclidean_mean([C]), C) < 1e-12

    def test_log_euclidean_diagonal_pair(self):
        out = log_euclidean_mean([np.eye(2), np.diag([np.e ** 2, np.e ** 2])])
        assert np.allclose(out, np.e * np.eye(2), atol=1e-12)

    def test_log_euclidean_commuting_geometric_mean(self, rng):
        diags = np.exp(rng.uniform(-1, 1, size=(5, 4)))
        mats = [np.diag(d) for d in diags]
        expected = np.diag(np.exp(np.log(diags).mean(axis=0)))
        assert rel_err(log_euclidean_mean(mats), expected) < 1e-12

    def test_log_euclidean_empty_list(self):
        with pytest.raises(ValueError):
            log_euclidean_mean([])

    def test_frechet_single(self, rng):
        C = make_spd(rng, 4)
        assert rel_err(frechet_mean([C]), C) < 1e-12

    def test_frechet_inverse_pair_is_identity(self, rng):
        A = make_spd(rng, 5)
        M = frechet_mean([A, np.linalg.inv(A)])
        assert np.linalg.norm(M - np.eye(5)) < 1e-6

    def test_frechet_commuting_geometric_mean(self, rng):
        diags = np.exp(rng.uniform(-1, 1, size=(6, 3)))
        mats = [np.diag(d) for d in diags]
        expected = np.diag(np.exp(np.log(diags).mean(axis=0)))
        assert rel_err(frechet_mean(mats), expected) < 1e-8

    def test_frechet_permutation_invariance(self, rng):
        mats = [make_spd(rng, 4) for _ in range(5)]
        M1 = frechet_mean(mats)
        M2 = frechet_mean(mats[::-1])
        assert rel_err(M1, M2) < 1e-7

    def test_frechet_congruence_equivariance(self, rng):
        mats = [make_spd(rng, 4) for _ in range(4)]
        W = rng.standard_normal((4, 4)) + 2 * np.eye(4)
        M = frechet_mean(mats)
        MW = frechet_mean([W @ C @ W.T for C in mats])
        assert np.linalg.norm(MW - W @ M @ W.T) < 1e-6 * np.linalg.norm(MW)

    def test_frechet_convergence_error_carries_state(self, rng):
        mats = [make_spd(rng, 4, spread=2.0) for _ in range(6)]
        with pytest.raises(ConvergenceError) as excinfo:
            frechet_mean(mats, tol=1e-14, max_iter=1)
        assert excinfo.value.last_iterate is not None
        assert excinfo.value.residual is not None

    def test_frechet_bad_tol(self, rng):
        with pytest.raises(ValueError):
            frechet_mean([make_spd(rng, 3)], tol=0.0)


class TestHalfVectorize:
    def test_definition_2x2(self):
        v = half_vectorize(np.array([[1.0, 2.0], [2.0, 3.0]]))
        assert np.allclose(v, [1.0, 2.0 * np.sqrt(2.0), 3.0])

    def test_unvectorize_exact_inverse(self, rng):
        P = rng.standard_normal((5, 5))
        P = P + P.T
        assert np.array_equal(unvectorize(half_vectorize(P)), P) or \
            np.allclose(unvectorize(half_vectorize(P)), P, atol=1e-15)

    @given(dim=st.integers(2, 8), seed=st.integers(0, 10_000))
    def test_norm_isometry(self, dim, seed):
        r = np.random.default_rng(seed)
        P = r.standard_normal((dim, dim))
        P = P + P.T
        assert abs(np.linalg.norm(half_vectorize(P)) -
                   np.linalg.norm(P)) < 1e-10 * max(1, np.linalg.norm(P))

    @given(dim=st.integers(2, 6), seed=st.integers(0, 10_000))
    def test_linearity(self, dim, seed):
        r = np.random.default_rng(seed)
        A = r.standard_normal((dim, dim))
        B = r.standard_normal((dim, dim))
        A, B = A + A.T, B + B.T
        lhs = half_vectorize(2.5 * A - 0.5 * B)
        rhs = 2.5 * half_vectorize(A) - 0.5 * half_vectorize(B)
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_bad_length(self):
        with pytest.raises(ValueError):
            unvectorize(np.ones(4))

    def test_tangent_dim(self):
        assert tangent_dim(2) == 3
        assert tangent_dim(108) == 5886


class TestTangentProjection:
    def test_projection_at_self_is_zero(self, rng):
        C = make_spd(rng, 4)
        assert np.linalg.norm(tangent_project(C, C)) < 1e-10

    def test_projection_at_identity_reduces_to_log(self, rng):
        C = make_spd(rng, 5)
        v = tangent_project(C, np.eye(5))
        assert np.allclose(v, half_vectorize(matrix_log(C)), atol=1e-12)

    def test_inverse_map_round_trip(self, rng):
        C = make_spd(rng, 6)
        ref = make_spd(rng, 6)
        v = tangent_project(C, ref)
        # Inverse map from primitives: exp at the reference.
        P = unvectorize(v)
        refs, refi = matrix_sqrt(ref), matrix_invsqrt(ref)
        back = refs @ matrix_exp(refi @ P @ refi) @ refs
        assert rel_err(back, C) < 1e-9

    def test_batch_matches_single(self, rng):
        ref = make_spd(rng, 4)
        covs = [make_spd(rng, 4) for _ in range(3)]
        batch = tangent_project_many(covs, ref)
        for i, C in enumerate(covs):
            assert np.allclose(batch[i], tangent_project(C, ref), atol=1e-12)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError):
            tangent_project(make_spd(rng, 3), make_spd(rng, 4))


class TestRoundTripSweep:
    def test_round_trips_across_dims(self):
        rng = np.random.default_rng(99)
        for dim in (2, 3, 17, 64, 128):
            C = make_spd(rng, dim)
            assert rel_err(matrix_exp(matrix_log(C)), C) < 1e-10
            R = matrix_sqrt(C)
            assert rel_err(R @ R, C) < 1e-10
