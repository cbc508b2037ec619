import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from mogpal import (
    ConfigError,
    DomainError,
    Hyperparams,
    as_tuple,
    cov_matrix,
    gaussian_density,
    latent_cov,
    latent_cross_cov,
    output_cov,
)
from mogpal.kernels import TupleArray, latent_cross_matrix, latent_matrix

H2 = Hyperparams(
    signal_var=[1.0, 0.8],
    noise_var=[0.25, 0.1],
    latent_prec_inv=[0.1],
    smooth_prec_inv=[[0.2], [0.15]],
    target_types=(0,),
)


class TestGaussianDensity:
    def test_peak_with_unit_determinant(self):
        assert gaussian_density([0.0], [1.0 / (2 * math.pi)]) == pytest.approx(1.0)

    def test_two_dim_origin(self):
        assert gaussian_density([0.0, 0.0], [1.0, 1.0]) == pytest.approx(
            0.15915494309189535, abs=1e-12
        )

    def test_standard_normal_at_one(self):
        assert gaussian_density([1.0], [1.0]) == pytest.approx(
            0.24197072451914337, abs=1e-12
        )

    def test_rejects_nonpositive_cov(self):
        with pytest.raises(DomainError):
            gaussian_density([0.0], [0.0])

    def test_rejects_non_finite(self):
        with pytest.raises(DomainError):
            gaussian_density([np.inf], [1.0])
        with pytest.raises(DomainError):
            gaussian_density([0.0], [np.nan])

    @given(
        delta=st.floats(-3, 3),
        cov=st.floats(0.05, 10),
    )
    def test_strictly_positive(self, delta, cov):
        # domain bounded away from the exp underflow threshold
        assert gaussian_density([delta], [cov]) > 0


class TestOutputCov:
    def test_same_tuple_adds_noise(self):
        h = Hyperparams(
            signal_var=[1.0], noise_var=[0.25],
            latent_prec_inv=[0.1], smooth_prec_inv=[[0.2]],
        )
        p = as_tuple([0.0], 0)
        expected = 1.0 / math.sqrt(math.pi) + 0.25  # density at 0 with width 0.5
        assert output_cov(p, p, h) == pytest.approx(expected, abs=1e-12)

    def test_no_noise_across_types_at_same_location(self):
        p = as_tuple([0.3], 0)
        q = as_tuple([0.3], 1)
        width = H2.pair_width(0, 1)
        smooth = math.sqrt(H2.signal_var[0] * H2.signal_var[1]) * gaussian_density(
            [0.0], width
        )
        assert output_cov(p, q, H2) == pytest.approx(smooth, abs=1e-15)

    def test_vanishes_at_large_separation(self):
        p = as_tuple([0.0], 0)
        q = as_tuple([100.0], 1)
        assert output_cov(p, q, H2) < 1e-300

    def test_symmetry(self, rng):
        for _ in range(20):
            p = as_tuple(rng.uniform(0, 1, 1), rng.integers(2))
            q = as_tuple(rng.uniform(0, 1, 1), rng.integers(2))
            assert output_cov(p, q, H2) == pytest.approx(output_cov(q, p, H2), rel=1e-14)

    def test_noise_decomposition(self):
        p = as_tuple([0.7], 1)
        smooth = output_cov(p, p, H2) - H2.noise_var[1]
        width = H2.pair_width(1, 1)
        assert smooth == pytest.approx(H2.signal_var[1] * gaussian_density([0.0], width))

    @given(shift=st.floats(-3, 3), x=st.floats(-1, 1), y=st.floats(-1, 1))
    @settings(max_examples=50)
    def test_stationarity(self, shift, x, y):
        p = as_tuple([x], 0)
        q = as_tuple([y], 1)
        p2 = as_tuple([x + shift], 0)
        q2 = as_tuple([y + shift], 1)
        assert output_cov(p, q, H2) == pytest.approx(output_cov(p2, q2, H2), rel=1e-10)


class TestLatentCov:
    def test_cross_peak(self):
        h = Hyperparams(
            signal_var=[1.0], noise_var=[0.1],
            latent_prec_inv=[1.0 / (4 * math.pi)],
            smooth_prec_inv=[[1.0 / (4 * math.pi)]],
        )
        p = as_tuple([0.5], 0)
        assert latent_cross_cov(p, [0.5], h) == pytest.approx(1.0)

    def test_cross_scales_with_signal(self):
        h = Hyperparams(
            signal_var=[4.0], noise_var=[0.1],
            latent_prec_inv=[0.5], smooth_prec_inv=[[0.5]],
        )
        p = as_tuple([1.0], 0)
        assert latent_cross_cov(p, [0.0], h) == pytest.approx(
            2 * 0.24197072451914337, abs=1e-12
        )

    def test_latent_peak_and_symmetry(self):
        h = Hyperparams(
            signal_var=[1.0], noise_var=[0.1],
            latent_prec_inv=[1.0, 1.0], smooth_prec_inv=[[0.2, 0.2]],
        )
        assert latent_cov([0.3, 0.3], [0.3, 0.3], h) == pytest.approx(
            0.15915494309189535
        )
        a, b = [0.1, 0.9], [0.4, 0.2]
        assert latent_cov(a, b, h) == latent_cov(b, a, h)


class TestCovMatrix:
    def test_single_tuple(self):
        p = as_tuple([0.2], 0)
        mat = cov_matrix([p], [p], H2)
        assert mat.shape == (1, 1)
        assert mat[0, 0] == output_cov(p, p, H2)

    def test_symmetric_bitwise(self, rng):
        tuples = [as_tuple(rng.uniform(0, 1, 1), rng.integers(2)) for _ in range(6)]
        mat = cov_matrix(tuples, tuples, H2)
        assert np.array_equal(mat, mat.T)

    def test_positive_definite(self, rng):
        tuples = [as_tuple(rng.uniform(0, 1, 1), rng.integers(2)) for _ in range(3)]
        mat = cov_matrix(tuples, tuples, H2)
        assert np.linalg.eigvalsh(mat).min() > 0

    def test_min_eigenvalue_at_least_noise(self, rng):
        for _ in range(5):
            tuples = list({
                as_tuple(rng.uniform(0, 1, 2), rng.integers(2)) for _ in range(15)
            })
            h = Hyperparams(
                signal_var=[1.0, 0.8], noise_var=[0.25, 0.1],
                latent_prec_inv=[0.1, 0.1], smooth_prec_inv=[[0.2, 0.2], [0.15, 0.15]],
            )
            mat = cov_matrix(tuples, tuples, h)
            assert np.linalg.eigvalsh(mat).min() >= min(h.noise_var) - 1e-10

    def test_matches_scalar_oracle(self, rng):
        a = [as_tuple(rng.uniform(0, 1, 1), rng.integers(2)) for _ in range(5)]
        b = [as_tuple(rng.uniform(0, 1, 1), rng.integers(2)) for _ in range(4)]
        np.testing.assert_allclose(
            cov_matrix(a, b, H2), oracles.exact_cov(a, b, H2), rtol=1e-13, atol=1e-15
        )

    def test_latent_matrices_match_oracle(self, rng):
        a = [as_tuple(rng.uniform(0, 1, 1), rng.integers(2)) for _ in range(5)]
        u = rng.uniform(0, 1, size=(3, 1))
        ta = TupleArray.build(a, H2)
        np.testing.assert_allclose(
            latent_cross_matrix(ta, u, H2),
            oracles.cross_to_inducing(a, u, H2),
            rtol=1e-13,
        )
        np.testing.assert_allclose(
            latent_matrix(u, H2), oracles.inducing_cov(u, H2), rtol=1e-13
        )


class TestHyperparams:
    def test_rejects_nonpositive_variance(self):
        with pytest.raises(ConfigError):
            Hyperparams(
                signal_var=[1.0, -1.0], noise_var=[0.1, 0.1],
                latent_prec_inv=[0.1], smooth_prec_inv=[[0.1], [0.1]],
            )

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ConfigError):
            Hyperparams(
                signal_var=[1.0, 1.0], noise_var=[0.1],
                latent_prec_inv=[0.1], smooth_prec_inv=[[0.1], [0.1]],
            )

    def test_rejects_bad_target(self):
        with pytest.raises(ConfigError):
            Hyperparams(
                signal_var=[1.0], noise_var=[0.1],
                latent_prec_inv=[0.1], smooth_prec_inv=[[0.1]],
                target_types=(2,),
            )

    def test_rejects_mixed_dimension_tuple(self):
        with pytest.raises(DomainError):
            H2.validate_tuple(as_tuple([0.0, 1.0], 0))

    def test_signal_to_noise(self):
        h = Hyperparams(
            signal_var=[2.2204, 8.8280, 2.3198],
            noise_var=[0.0853, 0.1130, 0.0596],
            latent_prec_inv=[0.1],
            smooth_prec_inv=[[0.1]] * 3,
        )
        np.testing.assert_allclose(
            h.signal_to_noise(), [26.030480656506448, 78.12389380530972, 38.922818791946305]
        )
