import math

import numpy as np
import pytest

import oracles
from mogpal import (
    ConfigError,
    Hyperparams,
    IllConditionedError,
    InducingSet,
    ModelBuildError,
    as_tuple,
    build_model,
    cov_matrix,
    exact_posterior,
    gamma,
    lambda_blocks,
    pitc_posterior,
    select_inducing,
    sparse_cov,
)
from conftest import random_hyperparams, random_instance

H1 = Hyperparams(
    signal_var=[1.0], noise_var=[0.2],
    latent_prec_inv=[0.15], smooth_prec_inv=[[0.1]],
)


def _model_1type(n=6, m=3, seed=0, spread=1.0):
    rng = np.random.default_rng(seed)
    cands = [as_tuple([x], 0) for x in rng.uniform(0, spread, n)]
    inducing = select_inducing(np.array([t.location for t in cands]), m, seed=seed)
    return build_model(H1, inducing, {0: cands})


class TestSelectInducing:
    def test_all_points_zero_inertia(self, rng):
        pts = rng.uniform(0, 1, size=(5, 2))
        ind = select_inducing(pts, 5, seed=3)
        assert ind.provenance.inertia == pytest.approx(0.0, abs=1e-24)
        assert sorted(map(tuple, ind.locations.tolist())) == sorted(
            map(tuple, pts.tolist())
        )

    def test_two_separated_clusters(self):
        a = np.array([[0.0], [0.1], [0.2], [0.3], [0.4]])
        b = a + 100.0
        ind = select_inducing(np.vstack([a, b]), 2, seed=1)
        centers = sorted(ind.locations[:, 0].tolist())
        assert centers[0] == pytest.approx(0.2)
        assert centers[1] == pytest.approx(100.2)

    def test_seed_determinism(self, rng):
        pts = rng.uniform(0, 1, size=(30, 2))
        a = select_inducing(pts, 7, seed=42)
        b = select_inducing(pts, 7, seed=42)
        assert np.array_equal(a.locations, b.locations)
        assert a.provenance == b.provenance

    def test_guard(self, rng):
        with pytest.raises(ConfigError):
            select_inducing(rng.uniform(0, 1, size=(4, 1)), 5, seed=0)

    def test_duplicates_collapsed(self):
        pts = np.array([[0.0], [0.0], [1.0], [1.0]])
        ind = select_inducing(pts, 2, seed=0)
        assert sorted(ind.locations[:, 0].tolist()) == [0.0, 1.0]


class TestBuildModel:
    def test_duplicate_inducing_rejected(self):
        with pytest.raises(ModelBuildError):
            InducingSet(locations=[[0.1], [0.1]])

    def test_rebuild_identical(self):
        m1 = _model_1type()
        m2 = _model_1type()
        assert np.array_equal(m1.kuu, m2.kuu)
        for i in m1.R:
            assert np.array_equal(m1.R[i], m2.R[i])

    def test_single_inducing_scalar(self):
        model = _model_1type(m=1)
        expected = oracles.gd([0.0], list(H1.latent_prec_inv))
        assert model.kuu[0, 0] == pytest.approx(expected, rel=1e-14)

    def test_duplicate_candidates_rejected(self):
        p = as_tuple([0.3], 0)
        ind = InducingSet(locations=[[0.5]])
        with pytest.raises(ModelBuildError):
            build_model(H1, ind, {0: [p, p]})

    def test_empty_target_pool_rejected(self):
        ind = InducingSet(locations=[[0.5]])
        with pytest.raises(ModelBuildError):
            build_model(H1, ind, {0: []})

    def test_low_noise_warns(self):
        h = Hyperparams(
            signal_var=[1.0], noise_var=[0.01],
            latent_prec_inv=[0.15], smooth_prec_inv=[[0.1]],
        )
        ind = InducingSet(locations=[[0.5]])
        with pytest.warns(UserWarning, match="noise"):
            build_model(h, ind, {0: [as_tuple([0.3], 0)]})


class TestGammaLambda:
    def test_gamma_psd_low_rank(self, rng):
        model, _ = random_instance(5, n_per_type=(5, 5), n_inducing=2)
        a = model.candidate_list()
        g = gamma(model, a, a)
        eig = np.linalg.eigvalsh(g)
        assert eig.min() > -1e-10
        assert np.sum(eig > 1e-10) <= 2

    def test_gamma_far_from_inducing(self):
        model = _model_1type()
        far = [as_tuple([1e4], 0)]
        assert np.abs(gamma(model, far, far)).max() < 1e-200

    def test_gamma_transpose(self, rng):
        model, _ = random_instance(6)
        a = model.candidate_list()[:3]
        b = model.candidate_list()[3:6]
        np.testing.assert_allclose(
            gamma(model, a, b), gamma(model, b, a).T, rtol=1e-12, atol=1e-15
        )

    def test_lambda_single_type_full_residual(self):
        model = _model_1type()
        a = model.candidate_list()
        lam = lambda_blocks(model, a)
        expected = cov_matrix(a, a, H1) - gamma(model, a, a)
        np.testing.assert_allclose(lam, expected, rtol=1e-10, atol=1e-12)

    def test_lambda_cross_type_exactly_zero(self):
        model, _ = random_instance(7, n_per_type=(3, 3))
        a = model.candidate_list()
        lam = lambda_blocks(model, a)
        types = np.array([t.type_index for t in a])
        cross = types[:, None] != types[None, :]
        assert np.array_equal(lam[cross], np.zeros(cross.sum()))

    def test_lambda_diag_floor(self, rng):
        model, _ = random_instance(9, n_per_type=(6, 6))
        a = model.candidate_list()
        lam = lambda_blocks(model, a)
        noise = model.h.noise_var[[t.type_index for t in a]]
        assert np.all(np.diag(lam) >= noise - 1e-10)


class TestPitcPosterior:
    def test_single_type_matches_exact(self):
        # exactness holds for any inducing set when there is one type
        for seed in range(8):
            rng = np.random.default_rng(seed)
            model = _model_1type(n=8, m=2, seed=seed)
            x = model.candidate_list()[:5]
            z = [as_tuple([v], 0) for v in rng.uniform(2, 3, size=3)]
            y = rng.normal(size=5)
            sparse = pitc_posterior(model, x, y, z)
            exact = exact_posterior(x, y, z, H1)
            np.testing.assert_allclose(sparse.mean, exact.mean, rtol=1e-8, atol=1e-12)
            np.testing.assert_allclose(sparse.cov, exact.cov, rtol=1e-8, atol=1e-12)

    def test_empty_conditioning(self, rng):
        model, _ = random_instance(3, n_per_type=(4, 4))
        z = model.candidate_list()[:4]
        pred = pitc_posterior(model, [], [], z)
        expected = gamma(model, z, z) + lambda_blocks(model, z)
        np.testing.assert_allclose(pred.cov, expected, rtol=1e-12)
        np.testing.assert_array_equal(pred.mean, np.zeros(4))

    def test_cov_independent_of_measurements(self, rng):
        model, _ = random_instance(11, n_per_type=(4, 4))
        cands = model.candidate_list()
        x, z = cands[:5], cands[5:7]
        a = pitc_posterior(model, x, rng.normal(size=5), z)
        b = pitc_posterior(model, x, rng.normal(size=5), z)
        assert np.array_equal(a.cov, b.cov)

    def test_fast_equals_dense(self, rng):
        for seed in range(6):
            r = np.random.default_rng(seed)
            model, _ = random_instance(seed, n_per_type=(20, 20), n_inducing=4)
            cands = model.candidate_list()
            pick = r.permutation(len(cands))
            x = [cands[i] for i in pick[:35]]
            z = [cands[i] for i in pick[35:40]]
            y = r.normal(size=len(x))
            dense = pitc_posterior(model, x, y, z, method="dense")
            fast = pitc_posterior(model, x, y, z, method="fast")
            np.testing.assert_allclose(fast.mean, dense.mean, rtol=1e-8, atol=1e-10)
            np.testing.assert_allclose(fast.cov, dense.cov, rtol=1e-8, atol=1e-10)

    def test_matches_blocked_oracle(self, rng):
        model, _ = random_instance(13, n_per_type=(4, 4))
        cands = model.candidate_list()
        x, z = cands[:4], cands[4:7]
        y = rng.normal(size=4)
        pred = pitc_posterior(model, x, y, z)
        u = model.inducing.locations
        h = model.h
        c_xx = oracles.blocked_cov(x, x, h, u)
        c_zx = oracles.blocked_cov(z, x, h, u)
        c_zz = oracles.blocked_cov(z, z, h, u)
        np.testing.assert_allclose(
            pred.cov, c_zz - c_zx @ np.linalg.solve(c_xx, c_zx.T), rtol=1e-9, atol=1e-12
        )
        np.testing.assert_allclose(
            pred.mean, c_zx @ np.linalg.solve(c_xx, y), rtol=1e-9, atol=1e-12
        )

    def test_variance_floor(self, rng):
        for seed in range(10):
            r = np.random.default_rng(seed)
            model, _ = random_instance(seed + 50, n_per_type=(5, 5))
            cands = model.candidate_list()
            pick = r.permutation(len(cands))
            x = [cands[i] for i in pick[:6]]
            z = [cands[i] for i in pick[6:]]
            pred = pitc_posterior(model, x, r.normal(size=6), z)
            noise = model.h.noise_var[[t.type_index for t in z]]
            assert np.all(pred.var >= noise - 1e-10)

    def test_conditioning_monotone(self, rng):
        model, _ = random_instance(17, n_per_type=(4, 4))
        cands = model.candidate_list()
        z = cands[-2:]
        prev = pitc_posterior(model, [], [], z).var
        for k in range(1, 6):
            x = cands[:k]
            var = pitc_posterior(model, x, np.zeros(k), z).var
            assert np.all(var <= prev + 1e-10)
            prev = var

    def test_duplicate_observations_rejected(self):
        model = _model_1type()
        p = model.candidate_list()[0]
        z = [as_tuple([5.0], 0)]
        with pytest.raises(IllConditionedError):
            pitc_posterior(model, [p, p], [0.0, 0.0], z)


class TestSparseCov:
    def test_same_type_exact_cross_type_lowrank(self, rng):
        model, _ = random_instance(23, n_per_type=(3, 3))
        a = model.candidate_list()
        c = sparse_cov(model, a, a)
        exact = cov_matrix(a, a, model.h)
        g = gamma(model, a, a)
        types = np.array([t.type_index for t in a])
        same = types[:, None] == types[None, :]
        np.testing.assert_allclose(c[same], exact[same], rtol=1e-12)
        np.testing.assert_allclose(c[~same], g[~same], rtol=1e-12)
