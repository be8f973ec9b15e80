import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from relu_spectra.errors import ConvergenceError
from relu_spectra.tensor_core import (
    Rng,
    as_matrix,
    sample_sphere,
    singular_value_curve,
    svd,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def _check_svd(a, res, tol=1e-9):
    r = min(a.shape)
    assert res.u.shape == (a.shape[0], r)
    assert res.v.shape == (a.shape[1], r)
    scale = max(1.0, np.abs(a).max())
    assert np.abs(res.reconstruct() - a).max() <= tol * scale
    assert np.abs(res.u.T @ res.u - np.eye(r)).max() <= 1e-8
    assert np.abs(res.v.T @ res.v - np.eye(r)).max() <= 1e-8
    assert np.all(np.diff(res.sigma) <= 1e-12 * scale)
    assert np.all(res.sigma >= 0)


class TestRng:
    def test_same_seed_same_stream(self):
        assert np.array_equal(Rng(7).normal(100), Rng(7).normal(100))

    def test_different_seeds_differ(self):
        assert not np.array_equal(Rng(1).raw(8), Rng(2).raw(8))

    def test_uniform_open_at_zero(self):
        u = Rng(3).uniform(100_000)
        assert u.min() > 0.0 and u.max() <= 1.0

    def test_uniform_from_raw_words(self):
        words = Rng(11).raw(5)
        expected = ((words >> np.uint64(11)).astype(float) + 1.0) * 2.0**-53
        assert np.array_equal(Rng(11).uniform(5), expected)

    def test_box_muller_pairs(self):
        u = Rng(5).uniform(4)
        r = np.sqrt(-2 * np.log(u[0::2]))
        expected = np.empty(4)
        expected[0::2] = r * np.cos(2 * np.pi * u[1::2])
        expected[1::2] = r * np.sin(2 * np.pi * u[1::2])
        assert np.allclose(Rng(5).normal(4), expected, rtol=0, atol=1e-15)

    def test_normal_moments(self):
        z = Rng(0).normal(200_000)
        assert abs(z.mean()) < 3 / np.sqrt(z.size)
        assert abs(z.var() - 1) < 0.02

    def test_spawn_independent_of_consumption(self):
        parent = Rng(42)
        before = parent.spawn(3).raw(4)
        parent.raw(1000)
        assert np.array_equal(before, parent.spawn(3).raw(4))

    def test_spawn_key(self):
        assert Rng(10).spawn(3).seed == 10 ^ 3

    def test_choice_distinct(self):
        pick = Rng(1).choice(50, 20)
        assert len(set(pick.tolist())) == 20
        with pytest.raises(ValueError):
            Rng(1).choice(3, 4)


class TestSphere:
    def test_unit_norm(self):
        pts = sample_sphere(Rng(0), 500, 7)
        assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)

    def test_mean_near_zero(self):
        pts = sample_sphere(Rng(1), 20_000, 3)
        assert np.abs(pts.mean(axis=0)).max() < 0.03

    def test_rejects_zero_dim(self):
        with pytest.raises(ValueError):
            sample_sphere(Rng(0), 3, 0)


class TestSvd:
    def test_golden_ratio_matrix(self):
        res = svd([[1.0, 1.0], [1.0, 0.0]])
        phi = (1 + 5**0.5) / 2
        assert np.allclose(res.sigma, [phi, phi - 1], atol=1e-12)

    def test_diagonal(self):
        res = svd(np.diag([1.0, 3.0, 2.0]))
        assert np.allclose(res.sigma, [3, 2, 1], atol=1e-14)

    def test_zero_matrix(self):
        res = svd(np.zeros((4, 3)))
        assert np.all(res.sigma == 0)
        _check_svd(np.zeros((4, 3)), res)

    def test_wide_matrix(self):
        a = Rng(2).normal((3, 7))
        _check_svd(a, svd(a))

    def test_matches_numpy(self):
        a = Rng(3).normal((12, 9))
        assert np.allclose(svd(a).sigma, np.linalg.svd(a, compute_uv=False), atol=1e-12)

    def test_rank_deficient_product_has_orthonormal_u(self):
        rng = Rng(4)
        a = rng.normal((16, 3)) @ rng.normal((3, 16))
        res = svd(a)
        _check_svd(a, res)
        assert np.sum(res.sigma > 1e-9) == 3

    def test_eckart_young(self):
        a = Rng(5).normal((6, 5))
        res = svd(a)
        err = np.linalg.norm(a - res.truncated(2), 2)
        assert err == pytest.approx(res.sigma[2], rel=1e-10)

    def test_convergence_error(self):
        with pytest.raises(ConvergenceError):
            svd(Rng(6).normal((10, 10)), max_sweeps=1)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            as_matrix([[np.nan]])

    def test_singular_value_curve(self):
        assert np.allclose(singular_value_curve(np.diag([2.0, 5.0])), [5, 2])

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 7), st.integers(1, 7)), elements=finite))
    def test_property_decomposition(self, a):
        _check_svd(a, svd(a))

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=finite))
    def test_property_sigma_matches_eigh_oracle(self, a):
        # independent route: square roots of the Gram matrix eigenvalues
        gram = a.T @ a if a.shape[0] >= a.shape[1] else a @ a.T
        oracle = np.sqrt(np.clip(np.linalg.eigvalsh(gram)[::-1], 0, None))
        assert np.allclose(svd(a).sigma, oracle, atol=1e-6 * max(1.0, np.abs(a).max()))
