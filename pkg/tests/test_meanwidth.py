import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from relu_spectra.errors import InfeasibleError, UnboundedError
from relu_spectra.meanwidth import (
    c_const,
    gmw_operator_general,
    gmw_operator_linear,
    gmw_set,
    hull_diff_lp,
    smw_set,
    sup_linear_over_hull_diff,
)
from relu_spectra.simplex import simplex_solve
from relu_spectra.spectra import ReluLayer
from relu_spectra.tensor_core import Rng, sample_sphere

small = st.floats(-5, 5, allow_nan=False)


class TestConstant:
    @pytest.mark.parametrize(
        "n, expected",
        [(1, math.sqrt(2 / math.pi)), (2, math.sqrt(math.pi / 2)), (4, 0.75 * math.sqrt(2 * math.pi))],
    )
    def test_closed_forms(self, n, expected):
        assert c_const(n) == pytest.approx(expected, abs=1e-10)

    def test_huge_n_is_finite(self):
        c = c_const(10**6)
        assert math.isfinite(c)
        assert c == pytest.approx(math.sqrt(10**6 - 0.5), rel=1e-9)

    def test_is_mean_chi_norm(self):
        # Monte Carlo oracle: E|g| for g ~ N(0, I_5)
        g = Rng(0).normal((200_000, 5))
        assert np.linalg.norm(g, axis=1).mean() == pytest.approx(c_const(5), rel=5e-3)

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            c_const(0)


class TestSupremum:
    def test_symmetric_pair(self):
        k = np.array([[1.0, 0.0], [-1.0, 0.0]])
        assert sup_linear_over_hull_diff(k, [0.7, 5.0]) == pytest.approx(1.4)

    def test_singleton_is_zero(self):
        assert sup_linear_over_hull_diff([[1.0, 2.0]], [3.0, 4.0]) == 0.0

    def test_lp_matches_closed_form(self):
        rng = Rng(1)
        for _ in range(20):
            k, g = rng.normal((20, 4)), rng.normal(4)
            assert hull_diff_lp(k, g) == pytest.approx(sup_linear_over_hull_diff(k, g), abs=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 8), st.just(3)), elements=small),
           arrays(np.float64, 3, elements=small),
           arrays(np.float64, 3, elements=small))
    def test_translation_invariant(self, k, g, shift):
        # equal up to rounding in the projections
        a = sup_linear_over_hull_diff(k, g)
        b = sup_linear_over_hull_diff(k + shift, g)
        assert b == pytest.approx(a, abs=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 8), st.just(2)), elements=small),
           arrays(np.float64, 2, elements=small),
           st.floats(0, 10))
    def test_positive_homogeneous(self, k, g, t):
        assert sup_linear_over_hull_diff(t * k, g) == pytest.approx(
            t * sup_linear_over_hull_diff(k, g), abs=1e-9)


class TestSimplex:
    def test_small_lp(self):
        # min -x - y  s.t. x + y + s = 1
        opt, z = simplex_solve([-1.0, -1.0, 0.0], [[1.0, 1.0, 1.0]], [1.0])
        assert opt == pytest.approx(-1.0)
        assert z[:2].sum() == pytest.approx(1.0)

    def test_infeasible(self):
        with pytest.raises(InfeasibleError):
            simplex_solve([1.0, 1.0], [[1.0, 1.0], [1.0, 1.0]], [1.0, 2.0])

    def test_unbounded(self):
        with pytest.raises(UnboundedError):
            simplex_solve([-1.0, 0.0], [[1.0, -1.0]], [0.0])

    def test_redundant_rows(self):
        opt, _ = simplex_solve([1.0, 2.0], [[1.0, 1.0], [2.0, 2.0]], [1.0, 2.0])
        assert opt == pytest.approx(1.0)

    def test_against_scipy(self):
        linprog = pytest.importorskip("scipy.optimize").linprog
        rng = Rng(2)
        for _ in range(10):
            a = np.abs(rng.normal((3, 6)))
            b = np.abs(rng.normal(3)) + 0.1
            c = rng.normal(6) + 1.0
            ref = linprog(c, A_eq=a, b_eq=b, bounds=[(0, None)] * 6, method="highs")
            if ref.status != 0:
                continue
            opt, _ = simplex_solve(c, a, b)
            assert opt == pytest.approx(ref.fun, abs=1e-8)


class TestSetWidth:
    def test_segment(self):
        est = gmw_set(np.array([[1.0, 0.0], [-1.0, 0.0]]), 10_000, Rng(3))
        target = 2 * math.sqrt(2 / math.pi)
        assert abs(est.value - target) <= 3 * est.stderr

    def test_point_has_zero_width(self):
        est = gmw_set([[0.0, 0.0, 0.0]], 50, Rng(4))
        assert est.value == 0.0 and est.stderr == 0.0

    def test_spherical_relation(self):
        pts = sample_sphere(Rng(5), 400, 3)
        g = gmw_set(pts, 4000, Rng(6))
        s = smw_set(pts, 4000, Rng(7))
        assert g.value == pytest.approx(c_const(3) * s.value, rel=0.03)

    def test_deterministic_and_csv(self, tmp_path):
        a = gmw_set(np.eye(3), 20, Rng(8))
        b = gmw_set(np.eye(3), 20, Rng(8))
        assert np.array_equal(a.per_sample_values, b.per_sample_values)
        a.to_csv(tmp_path / "w.csv")
        lines = (tmp_path / "w.csv").read_text().splitlines()
        assert lines[0] == "sample_index,value"
        assert lines[-4].startswith("mean,")


class TestOperatorWidth:
    def test_identity(self):
        # |A^T u| = 1 for A = I, so the width is exactly 2 c_m
        est = gmw_operator_linear(np.eye(4), 50, Rng(9))
        assert est.value == pytest.approx(2 * c_const(4))

    def test_formulas_agree(self):
        a = Rng(10).normal((5, 3))
        t = gmw_operator_linear(a, 4000, Rng(11), via="transpose")
        s = gmw_operator_linear(a, 4000, Rng(12), via="singular_values")
        assert abs(t.value - s.value) <= 3 * math.hypot(t.stderr, s.stderr)

    def test_unknown_formula(self):
        with pytest.raises(ValueError):
            gmw_operator_linear(np.eye(2), via="qr")

    def test_general_linear_map_converges_from_below(self):
        a = Rng(13).normal((3, 2))
        domain = sample_sphere(Rng(14), 2000, 2)
        general = gmw_operator_general(lambda x: x @ a.T, domain, 3000, Rng(15))
        linear = gmw_operator_linear(a, 3000, Rng(16))
        assert general.value == pytest.approx(linear.value, rel=0.05)

    def test_relu_layer_below_linear(self):
        layer = ReluLayer(Rng(17).normal((4, 3)))
        domain = sample_sphere(Rng(18), 1000, 3)
        relu = gmw_operator_general(layer, domain, 2000, Rng(19))
        linear = gmw_operator_linear(layer.weights, 2000, Rng(19))
        assert relu.value <= linear.value

    def test_domain_outside_ball(self):
        with pytest.raises(ValueError):
            gmw_operator_general(lambda x: x, 2 * np.eye(2), 10, Rng(0))
