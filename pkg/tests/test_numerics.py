import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twfekit import (
    NoIdentifyingVariation,
    fwl_residualize,
    ols,
    pairwise_cross_moment,
)
from twfekit.numerics import independent_columns


class TestOls:
    def test_matches_lstsq_on_full_rank(self, rng):
        for _ in range(20):
            n = int(rng.integers(5, 60))
            p = int(rng.integers(1, min(n, 8)))
            design = rng.normal(size=(n, p))
            response = rng.normal(size=n)
            fit = ols(design, response)
            expected, _, _, _ = np.linalg.lstsq(design, response, rcond=None)
            assert fit.dropped_columns == []
            assert fit.retained_columns == list(range(p))
            scale = max(np.abs(expected).max(), 1.0)
            assert np.abs(fit.coefficients - expected).max() < 1e-10 * scale

    def test_duplicate_column_dropped_same_fit(self, rng):
        design = rng.normal(size=(30, 3))
        response = rng.normal(size=30)
        base = ols(design, response)
        widened = np.column_stack([design, design[:, 1]])
        fit = ols(widened, response)
        assert fit.dropped_columns == [3]
        assert fit.retained_columns == [0, 1, 2]
        assert np.allclose(fit.coefficients, base.coefficients, atol=1e-10)
        assert np.allclose(fit.residuals, base.residuals, atol=1e-10)

    def test_later_indexed_collinear_column_dropped(self, rng):
        a = rng.normal(size=40)
        b = rng.normal(size=40)
        design = np.column_stack([a, b, a + b, rng.normal(size=40)])
        fit = ols(design, rng.normal(size=40))
        assert fit.dropped_columns == [2]

    def test_zero_design_raises(self):
        with pytest.raises(NoIdentifyingVariation, match="no identifying"):
            ols(np.zeros((10, 2)), np.ones(10))

    def test_residual_orthogonality(self, rng):
        design = rng.normal(size=(80, 5)) * 100.0
        response = rng.normal(size=80) * 100.0
        fit = ols(design, response)
        scale = np.abs(design).max() * np.abs(response).max() * 80
        for j in fit.retained_columns:
            assert abs(design[:, j] @ fit.residuals) < 1e-8 * scale

    def test_row_permutation_invariance(self, rng):
        design = rng.normal(size=(25, 4))
        response = rng.normal(size=25)
        fit = ols(design, response)
        perm = rng.permutation(25)
        permuted = ols(design[perm], response[perm])
        assert np.abs(fit.coefficients - permuted.coefficients).max() < 1e-12

    def test_coefficient_accessor(self, rng):
        a = rng.normal(size=20)
        design = np.column_stack([a, 2.0 * a])
        fit = ols(design, rng.normal(size=20))
        assert fit.dropped_columns == [1]
        assert fit.coefficient(1) == 0.0
        assert fit.coefficient(0) == float(fit.coefficients[0])

    def test_row_count_mismatch(self):
        with pytest.raises(ValueError, match="rows"):
            ols(np.ones((4, 1)), np.ones(5))

    def test_near_dependence_threshold(self, rng):
        a = rng.normal(size=200)
        clearly_independent = a + 1e-5 * rng.normal(size=200)
        numerically_dependent = a * (1.0 + 1e-13)
        kept, _ = independent_columns(np.column_stack([a, clearly_independent]))
        assert kept == [0, 1]
        _, dropped = independent_columns(
            np.column_stack([a, numerically_dependent])
        )
        assert dropped == [1]

    def test_one_dimensional_design_accepted(self, rng):
        x = rng.normal(size=15)
        y = 3.0 * x
        fit = ols(x, y)
        assert abs(fit.coefficients[0] - 3.0) < 1e-12


class TestFwlResidualize:
    def test_matches_projection(self, rng):
        controls = rng.normal(size=(40, 3))
        target = rng.normal(size=40)
        resid = fwl_residualize(target, controls)
        beta, _, _, _ = np.linalg.lstsq(controls, target, rcond=None)
        assert np.allclose(resid, target - controls @ beta, atol=1e-10)

    def test_none_and_empty_controls(self, rng):
        target = rng.normal(size=10)
        assert np.array_equal(fwl_residualize(target, None), target)
        empty = np.empty((10, 0))
        assert np.array_equal(fwl_residualize(target, empty), target)

    def test_zero_controls_leave_target(self, rng):
        target = rng.normal(size=12)
        out = fwl_residualize(target, np.zeros((12, 2)))
        assert np.array_equal(out, target)

    def test_fwl_theorem(self, rng):
        """Joint-regression coefficient equals residual-on-residual slope."""
        n = 60
        x = rng.normal(size=n)
        controls = rng.normal(size=(n, 2))
        y = rng.normal(size=n)
        design = np.column_stack([x, controls])
        joint, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
        rx = fwl_residualize(x, controls)
        ry = fwl_residualize(y, controls)
        assert abs(float(rx @ ry) / float(rx @ rx) - joint[0]) < 1e-10

    def test_row_mismatch(self, rng):
        with pytest.raises(ValueError, match="rows"):
            fwl_residualize(np.ones(5), np.ones((4, 1)))


class TestPairwiseCrossMoment:
    def test_hand_checked_case(self):
        # x = (0, 1), y = (0, 1): centred cross moment is 0.5;
        # single pair contributes 1*1 and T = 2.
        lhs, rhs = pairwise_cross_moment([0.0, 1.0], [0.0, 1.0])
        assert lhs == pytest.approx(0.5, abs=1e-15)
        assert rhs == pytest.approx(0.5, abs=1e-15)

    def test_three_point_case(self):
        # x = (1, 2, 4), y = (0, 1, 5): moments computed by hand.
        x = [1.0, 2.0, 4.0]
        y = [0.0, 1.0, 5.0]
        lhs, rhs = pairwise_cross_moment(x, y)
        # x-centred (-4/3, -1/3, 5/3) against y-centred (-2, -1, 3) gives 8;
        # pairwise route: (1 + 15 + 8) / 3 = 8.
        assert lhs == pytest.approx(8.0, rel=1e-14)
        assert rhs == pytest.approx(8.0, rel=1e-13)

    def test_random_sequences(self, rng):
        for _ in range(200):
            t = int(rng.integers(2, 41))
            x = rng.normal(size=t)
            y = rng.normal(size=t)
            lhs, rhs = pairwise_cross_moment(x, y)
            xc = x - x.mean()
            yc = y - y.mean()
            scale = max(
                abs(lhs),
                abs(rhs),
                float(np.sqrt((xc @ xc) * (yc @ yc))),
            )
            assert abs(lhs - rhs) <= 1e-12 * max(scale, 1e-300)

    @settings(max_examples=200, deadline=None)
    @given(
        st.integers(2, 40).flatmap(
            lambda t: st.tuples(
                st.lists(
                    st.floats(
                        -1e8, 1e8, allow_nan=False, allow_infinity=False
                    ),
                    min_size=t,
                    max_size=t,
                ),
                st.lists(
                    st.floats(
                        -1e8, 1e8, allow_nan=False, allow_infinity=False
                    ),
                    min_size=t,
                    max_size=t,
                ),
            )
        )
    )
    def test_identity_property(self, pair):
        """Both routes agree relative to the moment's Cauchy-Schwarz bound."""
        x = np.array(pair[0])
        y = np.array(pair[1])
        lhs, rhs = pairwise_cross_moment(x, y)
        xc = x - x.mean()
        yc = y - y.mean()
        bound = float(np.sqrt((xc @ xc) * (yc @ yc)))
        scale = max(abs(lhs), abs(rhs), bound, 1e-300)
        assert abs(lhs - rhs) <= 1e-11 * scale

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            pairwise_cross_moment([1.0, 2.0], [1.0])

    def test_too_short(self):
        with pytest.raises(ValueError, match="two observations"):
            pairwise_cross_moment([1.0], [1.0])
