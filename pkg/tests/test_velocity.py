import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cimpcc import (
    DomainError,
    InvalidFactor,
    MappingParams,
    VelocityBounds,
    derive_velocity_bounds,
    map_nsc_to_beta,
)


class TestMapping:
    def test_flat_curvature_gives_unity(self):
        for alpha in (0.5, 1.0, 3.0, 8.0):
            assert map_nsc_to_beta(0.0, MappingParams(alpha)) == 1.0

    def test_sharpest_curvature_gives_floor(self):
        for alpha in (0.5, 1.0, 3.0, 8.0):
            beta = map_nsc_to_beta(1.0, MappingParams(alpha))
            assert beta == math.exp(-alpha)
            assert beta > 0.0

    def test_midpoint_value(self):
        assert map_nsc_to_beta(0.5, MappingParams(2.0)) == pytest.approx(
            math.exp(-0.5), abs=1e-15
        )

    def test_out_of_domain_raises(self):
        params = MappingParams(3.0)
        with pytest.raises(DomainError):
            map_nsc_to_beta(-0.01, params)
        with pytest.raises(DomainError):
            map_nsc_to_beta(1.01, params)

    def test_within_tolerance_clamps(self):
        params = MappingParams(3.0)
        assert map_nsc_to_beta(-1e-10, params) == 1.0
        assert map_nsc_to_beta(1.0 + 1e-10, params) == math.exp(-3.0)

    def test_alpha_must_be_positive(self):
        with pytest.raises(DomainError):
            MappingParams(0.0)

    @given(
        st.floats(0, 1, allow_nan=False),
        st.floats(0, 1, allow_nan=False),
        st.floats(0.1, 10, allow_nan=False),
    )
    @settings(max_examples=100, deadline=None)
    def test_monotone_decreasing(self, a, b, alpha):
        params = MappingParams(alpha)
        lo, hi = sorted((a, b))
        assert map_nsc_to_beta(lo, params) >= map_nsc_to_beta(hi, params)

    def test_lipschitz_bound_on_grid(self):
        # |g'| = 2*alpha*n*exp(-alpha*n^2) <= alpha on [0, 1]; this holds
        # for alpha >= 2/e (at smaller alpha the derivative at n=1 exceeds
        # alpha, so the constant would have to grow to 2*alpha*exp(-alpha)).
        for alpha in (0.74, 2.0, 3.0, 7.0):
            params = MappingParams(alpha)
            grid = np.linspace(0, 1, 400)
            vals = np.array([map_nsc_to_beta(float(n), params) for n in grid])
            diffs = np.abs(np.diff(vals)) / np.diff(grid)
            assert np.all(diffs <= alpha + 1e-9)

    def test_range_endpoints(self):
        params = MappingParams(3.0)
        values = [map_nsc_to_beta(n, params) for n in np.linspace(0, 1, 100)]
        assert max(values) == 1.0
        assert min(values) == math.exp(-3.0)


class TestVelocityBounds:
    def test_table_values_from_expert_lap(self):
        vb = derive_velocity_bounds(expert_vp=3.8, body_factor=1.1, discount=0.65)
        assert vb.v_bar[0] == pytest.approx(4.18)
        assert vb.v_bar[1] == pytest.approx(3.8)
        # 4.18 * 0.65 = 2.717; published rounding says 2.72.
        assert vb.v_under[0] == pytest.approx(2.717)
        assert vb.v_under[1] == pytest.approx(2.47)

    def test_discount_boundaries_rejected(self):
        with pytest.raises(InvalidFactor):
            derive_velocity_bounds(3.8, 1.1, 1.0)
        with pytest.raises(InvalidFactor):
            derive_velocity_bounds(3.8, 1.1, 0.0)

    def test_unit_case(self):
        vb = derive_velocity_bounds(1.0, 1.0, 0.5)
        assert vb.v_bar == (1.0, 1.0)
        assert vb.v_under == (0.5, 0.5)

    def test_body_factor_below_one_rejected(self):
        with pytest.raises(InvalidFactor):
            derive_velocity_bounds(3.8, 0.9, 0.65)

    def test_nonpositive_expert_rejected(self):
        with pytest.raises(InvalidFactor):
            derive_velocity_bounds(0.0, 1.1, 0.65)

    def test_default_bounds_keep_published_safe_pair(self):
        vb = VelocityBounds()
        assert vb.v_bar == (4.18, 3.8)
        assert vb.v_under == (2.72, 2.47)

    def test_ordering_enforced(self):
        with pytest.raises(InvalidFactor):
            VelocityBounds(v_bar=(2.0, 2.0), v_under=(2.5, 1.0))
