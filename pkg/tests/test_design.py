"""Latin hypercube stratification and candidate-set construction."""

import numpy as np
import pytest

from wugo.design import (
    CandidateSet,
    DesignError,
    SearchSpace,
    build_candidates,
    lhs_init,
)


def strata_counts(coords, lo, hi, n):
    edges = np.linspace(lo, hi, n + 1)
    idx = np.clip(np.searchsorted(edges, coords, side="right") - 1, 0, n - 1)
    return np.bincount(idx, minlength=n)


class TestLhsInit:
    def test_single_point_in_bounds(self):
        space = SearchSpace(((-5, 5), (0, 1)))
        pts = lhs_init(space, 1, np.random.default_rng(0))
        assert pts.shape == (1, 2)
        assert np.all(pts >= space.lower) and np.all(pts <= space.upper)

    def test_four_points_one_per_stratum(self):
        space = SearchSpace(((-5, 5), (-5, 5)))
        pts = lhs_init(space, 4, np.random.default_rng(3))
        for j in range(2):
            counts = strata_counts(pts[:, j], -5, 5, 4)
            assert np.all(counts == 1)

    def test_121_points_8_dims_stratified(self):
        space = SearchSpace(((-2, 2),) * 8)
        pts = lhs_init(space, 121, np.random.default_rng(9))
        assert pts.shape == (121, 8)
        for j in range(8):
            counts = strata_counts(pts[:, j], -2, 2, 121)
            assert np.all(counts == 1)

    def test_stratification_property_random_sizes(self):
        rng = np.random.default_rng(10)
        space = SearchSpace(((0, 1), (-3, 7), (100, 200)))
        for n in (2, 7, 33):
            pts = lhs_init(space, n, rng)
            for j, (lo, hi) in enumerate(space.bounds):
                assert np.all(strata_counts(pts[:, j], lo, hi, n) == 1)

    def test_zero_points_rejected(self):
        with pytest.raises(DesignError):
            lhs_init(SearchSpace(((0, 1),)), 0, np.random.default_rng(0))


class TestBuildCandidates:
    def test_grid2d_size_and_spacing(self):
        space = SearchSpace(((-5, 5), (-5, 5)))
        c = build_candidates(space, "grid2d", 101, np.random.default_rng(0))
        assert c.size == 101 * 101
        xs = np.unique(c.points[:, 0])
        assert xs.size == 101
        assert np.allclose(np.diff(xs), 0.1)

    def test_grid2d_contains_origin(self):
        space = SearchSpace(((-5, 5), (-5, 5)))
        c = build_candidates(space, "grid2d", 101, np.random.default_rng(0))
        assert np.any(np.all(c.points == 0.0, axis=1))

    def test_grid2d_contains_corners(self):
        space = SearchSpace(((-4, 6), (-4, 6)))
        c = build_candidates(space, "grid2d", 101, np.random.default_rng(0))
        for corner in ((-4.0, -4.0), (6.0, 6.0)):
            assert np.any(np.all(c.points == np.array(corner), axis=1))

    def test_grid2d_axis0_varies_fastest(self):
        space = SearchSpace(((0, 1), (0, 1)))
        c = build_candidates(space, "grid2d", 3, np.random.default_rng(0))
        np.testing.assert_allclose(c.points[0], [0.0, 0.0])
        np.testing.assert_allclose(c.points[1], [0.5, 0.0])
        np.testing.assert_allclose(c.points[3], [0.0, 0.5])

    def test_grid2d_requires_two_dims(self):
        with pytest.raises(DesignError):
            build_candidates(
                SearchSpace(((0, 1),) * 3), "grid2d", 11, np.random.default_rng(0)
            )

    def test_lhs_fixed_count_and_bounds(self):
        space = SearchSpace(((-2, 2),) * 20)
        c = build_candidates(space, "lhs_fixed", 10201, np.random.default_rng(1))
        assert c.size == 10201
        assert np.all(c.points >= -2) and np.all(c.points <= 2)

    def test_deterministic_given_seed(self):
        space = SearchSpace(((-2, 2),) * 5)
        a = build_candidates(space, "lhs_fixed", 500, np.random.default_rng(7))
        b = build_candidates(space, "lhs_fixed", 500, np.random.default_rng(7))
        np.testing.assert_array_equal(a.points, b.points)
        g1 = build_candidates(
            SearchSpace(((-5, 5), (-5, 5))), "grid2d", 101, np.random.default_rng(0)
        )
        g2 = build_candidates(
            SearchSpace(((-5, 5), (-5, 5))), "grid2d", 101, np.random.default_rng(99)
        )
        np.testing.assert_array_equal(g1.points, g2.points)

    def test_unknown_kind_rejected(self):
        with pytest.raises(DesignError):
            build_candidates(
                SearchSpace(((0, 1), (0, 1))), "sobol", 10, np.random.default_rng(0)
            )

    def test_candidate_set_is_ordered(self):
        space = SearchSpace(((0, 1), (0, 1)))
        c = build_candidates(space, "grid2d", 4, np.random.default_rng(0))
        assert isinstance(c, CandidateSet)
        assert c.points.shape == (16, 2)
