import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zygfrac.fields import (CoverageError, InvalidShape, QuadratureGrid, default_corpus, dilate_field,
                            grid_for, lp_norm, make_field, scale_amplitude, shear_field, swap_field)


class TestFields:
    def test_unit_cube_values(self):
        f = make_field("box_indicator", 1.0)
        assert f((0.0, 0.0, 0.0)) == 1.0
        assert f((2.0, 0.0, 0.0)) == 0.0

    def test_zygmund_box_sides(self):
        f = make_field("zygmund_box_indicator", (2.0, 0.5))
        np.testing.assert_allclose(f.support_box.sides, [2.0, 0.5, 1.0])

    def test_bump_nonnegative(self, rng):
        f = make_field("tensor_bump", 1.0)
        assert np.all(f(rng.uniform(-1, 1, (10_000, 3))) >= 0)

    def test_unknown_kind(self):
        with pytest.raises(InvalidShape):
            make_field("sphere")

    def test_bad_size(self):
        with pytest.raises(InvalidShape):
            make_field("box_indicator", (1.0, -1.0, 1.0))

    def test_record_round_trip(self):
        f = dilate_field(make_field("gaussian_like", 0.3, (0.1, 0.2, 0.3), 2.0), 2.0, 0.5)
        g = type(f).from_record(f.to_record())
        pts = np.random.default_rng(1).normal(size=(100, 3))
        np.testing.assert_array_equal(f(pts), g(pts))


class TestTransforms:
    def test_dilate_identity(self, rng):
        f = make_field("tensor_bump", 1.0)
        pts = rng.uniform(-1, 1, (1000, 3))
        np.testing.assert_array_equal(dilate_field(f, 1.0, 1.0)(pts), f(pts))

    def test_dilate_support(self):
        g = dilate_field(make_field("box_indicator", 1.0), 2.0, 1.0)
        np.testing.assert_allclose(g.support_box.sides, [0.5, 1.0, 0.5])

    @pytest.mark.parametrize("delta", [0.5, 2.0, 4.0])
    def test_dilate_norm(self, delta):
        f = make_field("tensor_bump", 1.0)
        p = 2.4
        for n in (16, 32):
            g = dilate_field(f, delta, delta)
            lhs = lp_norm(g, p, grid_for(g, n))
            assert lhs == pytest.approx(delta ** (-4 / p) * lp_norm(f, p, grid_for(f, n)), rel=1e-12)

    def test_shear_zero_is_identity(self, unit_zbox):
        assert shear_field(unit_zbox, 0) is unit_zbox

    @given(st.integers(-6, 6))
    @settings(max_examples=20, deadline=None)
    def test_shear_group_law(self, s):
        f = make_field("gaussian_like", 0.4, (0.1, -0.2, 0.3))
        pts = np.random.default_rng(s + 10).normal(size=(200, 3))
        np.testing.assert_allclose(shear_field(shear_field(f, s), -s)(pts), f(pts), rtol=0, atol=0)

    @pytest.mark.parametrize("s", [-2, -1, 1, 3])
    def test_shear_norm(self, unit_zbox, s):
        g = grid_for(unit_zbox, 16)
        lhs = lp_norm(shear_field(unit_zbox, s), 2.4, g.sheared(s)) ** 2.4
        assert lhs == pytest.approx(2.0 ** (2 * s) * lp_norm(unit_zbox, 2.4, g) ** 2.4, rel=1e-12)

    def test_swap(self, rng):
        f = make_field("box_indicator", (1.0, 2.0, 3.0), (0.5, 0.0, 0.0))
        pts = rng.uniform(-2, 2, (500, 3))
        np.testing.assert_array_equal(swap_field(f)(pts[:, [1, 0, 2]]), f(pts))


class TestNorms:
    @pytest.mark.parametrize("p", [1.5, 2.0, 6.0])
    def test_unit_cube(self, p):
        f = make_field("box_indicator", 1.0)
        assert lp_norm(f, p, grid_for(f, 8)) == pytest.approx(1.0, abs=1e-12)

    def test_zygmund_box_volume_one(self):
        f = make_field("zygmund_box_indicator", (2.0, 0.5))
        assert lp_norm(f, 2.0, grid_for(f, 8)) == pytest.approx(1.0, abs=1e-12)

    def test_amplitude_linearity(self, unit_zbox, grid16):
        g = scale_amplitude(unit_zbox, 3.0)
        assert lp_norm(g, 2.4, grid16) == pytest.approx(3 * lp_norm(unit_zbox, 2.4, grid16), rel=1e-14)

    def test_coverage(self, unit_zbox):
        small = QuadratureGrid.over_box(unit_zbox.support_box.scaled(0.5), 8)
        with pytest.raises(CoverageError):
            lp_norm(unit_zbox, 2.0, small)

    def test_corpus_nonempty(self):
        corpus = default_corpus()
        assert len(corpus) == 4
        for f in corpus:
            assert lp_norm(f, 2.0, grid_for(f, 8)) > 0


class TestGrid:
    def test_sheared_maps_lattice(self, grid16):
        g = grid16.sheared(2)
        idx = np.array([[0, 3, 5], [7, 1, 16]])
        np.testing.assert_array_equal(g.corner(idx) * [1, 0.25, 0.25], grid16.corner(idx))

    def test_corner_index_round_trip(self, grid16):
        idx = np.array([[0, 0, 0], [3, 9, 16]])
        np.testing.assert_array_equal(grid16.corner_index(grid16.corner(idx)), idx)

    def test_swapped(self):
        g = QuadratureGrid((0.0, 1.0, 2.0), (0.1, 0.2, 0.3), (4, 5, 6))
        s = g.swapped12()
        assert s.counts == (5, 4, 6)
        assert s.spacing == (0.2, 0.1, 0.3)
