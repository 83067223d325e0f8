import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import oracle_kernel
from zygfrac.kernels import (KernelSpec, SingularPoint, eval_kernel, generic_comparability_ratio,
                             kernel_dilation_factor, kernel_pointwise_compare, shell_comparability_bounds,
                             shell_reference_log2)
from zygfrac.params import ConstraintViolation, OperatorParams

coord = st.floats(1e-3, 1e3).flatmap(lambda v: st.sampled_from([v, -v]))


class TestEvaluation:
    @pytest.mark.parametrize("a,b", [(0.25, 0.25), (0.7, -0.3), (0.1, 0.5)])
    def test_unit_point(self, a, b):
        assert eval_kernel(KernelSpec.main(a, b), (1.0, 1.0, 1.0)) == pytest.approx(0.5, rel=1e-15)

    @pytest.mark.parametrize("t", [0.25, 0.5, 2.0])
    def test_unit_point_theta(self, t):
        assert eval_kernel(KernelSpec.with_theta(0.25, 0.25, t), (1, 1, 1)) == pytest.approx(2 ** -t, rel=1e-15)

    @given(coord, coord, coord)
    @settings(max_examples=200)
    def test_matches_direct_formula(self, x1, x2, x3):
        spec = KernelSpec.with_theta(0.25, 0.25, 0.7)
        assert eval_kernel(spec, (x1, x2, x3)) == pytest.approx(oracle_kernel(0.25, 0.25, 0.7, (x1, x2, x3)),
                                                                rel=1e-12)

    def test_symmetries(self, rng):
        spec = KernelSpec.main(0.3, 0.2)
        x = rng.normal(size=(1000, 3))
        v = eval_kernel(spec, x)
        np.testing.assert_array_equal(v, eval_kernel(spec, np.abs(x)))
        np.testing.assert_allclose(v, eval_kernel(spec, x[:, [1, 0, 2]]), rtol=1e-15)

    def test_singular(self):
        with pytest.raises(SingularPoint):
            eval_kernel(KernelSpec.main(0.25, 0.25), (0.0, 1.0, 1.0))

    def test_flush_flags(self):
        val, flag = eval_kernel(KernelSpec.main(0.25, 0.25), (1e-300, 1e-300, 1e-300), return_flags=True)
        assert flag and np.isinf(val)
        val, flag = eval_kernel(KernelSpec.main(0.25, 0.25), (1.0, 1.0, 1.0), return_flags=True)
        assert not flag

    def test_invalid_spec(self):
        with pytest.raises(ConstraintViolation):
            KernelSpec.main(-0.5, 0.3)


class TestDilation:
    def test_zero_shift(self):
        lhs, rhs = kernel_dilation_factor(KernelSpec.main(0.25, 0.25), 0, (0.3, 0.7, 1.1))
        assert lhs == rhs

    def test_unit_point_s3(self):
        lhs, rhs = kernel_dilation_factor(KernelSpec.main(0.25, 0.25), 3, (1.0, 1.0, 1.0))
        assert abs(lhs / rhs - 1) < 1e-12

    @given(st.integers(-10, 10), coord, coord, coord, st.floats(0.0, 2.0))
    @settings(max_examples=200)
    def test_random(self, s, x1, x2, x3, t):
        lhs, rhs = kernel_dilation_factor(KernelSpec.with_theta(0.4, 0.1, t), s, (x1, x2, x3))
        assert abs(lhs / rhs - 1) < 1e-12


class TestPointwise:
    def test_unit_point(self, main_params):
        a, b = kernel_pointwise_compare(main_params, 0.5, (1.0, 1.0, 1.0))
        assert a == pytest.approx(0.5) and b == pytest.approx(2 ** -0.5)

    def test_theta_one_equal(self, main_params, rng):
        a, b = kernel_pointwise_compare(main_params, 1.0, rng.normal(size=(100, 3)))
        np.testing.assert_array_equal(a, b)

    def test_dominated(self, main_params, rng):
        x = rng.normal(size=(100_000, 3)) * np.exp2(rng.uniform(-8, 8, (100_000, 3)))
        a, b = kernel_pointwise_compare(main_params, 0.5, x)
        assert np.all(a <= b)

    def test_range(self, main_params):
        with pytest.raises(ValueError):
            kernel_pointwise_compare(main_params, 1.5, (1, 1, 1))


def _shell_points(idx, n, rng):
    ell, j, k = idx
    e = np.array([j, j - ell, 2 * j - ell - k], dtype=float)
    return np.exp2(e) * rng.uniform(1.0, 2.0, (n, 3))


class TestShellBounds:
    @pytest.mark.parametrize("idx", [(0, 0, 0), (3, -1, 2), (-2, 4, -5), (1, 0, -2), (5, 2, 7)])
    @pytest.mark.parametrize("theta", [1.0, 0.2])
    def test_contains_samples(self, idx, theta, rng):
        spec = KernelSpec.with_theta(0.25, 0.25, theta)
        ratio = eval_kernel(spec, _shell_points(idx, 10_000, rng)) / 2.0 ** shell_reference_log2(spec, *idx)
        lo, hi = shell_comparability_bounds(spec, idx)
        assert lo <= ratio.min() and ratio.max() <= hi
        assert hi / lo <= generic_comparability_ratio(spec) * (1 + 1e-12)

    def test_bracketless(self):
        spec = KernelSpec.with_theta(0.25, 0.5, 0.0)
        lo, hi = shell_comparability_bounds(spec, (2, 1, 3))
        # all three exponents negative: each factor ranges over [2^e, 1]
        assert lo == pytest.approx(2.0 ** (-0.75 - 0.75 - 0.5), rel=1e-15)
        assert hi == 1.0
