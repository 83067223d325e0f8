"""End-to-end acceptance criteria, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line (visible in ``pytest -v``
output regardless of capture) before asserting.
"""

import math
import time

import numpy as np
import pytest

from zygfrac import analysis as an
from zygfrac.dyadic import (classify_many, cube_inclusion_check, in_shell, in_shell_many, lemma51_cube,
                            random_case3_config)
from zygfrac.fields import QuadratureGrid, default_corpus, grid_for, make_field
from zygfrac.kernels import KernelSpec, kernel_dilation_factor, kernel_pointwise_compare
from zygfrac.operators import baseline_1d, baseline_3param
from zygfrac.params import OperatorParams, ThreeParamExponents, compute_vartheta

MAIN = OperatorParams(0.25, 0.25, 1.0, 12 / 5, 6)


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {n:2d}] {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


@pytest.fixture
def zbox():
    return make_field("zygmund_box_indicator", (1.0, 1.0))


def test_01_partition_audit(report):
    rng = np.random.default_rng(1)
    n = 100_000
    t0 = time.perf_counter()
    x = rng.uniform(-10, 10, (n, 3))
    y = x + rng.choice([-1.0, 1.0], (n, 3)) * np.exp2(rng.uniform(-30, 30, (n, 3)))
    viol = 0
    # classify each pair relative to its own x
    ell, j, k, valid = classify_many(np.zeros(3), y - x)
    viol += int(np.count_nonzero(~valid))
    viol += int(np.count_nonzero(~in_shell_many(np.zeros(3), y - x, ell, j, k)))
    # uniqueness: neighbouring shells never contain the point
    for dl, dj, dk in [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]:
        viol += int(np.count_nonzero(in_shell_many(np.zeros(3), y - x, ell + dl, j + dj, k + dk)))
    elapsed = time.perf_counter() - t0
    # scalar round trip on a subsample (outside the timed block)
    viol += sum(not in_shell(x[i], y[i], (ell[i], j[i], k[i])) for i in range(0, n, 100))
    report(1, viol == 0 and elapsed < 1.0, f"partition: {viol} violations over {n} pairs in {elapsed:.3f}s")


def test_02_kernel_dilation(report):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        a = rng.uniform(-0.85, 0.9)
        b = rng.uniform(max(-0.9, -a + 0.01), 0.9)
        spec = KernelSpec.with_theta(a, b, rng.uniform(0.0, 2.0))
        x = rng.choice([-1.0, 1.0], 3) * np.exp2(rng.uniform(-20, 20, 3))
        lhs, rhs = kernel_dilation_factor(spec, int(rng.integers(-10, 11)), x)
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
    elapsed = time.perf_counter() - t0
    report(2, worst < 1e-12 and elapsed < 1.0, f"dilation identity: max rel err {worst:.2e} in {elapsed:.3f}s")


def test_03_shear_transport(report, zbox):
    grid = QuadratureGrid.over_box(zbox.support_box, 16)
    idx = an.sample_targets(grid, an.default_window(zbox), 50, np.random.default_rng(3))
    op = phi = mx = nr = 0.0
    for s in range(-3, 4):
        op = max(op, an.operator_shear_identity(zbox, MAIN, s, idx, grid))
        phi = max(phi, an.phi_transport_error(zbox, MAIN.p, s, idx, grid))
        mx = max(mx, an.maximal_transport_error(zbox, s, idx[:5], grid))
        nr = max(nr, abs(an.norm_shear_ratio(zbox, MAIN.p, s, grid) / 2.0 ** (2 * s) - 1))
    ok = op < 1e-10 and phi == 0.0 and nr < 1e-6
    report(3, ok, f"shear: operator {op:.2e}, phi {phi:.1e}, maximal {mx:.1e}, norm ratio {nr:.2e}")


def test_04_phi_normalisation(report):
    rng = np.random.default_rng(4)
    worst = 0.0
    for f in default_corpus():
        grid = QuadratureGrid.over_box(f.support_box, 16)
        for x in grid.corner(an.sample_targets(grid, an.default_window(f), 100, rng)):
            worst = max(worst, abs(sum(an.cone_masses(f, MAIN.p, x, grid).values()) - 1))
    report(4, worst < 1e-10, f"phi normalisation: max |sum - 1| = {worst:.2e}")


def test_05_hedberg_stability(report, zbox):
    vt = compute_vartheta(MAIN)
    coarse = QuadratureGrid.over_box(zbox.support_box, 32)
    fine = coarse.refined()
    # targets on the coarse lattice are also corners of the fine one
    xs = coarse.corner(an.sample_targets(coarse, an.default_window(zbox), 100, np.random.default_rng(5)))
    r32 = an.hedberg_check(zbox, MAIN, vt, xs, coarse)
    t0 = time.perf_counter()
    r64 = an.hedberg_check(zbox, MAIN, vt, xs, fine)
    elapsed = time.perf_counter() - t0
    change = abs(r64.c_hat - r32.c_hat) / r32.c_hat
    change_j = abs(r64.c_hat_j - r32.c_hat_j) / r32.c_hat_j
    ok = r32.all_finite and r64.all_finite and change < 0.15 and change_j < 0.15 and elapsed < 600
    report(5, ok, f"Hedberg: C8 {r32.c_hat:.4g} -> {r64.c_hat:.4g} ({change:.1%}), "
                  f"C7 {r32.c_hat_j:.4g} -> {r64.c_hat_j:.4g} ({change_j:.1%}), 64^3 in {elapsed:.1f}s")


def test_06_decay(report, zbox):
    grid = QuadratureGrid.over_box(zbox.support_box, 32)
    assert (MAIN.q - 2) * (MAIN.alpha + MAIN.beta) / 2 == 1
    t0 = time.perf_counter()
    fit = an.orthogonality_decay(zbox, MAIN, compute_vartheta(MAIN), 8, 200, 6, grid, n_boot=1000)
    elapsed = time.perf_counter() - t0
    ok = fit.ci_low > 0 and fit.fit_quality >= 0.8 and elapsed < 1800
    report(6, ok, f"decay: eps {fit.epsilon_hat:.3f} CI [{fit.ci_low:.3f}, {fit.ci_high:.3f}], "
                  f"R2 {fit.fit_quality:.3f}, {elapsed:.1f}s")


def test_07_homogeneity_scaling(report, zbox):
    grid = QuadratureGrid.over_box(zbox.support_box, 16)
    deltas = [0.25, 0.5, 1.0, 2.0, 4.0]
    # fixed operator and q, p moved off the homogeneous value
    cases = [(0.25 + 1 / 6, 0.0, 0.1), (0.2 + 1 / 6, -0.2, 0.05), (0.3 + 1 / 6, 0.2, 0.05)]
    parts, ok = [], True
    for inv_p, target, tol in cases:
        params = OperatorParams(0.25, 0.25, 1.0, 1 / inv_p, 6)
        res = an.homogeneity_scaling(zbox, params, deltas, grid, stride=4)
        ok &= abs(res.slope - res.expected_slope) <= 0.05 and abs(res.slope - target) <= tol
        parts.append(f"{res.slope:+.4f} (target {target:+.1f})")
    report(7, ok, "scaling slopes: " + ", ".join(parts))


def test_08_lemma51(report):
    rng = np.random.default_rng(8)
    empty = incl = area = 0
    for _ in range(10_000):
        y, wit, ell, j = random_case3_config(rng)
        cube = lemma51_cube(y, wit, ell, j)
        if cube is None:
            empty += 1
            continue
        incl += int(cube_inclusion_check(cube, y, wit, ell, j, 1000, rng) > 0)
        area += int(cube.area != math.ldexp(1.0, 2 * cube.jv - 5))
    report(8, empty + incl + area == 0,
           f"cover cube: {empty} empty, {incl} inclusion, {area} area failures over 10000 configs")


def test_09_classical_baseline(report):
    one = baseline_1d(0.5, np.ones_like, 2.0, 0.0, 1.0, 10_000)
    closed = 2 * (math.sqrt(2) - 1)
    rel1 = abs(one - closed) / closed
    worst = 0.0
    for exps, n in [((0.5, 0.5, 0.5), 16), ((0.3, 0.6, 0.8), 12)]:
        f = make_field("box_indicator", 1.0)
        e = ThreeParamExponents(*exps)
        x = np.array([1.5, -2.25, 0.75])
        prod = np.prod([baseline_1d(a, np.ones_like, x[i], -0.5, 0.5, n) for i, a in enumerate(exps)])
        worst = max(worst, abs(baseline_3param(e, f, x, grid_for(f, n)) - prod) / prod)
    report(9, rel1 < 0.01 and worst < 1e-10, f"baselines: 1D rel err {rel1:.2e}, tensor factorisation {worst:.2e}")


def test_10_pointwise_comparison(report):
    rng = np.random.default_rng(10)
    x = rng.choice([-1.0, 1.0], (100_000, 3)) * np.exp2(rng.uniform(-12, 12, (100_000, 3)))
    viol = 0
    for vt in (compute_vartheta(MAIN), 0.5, 1.0):
        a, b = kernel_pointwise_compare(MAIN, vt, x)
        viol += int(np.count_nonzero(a > b))
    report(10, viol == 0, f"kernel comparison: {viol} violations over 3 x 100000 points")
