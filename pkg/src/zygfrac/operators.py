"""Midpoint quadrature for the fractional integrals, their cone/shell pieces,
and dyadic-box maximal functions.

Sources sit at cell centers and targets at lattice corners, so every
coordinate difference is at least half a cell and no kernel singularity is
ever sampled.  Piece values are accumulated in extended precision
(``np.longdouble``) grouped by shell index; the total is the sum of the
same per-sample contributions, so the cone pieces partition it exactly up
to final rounding.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np

from .dyadic import ShellIndex, classify_many, dyadic_exponent
from .fields import CoverageError, FunctionField, QuadratureGrid
from .kernels import KernelSpec, eval_kernel, kernel_log2
from .params import ThreeParamExponents

LEVELS = {"ell": 1, "ellj": 2, "elljk": 3}


@dataclass(frozen=True)
class OperatorInstance:
    spec: KernelSpec
    grid: QuadratureGrid
    # optional (min, max) truncation of the cone index
    shell_window: tuple[int, int] | None = None


@dataclass(frozen=True)
class SourceSamples:
    points: np.ndarray   # (M, 3), lexicographic lattice order
    values: np.ndarray   # f at the points, all > 0
    cell_volume: float

    @property
    def weights(self) -> np.ndarray:
        return self.values * self.cell_volume


@lru_cache(maxsize=32)
def source_samples(f: FunctionField, grid: QuadratureGrid) -> SourceSamples:
    if not grid.offset:
        raise ValueError("operator quadrature needs cell-centered samples (offset=True)")
    if not grid.covers(f.support_box):
        raise CoverageError(f"grid {grid.box} does not cover support {f.support_box}")
    pts = grid.sample_points()
    vals = np.asarray(f(pts))
    keep = vals > 0
    return SourceSamples(pts[keep], vals[keep], grid.cell_volume)


def _contributions(inst: OperatorInstance, f: FunctionField, x) -> tuple[np.ndarray, np.ndarray]:
    src = source_samples(f, inst.grid)
    d = np.asarray(x, dtype=float) - src.points
    w = src.weights * np.exp2(kernel_log2(inst.spec, d))
    return w, d


def _window_mask(inst: OperatorInstance, ell: np.ndarray) -> np.ndarray | None:
    if inst.shell_window is None:
        return None
    lo, hi = inst.shell_window
    return (ell >= lo) & (ell <= hi)


def decompose(inst: OperatorInstance, f: FunctionField, x, level: str = "ell") -> tuple[np.ndarray, np.ndarray]:
    """Shell-indexed pieces of the integral at ``x``.

    Returns ``(keys, values)`` with ``keys`` of shape ``(G, m)`` holding
    ``(ell,)``, ``(ell, j)`` or ``(ell, j, k)`` sorted lexicographically.
    """
    m = LEVELS[level]
    w, d = _contributions(inst, f, x)
    ell, j, k, _ = classify_many(np.zeros(3), d)
    keys = np.stack([ell, j, k], axis=1)[:, :m]
    mask = _window_mask(inst, ell)
    if mask is not None:
        keys, w = keys[mask], w[mask]
    if len(w) == 0:
        return np.zeros((0, m), dtype=np.int64), np.zeros(0)
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    acc = np.zeros(len(uniq), dtype=np.longdouble)
    np.add.at(acc, inv.ravel(), w.astype(np.longdouble))
    return uniq, acc.astype(float)


def apply(inst: OperatorInstance, f: FunctionField, x) -> float:
    """Quadrature value of the full integral at the target ``x``."""
    w, d = _contributions(inst, f, x)
    mask = None
    if inst.shell_window is not None:
        ell, _, _, _ = classify_many(np.zeros(3), d)
        mask = _window_mask(inst, ell)
    if mask is not None:
        w = w[mask]
    return float(np.sum(w.astype(np.longdouble)))


def apply_many(inst: OperatorInstance, f: FunctionField, xs, threads: int = 1) -> np.ndarray:
    return np.array(parallel_map(lambda x: apply(inst, f, x), np.atleast_2d(xs), threads))


def cone_values(inst: OperatorInstance, f: FunctionField, x) -> dict[int, float]:
    keys, vals = decompose(inst, f, x, "ell")
    return {int(kk[0]): float(v) for kk, v in zip(keys, vals)}


def _lookup(keys: np.ndarray, vals: np.ndarray, target: tuple) -> float:
    if len(keys) == 0:
        return 0.0
    hit = np.all(keys == np.asarray(target), axis=1)
    return float(vals[hit][0]) if hit.any() else 0.0


def apply_delta(inst: OperatorInstance, f: FunctionField, ell: int, x) -> float:
    keys, vals = decompose(inst, f, x, "ell")
    return _lookup(keys, vals, (ell,))


def apply_delta_j(inst: OperatorInstance, f: FunctionField, ell: int, j: int, x) -> float:
    keys, vals = decompose(inst, f, x, "ellj")
    return _lookup(keys, vals, (ell, j))


def apply_delta_jk(inst: OperatorInstance, f: FunctionField, idx: ShellIndex, x) -> float:
    keys, vals = decompose(inst, f, x, "elljk")
    return _lookup(keys, vals, tuple(idx))


def shell_window_for(grid: QuadratureGrid, x) -> dict[str, tuple[int, int]]:
    """Index ranges of every shell that can meet the grid's samples from ``x``.

    Computed from the per-axis nearest/farthest sample distances; shells
    outside these ranges are empty, so truncating to them is exact.
    """
    x = np.asarray(x, dtype=float)
    dmin, dmax = [], []
    for a in range(3):
        pts = grid.axis_points(a)
        dist = np.abs(pts - x[a])
        dmin.append(dist.min())
        dmax.append(dist.max())
    emin, emax = dyadic_exponent(np.array(dmin)), dyadic_exponent(np.array(dmax))
    j = (int(emin[0]), int(emax[0]))
    ell = (int(emin[0] - emax[1]), int(emax[0] - emin[1]))
    k = (int(emin[0] + emin[1] - emax[2]), int(emax[0] + emax[1] - emin[2]))
    return {"ell": ell, "j": j, "k": k}


def parallel_map(fn: Callable, items: Iterable, threads: int = 1) -> list:
    items = list(items)
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------- maximal

@dataclass(frozen=True)
class PrefixSumTable:
    """Cumulative sums of ``f^r`` over grid cells, padded with a leading zero plane."""

    grid: QuadratureGrid
    power: float
    table: np.ndarray

    def box_sum(self, lo, hi) -> float:
        """Sum over cells ``lo <= i < hi`` (indices clipped to the grid)."""
        n = np.asarray(self.grid.counts)
        lo = np.clip(np.asarray(lo), 0, n)
        hi = np.clip(np.asarray(hi), 0, n)
        if np.any(hi <= lo):
            return 0.0
        P = self.table
        (a1, a2, a3), (b1, b2, b3) = lo, hi
        return float(P[b1, b2, b3] - P[a1, b2, b3] - P[b1, a2, b3] - P[b1, b2, a3]
                     + P[a1, a2, b3] + P[a1, b2, a3] + P[b1, a2, a3] - P[a1, a2, a3])


def build_prefix_table(f: FunctionField, grid: QuadratureGrid, power: float = 1.0) -> PrefixSumTable:
    v = grid.sample(f) ** power
    P = np.zeros(tuple(n + 1 for n in grid.counts))
    P[1:, 1:, 1:] = v.cumsum(0).cumsum(1).cumsum(2)
    return PrefixSumTable(grid, power, P)


def _pow2_upto(n: int) -> list[int]:
    out, s = [], 1
    while True:
        out.append(s)
        if s >= n:
            return out
        s *= 2


def _axis_candidates(t: float, N: int) -> dict[int, np.ndarray]:
    """Dyadic box sizes along one axis and the start cells of boxes that
    contain the coordinate ``t`` (in cell units) and meet the grid."""
    span = max(N, N - math.floor(t), math.ceil(t))
    out = {}
    for n in _pow2_upto(span):
        lo = max(math.ceil(t - n), 1 - n)
        hi = min(math.floor(t), N - 1)
        if hi >= lo:
            out[n] = np.arange(lo, hi + 1)
    return out


def _box_family_max(table: PrefixSumTable, x, zygmund: bool) -> float:
    grid = table.grid
    t = (np.asarray(x, dtype=float) - np.asarray(grid.origin)) / grid.h
    N = grid.counts
    cands = [_axis_candidates(t[a], N[a]) for a in range(3)]
    P = table.table
    ratio = grid.spacing[0] * grid.spacing[1] / grid.spacing[2]
    best = 0.0
    for n1, s1 in cands[0].items():
        for n2, s2 in cands[1].items():
            if zygmund:
                n3f = n1 * n2 * ratio
                n3 = int(round(n3f))
                if n3 < 1 or abs(n3f - n3) > 1e-9 * n3f or n3 not in cands[2]:
                    continue
                sizes3 = {n3: cands[2][n3]}
            else:
                sizes3 = cands[2]
            a1, b1 = np.clip(s1, 0, N[0]), np.clip(s1 + n1, 0, N[0])
            a2, b2 = np.clip(s2, 0, N[1]), np.clip(s2 + n2, 0, N[1])
            # partial inclusion-exclusion over the first two axes
            Pbb = P[np.ix_(b1, b2)]
            Pab = P[np.ix_(a1, b2)]
            Pba = P[np.ix_(b1, a2)]
            Paa = P[np.ix_(a1, a2)]
            for n3, s3 in sizes3.items():
                a3, b3 = np.clip(s3, 0, N[2]), np.clip(s3 + n3, 0, N[2])
                S = (Pbb[:, :, b3] - Pab[:, :, b3] - Pba[:, :, b3] + Paa[:, :, b3]
                     - Pbb[:, :, a3] + Pab[:, :, a3] + Pba[:, :, a3] - Paa[:, :, a3])
                m = S.max() / (n1 * n2 * n3)
                if m > best:
                    best = float(m)
    return best


def strong_maximal(table: PrefixSumTable, x) -> float:
    """Largest average of ``f^r`` over grid-aligned boxes with power-of-two
    cell counts per axis containing ``x`` (closed boxes)."""
    return _box_family_max(table, x, zygmund=False)


def zygmund_maximal(table: PrefixSumTable, x) -> float:
    """As :func:`strong_maximal` restricted to boxes with ``s3 = s1 * s2``."""
    return _box_family_max(table, x, zygmund=True)


# --------------------------------------------------------------- baselines

def baseline_1d(alpha: float, f1: Callable, x: float, a: float, b: float, n: int) -> float:
    """Midpoint quadrature of ``int f1(y) |x - y|^{alpha-1} dy`` over ``[a, b]``."""
    spec = KernelSpec.one_d(alpha)
    h = (b - a) / n
    y = a + (np.arange(n) + 0.5) * h
    fy = np.asarray(f1(y), dtype=float)
    return float(np.sum(fy * eval_kernel(spec, x - y)) * h)


def product_kernel(exps: ThreeParamExponents, d) -> np.ndarray:
    """``prod_i |d_i|^{alpha_i - 1}``, the kernel without the Zygmund bracket."""
    d = np.abs(np.asarray(d, dtype=float))
    e = np.asarray(exps.as_tuple()) - 1.0
    return np.exp2(np.sum(e * np.log2(d), axis=-1))


def baseline_3param(exps: ThreeParamExponents, f: FunctionField, x, grid: QuadratureGrid) -> float:
    src = source_samples(f, grid)
    k = product_kernel(exps, np.asarray(x, dtype=float) - src.points)
    return float(np.sum((src.weights * k).astype(np.longdouble)))

