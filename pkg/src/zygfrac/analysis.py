"""Experiments on the cone decomposition: cone masses, crossover scales,
Hedberg-type bounds, almost-orthogonality decay, Hölder chains, scaling
slopes and the dyadic shear identities.

Integrals in the target variable are Monte Carlo averages over targets
drawn uniformly from a window box and snapped to lattice corners.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dyadic import ShellIndex, classify_many
from .fields import (Box, FunctionField, QuadratureGrid, dilate_field, lp_norm, shear_field,
                     swap_field)
from .kernels import (KernelSpec, generic_comparability_ratio, shell_comparability_bounds,
                      shell_reference_log2, tau)
from .operators import (OperatorInstance, apply, build_prefix_table, cone_values, decompose,
                        parallel_map, source_samples, strong_maximal)
from .params import OperatorParams, sigma


class ZeroFunction(ValueError):
    pass


class UndefinedLambda(ValueError):
    pass


class InsufficientSignal(RuntimeError):
    pass


# ------------------------------------------------------------- cone masses

@dataclass(frozen=True)
class ConeMass:
    ell: int
    value: float


@dataclass(frozen=True)
class LambdaValue:
    ell: int
    x: tuple[float, float, float]
    lam: float


def cone_masses(f: FunctionField, p: float, x, grid: QuadratureGrid) -> dict[int, float]:
    """Normalised L^p mass of ``f`` in every cone around ``x`` that it meets."""
    src = source_samples(f, grid)
    if len(src.values) == 0:
        raise ZeroFunction("cone masses need a nonzero function")
    w = src.values ** p * src.cell_volume
    ell, _, _, _ = classify_many(np.asarray(x, dtype=float), src.points)
    uniq, inv = np.unique(ell, return_inverse=True)
    acc = np.zeros(len(uniq), dtype=np.longdouble)
    np.add.at(acc, inv.ravel(), w.astype(np.longdouble))
    total = acc.sum()
    return {int(l): float(a / total) for l, a in zip(uniq, acc)}


def phi_ell(f: FunctionField, params: OperatorParams, ell: int, x, grid: QuadratureGrid) -> ConeMass:
    return ConeMass(int(ell), cone_masses(f, params.p, x, grid).get(int(ell), 0.0))


def lambda_from_bracket(ell: int, bracket: float) -> float:
    """Solve ``bracket^{1/2} = 2^lam 2^{lam - ell}`` for ``lam``."""
    if not bracket > 0:
        raise UndefinedLambda(f"bracket must be positive, got {bracket}")
    return 0.5 * (ell + 0.5 * math.log2(bracket))


def lambda_bracket(phi: float, norm_p: float, mf: float, p: float) -> float:
    return phi * norm_p ** p / mf ** p


def lambda_of(f: FunctionField, params: OperatorParams, ell: int, x, grid: QuadratureGrid,
              table=None) -> LambdaValue:
    phi = phi_ell(f, params, ell, x, grid).value
    if phi == 0:
        raise UndefinedLambda(f"cone {ell} carries no mass at {x}")
    table = table if table is not None else build_prefix_table(f, grid)
    mf = strong_maximal(table, x)
    if mf <= 0:
        raise UndefinedLambda("maximal function vanishes")
    b = lambda_bracket(phi, lp_norm(f, params.p, grid), mf, params.p)
    return LambdaValue(int(ell), tuple(np.asarray(x, dtype=float).tolist()), lambda_from_bracket(ell, b))


# ------------------------------------------------------------- targets

def default_window(f: FunctionField, factor: float = 2.0) -> Box:
    return f.support_box.scaled(factor)


def sample_targets(grid: QuadratureGrid, window: Box, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` lattice corners drawn uniformly from ``window``; returns corner indices."""
    u = rng.uniform(window.lo, window.hi, size=(n, 3))
    return grid.corner_index(u)


# ------------------------------------------------------------- hedberg

@dataclass
class HedbergResult:
    rows: list[dict]
    c_hat: float          # max ratio for the cone-level bound
    c_hat_j: float        # max ratio for the (cone, j)-level bound with decay factor
    c_est2: float         # max of Delta_{lj} / (2^{(2j-l)(a+b)} Mf)
    vartheta: float

    @property
    def all_finite(self) -> bool:
        return all(math.isfinite(r["ratio"]) and r["ratio"] > 0 for r in self.rows)


def hedberg_check(f: FunctionField, params: OperatorParams, vartheta: float, xs,
                  grid: QuadratureGrid, threads: int = 1) -> HedbergResult:
    """Ratios of the cone pieces of the ``vartheta``-kernel operator to their
    maximal-function bounds at each target in ``xs``."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    src = source_samples(f, grid)
    if len(src.values) == 0:
        return HedbergResult([], 0.0, 0.0, 0.0, vartheta)
    p, q = params.p, params.q
    a, b = params.alpha, params.beta
    sig = sigma(params)
    norm_p = lp_norm(f, p, grid)
    table = build_prefix_table(f, grid)
    inst = OperatorInstance(KernelSpec.with_theta(a, b, vartheta), grid)

    def one(ix):
        i, x = ix
        mf = strong_maximal(table, x)
        phis = cone_masses(f, p, x, grid)
        keys, vals = decompose(inst, f, x, "ellj")
        rows = []
        for ell in np.unique(keys[:, 0]):
            ell = int(ell)
            phi = phis.get(ell, 0.0)
            if phi <= 0:
                continue
            base = norm_p ** (1 - p / q) * phi ** (1 / p - 1 / q) * mf ** (p / q)
            sel = keys[:, 0] == ell
            lhs = float(np.sum(vals[sel]))
            lam = lambda_from_bracket(ell, lambda_bracket(phi, norm_p, mf, p))
            js, dj = keys[sel, 1], vals[sel]
            decay = np.exp2(-2.0 * np.abs(js - lam) * sig)
            ratio_j = dj / (decay * base)
            est2 = dj / (np.exp2((2.0 * js - ell) * (a + b)) * mf)
            rows.append({"x_index": i, "ell": ell, "lhs": lhs, "rhs": base, "ratio": lhs / base,
                         "lambda": lam, "ratio_j_max": float(ratio_j.max()),
                         "est2_max": float(est2.max())})
        return rows

    per_x = parallel_map(one, list(enumerate(xs)), threads) if len(xs) else []
    rows = [r for rs in per_x for r in rs]
    if not rows:
        return HedbergResult([], 0.0, 0.0, 0.0, vartheta)
    return HedbergResult(
        rows,
        max(r["ratio"] for r in rows),
        max(r["ratio_j_max"] for r in rows),
        max(r["est2_max"] for r in rows),
        vartheta,
    )


def est1_check(f: FunctionField, spec: KernelSpec, xs, grid: QuadratureGrid) -> dict:
    """Shell pieces against ``upper * 2^{ja} 2^{(j-l)a} 2^{(2j-l-k)b} [2^k+2^-k]^{-theta} * Mf``.

    ``upper`` is the rigorous shell comparability bound; the remaining
    constant comes from enclosing the shell in a box of four times its side
    lengths and then in a dyadic family box (at most four times larger per
    axis), so the bound holds with ``C = upper * 4^3 * 4^3``.
    """
    table = build_prefix_table(f, grid)
    inst = OperatorInstance(spec, grid)
    worst, violations, n = 0.0, 0, 0
    for x in np.atleast_2d(xs):
        mf = strong_maximal(table, x)
        keys, vals = decompose(inst, f, x, "elljk")
        for (ell, j, k), v in zip(keys, vals):
            up = shell_comparability_bounds(spec, (ell, j, k)).upper
            vol_log2 = j + (j - ell) + (2 * j - ell - k)
            ref = 2.0 ** (shell_reference_log2(spec, ell, j, k) + vol_log2)
            r = v / (up * ref * mf)
            worst = max(worst, r)
            violations += int(r > 4096.0)
            n += 1
    return {"max_ratio": worst, "constant": 4096.0, "violations": violations, "shells": n}


# ------------------------------------------------------------- decay

@dataclass
class DecayFit:
    h_values: list[int]
    s_values: list[float]
    epsilon_hat: float
    fit_quality: float
    ci_low: float = float("nan")
    ci_high: float = float("nan")
    per_x: np.ndarray | None = field(default=None, repr=False)


def cone_matrix(inst: OperatorInstance, f: FunctionField, xs, threads: int = 1) -> tuple[int, np.ndarray]:
    """Cone pieces at every target as a dense ``(n_targets, n_cones)`` array.

    Column ``c`` holds cone index ``ell0 + c``.
    """
    dicts = parallel_map(lambda x: cone_values(inst, f, x), list(np.atleast_2d(xs)), threads)
    ells = [l for d in dicts for l in d]
    if not ells:
        return 0, np.zeros((len(dicts), 1))
    lo, hi = min(ells), max(ells)
    D = np.zeros((len(dicts), hi - lo + 1))
    for i, d in enumerate(dicts):
        for l, v in d.items():
            D[i, l - lo] = v
    return lo, D


def _shift(D: np.ndarray, h: int) -> np.ndarray:
    """Column ``c`` of the result is column ``c - h`` of ``D`` (zero outside)."""
    out = np.zeros_like(D)
    L = D.shape[1]
    if h >= 0:
        if h < L:
            out[:, h:] = D[:, :L - h]
    elif -h < L:
        out[:, :L + h] = D[:, -h:]
    return out


def cross_terms(A: np.ndarray, B: np.ndarray, q: int, h: int) -> np.ndarray:
    """Per-target ``sum_l A_l (B_{l-h})^{q-1}``."""
    return np.sum(A * _shift(B, h) ** (q - 1), axis=1)


def _fit(hs: np.ndarray, s: np.ndarray) -> tuple[float, float]:
    y = np.log2(s)
    slope, icpt = np.polyfit(hs, y, 1)
    resid = y - (slope * hs + icpt)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return -float(slope), float(r2)


def fit_decay(per_x: np.ndarray, hs, volume: float, fit_from: int = 2, n_boot: int = 1000,
              rng: np.random.Generator | None = None) -> DecayFit:
    """Least-squares fit of ``log2 S(h)`` on the tail ``h >= fit_from`` with a
    bootstrap interval over targets."""
    hs = np.asarray(hs)
    S = volume * per_x.mean(axis=0)
    tail = hs >= fit_from
    if not np.any(S[hs > 0] > 0):
        raise InsufficientSignal("S(h) vanishes for every h > 0")
    use = tail & (S > 0)
    if use.sum() < 2:
        raise InsufficientSignal("fewer than two positive tail values")
    eps, r2 = _fit(hs[use], S[use])
    lo = hi = float("nan")
    if n_boot:
        rng = rng or np.random.default_rng(0)
        n = per_x.shape[0]
        boots = []
        for _ in range(n_boot):
            Sb = per_x[rng.integers(0, n, n)].mean(axis=0)
            ok = tail & (Sb > 0)
            if ok.sum() >= 2:
                boots.append(_fit(hs[ok], Sb[ok])[0])
        lo, hi = np.percentile(boots, [2.5, 97.5])
    return DecayFit(hs.tolist(), S.tolist(), eps, r2, float(lo), float(hi), per_x)


def orthogonality_decay(f: FunctionField, params: OperatorParams, vartheta: float, h_max: int,
                        x_samples: int, seed: int, grid: QuadratureGrid, window: Box | None = None,
                        variant: str = "one", n_boot: int = 1000, fit_from: int = 2,
                        threads: int = 1) -> DecayFit:
    """Monte Carlo estimate of ``S(h) = ∫ sum_l Δ_l If (Δ_{l-h} If)^{q-1} dx`` for ``h = 0..h_max``.

    ``variant="two"`` uses the ``vartheta``-kernel for the first factor.
    """
    q = int(round(params.q))
    rng = np.random.default_rng(seed)
    window = window or default_window(f)
    xs = grid.corner(sample_targets(grid, window, x_samples, rng))
    main = OperatorInstance(KernelSpec.main(params.alpha, params.beta), grid)
    lo, B = cone_matrix(main, f, xs, threads)
    if variant == "two":
        aux = OperatorInstance(KernelSpec.with_theta(params.alpha, params.beta, vartheta), grid)
        lo_a, A = cone_matrix(aux, f, xs, threads)
        A, B = _align(lo_a, A, lo, B)
    else:
        A = B
    hs = np.arange(0, h_max + 1)
    per_x = np.stack([cross_terms(A, B, q, int(h)) for h in hs], axis=1)
    return fit_decay(per_x, hs, window.volume, fit_from, n_boot, rng)


def _align(lo_a, A, lo_b, B):
    lo = min(lo_a, lo_b)
    hi = max(lo_a + A.shape[1], lo_b + B.shape[1])
    out = []
    for l0, M in ((lo_a, A), (lo_b, B)):
        Z = np.zeros((M.shape[0], hi - lo))
        Z[:, l0 - lo:l0 - lo + M.shape[1]] = M
        out.append(Z)
    return out


# ------------------------------------------------------------- hölder

def holder_chain(D: np.ndarray, q: int, hs, weights=None) -> tuple[float, float, float]:
    """The three members of the double Hölder chain for shifts ``hs`` (length ``q - 1``).

    ``D`` is ``(n_targets, n_cones)``; the target integral is a weighted sum.
    Returns ``(mixed, inner, outer)`` with ``mixed <= inner <= outer``.
    """
    hs = list(hs)
    if len(hs) != q - 1:
        raise ValueError("need q - 1 shifts")
    w = np.ones(D.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    prod = D.copy()
    for h in hs:
        prod = prod * _shift(D, h)
    mixed = float(np.sum(w * prod.sum(axis=1)))
    diag = np.stack([cross_terms(D, D, q, h) for h in hs], axis=1)   # (X, q-1)
    inner = float(np.sum(w * np.prod(diag ** (1.0 / (q - 1)), axis=1)))
    outer = float(np.prod(np.sum(w[:, None] * diag, axis=0) ** (1.0 / (q - 1))))
    return mixed, inner, outer


def holder_chain_check(f: FunctionField, params: OperatorParams, x_samples: int, grid: QuadratureGrid,
                       seed: int, n_tuples: int = 20, h_range: int = 4, window: Box | None = None,
                       threads: int = 1) -> dict:
    q = int(round(params.q))
    if q < 2:
        raise ValueError("q must be an integer >= 2")
    rng = np.random.default_rng(seed)
    window = window or default_window(f)
    xs = grid.corner(sample_targets(grid, window, x_samples, rng))
    _, D = cone_matrix(OperatorInstance(KernelSpec.main(params.alpha, params.beta), grid), f, xs, threads)
    rows, fails = [], 0
    for _ in range(n_tuples):
        hs = rng.integers(-h_range, h_range + 1, size=q - 1).tolist()
        m, i, o = holder_chain(D, q, hs)
        ok = m <= i * (1 + 1e-12) and i <= o * (1 + 1e-12)
        fails += int(not ok)
        rows.append({"hs": hs, "mixed": m, "inner": i, "outer": o,
                     "slack_inner": i - m, "slack_outer": o - i})
    return {"rows": rows, "failures": fails}


# ------------------------------------------------------------- scaling

@dataclass
class ScalingResult:
    deltas: list[float]
    ratios: list[float]
    slope: float
    expected_slope: float
    r2: float


def expected_scaling_slope(params: OperatorParams) -> float:
    """Exponent of ``delta`` in ``|I(f∘D)|_q / |f∘D|_p``, ``D = (delta, delta, delta^2)``."""
    return 4 * (1 / params.p - 1 / params.q) - 2 * (params.alpha + params.beta)


def window_corners(grid: QuadratureGrid, window: Box, stride: int) -> np.ndarray:
    """Corner indices on a stride-``stride`` sublattice inside ``window``."""
    o, h = np.asarray(grid.origin), grid.h
    lo = np.ceil((np.asarray(window.lo) - o) / h / stride).astype(int) * stride
    hi = np.floor((np.asarray(window.hi) - o) / h / stride).astype(int) * stride
    axes = [np.arange(lo[a], hi[a] + 1, stride) for a in range(3)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@lru_cache(maxsize=64)
def _dilated_output(f: FunctionField, spec: KernelSpec, grid: QuadratureGrid, delta: float,
                    window: Box, stride: int) -> tuple[np.ndarray, float]:
    idx = window_corners(grid, window, stride)
    g = grid.dilated(delta, delta)
    fd = dilate_field(f, delta, delta)
    inst = OperatorInstance(spec, g)
    vals = np.array([apply(inst, fd, x) for x in g.corner(idx)])
    return vals, float(np.prod(g.h * stride))


def homogeneity_scaling(f: FunctionField, params: OperatorParams, deltas, grid: QuadratureGrid,
                        window: Box | None = None, stride: int = 4) -> ScalingResult:
    """Log-log slope of ``R(delta) = |I(f∘D_delta)|_q / |f∘D_delta|_p``.

    Each dilated problem uses the preimage lattice and the preimage target
    window, so every ``R(delta)`` is computed on the same discrete geometry.
    """
    window = window or default_window(f, 3.0)
    spec = KernelSpec.main(params.alpha, params.beta)
    ratios = []
    for d in deltas:
        vals, w = _dilated_output(f, spec, grid, float(d), window, stride)
        num = (np.sum(vals ** params.q) * w) ** (1 / params.q)
        den = lp_norm(dilate_field(f, d, d), params.p, grid.dilated(d, d))
        ratios.append(num / den)
    lx, ly = np.log2(np.asarray(deltas, dtype=float)), np.log2(ratios)
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icpt)
    ss = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss if ss > 0 else 1.0
    return ScalingResult(list(map(float, deltas)), list(map(float, ratios)), float(slope),
                         expected_scaling_slope(params), float(r2))


# ------------------------------------------------------------- shear identities

def _rel(a: float, b: float) -> float:
    den = max(abs(a), abs(b))
    return 0.0 if den == 0 else abs(a - b) / den


def operator_shear_identity(f: FunctionField, params: OperatorParams, s: int, target_idx,
                            grid: QuadratureGrid, theta: float | None = None) -> float:
    """Largest relative gap between ``Δ_l I f(tau_s x)`` and
    ``2^{-s(a+b)} ∫_{cone l-s at x} f(tau_s y) V(x-y) dy`` over targets and cones.

    ``target_idx`` are corner indices; the right side is computed on the
    preimage lattice ``tau_s^{-1}`` of ``grid``.
    """
    spec = KernelSpec.from_params(params, theta)
    gs = grid.sheared(s)
    fs = shear_field(f, s)
    lhs_inst, rhs_inst = OperatorInstance(spec, grid), OperatorInstance(spec, gs)
    fac = 2.0 ** (-s * (params.alpha + params.beta))
    worst = 0.0
    for idx in np.atleast_2d(target_idx):
        x = gs.corner(idx)
        left = cone_values(lhs_inst, f, tau(s, x))
        right = cone_values(rhs_inst, fs, x)
        for ell in set(left) | {l + s for l in right}:
            worst = max(worst, _rel(left.get(ell, 0.0), fac * right.get(ell - s, 0.0)))
    return worst


def phi_transport_error(f: FunctionField, p: float, s: int, target_idx, grid: QuadratureGrid) -> float:
    """Largest gap between the cone masses of ``f_s`` at ``x`` and those of ``f`` at ``tau_s x``
    (index shifted by ``s``)."""
    gs = grid.sheared(s)
    fs = shear_field(f, s)
    worst = 0.0
    for idx in np.atleast_2d(target_idx):
        x = gs.corner(idx)
        a = cone_masses(fs, p, x, gs)
        b = cone_masses(f, p, tau(s, x), grid)
        for ell in set(a) | {l - s for l in b}:
            worst = max(worst, abs(a.get(ell, 0.0) - b.get(ell + s, 0.0)))
    return worst


def maximal_transport_error(f: FunctionField, s: int, target_idx, grid: QuadratureGrid) -> float:
    gs = grid.sheared(s)
    ta, tb = build_prefix_table(shear_field(f, s), gs), build_prefix_table(f, grid)
    worst = 0.0
    for idx in np.atleast_2d(target_idx):
        x = gs.corner(idx)
        worst = max(worst, _rel(strong_maximal(ta, x), strong_maximal(tb, tau(s, x))))
    return worst


def norm_shear_ratio(f: FunctionField, p: float, s: int, grid: QuadratureGrid) -> float:
    """``|f_s|_p^p / |f|_p^p`` on matched lattices."""
    return lp_norm(shear_field(f, s), p, grid.sheared(s)) ** p / lp_norm(f, p, grid) ** p


def swapped_cross_terms(f: FunctionField, params: OperatorParams, target_idx, grid: QuadratureGrid,
                        hs) -> tuple[np.ndarray, np.ndarray]:
    """Mean cross terms at ``-h`` for ``f`` and at ``h`` for the (x1, x2)-swapped problem."""
    q = int(round(params.q))
    spec = KernelSpec.main(params.alpha, params.beta)
    xs = grid.corner(target_idx)
    gsw = grid.swapped12()
    xsw = xs[:, [1, 0, 2]]
    _, D = cone_matrix(OperatorInstance(spec, grid), f, xs)
    _, Dsw = cone_matrix(OperatorInstance(spec, gsw), swap_field(f), xsw)
    a = np.array([cross_terms(D, D, q, -h).mean() for h in hs])
    b = np.array([cross_terms(Dsw, Dsw, q, h).mean() for h in hs])
    return a, b


def generic_bound_ratio(spec: KernelSpec) -> float:
    return generic_comparability_ratio(spec)


def shell_samples(x, idx: ShellIndex, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random points of the shell ``idx`` around ``x``."""
    ell, j, k = idx
    e = np.array([j, j - ell, 2 * j - ell - k], dtype=float)
    mag = np.exp2(e) * rng.uniform(1.0, 2.0, size=(n, 3))
    sign = np.where(rng.random((n, 3)) < 0.5, -1.0, 1.0)
    return np.asarray(x, dtype=float) + sign * mag
