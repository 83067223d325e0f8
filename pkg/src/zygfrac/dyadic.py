"""Dyadic shells, cones and their rectangle projections.

A source point ``y`` lies in the shell ``(l, j, k)`` around ``x`` when

    2^j           <= |x1 - y1| < 2^{j+1}
    2^{j-l}       <= |x2 - y2| < 2^{j-l+1}
    2^{2j-l-k}    <= |x3 - y3| < 2^{2j-l-k+1}

Bucketing goes through the binary exponent of the float (``np.frexp``), so
the lower-closed / upper-open convention holds exactly at powers of two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np


class ShellIndex(NamedTuple):
    ell: int
    j: int
    k: int


def dyadic_exponent(v) -> np.ndarray:
    """``floor(log2 v)`` for ``v > 0``, exact for every finite float."""
    _, e = np.frexp(np.asarray(v, dtype=float))
    return e.astype(np.int64) - 1


def classify_many(x, ys) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised classification of the rows of ``ys`` relative to ``x``.

    Returns ``(ell, j, k, valid)``; rows with a zero coordinate difference
    are marked invalid and their indices are meaningless.
    """
    d = np.abs(np.atleast_2d(ys) - np.asarray(x, dtype=float))
    valid = np.all(d > 0, axis=1)
    e = dyadic_exponent(np.where(d > 0, d, 1.0))
    j = e[:, 0]
    ell = e[:, 0] - e[:, 1]
    k = e[:, 0] + e[:, 1] - e[:, 2]
    return ell, j, k, valid


def classify(x, y) -> ShellIndex | None:
    ell, j, k, valid = classify_many(x, np.asarray(y, dtype=float)[None, :])
    if not valid[0]:
        return None
    return ShellIndex(int(ell[0]), int(j[0]), int(k[0]))


def in_shell(x, y, idx: ShellIndex) -> bool:
    return classify(x, y) == tuple(idx)


def in_shell_many(x, ys, ell, j, k) -> np.ndarray:
    """Row-wise membership of ``ys`` in the shells ``(ell, j, k)`` by direct comparison."""
    d = np.abs(np.atleast_2d(ys) - np.asarray(x, dtype=float))
    e = np.stack([j, j - ell, 2 * j - ell - k], axis=-1).astype(float)
    return np.all((np.exp2(e) <= d) & (d < np.exp2(e + 1)), axis=1)


def in_cone(x, y, ell: int) -> bool:
    c = classify(x, y)
    return c is not None and c.ell == ell


def _in_band(d, lo_exp, hi_exp) -> np.ndarray:
    """``2^lo_exp <= d < 2^hi_exp`` for ``d > 0``."""
    e = dyadic_exponent(np.where(d > 0, d, 1.0))
    return (d > 0) & (e >= lo_exp) & (e < hi_exp)


def starred_shell_contains(x, y, idx: ShellIndex, r_enlarged: bool = True) -> np.ndarray | bool:
    """Membership in the enlarged shell (first two coordinates widened by 2^3 each way)."""
    ell, j, k = idx
    d = np.abs(np.atleast_2d(y) - np.asarray(x, dtype=float))
    lo, hi = (-3, 3) if r_enlarged else (0, 1)
    ok = (_in_band(d[:, 0], j + lo, j + hi)
          & _in_band(d[:, 1], j - ell + lo, j - ell + hi)
          & _in_band(d[:, 2], 2 * j - ell - k, 2 * j - ell - k + 1))
    return bool(ok[0]) if np.ndim(y) == 1 else ok


@dataclass(frozen=True)
class Annulus:
    """``{t : 2^lo <= |t - center| < 2^hi}`` on the line."""

    center: float
    lo: int
    hi: int

    @property
    def measure(self) -> float:
        return 2.0 * (math.ldexp(1.0, self.hi) - math.ldexp(1.0, self.lo))

    def contains(self, t) -> np.ndarray:
        return _in_band(np.abs(np.asarray(t, dtype=float) - self.center), self.lo, self.hi)

    def breakpoints(self) -> list[float]:
        a, b = math.ldexp(1.0, self.lo), math.ldexp(1.0, self.hi)
        return [self.center - b, self.center - a, self.center + a, self.center + b]


@dataclass(frozen=True)
class RectProjection:
    """Projection of a (possibly starred) cone-shell cylinder to the (x1, x2) plane."""

    center: tuple[float, float]
    ell: int
    j: int
    starred: bool = False

    @property
    def _band(self) -> tuple[int, int]:
        return (-3, 3) if self.starred else (0, 1)

    @property
    def interval1(self) -> Annulus:
        lo, hi = self._band
        return Annulus(self.center[0], self.j + lo, self.j + hi)

    @property
    def interval2(self) -> Annulus:
        lo, hi = self._band
        return Annulus(self.center[1], self.j - self.ell + lo, self.j - self.ell + hi)

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return self.interval1.contains(pts[:, 0]) & self.interval2.contains(pts[:, 1])

    @property
    def measure(self) -> float:
        return self.interval1.measure * self.interval2.measure


def _witness_1d(sets: Sequence[Annulus]) -> float | None:
    """A point in the intersection of the annuli, or None if it is empty.

    Testing the breakpoints and the midpoints between consecutive
    breakpoints is exhaustive for finite unions of intervals.
    """
    bps = sorted({b for s in sets for b in s.breakpoints()})
    cands = [0.5 * (a + b) for a, b in zip(bps, bps[1:])] + bps
    cands = np.asarray(cands)
    ok = np.ones(len(cands), dtype=bool)
    for s in sets:
        ok &= s.contains(cands)
    hits = np.flatnonzero(ok)
    return float(cands[hits[0]]) if hits.size else None


@dataclass(frozen=True)
class CoverCube:
    """``Q = Q1 x Q2`` with ``Q1 = [q1_lo, q1_lo + 2^{jv-3})`` and ``Q2`` an annulus around ``y2``."""

    q1_lo: float
    jv: int
    q2: Annulus
    witness: tuple[float, float]

    @property
    def side1(self) -> float:
        return math.ldexp(1.0, self.jv - 3)

    @property
    def area(self) -> float:
        return self.side1 * self.q2.measure

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Points strictly inside Q."""
        w = self.side1
        x1 = self.q1_lo + w * rng.uniform(0.0, 1.0, n)
        a, b = math.ldexp(1.0, self.q2.lo), math.ldexp(1.0, self.q2.hi)
        r = a + (b - a) * rng.uniform(0.0, 1.0, n)
        sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        x2 = self.q2.center + sign * r
        return np.stack([x1, x2], axis=1)


def _case3(ell: int, j: int, jv: int) -> bool:
    return j - ell < jv - 2 < j - 2


def lemma51_targets(y, witnesses, ell: int, j: int) -> list[RectProjection]:
    """The starred projections the constructed cube must sit inside."""
    jv = min(jm for _, jm in witnesses)
    r = j - jv + 2
    out = [RectProjection((float(y[0]), float(y[1])), r, j, starred=True)]
    for ym, jm in witnesses:
        out.append(RectProjection((float(ym[0]), float(ym[1])), 0, jm, starred=True))
    return out


def lemma51_cube(y, witnesses, ell: int, j: int, x_hat=None) -> CoverCube | None:
    """Constructive cube for ``(l, j)`` around ``y`` and ``(0, j_m)`` around each ``y^m``.

    ``witnesses`` is a list of ``(y^m, j_m)``.  Returns None when
    ``Lambda_{lj}(y) ∩ ⋂ Lambda_{0 j_m}(y^m)`` is empty.  The index triple
    must satisfy ``j - l < j_v - 2 < j - 2`` with ``j_v = min j_m``.
    """
    if not witnesses:
        raise ValueError("need at least one (y^m, j_m) pair")
    y = np.asarray(y, dtype=float)
    jms = [int(jm) for _, jm in witnesses]
    jv = min(jms)
    nu = jms.index(jv)
    if not _case3(ell, j, jv):
        raise ValueError(f"indices (l={ell}, j={j}, j_v={jv}) outside the regime j-l < j_v-2 < j-2")
    plain = [RectProjection((y[0], y[1]), ell, j)]
    plain += [RectProjection((float(ym[0]), float(ym[1])), 0, jm) for ym, jm in witnesses]
    if x_hat is None:
        w1 = _witness_1d([p.interval1 for p in plain])
        w2 = _witness_1d([p.interval2 for p in plain])
        if w1 is None or w2 is None:
            return None
        x_hat = (w1, w2)
    elif not all(p.contains(np.asarray(x_hat)[:2])[0] for p in plain):
        return None

    # Q1: the 2^{jv-3} sub-interval of Lambda^1_{0 jv}(y^nu_1) containing x_hat_1
    c = float(witnesses[nu][0][0])
    w = math.ldexp(1.0, jv - 3)
    base = math.ldexp(1.0, jv)
    if x_hat[0] >= c:
        start = c + base
        idx = min(max(math.floor((x_hat[0] - start) / w), 0), 7)
        q1_lo = start + idx * w
    else:
        end = c - base
        idx = min(max(math.floor((end - x_hat[0]) / w), 0), 7)
        q1_lo = end - (idx + 1) * w
    q2 = Annulus(float(y[1]), jv - 3, jv - 2)
    return CoverCube(q1_lo, jv, q2, (float(x_hat[0]), float(x_hat[1])))


def cube_inclusion_check(cube: CoverCube, y, witnesses, ell: int, j: int,
                         n: int, rng: np.random.Generator) -> int:
    """Number of sampled points of the cube falling outside some starred projection."""
    pts = cube.sample(n, rng)
    ok = np.ones(n, dtype=bool)
    for proj in lemma51_targets(y, witnesses, ell, j):
        ok &= proj.contains(pts)
    return int(np.count_nonzero(~ok))


def random_case3_config(rng: np.random.Generator, q: int | None = None, j_range: int = 6):
    """A random ``(y, witnesses, l, j)`` in the case-3 regime with a known common point."""
    if q is None:
        q = int(rng.integers(3, 8))
    j = int(rng.integers(-j_range, j_range + 1))
    jv = j - int(rng.integers(1, 5))
    ell = j - jv + 2 + int(rng.integers(1, 5))
    jms = [jv] + [jv + int(rng.integers(0, 4)) for _ in range(q - 2)]
    rng.shuffle(jms)
    x_hat = rng.uniform(-4.0, 4.0, 2)

    def place(e1: int, e2: int) -> np.ndarray:
        off = np.array([math.ldexp(1.0, e1), math.ldexp(1.0, e2)]) * rng.uniform(1.0, 2.0, 2)
        sign = np.where(rng.random(2) < 0.5, -1.0, 1.0)
        return x_hat - sign * off

    y = place(j, j - ell)
    witnesses = [(place(jm, jm), jm) for jm in jms]
    return y, witnesses, ell, j
