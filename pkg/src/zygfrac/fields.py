"""Nonnegative test functions on R^3, quadrature lattices and L^p norms.

A field is an analytic base profile composed with a diagonal linear map,
``f(x) = amplitude * base(scale * x)``.  Dilations only touch ``scale``,
so no resampling ever happens and the dilation identities can be checked
at the sampler level.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

KINDS = ("box_indicator", "zygmund_box_indicator", "tensor_bump", "gaussian_like")

# truncation radius of gaussian_like, in units of the width
GAUSS_CUT = 3.0


class InvalidShape(ValueError):
    pass


class CoverageError(ValueError):
    pass


def _vec3(v, name: str) -> np.ndarray:
    a = np.broadcast_to(np.asarray(v, dtype=float), (3,)).copy()
    if not np.all(np.isfinite(a)):
        raise InvalidShape(f"{name} must be finite, got {v}")
    return a


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    @property
    def sides(self) -> np.ndarray:
        return np.subtract(self.hi, self.lo)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    def scaled(self, factor: float | Sequence[float]) -> "Box":
        """Box about the same center with every side multiplied by ``factor``."""
        c, half = self.center, 0.5 * self.sides * np.asarray(factor, dtype=float)
        return Box(tuple((c - half).tolist()), tuple((c + half).tolist()))

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.all((pts >= self.lo) & (pts < self.hi), axis=1)


@dataclass(frozen=True)
class FunctionField:
    """Nonnegative sampler on R^3 with a declared support box.

    ``center`` and ``size`` describe the base profile; ``scale`` is the
    diagonal map applied to the argument before the profile is evaluated.
    """

    kind: str
    center: tuple[float, float, float]
    size: tuple[float, float, float]
    amplitude: float = 1.0
    scale: tuple[float, float, float] = (1.0, 1.0, 1.0)
    history: tuple[str, ...] = field(default=())

    @property
    def descriptor(self) -> str:
        size = ",".join(f"{s:g}" for s in self.size)
        tag = f"{self.kind}[{size}]"
        if self.amplitude != 1.0:
            tag = f"{self.amplitude:g}*{tag}"
        return "".join([tag, *self.history])

    def _base_box(self) -> tuple[np.ndarray, np.ndarray]:
        c, s = np.asarray(self.center), np.asarray(self.size)
        half = GAUSS_CUT * s if self.kind == "gaussian_like" else 0.5 * s
        return c - half, c + half

    @property
    def support_box(self) -> Box:
        lo, hi = self._base_box()
        sc = np.asarray(self.scale)
        return Box(tuple((lo / sc).tolist()), tuple((hi / sc).tolist()))

    def __call__(self, x) -> np.ndarray | float:
        pts = np.asarray(x, dtype=float)
        scalar = pts.ndim == 1
        u = np.atleast_2d(pts) * np.asarray(self.scale)
        out = self.amplitude * _base_eval(self.kind, u, np.asarray(self.center), np.asarray(self.size))
        return float(out[0]) if scalar else out

    def sampler(self, x):
        return self(x)

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "center": list(self.center),
            "size": list(self.size),
            "amplitude": self.amplitude,
            "scale": list(self.scale),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "FunctionField":
        return cls(rec["kind"], tuple(rec["center"]), tuple(rec["size"]),
                   float(rec.get("amplitude", 1.0)), tuple(rec.get("scale", (1.0, 1.0, 1.0))))


def _base_eval(kind: str, u: np.ndarray, c: np.ndarray, s: np.ndarray) -> np.ndarray:
    t = u - c
    if kind in ("box_indicator", "zygmund_box_indicator"):
        inside = np.all((t >= -0.5 * s) & (t < 0.5 * s), axis=1)
        return inside.astype(float)
    if kind == "tensor_bump":
        r = np.clip(1.0 - (2.0 * t / s) ** 2, 0.0, None)
        return np.prod(r * r, axis=1)
    if kind == "gaussian_like":
        z = t / s
        inside = np.all((z >= -GAUSS_CUT) & (z < GAUSS_CUT), axis=1)
        return np.where(inside, np.exp(-0.5 * np.sum(z * z, axis=1)), 0.0)
    raise InvalidShape(f"unknown field kind {kind!r}")


def make_field(kind: str, size=1.0, center=0.0, amplitude: float = 1.0) -> FunctionField:
    """Construct a base field.

    ``size`` is the side vector for ``box_indicator`` and ``tensor_bump``
    (full width of the support), the width vector for ``gaussian_like``,
    and the pair ``(s1, s2)`` for ``zygmund_box_indicator`` whose third side
    is forced to ``s1 * s2``.
    """
    if kind not in KINDS:
        raise InvalidShape(f"unknown field kind {kind!r}; expected one of {KINDS}")
    if kind == "zygmund_box_indicator":
        s1, s2 = np.broadcast_to(np.asarray(size, dtype=float), (2,))
        sides = np.array([s1, s2, s1 * s2])
    else:
        sides = _vec3(size, "size")
    if np.any(sides <= 0):
        raise InvalidShape(f"sizes must be positive, got {sides.tolist()}")
    if amplitude < 0:
        raise InvalidShape("amplitude must be nonnegative")
    return FunctionField(kind, tuple(_vec3(center, "center").tolist()), tuple(sides.tolist()), float(amplitude))


def dilate_field(f: FunctionField, d1: float, d2: float) -> FunctionField:
    """``g(x) = f(d1 x1, d2 x2, d1 d2 x3)``."""
    if d1 <= 0 or d2 <= 0:
        raise InvalidShape("dilation factors must be positive")
    sc = np.asarray(f.scale) * np.array([d1, d2, d1 * d2])
    return replace(f, scale=tuple(sc.tolist()), history=f.history + (f"@D({d1:g},{d2:g})",))


def shear_field(f: FunctionField, s: int) -> FunctionField:
    """``f_s(x) = f(x1, 2^-s x2, 2^-s x3)``."""
    s = int(s)
    if s == 0:
        return f
    t = 2.0 ** -s
    sc = np.asarray(f.scale) * np.array([1.0, t, t])
    return replace(f, scale=tuple(sc.tolist()), history=f.history + (f"@tau({s})",))


def swap_field(f: FunctionField) -> FunctionField:
    """``g(x1, x2, x3) = f(x2, x1, x3)``."""
    sw = [1, 0, 2]
    return replace(
        f,
        center=tuple(np.asarray(f.center)[sw].tolist()),
        size=tuple(np.asarray(f.size)[sw].tolist()),
        scale=tuple(np.asarray(f.scale)[sw].tolist()),
        history=f.history + ("@swap",),
    )


def scale_amplitude(f: FunctionField, c: float) -> FunctionField:
    if c < 0:
        raise InvalidShape("amplitude must be nonnegative")
    return replace(f, amplitude=f.amplitude * c)


def default_corpus() -> list[FunctionField]:
    """Unit Zygmund box, two anisotropic Zygmund boxes and one smooth bump."""
    return [
        make_field("zygmund_box_indicator", (1.0, 1.0)),
        make_field("zygmund_box_indicator", (2.0, 0.5)),
        make_field("zygmund_box_indicator", (0.5, 1.0)),
        make_field("tensor_bump", (1.0, 1.0, 1.0)),
    ]


@dataclass(frozen=True)
class QuadratureGrid:
    """Rectangular lattice; samples sit at cell centers when ``offset`` is set.

    Evaluation targets are lattice corners ``origin + i * spacing`` for any
    integer ``i`` (also outside the grid), so a target never shares a
    coordinate with a cell-center sample.
    """

    origin: tuple[float, float, float]
    spacing: tuple[float, float, float]
    counts: tuple[int, int, int]
    offset: bool = True

    def __post_init__(self):
        if any(h <= 0 for h in self.spacing):
            raise InvalidShape("grid spacing must be positive")
        if any(int(n) < 1 for n in self.counts):
            raise InvalidShape("grid counts must be positive")

    @classmethod
    def over_box(cls, box: Box, counts: int | Sequence[int]) -> "QuadratureGrid":
        n = np.broadcast_to(np.asarray(counts, dtype=int), (3,))
        h = box.sides / n
        return cls(tuple(map(float, box.lo)), tuple(h.tolist()), tuple(map(int, n)))

    @property
    def h(self) -> np.ndarray:
        return np.asarray(self.spacing)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def box(self) -> Box:
        o = np.asarray(self.origin)
        return Box(tuple(o.tolist()), tuple((o + self.h * np.asarray(self.counts)).tolist()))

    def axis_points(self, axis: int) -> np.ndarray:
        shift = 0.5 if self.offset else 0.0
        return self.origin[axis] + (np.arange(self.counts[axis]) + shift) * self.spacing[axis]

    def sample_points(self) -> np.ndarray:
        axes = [self.axis_points(a) for a in range(3)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def sample(self, f: FunctionField) -> np.ndarray:
        """Field values on the lattice as an array of shape ``counts``."""
        return np.asarray(f(self.sample_points())).reshape(self.counts)

    def corner(self, index) -> np.ndarray:
        return np.asarray(self.origin) + np.asarray(index, dtype=float) * self.h

    def corner_index(self, x) -> np.ndarray:
        return np.rint((np.asarray(x, dtype=float) - np.asarray(self.origin)) / self.h).astype(np.int64)

    def snap_to_corner(self, x) -> np.ndarray:
        return self.corner(self.corner_index(x))

    def covers(self, box: Box, rtol: float = 1e-12) -> bool:
        g = self.box
        tol = rtol * np.maximum(np.abs(g.sides), 1.0)
        return bool(np.all(np.asarray(g.lo) <= np.asarray(box.lo) + tol)
                    and np.all(np.asarray(g.hi) >= np.asarray(box.hi) - tol))

    def sheared(self, s: int) -> "QuadratureGrid":
        """Preimage lattice under ``tau_s``."""
        t = np.array([1.0, 2.0 ** s, 2.0 ** s])
        return replace(self, origin=tuple((np.asarray(self.origin) * t).tolist()),
                       spacing=tuple((self.h * t).tolist()))

    def dilated(self, d1: float, d2: float) -> "QuadratureGrid":
        """Preimage lattice under ``(d1, d2, d1 d2)``."""
        d = np.array([d1, d2, d1 * d2])
        return replace(self, origin=tuple((np.asarray(self.origin) / d).tolist()),
                       spacing=tuple((self.h / d).tolist()))

    def refined(self) -> "QuadratureGrid":
        return replace(self, spacing=tuple((self.h / 2).tolist()), counts=tuple(2 * n for n in self.counts))

    def swapped12(self) -> "QuadratureGrid":
        sw = [1, 0, 2]
        return replace(
            self,
            origin=tuple(np.asarray(self.origin)[sw].tolist()),
            spacing=tuple(self.h[sw].tolist()),
            counts=tuple(np.asarray(self.counts)[sw].tolist()),
        )

    def to_record(self) -> dict:
        return {"origin": list(self.origin), "spacing": list(self.spacing),
                "counts": list(self.counts), "offset": self.offset}


def grid_for(f: FunctionField, n: int | Sequence[int]) -> QuadratureGrid:
    """Lattice exactly spanning the support box of ``f``."""
    return QuadratureGrid.over_box(f.support_box, n)


def lp_norm(f: FunctionField, p: float, grid: QuadratureGrid) -> float:
    """Midpoint-rule L^p norm."""
    if not grid.covers(f.support_box):
        raise CoverageError(f"grid {grid.box} does not cover support {f.support_box}")
    v = grid.sample(f)
    return float((np.sum(v ** p) * grid.cell_volume) ** (1.0 / p))
