"""Complex grid functions on a truncated box of Z^d.

A :class:`GridFunction` stores dense values on the box ``{x : |x|_inf <= N}``
and is implicitly zero outside of it.  Distances between lattice points use
the l^1 metric ``|x| = sum_j |x_j|`` throughout the package.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial.distance import cdist

RELATIVE_SUPPORT_THRESHOLD = 1e-14


class SupportOverflowError(ValueError):
    """Raised when a shift would move nonzero mass out of the box."""


def _as_point(point, dim: int) -> tuple[int, ...]:
    if np.isscalar(point):
        point = (int(point),)
    point = tuple(int(c) for c in point)
    if len(point) != dim:
        raise ValueError(f"point {point} does not have dimension {dim}")
    return point


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Complex amplitudes on the box of radius ``radius`` in ``Z^dim``.

    ``values`` has shape ``(2N+1,)*d``; lattice point ``x`` lives at array
    index ``x + N``.  The array is copied and marked read-only on construction.
    """

    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex, copy=True)
        if vals.ndim == 0:
            raise ValueError("grid function needs at least one dimension")
        side = vals.shape[0]
        if any(s != side for s in vals.shape) or side % 2 == 0:
            raise ValueError(f"values must be a cube of odd side, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function contains NaN or Inf")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def radius(self) -> int:
        return (self.values.shape[0] - 1) // 2

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    # construction helpers

    @classmethod
    def zeros(cls, dim: int, radius: int) -> GridFunction:
        if dim < 1 or radius < 0:
            raise ValueError("need dim >= 1 and radius >= 0")
        return cls(np.zeros((2 * radius + 1,) * dim, dtype=complex))

    @classmethod
    def delta(cls, dim: int, radius: int, point=None, amplitude: complex = 1.0) -> GridFunction:
        point = (0,) * dim if point is None else point
        return cls.from_points(dim, radius, {point: amplitude})

    @classmethod
    def from_points(cls, dim: int, radius: int, points: dict) -> GridFunction:
        vals = np.zeros((2 * radius + 1,) * dim, dtype=complex)
        for p, v in points.items():
            p = _as_point(p, dim)
            if max(abs(c) for c in p) > radius:
                raise ValueError(f"point {p} outside box of radius {radius}")
            vals[tuple(c + radius for c in p)] = v
        return cls(vals)

    @classmethod
    def from_function(cls, dim: int, radius: int, fn) -> GridFunction:
        """Evaluate ``fn`` on the coordinate arrays ``x_1, ..., x_d``."""
        axes = np.meshgrid(*([np.arange(-radius, radius + 1)] * dim), indexing="ij")
        return cls(np.broadcast_to(fn(*axes), axes[0].shape))

    def coordinates(self) -> list[np.ndarray]:
        """Coordinate arrays (``indexing='ij'``) matching ``values``."""
        r = np.arange(-self.radius, self.radius + 1)
        return np.meshgrid(*([r] * self.dim), indexing="ij")

    def __getitem__(self, point) -> complex:
        p = _as_point(point, self.dim)
        if max(abs(c) for c in p) > self.radius:
            return 0j
        return complex(self.values[tuple(c + self.radius for c in p)])

    # vector-space arithmetic

    def _check_same_box(self, other: GridFunction):
        if self.shape != other.shape:
            raise ValueError(f"box mismatch: {self.shape} vs {other.shape}")

    def __add__(self, other: GridFunction) -> GridFunction:
        self._check_same_box(other)
        return GridFunction(self.values + other.values)

    def __sub__(self, other: GridFunction) -> GridFunction:
        self._check_same_box(other)
        return GridFunction(self.values - other.values)

    def __mul__(self, scalar) -> GridFunction:
        return GridFunction(self.values * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> GridFunction:
        return GridFunction(self.values / scalar)

    def __neg__(self) -> GridFunction:
        return GridFunction(-self.values)

    def conj(self) -> GridFunction:
        return GridFunction(self.values.conj())

    def __repr__(self) -> str:
        return f"GridFunction(dim={self.dim}, radius={self.radius}, l2={norm_p(self, 2):.6g})"


def norm_p(f: GridFunction, p: float) -> float:
    """l^p norm; ``p = inf`` gives the sup norm."""
    if not p >= 1:
        raise ValueError(f"norm exponent must be >= 1, got {p}")
    a = np.abs(f.values).ravel()
    if np.isinf(p):
        return float(a.max(initial=0.0))
    m = a.max(initial=0.0)
    if m == 0.0:
        return 0.0
    # scale by the max to avoid under/overflow for large p
    return float(m * np.sum((a / m) ** p) ** (1.0 / p))


def inner(g: GridFunction, f: GridFunction) -> complex:
    """``<g, f> = sum conj(g) f``, anti-linear in the first slot."""
    g._check_same_box(f)
    return complex(np.vdot(g.values, f.values))


def dirichlet_laplacian(values: np.ndarray, axes: Sequence[int] | None = None) -> np.ndarray:
    """Nearest-neighbour Laplacian of an array with zeros outside it."""
    axes = range(values.ndim) if axes is None else axes
    out = -2.0 * len(axes) * values
    for ax in axes:
        lo = [slice(None)] * values.ndim
        hi = [slice(None)] * values.ndim
        lo[ax] = slice(1, None)
        hi[ax] = slice(None, -1)
        out[tuple(lo)] += values[tuple(hi)]
        out[tuple(hi)] += values[tuple(lo)]
    return out


def laplacian_apply(f: GridFunction) -> GridFunction:
    return GridFunction(dirichlet_laplacian(f.values))


def support(f: GridFunction, threshold: float = 0.0, relative: bool = False) -> np.ndarray:
    """Lattice points (rows of an ``(n, d)`` int array) where ``|f| > threshold``.

    With ``relative=True`` the cut is ``threshold * ||f||_inf`` and a zero
    threshold falls back to :data:`RELATIVE_SUPPORT_THRESHOLD`.
    """
    a = np.abs(f.values)
    if relative:
        threshold = (threshold or RELATIVE_SUPPORT_THRESHOLD) * a.max(initial=0.0)
    idx = np.argwhere(a > threshold)
    return idx - f.radius


def shift(f: GridFunction, xi, threshold: float = 0.0) -> GridFunction:
    """Translate ``f`` by ``xi``: ``(shift f)(x) = f(x - xi)``.

    Entries with ``|f| <= threshold`` may be dropped at the box edge; anything
    larger that would leave the box raises :class:`SupportOverflowError`.
    """
    xi = _as_point(xi, f.dim)
    n = f.radius
    pts = support(f, threshold)
    if len(pts):
        moved = pts + np.array(xi)
        if np.abs(moved).max() > n:
            raise SupportOverflowError(f"shift by {xi} moves mass out of box of radius {n}")
    out = np.zeros_like(f.values)
    src, dst = [], []
    for c in xi:
        if abs(c) > 2 * n:
            return GridFunction(out)
        src.append(slice(max(0, -c), min(2 * n + 1, 2 * n + 1 - c)))
        dst.append(slice(max(0, c), min(2 * n + 1, 2 * n + 1 + c)))
    out[tuple(dst)] = f.values[tuple(src)]
    return GridFunction(out)


def support_distance(f: GridFunction, g: GridFunction, threshold: float = 0.0) -> int:
    """l^1 distance between the supports of ``f`` and ``g``."""
    a = support(f, threshold)
    b = support(g, threshold)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("support is empty")
    best = None
    for start in range(0, len(a), 2048):
        d = cdist(a[start:start + 2048], b, metric="cityblock").min()
        best = d if best is None else min(best, d)
    return int(round(best))


def l1_distance_grid(dim: int, radius: int) -> np.ndarray:
    """``|x|_1`` for every point of the box, shaped like a grid function."""
    r = np.abs(np.arange(-radius, radius + 1))
    out = np.zeros((2 * radius + 1,) * dim, dtype=int)
    for ax in range(dim):
        shape = [1] * dim
        shape[ax] = -1
        out = out + r.reshape(shape)
    return out


# CSV: one row per lattice point, columns x_1..x_d, re, im

def write_csv(f: GridFunction, path: str | Path) -> None:
    coords = [c.ravel() for c in f.coordinates()]
    vals = f.values.ravel()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x_{j + 1}" for j in range(f.dim)] + ["re", "im"])
        for i in range(vals.size):
            w.writerow([int(c[i]) for c in coords] + [f"{vals[i].real:.17g}", f"{vals[i].imag:.17g}"])


def read_csv(path: str | Path, radius: int | None = None) -> GridFunction:
    """Load a field written by :func:`write_csv` (missing points are zero)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    dim = len(header) - 2
    if dim < 1 or header[-2:] != ["re", "im"]:
        raise ValueError(f"{path}: bad header {header}")
    pts = {tuple(int(v) for v in r[:dim]): complex(float(r[-2]), float(r[-1])) for r in body if r}
    if radius is None:
        radius = max((max(abs(c) for c in p) for p in pts), default=0)
    return GridFunction.from_points(dim, radius, pts)


def rows(f: GridFunction) -> Iterable[list]:
    """Inline rows ``[x_1, ..., x_d, re, im]`` for JSON embedding."""
    coords = [c.ravel() for c in f.coordinates()]
    vals = f.values.ravel()
    for i in range(vals.size):
        yield [int(c[i]) for c in coords] + [float(vals[i].real), float(vals[i].imag)]
