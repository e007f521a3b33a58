"""Free lattice propagators ``e^{i theta Delta}`` and diffraction profiles.

Three interchangeable methods evaluate the same operator:

* ``spectral`` -- periodic embedding in a ring, diagonalised by the FFT;
* ``taylor``   -- truncated exponential series of the stencil Laplacian;
* ``bessel``   -- the closed-form kernel ``e^{-2i theta} i^n J_n(2 theta)``
  applied axis by axis (the d-dimensional propagator factorises).

Every engine maps box values to a *work domain*, the box enlarged by a guard
band wide enough that the kernel mass beyond it is below ``tol``.  Sums over
the work domain therefore stand in for sums over all of Z^d.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import fft as sfft
from scipy.special import gammaln, jv

from .lattice import GridFunction, dirichlet_laplacian

METHODS = ("spectral", "taylor", "bessel")
PROFILE_TOL = 1e-12


class AccuracyError(ValueError):
    """Requested evolution time exceeds what the engine was sized for."""


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class DiffractionProfile:
    """Piecewise-constant mean-zero diffraction ``d~`` on one period ``[0, 1]``.

    ``segments`` is a sequence of ``(length, value)`` pairs.
    """

    segments: tuple[tuple[float, float], ...]
    name: str = ""

    def __post_init__(self):
        segs = tuple((float(l), float(v)) for l, v in self.segments)
        if not segs:
            raise ProfileError("profile needs at least one segment")
        if any(not (l > 0) for l, _ in segs):
            raise ProfileError("segment lengths must be positive")
        total = sum(l for l, _ in segs)
        if abs(total - 1.0) > PROFILE_TOL:
            raise ProfileError(f"segment lengths sum to {total!r}, not 1")
        mean = sum(l * v for l, v in segs)
        if abs(mean) > PROFILE_TOL:
            raise ProfileError(f"profile mean is {mean!r}, must be zero")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def two_step(cls, amplitude: float = 1.0) -> DiffractionProfile:
        """``(1/2, +a), (1/2, -a)``: D rises to ``a/2`` and returns, tau = a/2."""
        return cls(((0.5, amplitude), (0.5, -amplitude)), name="two_step")

    @classmethod
    def zero(cls) -> DiffractionProfile:
        return cls(((1.0, 0.0),), name="zero")

    @property
    def breakpoints(self) -> np.ndarray:
        """Segment boundaries ``0 = t_0 < t_1 < ... < t_m = 1``."""
        b = np.concatenate([[0.0], np.cumsum([l for l, _ in self.segments])])
        b[-1] = 1.0
        return b

    @property
    def breakpoint_values(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([l * v for l, v in self.segments])])

    @property
    def tau(self) -> float:
        """``sup_t |D(t)|``; D is piecewise linear so the sup sits at a breakpoint."""
        return float(np.abs(self.breakpoint_values).max())

    @property
    def min_segment(self) -> float:
        return min(l for l, _ in self.segments)

    def d_tilde(self, t: float) -> float:
        """Local diffraction at fast time ``t`` (periodically extended, right-continuous)."""
        t = t - math.floor(t)
        i = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return self.segments[min(i, len(self.segments) - 1)][1]

    def D(self, t):
        return profile_D(self, t)

    def D_periodic(self, t):
        t = np.asarray(t, dtype=float)
        return profile_D(self, t - np.floor(t))

    def to_json(self) -> dict:
        return {"segments": [{"length": l, "value": v} for l, v in self.segments]}

    @classmethod
    def from_json(cls, obj: dict, name: str = "") -> DiffractionProfile:
        try:
            segs = [(s["length"], s["value"]) for s in obj["segments"]]
        except (KeyError, TypeError) as exc:
            raise ProfileError(f"malformed profile object: {exc}") from exc
        return cls(tuple(segs), name=name)

    @classmethod
    def load(cls, path: str | Path) -> DiffractionProfile:
        path = Path(path)
        with open(path) as fh:
            return cls.from_json(json.load(fh), name=path.stem)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")


def profile_D(p: DiffractionProfile, t):
    """Exact ``D(t) = int_0^t d~`` for ``t`` in ``[0, 1]`` (scalar or array)."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("profile_D is defined on [0, 1]; use D_periodic for other times")
    b = p.breakpoints
    vals = np.array([v for _, v in p.segments])
    i = np.clip(np.searchsorted(b, arr, side="right") - 1, 0, len(vals) - 1)
    out = p.breakpoint_values[i] + vals[i] * (arr - b[i])
    return float(out) if np.ndim(t) == 0 else out


def kernel_tail_bound(dim: int, tau: float, dist) -> np.ndarray:
    """``min(1, e^{4 d tau} (4 d tau)^n / n!)`` for l^1 distance ``n``."""
    n = np.asarray(dist, dtype=float)
    a = 4.0 * dim * abs(tau)
    with np.errstate(divide="ignore"):
        logb = a + n * np.log(a) - gammaln(n + 1.0) if a > 0 else np.where(n == 0, 0.0, -np.inf)
    return np.minimum(1.0, np.exp(logb))


def guard_width(dim: int, tau: float, tol: float = 1e-14) -> int:
    """Smallest ``g`` with ``e^{4 d tau} (4 d tau)^g / g! < tol``."""
    g = 1
    while kernel_tail_bound(dim, tau, g) >= tol:
        g += 1
    return g


def taylor_order_for(dim: int, tau: float, tol: float) -> int:
    """Series order ``K`` whose remainder ``e^a a^{K+1}/(K+1)!`` is below ``tol``."""
    a = 4.0 * dim * abs(tau)
    k = 1
    while a > 0 and math.exp(a + (k + 1) * math.log(a) - math.lgamma(k + 2)) >= tol:
        k += 1
    return k


def bessel_kernel_1d(theta: float, offsets: np.ndarray) -> np.ndarray:
    """``<x|e^{i theta Delta}|y>`` on Z for ``x - y = offsets``."""
    n = np.asarray(offsets)
    return np.exp(-2j * theta) * (1j ** (n % 4)) * jv(n, 2.0 * theta)


@dataclass(frozen=True)
class PropagatorEngine:
    """Applies ``e^{i theta Delta}`` to grid functions on a fixed box.

    ``tau_max`` bounds the admissible ``|theta|``; it sizes the guard band
    (and the Taylor order) so that truncation errors stay below ``tol``.
    """

    dim: int
    radius: int
    method: str = "spectral"
    tau_max: float = 1.0
    tol: float = 1e-14
    taylor_order: int | None = None
    ring_size: int | None = None
    guard: int = field(init=False)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown propagator method {self.method!r}; choose from {METHODS}")
        if self.dim < 1 or self.radius < 0 or not self.tau_max > 0:
            raise ValueError("need dim >= 1, radius >= 0, tau_max > 0")
        guard = guard_width(self.dim, self.tau_max, self.tol)
        object.__setattr__(self, "guard", guard)
        if self.taylor_order is None:
            object.__setattr__(self, "taylor_order", taylor_order_for(self.dim, self.tau_max, self.tol * 1e-2))
        minimal = 2 * self.radius + 2 * guard + 1
        if self.ring_size is None:
            object.__setattr__(self, "ring_size", sfft.next_fast_len(minimal))
        elif self.ring_size < minimal:
            raise ValueError(f"ring size {self.ring_size} below 2N + 2*guard + 1 = {minimal}")

    @property
    def work_radius(self) -> int:
        return self.radius + self.guard

    @property
    def box_shape(self) -> tuple[int, ...]:
        return (2 * self.radius + 1,) * self.dim

    @property
    def work_shape(self) -> tuple[int, ...]:
        return (2 * self.work_radius + 1,) * self.dim

    def check_theta(self, thetas) -> np.ndarray:
        th = np.atleast_1d(np.asarray(thetas, dtype=float))
        if th.size and np.abs(th).max() > self.tau_max * (1 + 1e-12):
            raise AccuracyError(
                f"|theta| = {np.abs(th).max():.6g} exceeds engine tau_max = {self.tau_max:.6g}"
            )
        return th

    def box_to_work(self, values: np.ndarray) -> np.ndarray:
        """Zero-pad box values onto the work domain."""
        g = self.guard
        return np.pad(values, [(g, g)] * self.dim)

    def work_to_box(self, values: np.ndarray) -> np.ndarray:
        g = self.guard
        sl = (Ellipsis,) + (slice(g, values.shape[-1] - g),) * self.dim
        return values[sl]

    # batched core: leading axis indexes theta

    def forward(self, values: np.ndarray, thetas) -> np.ndarray:
        """``e^{i theta_k Delta} f`` on the work domain for each ``theta_k``."""
        th = self.check_theta(thetas)
        return self._apply(self.box_to_work(np.asarray(values, dtype=complex)), th, shared=True)

    def backward(self, work: np.ndarray, thetas, weights=None) -> np.ndarray:
        """``e^{-i theta_k Delta}`` applied to work-domain slice ``k``, cut to the box.

        With ``weights`` the weighted sum over ``k`` is returned instead.
        """
        th = self.check_theta(thetas)
        work = np.asarray(work, dtype=complex)
        if self.method == "spectral" and weights is not None:
            return self.work_to_box(self._spectral(work, -th, shared=False, weights=weights))
        out = self.work_to_box(self._apply(work, -th, shared=False))
        if weights is None:
            return out
        return np.tensordot(np.asarray(weights, dtype=float), out, axes=(0, 0))

    def _apply(self, work, th, shared):
        if self.method == "spectral":
            return self._spectral(work, th, shared)
        if self.method == "bessel":
            return self._bessel(work, th, shared)
        return self._taylor(work, th, shared)

    # methods

    def _symbol(self) -> np.ndarray:
        return _ring_symbol(self.dim, self.ring_size)

    def _spectral(self, work, th, shared, weights=None):
        m, r = self.ring_size, self.work_radius
        c = m // 2
        axes = tuple(range(-self.dim, 0))
        sl = (Ellipsis,) + (slice(c - r, c + r + 1),) * self.dim
        lead = () if shared else (len(th),)
        ring = np.zeros(lead + (m,) * self.dim, dtype=complex)
        ring[sl] = work
        spec = sfft.fftn(ring, axes=axes)
        phase = _phase_table(self.dim, m, tuple(th.tolist()))
        if weights is not None:
            spec = np.tensordot(np.asarray(weights, dtype=float), phase * spec, axes=(0, 0))
            return sfft.ifftn(spec, axes=axes)[sl]
        return sfft.ifftn(phase * spec, axes=axes)[sl]

    def _bessel(self, work, th, shared):
        n = work.shape[-1]
        offs = np.arange(n)[:, None] - np.arange(n)[None, :] + (n - 1)
        # Toeplitz: only 2n-1 distinct offsets per theta.  The per-axis factor
        # carries e^{-2i theta}, so the product over axes gives e^{-2 i d theta}
        rows = bessel_kernel_1d(th[:, None], np.arange(-(n - 1), n)[None, :])
        mats = rows[:, offs]
        out = np.broadcast_to(work, (len(th),) + work.shape[-self.dim:]) if shared else work
        for ax in range(1, self.dim + 1):
            moved = np.moveaxis(out, ax, 1)
            shape = moved.shape
            # contract only over the occupied index range of this axis
            occ = np.flatnonzero(np.any(moved.reshape(shape[0], n, -1) != 0, axis=(0, 2)))
            lo, hi = (occ[0], occ[-1] + 1) if occ.size else (0, 0)
            res = np.matmul(mats[:, :, lo:hi], moved[:, lo:hi].reshape(shape[0], hi - lo, -1))
            out = np.moveaxis(res.reshape(shape), 1, ax)
        return np.ascontiguousarray(out)

    def _taylor(self, work, th, shared):
        k = self.taylor_order
        pad = [(0, 0)] * (work.ndim - self.dim) + [(k, k)] * self.dim
        term = np.pad(work, pad)
        # Delta^n f is shared across thetas when the input is shared
        coef = np.ones(len(th), dtype=complex)
        shape = (-1,) + (1,) * self.dim
        acc = coef.reshape(shape) * term
        axes = tuple(range(term.ndim - self.dim, term.ndim))
        for order in range(1, k + 1):
            term = dirichlet_laplacian(term, axes)
            coef = coef * (1j * th) / order
            acc = acc + coef.reshape(shape) * term
        sl = (Ellipsis,) + (slice(k, acc.shape[-1] - k),) * self.dim
        return acc[sl]

    # single-function conveniences

    def kernel_row(self, t: float) -> np.ndarray:
        """``<z|e^{i t Delta}|0>`` for all ``z`` in the work domain."""
        delta = np.zeros(self.box_shape, dtype=complex)
        delta[(self.radius,) * self.dim] = 1.0
        return self.forward(delta, [t])[0]


@lru_cache(maxsize=32)
def _ring_symbol(dim: int, m: int) -> np.ndarray:
    k = 2.0 * np.pi * np.fft.fftfreq(m)
    s1 = -4.0 * np.sin(k / 2.0) ** 2
    sym = np.zeros((m,) * dim)
    for ax in range(dim):
        shape = [1] * dim
        shape[ax] = -1
        sym = sym + s1.reshape(shape)
    return sym


@lru_cache(maxsize=16)
def _phase_table(dim: int, m: int, thetas: tuple) -> np.ndarray:
    th = np.asarray(thetas, dtype=float).reshape((-1,) + (1,) * dim)
    out = np.exp(1j * th * _ring_symbol(dim, m))
    out.flags.writeable = False
    return out


@lru_cache(maxsize=64)
def make_engine(dim: int, radius: int, tau_max: float, method: str = "spectral", tol: float = 1e-14) -> PropagatorEngine:
    """Shared engine instance for a box and time range."""
    return PropagatorEngine(dim, radius, method=method, tau_max=max(float(tau_max), 1e-3), tol=tol)


def kernel(engine: PropagatorEngine, t: float, x, y) -> complex:
    """``<x|e^{i t Delta}|y>`` computed by the engine's method."""
    x = np.atleast_1d(np.asarray(x, dtype=int))
    y = np.atleast_1d(np.asarray(y, dtype=int))
    z = x - y
    if len(z) != engine.dim:
        raise ValueError("point dimension does not match engine")
    engine.check_theta([t])
    if engine.method == "bessel":
        return complex(np.prod([bessel_kernel_1d(t, np.array([c]))[0] for c in z]))
    r = engine.work_radius
    if np.abs(z).max() > r:
        raise AccuracyError(f"offset {tuple(z)} outside work domain of radius {r}")
    return complex(engine.kernel_row(t)[tuple(z + r)])


def evolve_linear(engine: PropagatorEngine, f: GridFunction, theta: float) -> GridFunction:
    """``e^{i theta Delta} f`` restricted to the box of ``f``."""
    _check_box(engine, f)
    return GridFunction(engine.work_to_box(engine.forward(f.values, [theta])[0]))


def evolve_Tt(engine: PropagatorEngine, p: DiffractionProfile, f: GridFunction, t: float) -> GridFunction:
    """Managed evolution ``T_t f = e^{i D(t) Delta} f`` for ``t`` in ``[0, 1]``."""
    return evolve_linear(engine, f, profile_D(p, t))


def _check_box(engine: PropagatorEngine, f: GridFunction):
    if f.dim != engine.dim or f.radius != engine.radius:
        raise ValueError(
            f"grid function box (d={f.dim}, N={f.radius}) does not match engine (d={engine.dim}, N={engine.radius})"
        )
