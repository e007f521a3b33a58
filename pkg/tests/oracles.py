"""Independent reference computations for the tests.

Nothing here calls the package's propagators or quadrature: evolutions use a
dense matrix exponential or an eigendecomposition of the box Laplacian,
time integrals use adaptive quadrature, Bessel values come from mpmath.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np
from scipy.integrate import quad_vec
from scipy.linalg import eigh, expm


def dense_laplacian(dim: int, radius: int) -> np.ndarray:
    """Dirichlet Laplacian matrix on the box, row-major (C order) flattening."""
    n = 2 * radius + 1
    one = -2.0 * np.eye(n) + np.eye(n, k=1) + np.eye(n, k=-1)
    eye = np.eye(n)
    out = np.zeros((n**dim, n**dim))
    for ax in range(dim):
        term = np.ones((1, 1))
        for j in range(dim):
            term = np.kron(term, one if j == ax else eye)
        out += term
    return out


def embed(values: np.ndarray, pad: int) -> np.ndarray:
    return np.pad(np.asarray(values, dtype=complex), [(pad, pad)] * values.ndim)


def crop(values: np.ndarray, pad: int) -> np.ndarray:
    sl = tuple(slice(pad, s - pad) for s in values.shape)
    return values[sl]


def expm_evolve(values: np.ndarray, theta: float, pad: int) -> np.ndarray:
    """``e^{i theta Delta} f`` by Pade matrix exponential on a padded box, cropped back."""
    big = embed(values, pad)
    dim, radius = big.ndim, (big.shape[0] - 1) // 2
    u = expm(1j * theta * dense_laplacian(dim, radius)) @ big.ravel()
    return crop(u.reshape(big.shape), pad)


@lru_cache(maxsize=8)
def _eig(dim: int, radius: int):
    w, v = eigh(dense_laplacian(dim, radius))
    return w, v


class EigPropagator:
    """``e^{i theta Delta}`` on a padded box via the symmetric eigendecomposition."""

    def __init__(self, dim: int, radius: int, pad: int):
        self.pad = pad
        self.shape = (2 * (radius + pad) + 1,) * dim
        self.w, self.v = _eig(dim, radius + pad)

    def coeffs(self, values: np.ndarray) -> np.ndarray:
        return self.v.T @ embed(values, self.pad).ravel()

    def at(self, coeffs: np.ndarray, theta: float) -> np.ndarray:
        return self.v @ (np.exp(1j * theta * self.w) * coeffs)


def profile_D(segments, t: float) -> float:
    acc, start = 0.0, 0.0
    for length, value in segments:
        if t <= start + length:
            return acc + value * (t - start)
        acc += value * length
        start += length
    return acc


def quad_form(fs, segments, pad: int = 40, epsabs: float = 1e-14, epsrel: float = 1e-13) -> complex:
    """Adaptive quadrature of ``int_0^1 sum conj(Tf1) Tf2 conj(Tf3) Tf4 dt``, segment by segment."""
    f0 = fs[0]
    prop = EigPropagator(f0.dim, f0.radius, pad)
    cs = [prop.coeffs(f.values) for f in fs]

    def integrand(t):
        th = profile_D(segments, t)
        a = [prop.at(c, th) for c in cs]
        z = np.sum(a[0].conj() * a[1] * a[2].conj() * a[3])
        return np.array([z.real, z.imag])

    total, start = np.zeros(2), 0.0
    for length, _ in segments:
        val, _err = quad_vec(integrand, start, start + length, epsabs=epsabs, epsrel=epsrel)
        total += val
        start += length
    return complex(total[0], total[1])


def kernel_1d(t: float, n: int) -> complex:
    """``e^{-2it} i^n J_n(2t)`` at 30 digits."""
    with mpmath.workdps(30):
        return complex(mpmath.exp(-2j * t) * mpmath.power(1j, n) * mpmath.besselj(n, 2 * t))


def tail_alpha(values: np.ndarray) -> list[float]:
    """``alpha(n)`` by a direct double loop."""
    r = (len(values) - 1) // 2
    out = []
    for n in range(r + 1):
        s = 0.0
        for i, v in enumerate(values):
            if abs(i - r) >= n:
                s += abs(v) ** 2
        out.append(math.sqrt(s))
    return out


def propagation_constant(dim: int, tau: Fraction | float, terms: int = 400) -> float:
    """``e^{8 d tau} 2^d sum_n (1+n)^{d-1} (4 d tau)^{2n} / (n!)^2`` in exact rationals, then float."""
    a = Fraction(4 * dim) * Fraction(tau)
    s = sum(Fraction((1 + n) ** (dim - 1)) * a ** (2 * n) / Fraction(math.factorial(n)) ** 2
            for n in range(terms))
    return math.exp(8 * dim * float(tau)) * 2**dim * float(s)


def F(n: int) -> int:
    return (n + 2) ** (n + 2) if n % 2 == 0 else (n + 1) ** (n + 1)


def min_constant_scan(alpha, extra, floor: float) -> float:
    """Largest ``alpha(2n) / (alpha(n)^3 + extra(n))`` over stored n with ``alpha(2n) > floor``, in mpmath."""
    best = mpmath.mpf(0)
    with mpmath.workdps(40):
        for n in range(len(alpha)):
            if 2 * n >= len(alpha) or not alpha[2 * n] > floor:
                continue
            r = mpmath.mpf(alpha[2 * n]) / (mpmath.mpf(alpha[n]) ** 3 + mpmath.mpf(extra(n)))
            best = max(best, r)
    return float(best)
