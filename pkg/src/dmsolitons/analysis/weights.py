"""Factorially growing weights F, F_eps, F_{mu,eps} and the weighted tail norm.

``F(n)`` is astronomically large already for moderate ``n`` so floating point
work happens in log space.  Inequalities that are claimed exactly are checked
with rational arithmetic on the parameter grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .report import VerificationReport
from .tails import TailDistribution

GRID = tuple(k / 10 for k in range(11))


def F_value(n: int) -> int:
    """``(n+2)^(n+2)`` for even ``n``, ``(n+1)^(n+1)`` for odd ``n`` (exact integer)."""
    n = int(n)
    if n < 0:
        raise ValueError("F is defined on the non-negative integers")
    m = n + 2 if n % 2 == 0 else n + 1
    return m**m


def log_F(n) -> np.ndarray | float:
    n = np.asarray(n)
    m = np.where(n % 2 == 0, n + 2, n + 1).astype(float)
    out = m * np.log(m)
    return float(out) if out.ndim == 0 else out


def log_F_mueps(n, mu: float, eps: float | None = None, log_eps: float | None = None):
    """``log F_{mu,eps}(n) = -mu log(F(n)^-1 + eps)``; pass ``log_eps`` for eps below float range."""
    if log_eps is None:
        log_eps = -np.inf if eps == 0 else math.log(eps)
    out = -mu * np.logaddexp(-np.asarray(log_F(n), dtype=float), log_eps)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class WeightParams:
    mu: float
    eps: float
    b: int = 0

    def __post_init__(self):
        if not (0 <= self.mu <= 1 and 0 <= self.eps <= 1):
            raise ValueError(f"need mu, eps in [0, 1], got mu={self.mu}, eps={self.eps}")
        if int(self.b) != self.b or self.b < 0:
            raise ValueError(f"b must be a non-negative integer, got {self.b}")


def F_mueps(n, w: WeightParams):
    """``(F(n)^-1 + eps)^-mu``; overflows to ``inf`` only when eps = 0 and n is large."""
    with np.errstate(over="ignore"):
        return np.exp(log_F_mueps(n, w.mu, w.eps))


def F_eps_exact(n: int, eps: Fraction) -> Fraction:
    return 1 / (Fraction(1, F_value(n)) + eps)


def f_ratio(n: int, eps) -> Fraction:
    """``F_eps(2n) / F_eps(n)^3`` as an exact fraction."""
    eps = _frac(eps)
    a1 = Fraction(1, F_value(n)) + eps
    a2 = Fraction(1, F_value(2 * n)) + eps
    return a1**3 / a2


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(repr(float(x)))


@dataclass(frozen=True)
class WeightedNorm:
    """``sup_{n >= b} F_{mu,eps}(n) alpha(n)`` with where it was attained."""

    log_value: float
    argmax: int | None
    at_edge: bool

    @property
    def value(self) -> float:
        with np.errstate(over="ignore"):
            return float(np.exp(self.log_value))

    def __float__(self) -> float:
        return self.value


def _log_weighted(alpha: np.ndarray, mu: float, log_eps: float, b: int) -> WeightedNorm:
    if b >= alpha.size:
        return WeightedNorm(-math.inf, None, False)
    n = np.arange(b, alpha.size)
    with np.errstate(divide="ignore"):
        la = np.log(alpha[b:])
    vals = log_F_mueps(n, mu, log_eps=log_eps) + la
    if not np.any(np.isfinite(vals)):
        return WeightedNorm(-math.inf, None, False)
    k = int(np.argmax(vals))
    return WeightedNorm(float(vals[k]), int(n[k]), bool(n[k] == alpha.size - 1))


def weighted_norm(alpha: TailDistribution | np.ndarray, w: WeightParams) -> WeightedNorm:
    """Weighted sup norm over the stored range.

    ``at_edge`` flags a supremum at the last stored index, meaning the range
    may be too short to see it.
    """
    a = np.asarray(getattr(alpha, "alpha", alpha), dtype=float)
    log_eps = -math.inf if w.eps == 0 else math.log(w.eps)
    return _log_weighted(a, w.mu, log_eps, int(w.b))


def verify_F_properties(mus=GRID, epss=GRID, n_max: int = 50,
                        deltas=(0.3, 0.35, 0.4, 0.45, 0.49)) -> VerificationReport:
    """Exact checks of the weight algebra on a (mu, eps, n) grid.

    (a) ``F_eps`` non-decreasing in n, non-increasing in eps, at most 1/eps;
        the same for ``F_{mu,eps}`` (it is a power of ``F_eps``);
    (b) ``F_{mu,eps}(2n) <= 4 F_{mu,eps}(n)^3``;
    (c) ``n -> F_{mu,0}(2n) (n+1)^(-delta(n+1))`` non-increasing for mu <= delta/3;
    (d) ``sup f(n, eps) = 4``, attained at (1, 0); ``f(n, 1) < 2``.
    Cases are aggregated per parameter point with the worst n recorded.
    """
    rep = VerificationReport("F")
    ns = range(n_max + 1)
    fe = {e: _frac(e) for e in epss}
    inv = {n: Fraction(1, F_value(n)) for n in range(2 * n_max + 2)}

    # (a): a(n, eps) = F(n)^-1 + eps is F_eps^-1; F_{mu,eps} = a^-mu
    for e, eq in fe.items():
        bad = [n for n in range(n_max) if inv[n + 1] + eq > inv[n] + eq]
        rep.add(f"F_eps monotone in n, eps={e}", [e, n_max], len(bad), 0, violations=bad[:5])
        if eq > 0:
            bad = [n for n in ns if 1 / (inv[n] + eq) > 1 / eq]
            rep.add(f"F_eps <= 1/eps, eps={e}", [e, n_max], len(bad), 0)
    eps_sorted = sorted(fe.values())
    bad = [(n, float(e1)) for n in ns for e1, e2 in zip(eps_sorted, eps_sorted[1:])
           if 1 / (inv[n] + e2) > 1 / (inv[n] + e1)]
    rep.add("F_eps and F_{mu,eps} non-increasing in eps", [list(epss), n_max], len(bad), 0)

    # (b) exact: f(n,eps)^mu <= 4 with mu = p/q  <=>  f^p <= 4^q
    fvals = {(n, e): f_ratio(n, eq) for n in ns for e, eq in fe.items()}
    for mu in mus:
        mq = _frac(mu)
        p, q = mq.numerator, mq.denominator
        for e in epss:
            worst_n, worst_log, bad = 0, -math.inf, []
            for n in ns:
                fv = fvals[(n, e)]
                if fv**p > 4**q:
                    bad.append(n)
                lg = p / q * _log_frac(fv)
                if lg > worst_log:
                    worst_n, worst_log = n, lg
            rep.add(f"F(2n) <= 4 F(n)^3, mu={mu}, eps={e}", [mu, e, n_max],
                    math.exp(worst_log), 4.0, ok=not bad, worst_n=worst_n, violations=bad[:5])

    # (c) with mu = a/q, delta = b/q the comparison is between integers
    for mu in mus:
        for delta in deltas:
            if not 3 * mu <= delta + 1e-15:
                continue
            bad = _ratio_monotone_violations(_frac(mu), _frac(delta), n_max)
            rep.add(f"F_mu0(2n)(n+1)^(-delta(n+1)) decreasing, mu={mu}, delta={delta}",
                    [mu, delta, n_max], len(bad), 0, violations=bad[:5])
    # negative control, outside the admissible range; not a hard case
    ctrl = _ratio_monotone_violations(Fraction(1, 2), Fraction(3, 10), n_max)
    rep.add("control mu=0.5 > delta/3, delta=0.3", [0.5, 0.3, n_max], len(ctrl), 0,
            hard=False, ok=bool(ctrl))

    # (d)
    best = max(fvals, key=lambda k: (fvals[k], -k[0], -k[1]))
    sup = fvals[best]
    rep.add("sup f(n, eps) = 4", [n_max, list(epss)], float(sup), 4.0,
            ok=sup == 4 and best == (1, 0.0), argmax=list(best))
    rep.add("f(1, 0) = 4", [1, 0], float(f_ratio(1, 0)), 4.0, ok=f_ratio(1, 0) == 4)
    rep.add("f(0, 0) = 1/16", [0, 0], float(f_ratio(0, 0)), 1 / 16, ok=f_ratio(0, 0) == Fraction(1, 16))
    if 1.0 in epss:
        worst1 = max(fvals[(n, 1.0)] for n in ns)
        rep.add("f(n, 1) < 2", [n_max], float(worst1), 2.0, ok=worst1 < 2)
    rep.constants.update({"f_sup": float(sup), "f_argmax": list(best), "n_max": n_max})
    return rep


def _log_frac(x: Fraction) -> float:
    if x == 0:
        return -math.inf
    return math.log(x.numerator) - math.log(x.denominator)


def _ratio_monotone_violations(mu: Fraction, delta: Fraction, n_max: int) -> list[int]:
    q = mu.denominator * delta.denominator // math.gcd(mu.denominator, delta.denominator)
    a = int(mu * q)
    b = int(delta * q)
    bad = []
    for n in range(n_max):
        # value(n)^q = (2(n+1))^(2a(n+1)) (n+1)^(-b(n+1))
        lhs = (2 * (n + 2)) ** (2 * a * (n + 2)) * (n + 1) ** (b * (n + 1))
        rhs = (2 * (n + 1)) ** (2 * a * (n + 1)) * (n + 2) ** (b * (n + 2))
        if lhs > rhs:
            bad.append(n)
    return bad


def verify_eps_limit(alpha: TailDistribution | np.ndarray, mus=(0.1, 0.25, 0.5, 1.0), b: int = 0,
                     tol: float = 1e-8) -> VerificationReport:
    """``||alpha||_{mu,eps,b}`` is non-increasing in eps and tends to the eps = 0 value.

    The eps grid is geometric and extends below ``F(n_max)^-1`` so that the
    last grid point has converged on the stored range.
    """
    a = np.asarray(getattr(alpha, "alpha", alpha), dtype=float)
    rep = VerificationReport("eps_limit")
    top = float(log_F(max(a.size - 1, 0)))
    log_eps = np.concatenate([np.log(GRID[1:])[::-1], -np.arange(3.0, top + 40.0, 1.0)])
    for mu in mus:
        norms = [_log_weighted(a, mu, le, b).log_value for le in log_eps]
        zero = _log_weighted(a, mu, -math.inf, b)
        steps = np.diff(norms)  # eps decreasing along the grid, so norms must grow
        drops = int(np.sum(steps < -1e-14 * np.maximum(1.0, np.abs(norms[1:]))))
        rep.add(f"monotone in eps, mu={mu}", [mu, b], drops, 0)
        if math.isfinite(zero.log_value):
            err = abs(math.expm1(norms[-1] - zero.log_value))
        else:
            err = 0.0 if norms[-1] == zero.log_value else math.inf
        rep.add(f"eps->0 limit, mu={mu}", [mu, b], err, tol,
                log_norm_eps0=zero.log_value, at_edge=zero.at_edge)
    return rep
