"""Tail distribution of a one-dimensional field and its decay diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..lattice import GridFunction, l1_distance_grid
from .report import VerificationReport

DECAY_FLOOR = 1e-12
MIN_FIT_POINTS = 8
# fit only where alpha(n) >= EDGE_RATIO * alpha(N): closer to the box edge the
# truncated mass distorts the tail at relative size (alpha(N) / alpha(n))^2
EDGE_RATIO = 1e3


class InsufficientRangeError(ValueError):
    """Too few tail entries above the numerical floor to fit."""


@dataclass(frozen=True)
class TailDistribution:
    """``alpha(n) = (sum_{|x| >= n} |f(x)|^2)^(1/2)`` for ``n = 0..N``."""

    alpha: np.ndarray
    source: str = ""

    def __post_init__(self):
        a = np.array(self.alpha, dtype=float)
        a.flags.writeable = False
        object.__setattr__(self, "alpha", a)

    def __len__(self) -> int:
        return self.alpha.size

    @property
    def n(self) -> np.ndarray:
        return np.arange(self.alpha.size)

    @property
    def compact(self) -> bool:
        """True when the tail vanishes exactly before the box edge."""
        return bool(self.alpha[-1] == 0.0)


def tail_alpha(f: GridFunction, source: str = "") -> TailDistribution:
    if f.dim != 1:
        raise ValueError(f"tail distribution is defined for d = 1, got d = {f.dim}")
    w = np.abs(f.values) ** 2
    shells = np.bincount(l1_distance_grid(1, f.radius), weights=w, minlength=f.radius + 1)
    return TailDistribution(np.sqrt(np.cumsum(shells[::-1])[::-1]), source)


def envelope_log(n, tau: float) -> np.ndarray:
    """log of ``exp(-(n+1)(ln((n+1)/2) - c)/4)``, ``c = 1 + ln(8 tau)``."""
    m = np.asarray(n, dtype=float) + 1.0
    c = 1.0 + math.log(8.0 * tau)
    return -0.25 * m * (np.log(m / 2.0) - c)


def self_consistency_log(n, tau: float) -> np.ndarray:
    """log of ``exp(-(n+1)(ln(n+1) - c)/2)``."""
    m = np.asarray(n, dtype=float) + 1.0
    c = 1.0 + math.log(8.0 * tau)
    return -0.5 * m * (np.log(m) - c)


@dataclass(frozen=True)
class DecayFit:
    mu_fit: float
    intercept: float
    mu_stderr: float
    mu_aug: float
    mu_aug_stderr: float
    rate_aug: float
    c_min: float
    n_used: np.ndarray = field(repr=False)
    tau: float = 0.5
    floor: float = DECAY_FLOOR

    @property
    def super_exponential(self) -> bool:
        """``(n+1) ln(n+1)`` term needed on top of a linear exponent."""
        return self.mu_fit > 0 and self.mu_aug > max(1e-6, 3.0 * self.mu_aug_stderr)

    def to_dict(self) -> dict:
        return {
            "mu_fit": self.mu_fit,
            "intercept": self.intercept,
            "mu_stderr": self.mu_stderr,
            "mu_aug": self.mu_aug,
            "mu_aug_stderr": self.mu_aug_stderr,
            "rate_aug": self.rate_aug,
            "c_min": self.c_min,
            "n_range": [int(self.n_used[0]), int(self.n_used[-1])],
            "n_points": int(self.n_used.size),
            "tau": self.tau,
            "c": 1.0 + math.log(8.0 * self.tau),
            "floor": self.floor,
            "super_exponential": self.super_exponential,
        }


def _lstsq(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    dof = max(y.size - X.shape[1], 1)
    s2 = float(np.sum((y - X @ coef) ** 2)) / dof
    cov = s2 * np.linalg.pinv(X.T @ X)
    return coef, np.sqrt(np.maximum(np.diag(cov), 0.0))


def decay_fit(alpha: TailDistribution | np.ndarray, tau: float, floor: float = DECAY_FLOOR) -> DecayFit:
    """Fit ``ln alpha(n) = a - mu (n+1) ln(n+1)`` on tail entries above ``floor``.

    The fitted range starts at ``n = 1`` and stops before the box edge (see
    :data:`EDGE_RATIO`).

    A second fit adds a linear term ``- r n``; a pure exponential then gives
    ``mu_aug ~ 0``, which is what :attr:`DecayFit.super_exponential` tests.
    ``c_min`` is the smallest C with ``alpha(n) <= C * envelope(n)`` over
    every n with ``alpha(n) > floor``.
    """
    a = np.asarray(getattr(alpha, "alpha", alpha), dtype=float)
    # alpha(0) is the total mass and includes the centre site, so it is not a tail value
    keep = (a > floor) & (a >= EDGE_RATIO * a[-1])
    keep[0] = False
    n = np.flatnonzero(keep)
    # only the leading contiguous block; isolated noise further out is ignored
    if n.size:
        stop = np.flatnonzero(np.diff(n) != 1)
        n = n[: stop[0] + 1] if stop.size else n
    if n.size < MIN_FIT_POINTS:
        raise InsufficientRangeError(
            f"only {n.size} usable tail entries (above {floor:g}, clear of the box edge); need {MIN_FIT_POINTS}")
    y = np.log(a[n])
    m = n + 1.0
    g = m * np.log(m)
    coef, err = _lstsq(np.column_stack([np.ones_like(g), -g]), y)
    coef_aug, err_aug = _lstsq(np.column_stack([np.ones_like(g), -n.astype(float), -g]), y)
    above = np.flatnonzero(a > floor)
    c_min = float(np.exp(np.max(np.log(a[above]) - envelope_log(above, tau))))
    return DecayFit(mu_fit=float(coef[1]), intercept=float(coef[0]), mu_stderr=float(err[1]),
                    mu_aug=float(coef_aug[2]), mu_aug_stderr=float(err_aug[2]),
                    rate_aug=float(coef_aug[1]), c_min=c_min, n_used=n, tau=tau, floor=floor)


def min_constant(alpha: np.ndarray, log_rhs_extra: np.ndarray, floor: float) -> tuple[float, list[int], int | None]:
    """Smallest C with ``alpha(2n) <= C (alpha(n)^3 + exp(extra(n)))`` over admissible n.

    Admissible means ``2n`` is stored and ``alpha(2n) > floor``.
    """
    ns = [n for n in range(alpha.size) if 2 * n < alpha.size and alpha[2 * n] > floor]
    best, arg = 0.0, None
    for n in ns:
        rhs = alpha[n] ** 3 + math.exp(log_rhs_extra[n])
        ratio = alpha[2 * n] / rhs
        if ratio > best:
            best, arg = ratio, n
    return float(best), ns, arg


def verify_self_consistency(alpha: TailDistribution | np.ndarray, delta: float, c: float | None = None,
                            tau: float | None = None, floor: float = DECAY_FLOOR) -> VerificationReport:
    """Minimal constants for the two self-consistency forms.

    Form 1: ``alpha(2n) <= C1 (alpha(n)^3 + exp(-(n+1)(ln(n+1) - c)/2))``.
    Form 2: ``alpha(2n) <= C2 (alpha(n)^3 + (n+1)^(-delta(n+1)))``.
    Both constants must be finite; their size is data.
    """
    if not 0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
    if c is None:
        if tau is None:
            raise ValueError("give either c or tau")
        c = 1.0 + math.log(8.0 * tau)
    a = np.asarray(getattr(alpha, "alpha", alpha), dtype=float)
    m = np.arange(a.size) + 1.0
    rep = VerificationReport("selfconsistency")
    c1, ns, arg1 = min_constant(a, -0.5 * m * (np.log(m) - c), floor)
    c2, _, arg2 = min_constant(a, -delta * m * np.log(m), floor)
    rep.constants.update({"C1": c1, "C2": c2, "c": c, "delta": delta, "floor": floor,
                          "n_admissible": len(ns), "argmax_C1": arg1, "argmax_C2": arg2})
    if not ns:
        rep.notes.append("empty admissible range: field too narrow for the check")
        return rep
    rep.add("form 1 constant finite", [c, floor, len(ns)], c1, math.inf, ok=math.isfinite(c1))
    rep.add("form 2 constant finite", [delta, floor, len(ns)], c2, math.inf, ok=math.isfinite(c2))
    return rep
