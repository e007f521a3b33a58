"""Constrained maximisation of phi on the sphere ``||f||_2^2 = lambda``.

The maximiser solves ``omega f = Q(f, f, f)`` with ``omega = P_lambda / lambda``.
Two iterations are offered: Riemannian gradient ascent with Armijo
backtracking, and the power-type fixed point ``f <- sqrt(lambda) Q/||Q||``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .functional import Evaluation, QuadratureRule, default_engine, q_map
from .lattice import GridFunction, norm_p, shift
from .propagator import DiffractionProfile, PropagatorEngine

METHODS = ("gradient_ascent", "fixed_point")
# relative tie tolerance for the gauge argmax; values closer than this are
# indistinguishable after a converged solve
GAUGE_TIE_TOL = 1e-9
# slack for roundoff when comparing objective values near convergence
ROUNDOFF = 8 * np.finfo(float).eps


class ConvergenceError(RuntimeError):
    """Iteration budget exhausted; ``result`` holds the last iterate."""

    def __init__(self, message: str, result: SolitonResult):
        super().__init__(message)
        self.result = result


class ZeroFieldError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 1.0
    method: str = "gradient_ascent"
    tol: float = 1e-8
    max_iter: int = 5000
    sigma: float = 4.0
    armijo_factor: float = 0.5
    armijo_c: float = 1e-4
    max_backtracks: int = 60

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not self.tol > 0:
            raise ValueError(f"tolerance must be positive, got {self.tol}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.max_iter < 0 or self.sigma <= 0:
            raise ValueError("max_iter must be >= 0 and sigma > 0")
        if not 0 < self.armijo_factor < 1 or not 0 < self.armijo_c < 1:
            raise ValueError("Armijo parameters must lie in (0, 1)")


@dataclass(frozen=True)
class SolitonResult:
    f: GridFunction
    lam: float
    p_lambda: float
    omega: float
    residual: float
    iterations: int
    objective_trace: list[float] = field(repr=False)
    method: str = "gradient_ascent"
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "p_lambda": self.p_lambda,
            "omega": self.omega,
            "residual": self.residual,
            "iterations": self.iterations,
            "method": self.method,
            "converged": self.converged,
            "objective_trace": list(self.objective_trace),
        }


def initial_guess(dim: int, radius: int, lam: float, sigma: float = 4.0) -> GridFunction:
    """Centred Gaussian ``exp(-|x|_2^2 / sigma^2)`` scaled to ``||f||_2^2 = lam``."""
    g = GridFunction.from_function(dim, radius, lambda *xs: np.exp(-sum(x.astype(float) ** 2 for x in xs) / sigma**2))
    return g * (math.sqrt(lam) / norm_p(g, 2))


def _retract(values: np.ndarray, lam: float) -> GridFunction:
    nrm = np.linalg.norm(values)
    if nrm == 0:
        raise ZeroFieldError("cannot project the zero field onto the sphere")
    return GridFunction(values * (math.sqrt(lam) / nrm))


def _rdot(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.vdot(a, b).real)


def gauge_fix(f: GridFunction) -> GridFunction:
    """Centre ``argmax |f|`` at the origin and make ``f(0)`` real positive.

    Near-ties (within :data:`GAUGE_TIE_TOL` relative) go to the
    lexicographically smallest lattice point.
    """
    a = np.abs(f.values)
    top = a.max(initial=0.0)
    if top == 0:
        raise ZeroFieldError("gauge_fix needs a nonzero field")
    cands = np.argwhere(a >= top * (1 - GAUGE_TIE_TOL))
    peak = cands[0]  # argwhere is in C order, i.e. lexicographic
    xi = tuple(int(-(c - f.radius)) for c in peak)
    g = shift(f, xi, threshold=1e-14 * top) if any(xi) else f
    centre = (g.radius,) * g.dim
    c = g.values[centre]
    vals = g.values * (abs(c) / c)
    # exact real value at the origin makes the map idempotent
    vals[centre] = abs(c)
    return GridFunction(vals)


def residual(f: GridFunction, omega: float, rule: QuadratureRule,
             engine: PropagatorEngine | None = None) -> float:
    """``||Q(f, f, f) - omega f||_2 / ||f||_2``."""
    q = q_map(f, f, f, rule, engine)
    return float(np.linalg.norm(q.values - omega * f.values) / max(norm_p(f, 2), 1e-30))


def _stats(ev: Evaluation, lam: float) -> tuple[float, np.ndarray, float]:
    """omega, the tangential part of Q(f, f, f) and the residual at ``ev``."""
    f = ev.f.values
    nf2 = _rdot(f, f)
    omega = ev.phi / nf2
    tang = ev.q.values - omega * f
    return omega, tang, float(np.linalg.norm(tang) / math.sqrt(nf2))


def maximize(cfg: SolverConfig, profile: DiffractionProfile, engine: PropagatorEngine | None = None,
             rule: QuadratureRule | None = None, radius: int = 64, dim: int = 1,
             f0: GridFunction | None = None) -> SolitonResult:
    """Maximise phi on the sphere of radius ``sqrt(cfg.lam)``.

    Raises :class:`ConvergenceError` (carrying the last iterate) when the
    residual has not reached ``cfg.tol`` after ``cfg.max_iter`` iterations.
    """
    rule = rule or QuadratureRule.for_profile(profile)
    if rule.profile is not profile and rule.profile.segments != profile.segments:
        raise ValueError("quadrature rule was built for a different profile")
    if f0 is None:
        if engine is not None:
            dim, radius = engine.dim, engine.radius
        f0 = initial_guess(dim, radius, cfg.lam, cfg.sigma)
    else:
        f0 = _retract(f0.values, cfg.lam)
    engine = engine or default_engine(f0, rule)

    step = _fixed_point if cfg.method == "fixed_point" else _gradient
    ev = Evaluation(f0, rule, engine)
    omega, tang, res = _stats(ev, cfg.lam)
    trace = [ev.phi]
    state = {"eta": None, "prev": None}
    it = 0
    while res > cfg.tol and it < cfg.max_iter:
        new = step(ev, tang, cfg, rule, engine, state)
        if new is None:  # no admissible step left at roundoff level
            break
        ev = new
        omega, tang, res = _stats(ev, cfg.lam)
        trace.append(ev.phi)
        it += 1

    f = gauge_fix(ev.f)
    result = SolitonResult(f=f, lam=cfg.lam, p_lambda=ev.phi, omega=ev.phi / cfg.lam,
                           residual=res, iterations=it, objective_trace=trace,
                           method=cfg.method, converged=res <= cfg.tol)
    if not result.converged:
        raise ConvergenceError(
            f"residual {res:.3e} > tol {cfg.tol:.1e} after {it} iterations", result)
    return result


def _gradient(ev, tang, cfg, rule, engine, state):
    """One Armijo step along the tangential gradient ``4 tang``."""
    f = ev.f.values
    g = 4.0 * tang
    gg = _rdot(g, g)
    eta = state["eta"]
    prev = state["prev"]
    if prev is not None:
        # Barzilai-Borwein trial step from the last accepted move
        s = f - prev[0]
        y = g - prev[1]
        sy = abs(_rdot(s, y))
        if sy > 0:
            eta = _rdot(s, s) / sy
    if eta is None:
        eta = 1.0 / max(4.0 * ev.phi / cfg.lam, 1e-12)
    slack = ROUNDOFF * abs(ev.phi)
    for _ in range(cfg.max_backtracks):
        trial = Evaluation(_retract(f + eta * g, cfg.lam), rule, engine)
        gain = trial.phi - ev.phi
        if gain >= cfg.armijo_c * eta * gg - slack and gain >= -slack:
            state["prev"] = (f, g)
            state["eta"] = eta
            return trial
        eta *= cfg.armijo_factor
    return None


def _fixed_point(ev, tang, cfg, rule, engine, state):
    """``f <- sqrt(lam) Q(f,f,f) / ||Q||``, falling back to a gradient step if phi drops."""
    q = ev.q.values
    if not np.any(q):
        raise ZeroFieldError("Q(f, f, f) vanished; the iterate is zero")
    trial = Evaluation(_retract(q, cfg.lam), rule, engine)
    if trial.phi >= ev.phi - ROUNDOFF * abs(ev.phi):
        return trial
    state["prev"] = None
    return _gradient(ev, tang, cfg, rule, engine, state)


def solve(profile: DiffractionProfile, lam: float = 1.0, radius: int = 64, dim: int = 1,
          **kwargs) -> SolitonResult:
    """Shorthand for :func:`maximize` with a default engine and rule."""
    cfg = SolverConfig(lam=lam, **kwargs)
    return maximize(cfg, profile, radius=radius, dim=dim)


def with_method(cfg: SolverConfig, method: str) -> SolverConfig:
    return replace(cfg, method=method)
