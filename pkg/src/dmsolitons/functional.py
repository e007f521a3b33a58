"""The averaged four-linear form, its Riesz map, the objective and the Hamiltonian.

All integrals over one management period are discretised with Gauss-Legendre
nodes placed segment by segment, so that ``D(t)`` is linear on every
sub-interval and the integrand is smooth there.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import GridFunction, dirichlet_laplacian
from .propagator import DiffractionProfile, PropagatorEngine, make_engine, profile_D

IMAG_TOL = 1e-12


class ConsistencyError(RuntimeError):
    """The diagonal of the four-linear form came out non-real."""


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on [0, 1] aligned with profile breakpoints."""

    profile: DiffractionProfile
    order: int
    nodes: np.ndarray
    weights: np.ndarray
    thetas: np.ndarray

    @classmethod
    def for_profile(cls, profile: DiffractionProfile, order: int = 16) -> QuadratureRule:
        if order < 1:
            raise ValueError("quadrature order must be positive")
        x, w = np.polynomial.legendre.leggauss(order)
        b = profile.breakpoints
        nodes, weights = [], []
        for a, c in zip(b[:-1], b[1:]):
            nodes.append(a + (c - a) * (x + 1.0) / 2.0)
            weights.append((c - a) * w / 2.0)
        nodes = np.concatenate(nodes)
        weights = np.concatenate(weights)
        return cls(profile, order, nodes, weights, np.asarray(profile_D(profile, nodes)))

    @property
    def tau(self) -> float:
        return self.profile.tau

    def compressed(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct ``D`` values with merged weights.

        Nodes where ``D`` agrees to 1e-15 share one propagator evaluation; for
        a symmetric profile this halves the work.
        """
        order = np.argsort(self.thetas, kind="stable")
        th, w = self.thetas[order], self.weights[order]
        keep_th, keep_w = [th[0]], [w[0]]
        for t, wt in zip(th[1:], w[1:]):
            if abs(t - keep_th[-1]) <= 1e-15:
                keep_w[-1] += wt
            else:
                keep_th.append(t)
                keep_w.append(wt)
        return np.array(keep_th), np.array(keep_w)


def default_engine(f: GridFunction, rule: QuadratureRule, method: str = "spectral") -> PropagatorEngine:
    return make_engine(f.dim, f.radius, rule.tau, method)


def _engine(engine, f, rule):
    if engine is None:
        return default_engine(f, rule)
    if (engine.dim, engine.radius) != (f.dim, f.radius):
        raise ValueError("engine box does not match the grid function")
    return engine


def _same_box(*fs: GridFunction):
    shapes = {f.shape for f in fs}
    if len(shapes) != 1:
        raise ValueError(f"box mismatch: {sorted(shapes)}")


class _Forward:
    """Evolved copies ``T_t f_j`` at the compressed nodes, computed once per argument."""

    def __init__(self, rule: QuadratureRule, engine: PropagatorEngine):
        self.rule = rule
        self.engine = engine
        self.thetas, self.weights = rule.compressed()
        self._cache: dict[int, np.ndarray] = {}

    def __call__(self, f: GridFunction) -> np.ndarray:
        key = id(f)
        if key not in self._cache:
            self._cache[key] = (self.engine.forward(f.values, self.thetas), f)
        return self._cache[key][0]

    def integrate(self, density: np.ndarray) -> complex:
        """``sum_k w_k sum_x density[k, x]`` in a fixed summation order."""
        per_node = density.reshape(density.shape[0], -1).sum(axis=1)
        return complex(np.dot(self.weights, per_node))

    def pull_back(self, work: np.ndarray) -> np.ndarray:
        """``sum_k w_k T_k^{-1} work[k]`` restricted to the box."""
        return self.engine.backward(work, self.thetas, self.weights)


def quad_form(f1, f2, f3, f4, rule: QuadratureRule, engine: PropagatorEngine | None = None) -> complex:
    """``int_0^1 sum_x conj(T f1) (T f2) conj(T f3) (T f4) dt``."""
    _same_box(f1, f2, f3, f4)
    fw = _Forward(rule, _engine(engine, f1, rule))
    a1, a2, a3, a4 = fw(f1), fw(f2), fw(f3), fw(f4)
    return fw.integrate(a1.conj() * a2 * a3.conj() * a4)


def q_map(f1, f2, f3, rule: QuadratureRule, engine: PropagatorEngine | None = None) -> GridFunction:
    """``Q(f1, f2, f3) = int_0^1 T_t^{-1}[T f1 conj(T f2) T f3] dt``, the Riesz map of the form."""
    _same_box(f1, f2, f3)
    fw = _Forward(rule, _engine(engine, f1, rule))
    a1, a2, a3 = fw(f1), fw(f2), fw(f3)
    return GridFunction(fw.pull_back(a1 * a2.conj() * a3))


def phi(f: GridFunction, rule: QuadratureRule, engine: PropagatorEngine | None = None) -> float:
    """Objective ``phi(f) = Q(f, f, f, f) = int ||T_t f||_4^4 dt``."""
    val = quad_form(f, f, f, f, rule, engine)
    # the tolerance is relative to the a-priori bound ||f||_2^4 >= phi(f)
    scale = max(1.0, float(np.vdot(f.values, f.values).real) ** 2)
    if abs(val.imag) >= IMAG_TOL * scale:
        raise ConsistencyError(f"phi has imaginary part {val.imag:.3e}")
    return val.real


def grad_phi(f: GridFunction, rule: QuadratureRule, engine: PropagatorEngine | None = None) -> GridFunction:
    """Riesz representative of ``D phi(f)[h] = 4 Re Q(h, f, f, f)``, i.e. ``4 Q(f, f, f)``."""
    return 4.0 * q_map(f, f, f, rule, engine)


def hamiltonian(v: GridFunction, rule: QuadratureRule, d_av: float, eps: float,
                engine: PropagatorEngine | None = None) -> float:
    """Averaged Hamiltonian ``eps (d_av/2 <v, -Delta v> - 1/4 Q(v, v, v, v))``."""
    kinetic = np.vdot(v.values, -dirichlet_laplacian(v.values)).real
    return eps * (0.5 * d_av * kinetic - 0.25 * phi(v, rule, engine))


class Evaluation:
    """phi at ``f`` with ``Q(f, f, f)`` available from the same forward pass.

    The solver evaluates many trial points and only needs the Riesz map at
    accepted ones; this keeps the backward transform lazy.
    """

    def __init__(self, f: GridFunction, rule: QuadratureRule, engine: PropagatorEngine):
        self.f = f
        self._fw = _Forward(rule, engine)
        a = self._fw(f)
        self._a = a
        mod2 = (a.conj() * a).real
        self.phi = self._fw.integrate(mod2 * mod2).real
        self._q = None

    @property
    def q(self) -> GridFunction:
        if self._q is None:
            a = self._a
            self._q = GridFunction(self._fw.pull_back((a.conj() * a).real * a))
        return self._q
