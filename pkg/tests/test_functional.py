import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dmsolitons.functional import QuadratureRule, default_engine, grad_phi, hamiltonian, phi, q_map, quad_form
from dmsolitons.lattice import GridFunction, inner, norm_p, shift
from dmsolitons.propagator import DiffractionProfile, make_engine

import oracles

seeds = st.integers(0, 2**32 - 1)


def rand(rng, radius=6, inner_radius=3, dim=1, scale=1.0):
    v = np.zeros((2 * radius + 1,) * dim, dtype=complex)
    sl = (slice(radius - inner_radius, radius + inner_radius + 1),) * dim
    v[sl] = scale * (rng.normal(size=v[sl].shape) + 1j * rng.normal(size=v[sl].shape))
    return GridFunction(v)


@pytest.fixture(scope="module")
def zero_rule():
    return QuadratureRule.for_profile(DiffractionProfile.zero())


# quadrature rule

@pytest.mark.parametrize("segs", [((0.5, 1.0), (0.5, -1.0)), ((0.25, 2.0), (0.5, -1.0), (0.25, 0.0)), ((1.0, 0.0),)])
def test_rule_invariants(segs):
    p = DiffractionProfile(segs)
    r = QuadratureRule.for_profile(p)
    assert np.all(r.weights > 0)
    assert abs(r.weights.sum() - 1.0) <= 1e-14
    b = p.breakpoints
    for a, c in zip(b[:-1], b[1:]):
        inside = (r.nodes > a) & (r.nodes < c)
        assert inside.sum() == r.order
    th, w = r.compressed()
    assert abs(w.sum() - 1.0) <= 1e-14 and len(th) <= len(r.nodes)


# closed forms for the zero profile

def test_delta_under_zero_profile(zero_rule):
    d = GridFunction.delta(1, 4)
    assert quad_form(d, d, d, d, zero_rule) == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(grad_phi(d, zero_rule).values, 4 * d.values, atol=1e-15)


def test_q_map_is_pointwise_cubic_without_management(zero_rule, rng):
    f = rand(rng)
    assert np.allclose(q_map(f, f, f, zero_rule).values, np.abs(f.values) ** 2 * f.values, atol=1e-13)
    assert phi(f, zero_rule) == pytest.approx(float(np.sum(np.abs(f.values) ** 4)), rel=1e-13)


def test_zero_field(rule):
    z = GridFunction.zeros(1, 5)
    assert phi(z, rule) == 0
    assert np.all(grad_phi(z, rule).values == 0)
    assert hamiltonian(z, rule, 1.0, 0.3) == 0


# agreement with the adaptive-quadrature oracle

def test_two_site_value_matches_oracle(two_step, rule):
    f = GridFunction.from_points(1, 4, {0: 2 ** -0.5, 1: 2 ** -0.5})
    ref = oracles.quad_form([f] * 4, two_step.segments)
    assert abs(quad_form(f, f, f, f, rule) - ref) <= 1e-9


@pytest.mark.parametrize("segs", [((0.5, 1.0), (0.5, -1.0)), ((0.25, 2.0), (0.5, -1.0), (0.25, 0.0))])
def test_random_quadruples_match_oracle(segs):
    rng = np.random.default_rng(7)
    p = DiffractionProfile(segs)
    r = QuadratureRule.for_profile(p)
    for _ in range(3):
        fs = [rand(rng, radius=5, inner_radius=4) for _ in range(4)]
        ref = oracles.quad_form(fs, segs)
        assert abs(quad_form(*fs, r) - ref) <= 1e-10 * max(1.0, abs(ref))


def test_two_dims_matches_oracle(two_step, rule):
    rng = np.random.default_rng(3)
    fs = [rand(rng, radius=2, inner_radius=1, dim=2) for _ in range(4)]
    ref = oracles.quad_form(fs, two_step.segments, pad=12)
    assert abs(quad_form(*fs, rule) - ref) <= 1e-10 * max(1.0, abs(ref))


def test_quadrature_refinement_converged(two_step, rng):
    f = rand(rng, radius=8, inner_radius=4)
    coarse = phi(f, QuadratureRule.for_profile(two_step, 16))
    fine = phi(f, QuadratureRule.for_profile(two_step, 160))
    assert abs(coarse - fine) <= 1e-12 * fine


def test_engine_methods_agree(rule, rng):
    fs = [rand(rng, radius=8) for _ in range(4)]
    vals = [quad_form(*fs, rule, make_engine(1, 8, 0.5, m)) for m in ("spectral", "taylor", "bessel")]
    assert max(abs(v - vals[0]) for v in vals) <= 1e-13 * max(1.0, abs(vals[0]))


# structural properties

@given(seeds, st.floats(1e-3, 1e3))
def test_a_priori_bound(seed, scale):
    rng = np.random.default_rng(seed)
    r = QuadratureRule.for_profile(DiffractionProfile.two_step())
    fs = [rand(rng, scale=scale) for _ in range(4)]
    bound = math.prod(norm_p(f, 2) for f in fs)
    assert abs(quad_form(*fs, r)) <= bound * (1 + 1e-12)
    q = q_map(*fs[:3], r)
    assert norm_p(q, 2) <= math.prod(norm_p(f, 2) for f in fs[:3]) * (1 + 1e-12)


def test_duality(rule):
    rng = np.random.default_rng(11)
    for _ in range(100):
        g, f1, f2, f3 = (rand(rng) for _ in range(4))
        lhs = inner(g, q_map(f1, f2, f3, rule))
        rhs = quad_form(g, f1, f2, f3, rule)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


@given(seeds)
def test_phi_bounds_and_invariances(seed):
    rng = np.random.default_rng(seed)
    r = QuadratureRule.for_profile(DiffractionProfile.two_step())
    f = rand(rng, radius=10, inner_radius=3)
    val = phi(f, r)
    assert 0 <= val <= norm_p(f, 2) ** 4 * (1 + 1e-12)
    xi = int(rng.integers(-6, 7))
    assert abs(phi(shift(f, xi), r) - val) <= 1e-12 * max(1.0, val)
    theta = float(rng.uniform(0, 2 * np.pi))
    assert abs(phi(f * np.exp(1j * theta), r) - val) <= 1e-13 * max(1.0, val)


def test_gradient_central_differences(rule):
    rng = np.random.default_rng(5)
    h_step = 1e-5
    for _ in range(20):
        f, h = rand(rng), rand(rng)
        fd = (phi(f + h * h_step, rule) - phi(f - h * h_step, rule)) / (2 * h_step)
        an = inner(h, grad_phi(f, rule)).real
        assert abs(fd - an) <= 1e-6 * abs(an)
        # the derivative formula 4 Re Q(h, f, f, f)
        assert abs(4 * quad_form(h, f, f, f, rule).real - an) <= 1e-12 * max(1.0, abs(an))


def test_hamiltonian_definition(rule, rng):
    v = rand(rng)
    eps = 0.2
    assert hamiltonian(v, rule, 0.0, eps) == pytest.approx(-eps / 4 * phi(v, rule), rel=1e-14)
    lap = np.zeros_like(v.values)
    x = v.values
    lap[1:] += x[:-1]
    lap[:-1] += x[1:]
    lap -= 2 * x
    kinetic = float(np.vdot(x, -lap).real)
    assert hamiltonian(v, rule, 1.5, eps) == pytest.approx(eps * (0.75 * kinetic - phi(v, rule) / 4), rel=1e-13)


def test_box_mismatch(rule):
    with pytest.raises(ValueError):
        quad_form(GridFunction.delta(1, 3), GridFunction.delta(1, 3), GridFunction.delta(1, 4),
                  GridFunction.delta(1, 3), rule)


def test_default_engine_range(rule):
    eng = default_engine(GridFunction.delta(1, 3), rule)
    assert eng.tau_max >= rule.tau
