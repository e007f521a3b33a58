import numpy as np
import pytest

from dmsolitons.functional import QuadratureRule, phi, quad_form
from dmsolitons.lattice import GridFunction, inner, norm_p, shift
from dmsolitons.propagator import DiffractionProfile
from dmsolitons.solver import (ConvergenceError, SolverConfig, ZeroFieldError, gauge_fix, maximize, residual, solve,
                               with_method)


def test_zero_profile_gives_delta():
    res = solve(DiffractionProfile.zero(), lam=1.0, radius=16)
    assert res.p_lambda == pytest.approx(1.0, abs=1e-12)
    assert res.omega == pytest.approx(1.0, abs=1e-12)
    off = np.abs(res.f.values).copy()
    off[16] = 0
    assert off.max() < 1e-6
    assert res.f[0].real > 0


def test_soliton_certificate(soliton, rule):
    f = soliton.f
    assert soliton.converged and soliton.residual <= 1e-8
    assert abs(norm_p(f, 2) ** 2 - soliton.lam) <= 1e-10
    assert abs(soliton.omega - soliton.p_lambda / soliton.lam) <= 1e-10
    assert soliton.omega > 0
    assert residual(f, soliton.omega, rule) <= 1e-8


def test_weak_form(soliton, rule):
    rng = np.random.default_rng(2024)
    f = soliton.f
    worst = 0.0
    for _ in range(100):
        g = GridFunction(rng.normal(size=f.shape) + 1j * rng.normal(size=f.shape))
        g = g / norm_p(g, 2)
        worst = max(worst, abs(quad_form(g, f, f, f, rule) - soliton.omega * inner(g, f)))
    assert worst <= 1e-6


def test_objective_trace_monotone(soliton):
    tr = np.asarray(soliton.objective_trace)
    assert np.all(np.diff(tr) >= -1e-14 * tr[-1])
    assert tr[-1] == soliton.p_lambda


def test_scaling_law(two_step):
    vals = [solve(two_step, lam=lam, radius=64).p_lambda / lam**2 for lam in (0.5, 1.0, 2.0)]
    assert max(vals) - min(vals) <= 1e-6


def test_methods_agree(two_step, soliton):
    fp = maximize(with_method(SolverConfig(), "fixed_point"), two_step, radius=64)
    assert abs(fp.p_lambda - soliton.p_lambda) <= 1e-6
    assert norm_p(fp.f - soliton.f, 2) <= 1e-4


def test_box_independence(two_step, soliton):
    big = solve(two_step, lam=1.0, radius=96)
    assert abs(big.p_lambda - soliton.p_lambda) <= 1e-8


def test_two_dimensional_solve():
    res = solve(DiffractionProfile.two_step(), lam=1.0, radius=8, dim=2)
    assert res.residual <= 1e-8 and res.omega > 0
    v = np.abs(res.f.values)
    assert np.allclose(v, v.T, atol=1e-6)


def test_non_convergence_carries_result(two_step):
    with pytest.raises(ConvergenceError) as info:
        maximize(SolverConfig(max_iter=1), two_step, radius=32)
    assert info.value.result.iterations == 1
    assert not info.value.result.converged


@pytest.mark.parametrize("kw", [dict(lam=0), dict(tol=0), dict(method="newton"), dict(armijo_factor=1.5)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


def test_gauge_fix_examples(rule):
    assert np.allclose(gauge_fix(GridFunction.delta(1, 5, 3, 1j)).values, GridFunction.delta(1, 5).values)
    rng = np.random.default_rng(0)
    v = np.zeros(21, complex)
    v[4:12] = rng.normal(size=8) + 1j * rng.normal(size=8)
    f = GridFunction(v)
    g = gauge_fix(f)
    assert np.array_equal(gauge_fix(g).values, g.values)
    assert abs(phi(g, rule) - phi(f, rule)) <= 1e-13
    for p in (1, 2, np.inf):
        assert norm_p(g, p) == pytest.approx(norm_p(f, p), rel=1e-14)
    assert g[0].imag == 0 and g[0].real == np.abs(v).max()


def test_gauge_fix_ties_lexicographic():
    f = GridFunction.from_points(1, 6, {-2: 1.0, 3: 1.0})
    assert np.allclose(gauge_fix(f).values, shift(f, 2).values)
    with pytest.raises(ZeroFieldError):
        gauge_fix(GridFunction.zeros(1, 3))


def test_residual_examples():
    zero = QuadratureRule.for_profile(DiffractionProfile.zero())
    assert residual(GridFunction.delta(1, 3), 1.0, zero) <= 1e-15
    rng = np.random.default_rng(1)
    rule = QuadratureRule.for_profile(DiffractionProfile.two_step())
    f = GridFunction(rng.normal(size=13) + 0j)
    c = 1.7
    assert residual(f * c, c**2 * 0.3, rule) == pytest.approx(c**2 * residual(f, 0.3, rule), rel=1e-12)
