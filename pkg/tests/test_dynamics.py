import math

import numpy as np
import pytest

from dmsolitons.dynamics import (EvolutionConfig, StepAlignmentError, compare_averaging, converged_step,
                                 evolve_averaged, evolve_full, step_order)
from dmsolitons.lattice import GridFunction, norm_p, shift
from dmsolitons.propagator import DiffractionProfile


def bump(radius=24, width=3, seed=0):
    rng = np.random.default_rng(seed)
    v = np.zeros(2 * radius + 1, dtype=complex)
    v[radius - width:radius + width + 1] = rng.normal(size=2 * width + 1) + 1j * rng.normal(size=2 * width + 1)
    return GridFunction(0.5 * v / np.linalg.norm(v))


def test_delta_rotates_without_management():
    eps = 0.3
    d = GridFunction.delta(1, 6)
    tr = evolve_full(d, EvolutionConfig(eps=eps, t_end=4.0, h=1 / 8), DiffractionProfile.zero())
    for t, u in zip(tr.times, tr.fields):
        assert np.abs(u.values - np.exp(1j * eps * t) * d.values).max() <= 1e-12


def test_averaged_delta_rk4_order():
    eps = 0.3
    d = GridFunction.delta(1, 6)
    errs = []
    for h in (1 / 4, 1 / 8, 1 / 16):
        u = evolve_averaged(d, EvolutionConfig(eps=eps, t_end=1.0, h=h), DiffractionProfile.zero()).fields[-1]
        errs.append(np.abs(u.values - np.exp(1j * eps) * d.values).max())
    assert errs[-1] <= 1e-8
    assert all(12 <= a / b <= 20 for a, b in zip(errs[:-1], errs[1:]))


def test_full_flow_periodic_without_nonlinearity(two_step):
    f = bump()
    tr = evolve_full(f, EvolutionConfig(eps=0.0, t_end=3.0, h=1 / 16), two_step)
    for u in tr.fields:
        assert norm_p(u - f, 2) <= 1e-12


def test_averaged_flow_constant_without_nonlinearity(two_step):
    f = bump()
    tr = evolve_averaged(f, EvolutionConfig(eps=0.0, t_end=2.0, h=1 / 4), two_step)
    assert all(np.array_equal(u.values, f.values) for u in tr.fields)


def test_conservation(two_step):
    f = bump()
    eps = 0.2
    cfg = EvolutionConfig(eps=eps, t_end=1 / eps, h=1 / 32)
    full = evolve_full(f, cfg, two_step)
    assert full.norm_drift() <= 1e-9
    avg = evolve_averaged(f, EvolutionConfig(eps=eps, t_end=1 / eps, h=1 / 8), two_step)
    assert avg.norm_drift() <= 1e-8
    assert avg.energy_drift() <= 1e-6


def test_strang_order(two_step):
    f = bump()
    ratio, diffs = step_order(f, EvolutionConfig(eps=0.5, d_av=0.2, t_end=1.0, h=1 / 8), two_step)
    assert 3 <= ratio <= 5 and diffs[0] > 0


def test_converged_step_exact_case():
    h, ratio, diffs = converged_step(GridFunction.delta(1, 6), EvolutionConfig(eps=0.3, t_end=1.0, h=1 / 4),
                                     DiffractionProfile.zero())
    assert max(diffs) < 1e-13 and h == 1 / 4


def test_gauge_covariance(two_step):
    f = bump(radius=30)
    cfg = EvolutionConfig(eps=0.4, t_end=2.0, h=1 / 16)
    theta = 0.9
    a = evolve_full(f * np.exp(1j * theta), cfg, two_step).fields[-1]
    b = evolve_full(f, cfg, two_step).fields[-1] * np.exp(1j * theta)
    assert norm_p(a - b, 2) <= 1e-12
    # translation, with the field well inside the box
    a = evolve_full(shift(f, 3), cfg, two_step).fields[-1]
    b = shift(evolve_full(f, cfg, two_step).fields[-1], 3, threshold=1e-10)
    assert norm_p(a - b, 2) <= 1e-8


def test_step_must_fit_segments(two_step):
    with pytest.raises(StepAlignmentError):
        evolve_full(bump(), EvolutionConfig(eps=0.1, h=0.75), two_step)


@pytest.mark.parametrize("kw", [dict(eps=-1), dict(eps=0.1, h=0), dict(eps=1.0, t_end=20.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        EvolutionConfig(**kw)


def test_trajectory_records(tmp_path, two_step):
    tr = evolve_averaged(bump(), EvolutionConfig(eps=0.1, t_end=3.0, h=1 / 4), two_step)
    assert tr.times == [0.0, 1.0, 2.0, 3.0]
    assert len(tr.energies) == 4
    tr.write_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,norm,H,deviation" and len(lines) == 5
    with pytest.raises(ValueError):
        tr.append(0.5, bump())
    with pytest.raises(KeyError):
        tr.at(0.5)


def test_averaging_closeness(two_step, soliton):
    f = GridFunction(soliton.f.values[64 - 24:64 + 25])
    ratios = []
    for eps in (0.2, 0.1):
        rep, _, _ = compare_averaging(f, eps, two_step, omega=soliton.omega)
        assert rep.ratio <= 10
        assert rep.norm_drift_full <= 1e-9 / eps
        assert rep.max_orbit_deviation <= 10 * eps
        ratios.append(rep.ratio)
    assert ratios[1] <= ratios[0] * (1 + 1e-9)
    assert 0.3 <= ratios[1] / ratios[0] <= 1.7 or math.isclose(ratios[0], 0.0)
