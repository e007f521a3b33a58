"""Named verification suites and the deterministic ``all`` aggregate."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

from ..propagator import DiffractionProfile
from .bounds import verify_bilinear_multilinear, verify_kernel_bounds, verify_norms
from .report import VerificationReport
from .tails import DECAY_FLOOR, InsufficientRangeError, decay_fit, tail_alpha, verify_self_consistency
from .weights import verify_eps_limit, verify_F_properties

SUITES = ("norms", "kernel", "bilinear", "multilinear", "selfconsistency", "F")
ALL = "all"
# exponent for the second self-consistency form; any value in (0, 1/2) is admissible
DELTA = 0.4


class UnknownSuiteError(ValueError):
    pass


def _soliton_alpha(profile: DiffractionProfile, radius: int = 64):
    from ..solver import solve

    res = solve(profile, lam=1.0, radius=radius, dim=1)
    return res, tail_alpha(res.f, source="soliton")


def _selfconsistency(profile: DiffractionProfile) -> VerificationReport:
    res, alpha = _soliton_alpha(profile)
    rep = VerificationReport("selfconsistency")
    rep.add("soliton residual", [profile.segments, 1.0, 64], res.residual, 1e-8)
    rep.add("alpha(0) = ||f||_2", [1.0], abs(alpha.alpha[0] - 1.0), 1e-12)
    drops = int((alpha.alpha[1:] > alpha.alpha[:-1] * (1 + 1e-15)).sum())
    rep.add("alpha non-increasing", [64], drops, 0)
    try:
        fit = decay_fit(alpha, profile.tau)
    except InsufficientRangeError as exc:
        rep.add("decaying range", [DECAY_FLOOR], 0, 1, ok=False)
        rep.notes.append(str(exc))
    else:
        rep.add("mu_fit > 0", [profile.tau], fit.mu_fit, 0.0, ok=fit.mu_fit > 0)
        rep.add("envelope constant finite", [profile.tau], fit.c_min, float("inf"))
        rep.constants.update({f"fit.{k}": v for k, v in fit.to_dict().items()})
    rep.merge(verify_self_consistency(alpha, DELTA, tau=profile.tau), prefix="prop")
    rep.constants.update({"p_lambda": res.p_lambda, "omega": res.omega, "tau": profile.tau})
    return rep


def _F(profile: DiffractionProfile) -> VerificationReport:
    rep = verify_F_properties()
    _, alpha = _soliton_alpha(profile)
    rep.merge(verify_eps_limit(alpha), prefix="eps_limit")
    return rep


def run_suite(name: str, seed: int = 0, dims=(1, 2), profile: DiffractionProfile | None = None,
              ) -> VerificationReport:
    """Run one named suite; ``seed`` drives every randomised input."""
    profile = profile or DiffractionProfile.two_step()
    dims = tuple(int(d) for d in dims)
    if name == ALL:
        return run_all(seed, dims, profile)
    if name == "norms":
        rep = verify_norms(seed=seed, dims=dims)
    elif name == "kernel":
        rep = verify_kernel_bounds(tau=profile.tau, dims=dims)
    elif name in ("bilinear", "multilinear"):
        rep = verify_bilinear_multilinear(profile, dims=dims, seed=seed, which=(name,))
    elif name == "selfconsistency":
        rep = _selfconsistency(profile)
    elif name == "F":
        rep = _F(profile)
    else:
        raise UnknownSuiteError(f"unknown suite {name!r}; choose from {SUITES + (ALL,)}")
    rep.suite = name
    rep.constants["seed"] = seed
    return rep


def _job(args):
    return run_suite(*args)


def run_suites(seed: int = 0, dims=(1, 2), profile: DiffractionProfile | None = None,
               workers: int | None = None) -> list[VerificationReport]:
    """Every suite, run concurrently, returned in the fixed order of :data:`SUITES`."""
    profile = profile or DiffractionProfile.two_step()
    jobs = [(name, seed, dims, profile) for name in SUITES]
    workers = workers if workers is not None else min(len(jobs), os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_job, jobs))
    return [_job(j) for j in jobs]


def merge_all(parts: list[VerificationReport], seed: int = 0) -> VerificationReport:
    rep = VerificationReport(ALL)
    for part in parts:
        rep.merge(part)
    rep.constants["seed"] = seed
    return rep


def run_all(seed: int = 0, dims=(1, 2), profile: DiffractionProfile | None = None,
            workers: int | None = None) -> VerificationReport:
    return merge_all(run_suites(seed, dims, profile, workers), seed)
