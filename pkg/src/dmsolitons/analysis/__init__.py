from .report import VerificationReport
from .tails import (DecayFit, InsufficientRangeError, TailDistribution, decay_fit, tail_alpha,
                    verify_self_consistency)
from .weights import (F_mueps, F_value, WeightParams, f_ratio, log_F, verify_eps_limit,
                      verify_F_properties, weighted_norm)
from .bounds import verify_bilinear_multilinear, verify_kernel_bounds, verify_norms
from .suites import SUITES, UnknownSuiteError, merge_all, run_all, run_suite, run_suites
