"""Mismatched-decoding rate regions, exponents and simulation for the MAC."""

from .channel import ChannelSpec, noisy_addition_channel, spec_from_config
from .errors import (BudgetExceeded, EmptyFeasibleSet, InfeasibleSupport,
                     InvalidConfig, MismacError, SolverFailure,
                     UnsupportedMass)
from .exponents import (ExponentQuery, ExponentReport, exponent_type1_cognitive,
                        exponent_type1_standard, exponent_type2_standard)
from .oracle import OracleResult, grid_epsilon, grid_maximize, grid_minimize
from .probability import (Alphabets, JointType, closest_type,
                          enumerate_joint_types, entropy, kl_divergence,
                          marginal, metric_expectation, mutual_information)
from .regions import (FValues, RateRegionCurve, RegionPoint, RegionQuery,
                      f_under, r1_bound_maxmetric, r1_bound_successive,
                      r2_bound, trace_region)
from .simulate import (Codebook, DecodeOutcome, Ensemble, EnumeratorSample,
                       decode_genie, decode_maxmetric, decode_successive,
                       exact_error_probability, monte_carlo_error,
                       sample_codebook, type_enumerator_profile,
                       wilson_interval)
from .solver import (FeasibilityResult, SolveReport, Tolerances,
                     feasibility_check, maximize_concave, minimize)

__version__ = "0.1.0"
