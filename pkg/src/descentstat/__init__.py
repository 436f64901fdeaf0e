"""Descent classes of permutations and their sawtooth particle models.

Exact counting, exact rational densities via polynomial transfer operators,
uniform sampling, and a harness verifying monotonicity, boundedness and
asymptotic-independence statements numerically.
"""

from .combinatorics import (Composition, DescentSet, ModelType, Run, all_compositions,
                            alternating_composition, brute_force_class, composition_from_descents,
                            composition_from_runs, descent_set_of_permutation, lambda_b,
                            parse_composition, runs)
from .errors import InvalidInput, InvalidModel, ResourceLimit
from .polyalg import BivariatePoly, PiecewisePoly, RationalPoly, eval_exact, integrate_prefix, poly_arith, transfer_down, transfer_up
from .sampler import (CountTable, EmpiricalJoint, Verdict, count_class, dominance_check,
                      embed_continuous, gibbs_sample, sample_permutation)
from .sawtooth import (DensityReport, SawtoothModel, conditional_density, envelope_bounds,
                       gamma_minus, gamma_plus, joint_extremes_on_grid, marginal_first,
                       marginal_last, model_from_composition, volume)

__version__ = "0.1.0"
