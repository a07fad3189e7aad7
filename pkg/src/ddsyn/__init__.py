"""ddsyn: LMI-based analysis and state-feedback synthesis for linear
distributed-delay systems with nonlinear delay kernels.

The package covers the full pipeline: kernel bases closed under
differentiation and their Gram weights, dissipativity/stability analysis
and controller synthesis as semidefinite feasibility problems, robust
variants under full-block linear-fractional uncertainty, and independent
verification through characteristic roots and time-domain simulation.
"""

__version__ = "0.1.0"

from .exceptions import (DdsynError, DependentBasisError, DimensionError,
                         ExtractionError, InputError, NumericalFailureError,
                         UnderdeterminedError)
from .kernel import (GramPair, KernelBasis, LiftedKernel, ScaleMap,
                     fit_coefficients, gram, legendre_basis, lift, make_basis,
                     scale)
from .model import (ClosedLoop, DDSystem, SupplyRate, TuningParams,
                    UncertaintyChannel, UncertaintySet, close_loop,
                    custom_supply, l2_objective, l2_supply, passivity_supply,
                    sector_supply, system_from_dict, system_to_dict, validate)
from .lmi import LMIProblem, VarRef, count_decision_variables
from .builders import (analysis_constraints, lemma6_bound, lemma6_wellposed,
                       robust_analysis_constraints,
                       simple_stability_constraints,
                       slack_stability_constraints, thm1_constraints,
                       thm2_constraints)
from .sdp import (Certificate, SolverOptions, SynthesisResult,
                  extract_synthesis, minimize_linear, solve_feasibility)
from .verify import (SpectralReport, Trajectory, empirical_l2_gain, simulate,
                     spectral_abscissa, sweep_stability)
