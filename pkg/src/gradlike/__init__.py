"""Markov-chain revision protocols, their mean dynamics, and Lyapunov functions on the simplex."""
from .errors import GradlikeError, InputError, NumericalError
from .markov_core import (MarkovMatrix, RateMatrix, dirichlet_form, invariant_probability, is_reversible,
                          poincare_inequality_check, spectral_gap)
from .protocols import AttachmentSpec, PayoffSpec, ProtocolSpec, TargetMeasure, markov_kernel
from .dynamics import (StepperOptions, Trajectory, VectorFieldSpec, build_counterexample, classify_equilibrium,
                       find_equilibria, generator_field, integrate, jacobian, omega_limit_summary, pi_field,
                       replicator_field)
from .lyapunov import (LyapunovSpec, build_gradient_approximation, decrease_and_angle, hessian_V, lyapunov_for,
                       quasigradient_check, reversible_metric)
from .games import beta_correspondence, classify_nash, enumerate_nash, is_nash
from .stochastic import meanfield_deviation, simulate_population, simulate_reinforcement
from .scenario import Scenario, load_scenario, parse_scenario, run_scenario

__version__ = "0.1.0"

__all__ = [
    "GradlikeError", "InputError", "NumericalError",
    "MarkovMatrix", "RateMatrix", "dirichlet_form", "invariant_probability", "is_reversible",
    "poincare_inequality_check", "spectral_gap",
    "AttachmentSpec", "PayoffSpec", "ProtocolSpec", "TargetMeasure", "markov_kernel",
    "StepperOptions", "Trajectory", "VectorFieldSpec", "build_counterexample", "classify_equilibrium",
    "find_equilibria", "generator_field", "integrate", "jacobian", "omega_limit_summary", "pi_field",
    "replicator_field",
    "LyapunovSpec", "build_gradient_approximation", "decrease_and_angle", "hessian_V", "lyapunov_for",
    "quasigradient_check", "reversible_metric",
    "beta_correspondence", "classify_nash", "enumerate_nash", "is_nash",
    "meanfield_deviation", "simulate_population", "simulate_reinforcement",
    "Scenario", "load_scenario", "parse_scenario", "run_scenario",
]
