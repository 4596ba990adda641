"""swarmk: macroscopic rate-equation models of multi-robot systems.

Compile state diagrams of agent swarms into rate equations (ordinary,
delayed, or finite-difference), integrate them, analyze steady states and
optima, and cross-check the mean-field predictions against exact
master-equation solutions and stochastic simulation.
"""
from .diagram import (OccupationVector, RateSystem, StateDiagram, Transition,
                      ValidationReport, compile_rhs, conserved_total,
                      encounter_rate, validate_diagram)
from .errors import (ConservationDrift, DelayMisaligned, EvalError,
                     IntegrationError, LexError, ModelError,
                     NegativePopulation, NonFinite, NoRoot, NotReached,
                     ParseError, SemanticError, StateSpaceTooLarge,
                     SwarmkError)
from .integrate import (HistoryAccessor, Trajectory, integrate,
                        integrate_delayed, iterate_difference)
from .models import (BUILTIN_NAMES, CollabDiffParams, ForagingParams,
                     StickPullCountsParams, StickPullParams, SugawaraParams,
                     build_builtin, build_collab_difference, build_foraging,
                     build_stickpull_counts, build_stickpull_delayed,
                     build_stickpull_simple, build_sugawara, shipped_source)
from .parser import ModelSource, parse_file, parse_model, pretty_print
from .analysis import (SteadyStateResult, SweepTable, beta_critical,
                       collaboration_rate, completion_time,
                       efficiency_per_robot, gamma_opt, scaling_exponent,
                       steady_state_delayed, steady_state_simple,
                       steady_state_of_trajectory, sweep, tau_opt)
from .stochastic import (ConfigurationSpace, EnsembleStats, ensemble,
                         master_exact, semimarkov_run, ssa_run)

__version__ = "1.0.0"

__all__ = [
    "BUILTIN_NAMES", "CollabDiffParams", "ConfigurationSpace",
    "ConservationDrift", "DelayMisaligned", "EnsembleStats", "EvalError",
    "ForagingParams", "HistoryAccessor", "IntegrationError", "LexError",
    "ModelError", "ModelSource", "NegativePopulation", "NoRoot", "NonFinite",
    "NotReached", "OccupationVector", "ParseError", "RateSystem",
    "SemanticError", "StateDiagram", "StateSpaceTooLarge",
    "SteadyStateResult", "StickPullCountsParams", "StickPullParams",
    "SugawaraParams", "SwarmkError", "SweepTable", "Trajectory", "Transition",
    "ValidationReport", "beta_critical", "build_builtin",
    "build_collab_difference", "build_foraging", "build_stickpull_counts",
    "build_stickpull_delayed", "build_stickpull_simple", "build_sugawara",
    "collaboration_rate", "compile_rhs", "completion_time", "conserved_total",
    "efficiency_per_robot", "encounter_rate", "ensemble", "gamma_opt",
    "integrate", "integrate_delayed", "iterate_difference", "master_exact",
    "parse_file", "parse_model", "pretty_print", "scaling_exponent",
    "semimarkov_run", "shipped_source", "ssa_run", "steady_state_delayed",
    "steady_state_of_trajectory", "steady_state_simple", "sweep", "tau_opt",
    "validate_diagram",
]
