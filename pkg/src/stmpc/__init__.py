"""Self-triggered model predictive control for continuous-time linear plants."""
from .discretization import (CostWeights, DiscretizationTable, LinearSystem, discretize,
                             matrix_exponential, stage_cost, stage_cost_kernel)
from .exceptions import (ConfigError, ContractViolationError, InitialInfeasibilityError,
                         InvalidInputError, NumericalFailureError, STMPCError, SynthesisError)
from .ocp import (PatternSolution, SamplingPattern, build_ocp, evaluate_cost, rollout,
                  sampling_patterns, solve_all_patterns, solve_ocp, solve_pattern)
from .simulator import SimulationConfig, SimulationTrace, simulate, simulate_periodic
from .terminal import TerminalIngredients, synthesize_terminal, verify_terminal
from .trigger import TriggerParams, TriggerState, check_conditions, initialize, select_pattern

__version__ = "0.1.0"
