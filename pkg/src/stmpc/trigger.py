"""Pattern selection for the self-triggered loop.

At each transmission the largest feasible pattern ``i`` is chosen such that

    (a)  J*_i(x_k) <= J*_1(x_k) + beta
    (b)  J*_i(x_k) <= J*_prev - gamma * F(x_prev, u_prev, i_prev * delta)

where the previous quantities refer to the pattern applied at the last
transmission and the input actually held since then.
"""
from dataclasses import dataclass, replace

import numpy as np

from .discretization import stage_cost
from .exceptions import ContractViolationError, InitialInfeasibilityError, InvalidInputError

CONDITION_SLACK = 1e-9


@dataclass(frozen=True)
class TriggerParams:
    beta: float
    gamma: float

    def __post_init__(self):
        beta, gamma = float(self.beta), float(self.gamma)
        if not beta >= 0:
            raise InvalidInputError(f"beta must be >= 0, got {beta}")
        if not 0 < gamma <= 1:
            raise InvalidInputError(f"gamma must lie in (0, 1], got {gamma}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)


@dataclass(frozen=True)
class TriggerState:
    k: int
    prev_pattern: int
    prev_cost: float
    prev_decrement: float


def _decrement(table, sol):
    return stage_cost(sol.x_seq[0], sol.u_seq[0], table.Gamma(sol.pattern.index))


def initialize(solution, table):
    """Seed the scheduler from the pattern-1 solution at the initial state."""
    if not solution.feasible:
        raise InitialInfeasibilityError(
            "pattern 1 is infeasible at the initial state; x0 lies outside the "
            "region where the scheme is defined")
    if solution.pattern.index != 1:
        raise InvalidInputError("initialization requires the pattern-1 solution")
    return 1, TriggerState(0, 1, solution.J_star, _decrement(table, solution))


def check_conditions(i, solutions, state, params, slack=CONDITION_SLACK):
    """Evaluate conditions (a) and (b) for pattern ``i`` (1-based)."""
    sol = solutions[i - 1]
    if not sol.feasible:
        return False, False
    J1 = solutions[0].J_star
    cond_a = sol.J_star <= J1 + params.beta + slack
    cond_b = sol.J_star <= state.prev_cost - params.gamma * state.prev_decrement + slack
    return bool(cond_a), bool(cond_b)


def all_conditions(solutions, state, params):
    """``(cond_a, cond_b)`` boolean arrays over every supplied pattern."""
    flags = [check_conditions(i, solutions, state, params)
             for i in range(1, len(solutions) + 1)]
    return np.array([f[0] for f in flags]), np.array([f[1] for f in flags])


def select_pattern(solutions, state, params, table):
    """Return ``(i_k, next_state)``; raises if no pattern qualifies."""
    cond_a, cond_b = all_conditions(solutions, state, params)
    ok = np.flatnonzero(cond_a & cond_b)
    if ok.size == 0:
        raise ContractViolationError(
            f"no sampling pattern satisfies the trigger conditions at step {state.k + 1}",
            {"k": state.k + 1, "costs": [s.J_star for s in solutions],
             "prev_cost": state.prev_cost, "prev_decrement": state.prev_decrement})
    i_k = int(ok[-1]) + 1
    return i_k, advance(state, solutions[i_k - 1], table)


def advance(state, solution, table):
    """Scheduler state after applying ``solution``'s first input."""
    return replace(state, k=state.k + 1, prev_pattern=solution.pattern.index,
                   prev_cost=solution.J_star, prev_decrement=_decrement(table, solution))
