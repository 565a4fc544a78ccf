"""Closed-loop simulation of the self-triggered and periodic MPC loops.

Between transmissions the plant is propagated with the exact zero-order-hold
map, so sampled states carry no integration error.
"""
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_vector, check_positive
from .discretization import DiscretizationTable, discretize, stage_cost, stage_cost_kernel
from .exceptions import ContractViolationError, InvalidInputError
from .ocp import SamplingPattern, solve_all_patterns, solve_pattern
from .terminal import synthesize_terminal
from .trigger import TriggerParams, advance, all_conditions, initialize, select_pattern

CONVERGENCE_RADIUS = 0.05


@dataclass(eq=False)
class SimulationConfig:
    system: object
    Q: np.ndarray
    R: np.ndarray
    trigger: TriggerParams
    delta: float
    N_p: int
    M: int
    x0: np.ndarray
    t_end: float
    sample_resolution: float = None
    terminal: object = None
    n_jobs: int = 1

    def __post_init__(self):
        self.delta = check_positive(self.delta, "delta")
        self.t_end = check_positive(self.t_end, "t_end")
        self.N_p, self.M = int(self.N_p), int(self.M)
        if not 1 <= self.M < self.N_p:
            raise InvalidInputError(f"need 1 <= M < N_p, got M={self.M}, N_p={self.N_p}")
        self.x0 = as_vector(self.x0, "x0", size=self.system.n)
        if self.sample_resolution is None:
            self.sample_resolution = self.delta
        r = check_positive(self.sample_resolution, "sample_resolution")
        ratio = self.delta / r
        if r > self.delta * (1 + 1e-12) or abs(ratio - round(ratio)) > 1e-9:
            raise InvalidInputError(
                "sample_resolution must divide delta into a whole number of samples")
        self.sample_resolution = self.delta / round(ratio)


@dataclass(eq=False)
class Event:
    k: int
    step: int
    t: float
    x: np.ndarray
    pattern: int
    costs: np.ndarray
    feasible: np.ndarray
    solved: np.ndarray
    cond_a: np.ndarray
    cond_b: np.ndarray
    solution: object = field(repr=False)
    solutions: list = field(default=None, repr=False)

    @property
    def u(self):
        return self.solution.first_input

    @property
    def interval(self):
        return self.solution.pattern.index * self.solution.pattern.delta


@dataclass(eq=False)
class SimulationTrace:
    mode: str
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    events: list
    transmissions: int
    cumulative_stage_cost: float
    t_end: float
    table: DiscretizationTable = field(repr=False)
    terminal: object = field(repr=False)
    params: TriggerParams = None

    @property
    def event_times(self):
        return np.array([e.t for e in self.events])

    @property
    def patterns(self):
        return np.array([e.pattern for e in self.events])

    def time_to_radius(self, radius=CONVERGENCE_RADIUS):
        """First sample time after which ``|x|`` stays below ``radius`` (None if never)."""
        norms = np.linalg.norm(self.x, axis=1)
        outside = np.flatnonzero(norms >= radius)
        if outside.size == 0:
            return float(self.t[0])
        if outside[-1] == len(norms) - 1:
            return None
        return float(self.t[outside[-1] + 1])


def prepare(config):
    """Tabulate discretizations and synthesize terminal ingredients if absent."""
    table = DiscretizationTable.build(config.system, config.Q, config.R,
                                      config.delta, config.N_p, config.M)
    terminal = config.terminal
    if terminal is None:
        terminal = synthesize_terminal(config.system, table)
    return table, terminal


def _run(config, periodic, keep_solutions=True):
    sys = config.system
    table, terminal = prepare(config)
    params = config.trigger
    delta, M = config.delta, config.M
    sub = int(round(delta / config.sample_resolution))
    end_steps = config.t_end / delta
    maps = {}

    def hold_map(j):
        # state map after holding for j sample periods
        if j not in maps:
            maps[j] = discretize(sys, j * config.sample_resolution)
        return maps[j]

    ts, xs, us, events = [], [], [], []
    x = config.x0.copy()
    step = 0
    state = None
    cost = 0.0
    k = 0
    while step < end_steps - 1e-9:
        if k == 0 or periodic:
            sol = solve_pattern(table, terminal, SamplingPattern(1, config.N_p, delta), x)
            solutions = [sol]
            if k == 0:
                i_k, state = initialize(sol, table)
                cond_a = cond_b = None
            else:
                cond_a, cond_b = all_conditions(solutions, state, params)
                i_k, state = 1, advance(state, sol, table)
        else:
            solutions = solve_all_patterns(table, terminal, x, n_jobs=config.n_jobs)
            cond_a, cond_b = all_conditions(solutions, state, params)
            try:
                i_k, state = select_pattern(solutions, state, params, table)
            except ContractViolationError as err:
                err.context.update({"event": k, "t": step * delta, "x": x.tolist()})
                raise
        costs = np.full(M, np.nan)
        feasible = np.zeros(M, dtype=bool)
        solved = np.zeros(M, dtype=bool)
        for s in solutions:
            idx = s.pattern.index - 1
            solved[idx] = True
            feasible[idx] = s.feasible
            if s.feasible:
                costs[idx] = s.J_star
        chosen = solutions[i_k - 1]
        events.append(Event(k, step, step * delta, x.copy(), i_k, costs, feasible, solved,
                            cond_a, cond_b, chosen, solutions if keep_solutions else None))
        u = chosen.first_input
        for j in range(i_k * sub):
            if j == 0:
                xj = x
            else:
                Ah, Bh = hold_map(j)
                xj = Ah @ x + Bh @ u
            ts.append((step + j / sub) * delta)
            xs.append(xj)
            us.append(u)
        seg = min(float(i_k), end_steps - step) * delta
        if abs(seg - i_k * delta) <= 1e-12 * delta:
            gamma = table.Gamma(i_k)
        else:
            gamma = stage_cost_kernel(sys, table.Q, table.R, seg)
        cost += stage_cost(x, u, gamma)
        x = table.Ad(i_k) @ x + table.Bd(i_k) @ u
        step += i_k
        k += 1
    ts.append(step * delta)
    xs.append(x.copy())
    us.append(us[-1])
    transmissions = sum(1 for e in events if e.t < config.t_end - 1e-12)
    return SimulationTrace("periodic" if periodic else "self-triggered",
                           np.array(ts), np.array(xs), np.array(us), events,
                           transmissions, cost, config.t_end, table, terminal, params)


def simulate(config, keep_solutions=True):
    """Run the self-triggered loop until the first event time ``>= t_end``."""
    return _run(config, periodic=False, keep_solutions=keep_solutions)


def simulate_periodic(config, keep_solutions=True):
    """Baseline loop that transmits every ``delta`` (pattern 1 at every step)."""
    return _run(config, periodic=True, keep_solutions=keep_solutions)
