"""Per-pattern finite-horizon optimal control problems.

Pattern ``i`` holds its first input for ``i*delta`` and every later input for
``delta``; all patterns end at the same horizon ``N_p*delta``. The states are
eliminated (condensed form), leaving a QP in the stacked input sequence ``z``
with box bounds and one ellipsoidal terminal constraint.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._validation import as_vector
from .discretization import stage_cost
from .exceptions import InvalidInputError
from .qp import solve_box_qcqp

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class SamplingPattern:
    """First hold of ``index*delta`` followed by ``N_p - index`` holds of ``delta``."""

    index: int
    N_p: int
    delta: float

    def __post_init__(self):
        if not 1 <= self.index < self.N_p:
            raise InvalidInputError(
                f"pattern index {self.index} must lie in 1..{self.N_p - 1}")

    @property
    def n_inputs(self):
        return self.N_p - self.index + 1

    @property
    def intervals(self):
        out = np.full(self.n_inputs, self.delta)
        out[0] = self.index * self.delta
        return out

    @property
    def grid(self):
        """State grid as integer multiples of ``delta``: ``0, i, i+1, ..., N_p``."""
        return np.concatenate([[0], np.arange(self.index, self.N_p + 1)])


def sampling_patterns(N_p, M, delta):
    return [SamplingPattern(i, N_p, delta) for i in range(1, M + 1)]


@dataclass(frozen=True, eq=False)
class PatternSolution:
    pattern: SamplingPattern
    u_seq: np.ndarray
    x_seq: np.ndarray
    J_star: float
    status: str
    multiplier: float = 0.0
    kkt_residual: float = 0.0

    @property
    def feasible(self):
        return self.status == OPTIMAL

    @property
    def first_input(self):
        return self.u_seq[0]


@dataclass(eq=False)
class OCPData:
    """Condensed problem ``min 1/2 z'Hz + g'z + c`` for one pattern and state."""

    pattern: SamplingPattern
    x0: np.ndarray
    H: np.ndarray
    g: np.ndarray
    c: float
    lb: np.ndarray
    ub: np.ndarray
    # terminal constraint z'Sz + 2 s'z + s0 <= epsilon
    S: np.ndarray
    s: np.ndarray
    s0: float
    epsilon: float
    table: object = field(repr=False)

    def objective(self, z):
        return float(0.5 * z @ self.H @ z + self.g @ z + self.c)

    def terminal_value(self, z):
        return float(z @ self.S @ z + 2.0 * self.s @ z + self.s0)


def _check_pattern(table, pattern):
    if pattern.N_p != table.N_p or pattern.index > table.M:
        raise InvalidInputError(
            f"pattern {pattern.index} (N_p={pattern.N_p}) not covered by the table "
            f"(N_p={table.N_p}, M={table.M})")


@lru_cache(maxsize=256)
def _condensed(table, terminal, pattern):
    n, m = table.system.n, table.system.m
    N = pattern.n_inputs
    nz = m * N
    P = terminal.P_f
    Ad, Bd = table.Ad(1), table.Bd(1)

    Ex = np.zeros((N + 1, n, n))
    Eu = np.zeros((N + 1, n, nz))
    Ex[0] = np.eye(n)
    Ex[1] = table.Ad(pattern.index)
    Eu[1][:, :m] = table.Bd(pattern.index)
    for j in range(2, N + 1):
        Ex[j] = Ad @ Ex[j - 1]
        Eu[j] = Ad @ Eu[j - 1]
        Eu[j][:, (j - 1) * m:j * m] += Bd

    H = np.zeros((nz, nz))
    G = np.zeros((nz, n))
    C = np.zeros((n, n))
    for j in range(N):
        gamma = table.Gamma(pattern.index if j == 0 else 1)
        Wx = np.vstack([Ex[j], np.zeros((m, n))])
        Wz = np.vstack([Eu[j], np.zeros((m, nz))])
        Wz[n:, j * m:(j + 1) * m] = np.eye(m)
        GWz = gamma @ Wz
        H += 2.0 * Wz.T @ GWz
        G += 2.0 * GWz.T @ Wx
        C += Wx.T @ gamma @ Wx
    S = Eu[N].T @ P @ Eu[N]
    Sx = Eu[N].T @ P @ Ex[N]
    S0 = Ex[N].T @ P @ Ex[N]
    H += 2.0 * S
    G += 2.0 * Sx
    C += S0
    H = 0.5 * (H + H.T)
    ub = np.tile(table.system.u_bounds, N)
    for arr in (H, G, C, S, Sx, S0, ub):
        arr.setflags(write=False)
    return H, G, 0.5 * (C + C.T), 0.5 * (S + S.T), Sx, S0, ub


def build_ocp(table, terminal, pattern, x0):
    """Assemble the condensed problem for ``pattern`` at state ``x0``."""
    _check_pattern(table, pattern)
    x0 = as_vector(x0, "x0", size=table.system.n)
    H, G, C, S, Sx, S0, ub = _condensed(table, terminal, pattern)
    return OCPData(pattern, x0, H, G @ x0, float(x0 @ C @ x0), -ub, ub,
                   S, Sx @ x0, float(x0 @ S0 @ x0), terminal.epsilon, table)


def rollout(table, pattern, x0, u_seq):
    """States on the pattern grid (``N_i + 1`` rows) under the held inputs."""
    _check_pattern(table, pattern)
    n, m = table.system.n, table.system.m
    x0 = as_vector(x0, "x0", size=n)
    u_seq = np.asarray(u_seq, dtype=float).reshape(-1, m) if np.size(u_seq) else None
    if u_seq is None or u_seq.shape[0] != pattern.n_inputs:
        raise InvalidInputError(
            f"pattern {pattern.index} needs {pattern.n_inputs} inputs of size {m}")
    xs = np.empty((pattern.n_inputs + 1, n))
    xs[0] = x0
    xs[1] = table.Ad(pattern.index) @ x0 + table.Bd(pattern.index) @ u_seq[0]
    Ad, Bd = table.Ad(1), table.Bd(1)
    for j in range(1, pattern.n_inputs):
        xs[j + 1] = Ad @ xs[j] + Bd @ u_seq[j]
    return xs


def evaluate_cost(table, terminal, pattern, x0, u_seq):
    """Cost of ``u_seq`` by forward simulation (independent of the condensed form)."""
    xs = rollout(table, pattern, x0, u_seq)
    u_seq = np.asarray(u_seq, dtype=float).reshape(pattern.n_inputs, -1)
    J = stage_cost(xs[0], u_seq[0], table.Gamma(pattern.index))
    gamma = table.Gamma(1)
    for j in range(1, pattern.n_inputs):
        J += stage_cost(xs[j], u_seq[j], gamma)
    return J + float(xs[-1] @ terminal.P_f @ xs[-1])


def solve_ocp(data):
    """Global minimizer of the condensed problem, or an infeasible status."""
    res = solve_box_qcqp(data.H, data.g, data.lb, data.ub, data.S, data.s, data.s0,
                         data.epsilon)
    m = data.table.system.m
    if res.status != OPTIMAL:
        return PatternSolution(data.pattern, None, None, np.inf, INFEASIBLE,
                               res.multiplier, np.nan)
    u_seq = res.z.reshape(-1, m)
    xs = rollout(data.table, data.pattern, data.x0, u_seq)
    return PatternSolution(data.pattern, u_seq, xs, data.objective(res.z), OPTIMAL,
                           res.multiplier, res.kkt_residual)


def solve_pattern(table, terminal, pattern, x0):
    return solve_ocp(build_ocp(table, terminal, pattern, x0))


def solve_all_patterns(table, terminal, x0, n_jobs=1):
    """Solve every pattern ``1..M`` at ``x0``; results in pattern order."""
    patterns = sampling_patterns(table.N_p, table.M, table.delta)
    if n_jobs == 1:
        return [solve_pattern(table, terminal, p, x0) for p in patterns]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(lambda p: solve_pattern(table, terminal, p, x0), patterns))
