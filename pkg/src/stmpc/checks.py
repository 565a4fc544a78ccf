"""Runtime checks of the cost-ordering, recursive-feasibility and decrease
properties along a simulated trace, plus the numerical oracles used by the
``verify`` command.
"""
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .discretization import discretize, stage_cost, stage_cost_kernel
from .ocp import SamplingPattern, build_ocp, evaluate_cost, rollout
from .terminal import verify_terminal

INVARIANT_SLACK = 1e-6
FEAS_TOL = 1e-8


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tol: float

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.name:<34s} {self.value: .3e}  (tol {self.tol:.0e})"


def repeated_first_candidate(sol):
    """Inputs for pattern ``i-1`` reusing pattern ``i``'s optimum (first input repeated)."""
    u = sol.u_seq
    return np.vstack([u[:1], u[:1], u[1:]])


def shifted_candidate(prev_sol, terminal, table):
    """Pattern-1 inputs at the next transmission: the unused tail of the previous
    optimum followed by the local feedback once the terminal set is reached."""
    i = prev_sol.pattern.index
    N_p = prev_sol.pattern.N_p
    tail = prev_sol.u_seq[1:]
    x = prev_sol.x_seq[-1].copy()
    Ad, Bd = table.Ad(1), table.Bd(1)
    extra = []
    for _ in range(i):
        u = terminal.K @ x
        extra.append(u)
        x = Ad @ x + Bd @ u
    u_bar = np.vstack([tail] + extra) if extra else tail
    assert u_bar.shape[0] == N_p
    return u_bar


def feasibility_violation(table, terminal, pattern, x0, u_seq):
    """Largest violation of the input bounds and the terminal constraint."""
    u_seq = np.asarray(u_seq, dtype=float).reshape(pattern.n_inputs, -1)
    xs = rollout(table, pattern, x0, u_seq)
    input_v = float(np.max(np.abs(u_seq) - table.system.u_bounds))
    term_v = float(xs[-1] @ terminal.P_f @ xs[-1] - terminal.epsilon)
    return max(input_v, 0.0), max(term_v, 0.0)


def _rel(a, b):
    return abs(a - b) / max(1.0, abs(a), abs(b))


def cost_ordering_violation(trace, slack=INVARIANT_SLACK):
    """Worst ``J*_{i-1} - J*_i`` over consecutive feasible pattern pairs."""
    worst = -np.inf
    for ev in trace.events:
        c = ev.costs[ev.feasible]
        if c.size > 1:
            worst = max(worst, float(np.max(c[:-1] - c[1:])))
    return worst


def nesting_violation(trace):
    """Feasibility of the ``i-1`` candidate built from every feasible pattern ``i``."""
    worst = 0.0
    for ev in trace.events:
        for sol in (ev.solutions or [])[1:]:
            if not sol.feasible:
                continue
            prev = SamplingPattern(sol.pattern.index - 1, sol.pattern.N_p, sol.pattern.delta)
            u_bar = repeated_first_candidate(sol)
            iv, tv = feasibility_violation(trace.table, trace.terminal, prev, ev.x, u_bar)
            J_bar = evaluate_cost(trace.table, trace.terminal, prev, ev.x, u_bar)
            worst = max(worst, iv, tv, _rel(J_bar, sol.J_star))
    return worst


def shifted_candidate_violations(trace):
    """Worst feasibility violation and worst decrease excess of the shifted candidate.

    The excess is ``J_1(x_k, u_bar) - (J*_prev - F_prev)``; it must stay <= slack.
    """
    worst_feas, worst_excess = 0.0, -np.inf
    p1 = SamplingPattern(1, trace.table.N_p, trace.table.delta)
    for prev, ev in zip(trace.events[:-1], trace.events[1:]):
        sol = prev.solution
        u_bar = shifted_candidate(sol, trace.terminal, trace.table)
        iv, tv = feasibility_violation(trace.table, trace.terminal, p1, ev.x, u_bar)
        J_bar = evaluate_cost(trace.table, trace.terminal, p1, ev.x, u_bar)
        F_prev = stage_cost(prev.x, sol.first_input, trace.table.Gamma(sol.pattern.index))
        worst_feas = max(worst_feas, iv, tv)
        worst_excess = max(worst_excess, J_bar - (sol.J_star - F_prev))
    return worst_feas, worst_excess


def decrease_violation(trace):
    """Worst ``J*_{i_k}(x_k) - J*_{i_{k-1}}(x_{k-1}) + gamma*F_prev`` along the run."""
    gamma = trace.params.gamma
    worst = -np.inf
    for prev, ev in zip(trace.events[:-1], trace.events[1:]):
        sol = prev.solution
        F_prev = stage_cost(prev.x, sol.first_input, trace.table.Gamma(sol.pattern.index))
        worst = max(worst, ev.solution.J_star - sol.J_star + gamma * F_prev)
    return worst


def availability_failures(trace):
    """Number of events after the first where pattern 1 fails condition (a) or (b)."""
    return sum(1 for ev in trace.events[1:] if not (ev.cond_a[0] and ev.cond_b[0]))


def trace_wellformed(trace):
    """Event spacing, hold consistency and transmission count."""
    ev = trace.events
    delta = trace.table.delta
    ok = ev[0].t == 0.0
    for a, b in zip(ev[:-1], ev[1:]):
        ok &= b.step - a.step == a.pattern
        ok &= abs(b.t - a.t - a.pattern * delta) <= 1e-9 * max(1.0, b.t)
    for e in ev:
        seg = (trace.t >= e.t - 1e-12) & (trace.t < e.t + e.pattern * delta - 1e-9)
        ok &= bool(np.all(trace.u[seg] == e.u))
    ok &= trace.transmissions == sum(1 for e in ev if e.t < trace.t_end)
    ok &= ev[-1].t < trace.t_end <= trace.t[-1] + 1e-9
    return bool(ok)


def propagation_error(trace, max_segments=None):
    """Max relative gap between event states and DOP853 integration of each hold."""
    sys = trace.table.system
    worst = 0.0
    pairs = list(zip(trace.events[:-1], trace.events[1:]))
    if max_segments is not None:
        pairs = pairs[:max_segments]
    for a, b in pairs:
        u = a.u
        sol = solve_ivp(lambda t, x: sys.A @ x + sys.B @ u, (0.0, b.t - a.t), a.x,
                        method="DOP853", rtol=1e-13, atol=1e-14)
        ref = sol.y[:, -1]
        worst = max(worst, float(np.max(np.abs(ref - b.x)) / max(1.0, np.max(np.abs(ref)))))
    return worst


def trapezoid_kernel(sys, Q, R, h, panels=10_000):
    """Dense composite-trapezoid oracle for ``Gamma(h)``."""
    n = sys.n
    s = np.linspace(0.0, h, panels + 1)
    vals = np.empty((panels + 1, n + sys.m, n + sys.m))
    for j, sj in enumerate(s):
        if sj == 0.0:
            AB = np.hstack([np.eye(n), np.zeros((n, sys.m))])
        else:
            A_s, B_s = discretize(sys, sj)
            AB = np.hstack([A_s, B_s])
        vals[j] = AB.T @ Q @ AB
        vals[j][n:, n:] += R
    return np.trapezoid(vals, s, axis=0)


def ode_discretization(sys, h):
    """``(A_h, B_h)`` by DOP853 integration of the plant with unit-vector data."""
    n, m = sys.n, sys.m

    def rhs(t, y):
        Y = y.reshape(n, n + m)
        dY = sys.A @ Y
        dY[:, n:] += sys.B
        return dY.ravel()

    y0 = np.hstack([np.eye(n), np.zeros((n, m))]).ravel()
    sol = solve_ivp(rhs, (0.0, h), y0, method="DOP853", rtol=1e-13, atol=1e-15)
    Y = sol.y[:, -1].reshape(n, n + m)
    return Y[:, :n], Y[:, n:]


def assembly_mismatch(table, terminal, rng, samples=20):
    """Worst relative gap between the condensed objective and forward simulation."""
    worst = 0.0
    sys = table.system
    for _ in range(samples):
        i = int(rng.integers(1, table.M + 1))
        pat = SamplingPattern(i, table.N_p, table.delta)
        x0 = rng.standard_normal(sys.n)
        u = rng.uniform(-1, 1, (pat.n_inputs, sys.m)) * sys.u_bounds
        data = build_ocp(table, terminal, pat, x0)
        J_cond = data.objective(u.ravel())
        J_roll = evaluate_cost(table, terminal, pat, x0, u)
        worst = max(worst, _rel(J_cond, J_roll))
    return worst


def run_suite(trace, seed=0):
    """All invariant checks for a self-triggered trace; returns CheckResult list."""
    rng = np.random.default_rng(seed)
    table, terminal, sys = trace.table, trace.terminal, trace.table.system
    out = []
    rep = verify_terminal(terminal, sys, table, seed=seed)
    out.append(CheckResult("terminal: lyapunov max eigenvalue", rep.lyapunov_max_eig <= 1e-10,
                           rep.lyapunov_max_eig, 1e-10))
    out.append(CheckResult("terminal: input margin", rep.input_margin >= -1e-12,
                           rep.input_margin, 1e-12))
    out.append(CheckResult("terminal: sampled decrease", rep.sampled_max_violation <= 1e-9,
                           rep.sampled_max_violation, 1e-9))
    d = table.delta
    gap = float(np.max(np.abs(trapezoid_kernel(sys, table.Q, table.R, d)
                              - stage_cost_kernel(sys, table.Q, table.R, d))))
    out.append(CheckResult("kernel vs trapezoid oracle (h=delta)", gap <= 1e-9, gap, 1e-9))
    worst = 0.0
    for h in (d, table.M * d):
        Ah, Bh = discretize(sys, h)
        Ao, Bo = ode_discretization(sys, h)
        worst = max(worst, np.max(np.abs(Ah - Ao)) / max(1.0, np.max(np.abs(Ao))),
                    np.max(np.abs(Bh - Bo)) / max(1.0, np.max(np.abs(Bo))))
    out.append(CheckResult("discretization vs ODE oracle", worst <= 1e-8, worst, 1e-8))
    mis = assembly_mismatch(table, terminal, rng)
    out.append(CheckResult("condensed cost vs rollout", mis <= 1e-9, mis, 1e-9))
    v = cost_ordering_violation(trace)
    out.append(CheckResult("cost ordering across patterns", v <= INVARIANT_SLACK, v,
                           INVARIANT_SLACK))
    v = nesting_violation(trace)
    out.append(CheckResult("feasibility nesting i -> i-1", v <= FEAS_TOL, v, FEAS_TOL))
    feas, excess = shifted_candidate_violations(trace)
    out.append(CheckResult("shifted candidate feasible", feas <= FEAS_TOL, feas, FEAS_TOL))
    out.append(CheckResult("shifted candidate decrease", excess <= INVARIANT_SLACK, excess,
                           INVARIANT_SLACK))
    n_fail = availability_failures(trace)
    out.append(CheckResult("pattern 1 always admissible", n_fail == 0, float(n_fail), 0.0))
    v = decrease_violation(trace)
    out.append(CheckResult("optimal cost decrease", v <= INVARIANT_SLACK, v, INVARIANT_SLACK))
    v = propagation_error(trace)
    out.append(CheckResult("plant propagation vs ODE", v <= 1e-8, v, 1e-8))
    ok = trace_wellformed(trace)
    out.append(CheckResult("trace well-formed", ok, 0.0 if ok else 1.0, 0.0))
    return out
