"""Local feedback, terminal weight and terminal level for the sampled plant.

The terminal ellipsoid is ``{x : x' P_f x <= epsilon}``. On it the feedback
``u = K x`` must be admissible and must decrease ``x' P_f x`` by at least the
one-step stage cost ``F(x, Kx, delta)``.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._validation import as_matrix
from .discretization import stage_cost
from .exceptions import NumericalFailureError, SynthesisError

LYAPUNOV_TOL = 1e-10
RICCATI_TOL = 1e-12
RICCATI_MAX_ITER = 100_000


@dataclass(frozen=True, eq=False)
class TerminalIngredients:
    K: np.ndarray
    P_f: np.ndarray
    epsilon: float
    delta: float

    def __post_init__(self):
        K = as_matrix(self.K, "K")
        P = as_matrix(self.P_f, "P_f", shape=(K.shape[1], K.shape[1]))
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "P_f", 0.5 * (P + P.T))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "delta", float(self.delta))

    def to_dict(self):
        return {"K": self.K.tolist(), "P_f": self.P_f.tolist(),
                "epsilon": self.epsilon, "delta": self.delta}

    @classmethod
    def from_dict(cls, d):
        return cls(d["K"], d["P_f"], d["epsilon"], d["delta"])


@dataclass(frozen=True)
class TerminalReport:
    lyapunov_max_eig: float
    input_margin: float
    sampled_max_violation: float
    passed: bool

    def lines(self):
        return [
            f"lyapunov_max_eig   {self.lyapunov_max_eig:.3e}  (<= {LYAPUNOV_TOL:.0e})",
            f"input_margin       {self.input_margin:.3e}  (>= 0)",
            f"sampled_violation  {self.sampled_max_violation:.3e}  (<= 1e-09)",
            f"result             {'PASS' if self.passed else 'FAIL'}",
        ]


def _blocks(gamma, n):
    return gamma[:n, :n], gamma[:n, n:], gamma[n:, n:]


def check_stabilizable(Ad, Bd, tol=1e-9):
    """PBH test on the discrete pair; raises naming an offending eigenvalue."""
    n = Ad.shape[0]
    for lam in np.linalg.eigvals(Ad):
        if abs(lam) < 1.0 - tol:
            continue
        pbh = np.hstack([Ad - lam * np.eye(n), Bd.astype(complex)])
        sv = np.linalg.svd(pbh, compute_uv=False)
        if sv[-1] <= tol * max(1.0, sv[0]):
            raise SynthesisError(
                f"(A_delta, B_delta) is not stabilizable: eigenvalue {lam:.6g} "
                f"(|lambda|={abs(lam):.6g}) is uncontrollable")


def riccati_fixed_point(Ad, Bd, Gxx, Gxu, Guu, tol=RICCATI_TOL, max_iter=RICCATI_MAX_ITER):
    """Value iteration on the cross-weighted discrete Riccati equation.

    Returns ``(P, K)`` with ``u = K x`` the stabilizing LQR law.
    """
    P = np.array(Gxx, dtype=float)
    for it in range(max_iter):
        S = Guu + Bd.T @ P @ Bd
        L = Bd.T @ P @ Ad + Gxu.T
        P_next = Gxx + Ad.T @ P @ Ad - L.T @ np.linalg.solve(S, L)
        P_next = 0.5 * (P_next + P_next.T)
        step = np.max(np.abs(P_next - P))
        P = P_next
        if not np.all(np.isfinite(P)):
            break
        if step <= tol * max(1.0, np.max(np.abs(P))):
            K = -np.linalg.solve(Guu + Bd.T @ P @ Bd, Bd.T @ P @ Ad + Gxu.T)
            return P, K
    raise NumericalFailureError(
        "Riccati iteration did not converge",
        {"iterations": it + 1, "last_step": float(step)})


def closed_loop_weight(gamma, K):
    """``[I; K]' Gamma [I; K]``, the one-step cost under ``u = Kx``."""
    n = K.shape[1]
    IK = np.vstack([np.eye(n), K])
    return IK.T @ gamma @ IK


def epsilon_for_bounds(K, P_f, u_bounds):
    """Largest level such that ``|K_j x| <= u_bounds[j]`` on the ellipsoid."""
    Pinv = np.linalg.inv(P_f)
    support = np.einsum("ji,ik,jk->j", K, Pinv, K)
    with np.errstate(divide="ignore"):
        levels = np.where(support > 0, u_bounds ** 2 / support, np.inf)
    return float(np.min(levels))


def synthesize_terminal(sys, table):
    """Build ``(K, P_f, epsilon)`` for the ``delta``-sampled plant in ``table``."""
    n = sys.n
    Ad, Bd, gamma = table.Ad(1), table.Bd(1), table.Gamma(1)
    check_stabilizable(Ad, Bd)
    Gxx, Gxu, Guu = _blocks(gamma, n)
    _, K = riccati_fixed_point(Ad, Bd, Gxx, Gxu, Guu)
    Acl = Ad + Bd @ K
    if np.max(np.abs(np.linalg.eigvals(Acl))) >= 1.0:
        raise SynthesisError("Riccati gain does not stabilize the sampled plant")
    # Re-solve the Lyapunov equation for the final K so the decrease holds to round-off
    P = scipy.linalg.solve_discrete_lyapunov(Acl.T, closed_loop_weight(gamma, K))
    P = 0.5 * (P + P.T)
    eps = epsilon_for_bounds(K, P, sys.u_bounds)
    return TerminalIngredients(K, P, eps, table.delta)


def lyapunov_residual(ing, table):
    Acl = table.Ad(1) + table.Bd(1) @ ing.K
    D = Acl.T @ ing.P_f @ Acl - ing.P_f + closed_loop_weight(table.Gamma(1), ing.K)
    return float(np.max(np.linalg.eigvalsh(0.5 * (D + D.T))))


def input_margin(ing, sys):
    """``min_j (u_bar_j - max over the ellipsoid of |K_j x|)``."""
    Pinv = np.linalg.inv(ing.P_f)
    support = np.einsum("ji,ik,jk->j", ing.K, Pinv, ing.K)
    return float(np.min(sys.u_bounds - np.sqrt(max(ing.epsilon, 0.0) * support)))


def sample_ellipsoid(P_f, epsilon, n_points, rng):
    """Points on and inside ``{x : x' P_f x <= epsilon}``; half on the boundary."""
    n = P_f.shape[0]
    L = np.linalg.cholesky(P_f)
    d = rng.standard_normal((n_points, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    radii = np.ones(n_points)
    radii[n_points // 2:] = rng.uniform(0.0, 1.0, n_points - n_points // 2) ** (1.0 / n)
    y = d * (radii * np.sqrt(epsilon))[:, None]
    # x = L^{-T} y gives x' P x = |y|^2
    return np.linalg.solve(L.T, y.T).T


def sampled_decrease_violation(ing, table, n_points=1000, seed=0):
    """Worst ``V(A_cl x) - V(x) + F(x, Kx, delta)`` over sampled ellipsoid points."""
    rng = np.random.default_rng(seed)
    X = sample_ellipsoid(ing.P_f, ing.epsilon, n_points, rng)
    Acl = table.Ad(1) + table.Bd(1) @ ing.K
    gamma = table.Gamma(1)
    worst = -np.inf
    for x in X:
        x_next = Acl @ x
        v = x_next @ ing.P_f @ x_next - x @ ing.P_f @ x + stage_cost(x, ing.K @ x, gamma)
        worst = max(worst, v)
    return float(worst)


def verify_terminal(ing, sys, table, n_points=1000, seed=0):
    """Check the terminal ingredients; always returns a :class:`TerminalReport`."""
    try:
        eig = lyapunov_residual(ing, table)
        margin = input_margin(ing, sys)
        pd = bool(np.linalg.eigvalsh(ing.P_f)[0] > 0) and ing.epsilon > 0
        sampled = sampled_decrease_violation(ing, table, n_points, seed) if pd else np.inf
    except (np.linalg.LinAlgError, ValueError):
        return TerminalReport(np.inf, -np.inf, np.inf, False)
    tol_margin = 1e-12 * float(np.max(sys.u_bounds))
    passed = pd and eig <= LYAPUNOV_TOL and margin >= -tol_margin and sampled <= 1e-9
    return TerminalReport(eig, margin, sampled, bool(passed))
