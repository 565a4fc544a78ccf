"""Exact zero-order-hold discretization and integrated stage-cost kernels.

For a continuous plant ``dx/dt = A x + B u`` with ``u`` held constant over
``[0, h]``::

    x(h) = A_h x(0) + B_h u,   A_h = expm(A h),   B_h = int_0^h expm(A s) ds B

and the running cost ``int_0^h x'Qx + u'Ru ds`` collapses into the quadratic
form ``[x; u]' Gamma(h) [x; u]``.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._validation import as_matrix, as_vector, check_positive, check_spd
from .exceptions import InvalidInputError, NumericalFailureError

KERNEL_ABS_TOL = 1e-11
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)
_MAX_BISECTIONS = 40


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Continuous-time plant ``dx/dt = A x + B u`` with ``|u_j| <= u_bounds[j]``."""

    A: np.ndarray
    B: np.ndarray
    u_bounds: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        if A.shape[0] != A.shape[1]:
            raise InvalidInputError(f"A must be square, got {A.shape}")
        B = as_matrix(self.B, "B", shape=(A.shape[0], None))
        ub = as_vector(self.u_bounds, "u_bounds", size=B.shape[1])
        if np.any(ub <= 0):
            raise InvalidInputError("u_bounds must be strictly positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "u_bounds", ub)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]


@dataclass(frozen=True, eq=False)
class CostWeights:
    """Stage weights ``Q``, ``R`` and (once synthesized) terminal weight ``P_f``."""

    Q: np.ndarray
    R: np.ndarray
    P_f: np.ndarray = None

    def __post_init__(self):
        Q = check_spd(as_matrix(self.Q, "Q"), "Q")
        R = check_spd(as_matrix(self.R, "R"), "R")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        if self.P_f is not None:
            P = check_spd(as_matrix(self.P_f, "P_f", shape=Q.shape), "P_f")
            object.__setattr__(self, "P_f", P)

    def check_system(self, sys):
        if self.Q.shape != (sys.n, sys.n):
            raise InvalidInputError(f"Q must be {sys.n}x{sys.n}, got {self.Q.shape}")
        if self.R.shape != (sys.m, sys.m):
            raise InvalidInputError(f"R must be {sys.m}x{sys.m}, got {self.R.shape}")


def matrix_exponential(A, t=1.0):
    """Return ``expm(A t)`` (scaling and squaring with a Pade approximant)."""
    A = as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"A must be square, got {A.shape}")
    t = float(t)
    if not np.isfinite(t) or t < 0:
        raise InvalidInputError(f"t must be finite and >= 0, got {t}")
    return scipy.linalg.expm(A * t)


def _augmented(sys):
    n, m = sys.n, sys.m
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = sys.A
    aug[:n, n:] = sys.B
    return aug


def discretize(sys, h):
    """Return ``(A_h, B_h)`` for an input held constant over ``h``."""
    h = check_positive(h, "h")
    E = scipy.linalg.expm(_augmented(sys) * h)
    n = sys.n
    return E[:n, :n], E[:n, n:]


def _kernel_integral(sys, Q, R, a, b, tol):
    """Adaptive Gauss-Legendre integral of ``[A_s B_s]'Q[A_s B_s] + diag(0, R)``."""
    aug = _augmented(sys)
    n, m = sys.n, sys.m
    Rpad = np.zeros((n + m, n + m))
    Rpad[n:, n:] = R

    def rule(lo, hi):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        acc = np.zeros((n + m, n + m))
        for node, w in zip(_GL_NODES, _GL_WEIGHTS):
            AB = scipy.linalg.expm(aug * (mid + half * node))[:n, :]
            acc += w * (AB.T @ Q @ AB)
        return half * acc + (hi - lo) * Rpad

    total = np.zeros((n + m, n + m))
    span = b - a
    stack = [(a, b, rule(a, b), 0)]
    while stack:
        lo, hi, coarse, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = rule(lo, mid), rule(mid, hi)
        fine = left + right
        err = np.max(np.abs(fine - coarse))
        if err <= tol * (hi - lo) / span:
            total += fine
        elif depth >= _MAX_BISECTIONS:
            raise NumericalFailureError(
                "stage-cost quadrature did not converge",
                {"interval": (lo, hi), "error": err})
        else:
            stack.append((lo, mid, left, depth + 1))
            stack.append((mid, hi, right, depth + 1))
    return total


def stage_cost_kernel(sys, Q, R, h, tol=KERNEL_ABS_TOL):
    """Integrated stage-cost kernel ``Gamma(h)``, shape ``(n+m, n+m)``."""
    h = check_positive(h, "h")
    weights = CostWeights(Q, R)
    weights.check_system(sys)
    G = _kernel_integral(sys, weights.Q, weights.R, 0.0, h, tol)
    return 0.5 * (G + G.T)


def stage_cost(x, u, gamma):
    """``F = [x; u]' Gamma [x; u]``."""
    gamma = np.asarray(gamma, dtype=float)
    z = np.concatenate([np.atleast_1d(np.asarray(x, dtype=float)),
                        np.atleast_1d(np.asarray(u, dtype=float))])
    if gamma.shape != (z.size, z.size):
        raise InvalidInputError(
            f"kernel shape {gamma.shape} does not match [x; u] of size {z.size}")
    return float(z @ gamma @ z)


@dataclass(frozen=True, eq=False)
class DiscretizationTable:
    """Precomputed ``A_h``, ``B_h``, ``Gamma(h)`` for ``h = i*delta``, ``i = 1..M``.

    Build with :meth:`build`. Indexing is by multiple ``i`` (1-based).
    """

    system: LinearSystem
    Q: np.ndarray
    R: np.ndarray
    delta: float
    N_p: int
    M: int
    A_h: np.ndarray = field(repr=False)
    B_h: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, sys, Q, R, delta, N_p, M, tol=KERNEL_ABS_TOL):
        delta = check_positive(delta, "delta")
        N_p, M = int(N_p), int(M)
        if M < 1 or N_p < 2 or M >= N_p:
            raise InvalidInputError(f"need 1 <= M < N_p, got M={M}, N_p={N_p}")
        weights = CostWeights(Q, R)
        weights.check_system(sys)
        n, m = sys.n, sys.m
        A_h = np.empty((M, n, n))
        B_h = np.empty((M, n, m))
        gamma = np.empty((M, n + m, n + m))
        acc = np.zeros((n + m, n + m))
        for j in range(1, M + 1):
            A_h[j - 1], B_h[j - 1] = discretize(sys, j * delta)
            # Gamma is additive over consecutive sub-intervals of [0, h]
            acc = acc + _kernel_integral(sys, weights.Q, weights.R,
                                         (j - 1) * delta, j * delta, tol / M)
            gamma[j - 1] = 0.5 * (acc + acc.T)
        for arr in (A_h, B_h, gamma):
            arr.setflags(write=False)
        return cls(sys, weights.Q, weights.R, delta, N_p, M, A_h, B_h, gamma)

    @property
    def horizon(self):
        return self.N_p * self.delta

    def _check(self, i):
        if not 1 <= i <= self.M:
            raise InvalidInputError(f"multiple {i} outside tabulated range 1..{self.M}")
        return i - 1

    def Ad(self, i=1):
        return self.A_h[self._check(i)]

    def Bd(self, i=1):
        return self.B_h[self._check(i)]

    def Gamma(self, i=1):
        return self.gamma[self._check(i)]
