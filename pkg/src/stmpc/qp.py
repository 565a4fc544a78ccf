"""Dense convex QP solvers used by the per-pattern optimal control problems.

Two problem classes are handled::

    box QP:    min 1/2 z'Hz + g'z          s.t. lb <= z <= ub
    box QCQP:  min 1/2 z'Hz + g'z          s.t. lb <= z <= ub,
                                                z'Sz + 2 s'z + s0 <= eps

The box QP uses a primal active-set method (exact on the final working set).
The QCQP dualizes the single quadratic constraint and searches the scalar
multiplier with a safeguarded bracketing method; each inner problem is again
a box QP with Hessian ``H + 2*lam*S``.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize

from .exceptions import NumericalFailureError

CONSTRAINT_TOL = 1e-8
KKT_TOL = 1e-8


@dataclass
class BoxQPResult:
    z: np.ndarray
    iterations: int
    kkt_residual: float


def box_kkt_residual(H, g, lb, ub, z):
    """Infinity norm of the projected gradient at ``z``."""
    grad = H @ z + g
    at_lb = z <= lb
    at_ub = z >= ub
    r = np.where(at_lb, np.minimum(grad, 0.0), np.where(at_ub, np.maximum(grad, 0.0), grad))
    return float(np.max(np.abs(r))) if r.size else 0.0


def solve_box_qp(H, g, lb, ub, z0=None, max_iter=None):
    """Primal active-set method for a strictly convex box-constrained QP."""
    nz = g.size
    if max_iter is None:
        max_iter = 20 * nz + 100
    if z0 is None:
        z0 = scipy.linalg.cho_solve(scipy.linalg.cho_factor(H), -g)
    z = np.clip(z0, lb, ub)
    fixed = (z <= lb) | (z >= ub)
    scale = max(1.0, float(np.max(np.abs(g))), float(np.max(np.abs(H))))
    mult_tol = 1e-13 * scale

    for it in range(1, max_iter + 1):
        free = ~fixed
        if np.any(free):
            rhs = -(g[free] + H[np.ix_(free, fixed)] @ z[fixed])
            target = scipy.linalg.cho_solve(
                scipy.linalg.cho_factor(H[np.ix_(free, free)]), rhs)
            p = target - z[free]
            zf = z[free]
            lbf, ubf = lb[free], ub[free]
            alpha, block = 1.0, -1
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(p > 0, (ubf - zf) / p, np.where(p < 0, (lbf - zf) / p, np.inf))
            if ratios.size and np.min(ratios) < 1.0:
                block = int(np.argmin(ratios))
                alpha = max(float(ratios[block]), 0.0)
            zf = zf + alpha * p
            free_idx = np.flatnonzero(free)
            if block >= 0:
                j = free_idx[block]
                zf[block] = ub[j] if p[block] > 0 else lb[j]
                z[free] = np.clip(zf, lbf, ubf)
                fixed[j] = True
                continue
            z[free] = np.clip(zf, lbf, ubf)
        # subspace minimizer reached: check bound multipliers
        if not np.any(fixed):
            break
        grad = H @ z + g
        mult = np.where(z <= lb, grad, -grad)
        mult[~fixed] = np.inf
        j = int(np.argmin(mult))
        if mult[j] >= -mult_tol:
            break
        fixed[j] = False
    else:
        raise NumericalFailureError(
            "box QP active-set iteration cap reached",
            {"iterations": max_iter, "kkt": box_kkt_residual(H, g, lb, ub, z)})
    return BoxQPResult(z, it, box_kkt_residual(H, g, lb, ub, z))


@dataclass
class QCQPResult:
    z: np.ndarray
    multiplier: float
    status: str
    constraint_value: float
    kkt_residual: float
    iterations: int


def min_quadratic_over_box(S, s, s0, lb, ub):
    """``min z'Sz + 2s'z + s0`` over the box for PSD ``S`` (bounded least squares)."""
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    keep = w > 1e-14 * max(1.0, float(np.max(w)))
    L = (np.sqrt(w[keep])[:, None] * V[:, keep].T)
    # z'Sz + 2s'z = |Lz + c|^2 - |c|^2 with L'c = s; s lies in range(S) here
    c = (V[:, keep].T @ s) / np.sqrt(w[keep])
    res = scipy.optimize.lsq_linear(L, -c, bounds=(lb, ub), method="bvls",
                                    tol=1e-14)
    z = np.clip(res.x, lb, ub)
    return float(z @ S @ z + 2 * s @ z + s0), z


def solve_box_qcqp(H, g, lb, ub, S, s, s0, eps, tol=CONSTRAINT_TOL, max_iter=200):
    def constraint(z):
        return float(z @ S @ z + 2.0 * s @ z + s0)

    inner = solve_box_qp(H, g, lb, ub)
    q = constraint(inner.z)
    if q <= eps:
        return QCQPResult(inner.z, 0.0, "optimal", q, inner.kkt_residual, inner.iterations)

    q_min, z_min = min_quadratic_over_box(S, s, s0, lb, ub)
    if q_min > eps + tol:
        return QCQPResult(z_min, np.inf, "infeasible", q_min, np.nan, 0)

    def solve_at(lam, z_start):
        return solve_box_qp(H + 2.0 * lam * S, g + 2.0 * lam * s, lb, ub, z0=z_start)

    iters = inner.iterations
    lam_lo, phi_lo, z_lo = 0.0, q - eps, inner.z
    scale = max(1.0, float(np.max(np.abs(H)))) / max(1.0, float(np.max(np.abs(S))))
    lam_hi = scale
    for _ in range(60):
        res_hi = solve_at(lam_hi, z_lo)
        iters += res_hi.iterations
        phi_hi = constraint(res_hi.z) - eps
        if phi_hi <= 0:
            q_hi = phi_hi
            break
        lam_lo, phi_lo, z_lo = lam_hi, phi_hi, res_hi.z
        lam_hi *= 4.0
    else:
        # feasible set has (almost) empty interior; take the constraint minimizer
        return QCQPResult(z_min, np.inf, "optimal", q_min, np.nan, iters)

    # Illinois false position on phi(lam) = q(z(lam)) - eps, nonincreasing in lam
    side = 0
    for _ in range(max_iter):
        if q_hi >= -tol or lam_hi - lam_lo <= 1e-15 * lam_hi:
            break
        lam = lam_hi - phi_hi * (lam_hi - lam_lo) / (phi_hi - phi_lo)
        if not lam_lo < lam < lam_hi:
            lam = 0.5 * (lam_lo + lam_hi)
        res = solve_at(lam, res_hi.z)
        iters += res.iterations
        phi = constraint(res.z) - eps
        if phi > 0:
            lam_lo, phi_lo = lam, phi
            if side == -1:
                phi_hi *= 0.5
            side = -1
        else:
            lam_hi, phi_hi, res_hi, q_hi = lam, phi, res, phi
            if side == 1:
                phi_lo *= 0.5
            side = 1
    else:
        raise NumericalFailureError(
            "dual search on the terminal multiplier did not converge",
            {"lam_lo": lam_lo, "lam_hi": lam_hi, "phi_hi": phi_hi})
    z = res_hi.z
    return QCQPResult(z, lam_hi, "optimal", constraint(z), res_hi.kkt_residual, iters)
