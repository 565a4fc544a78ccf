import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from stmpc import (DiscretizationTable, InvalidInputError, LinearSystem, discretize,
                   matrix_exponential, stage_cost, stage_cost_kernel)
from stmpc.checks import trapezoid_kernel

from conftest import integrator, spring_mass


def taylor_expm(A, t):
    """Truncated Taylor series, summed until the increment drops below 1e-16."""
    M = np.asarray(A, dtype=float) * t
    term = np.eye(M.shape[0])
    total = term.copy()
    k = 1
    while True:
        term = term @ M / k
        total += term
        if np.max(np.abs(term)) < 1e-16:
            return total
        k += 1


def integrator_gamma(h):
    return np.array([[h, h ** 2 / 2], [h ** 2 / 2, h ** 3 / 3 + h]])


# -- matrix exponential ------------------------------------------------------

def test_expm_of_zero_is_identity():
    np.testing.assert_array_equal(matrix_exponential(np.zeros((2, 2)), 1.0), np.eye(2))


def test_expm_matches_taylor_spring():
    A = np.array([[0.0, 1.0], [-2.0, 0.0]])
    ref = taylor_expm(A, 0.1)
    got = matrix_exponential(A, 0.1)
    assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))


def test_expm_scalar():
    got = matrix_exponential([[-1.0]], 2.0)
    assert got[0, 0] == pytest.approx(np.exp(-2.0), rel=1e-14)
    assert got[0, 0] == pytest.approx(0.1353352832366127, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_expm_matches_taylor_small_norm(seed, n):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    A /= max(1.0, np.linalg.norm(A, 2))
    ref = taylor_expm(A, 1.0)
    got = matrix_exponential(A, 1.0)
    assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))


@pytest.mark.parametrize("A", [[[np.nan]], [[np.inf, 0], [0, 1]]])
def test_expm_rejects_nonfinite(A):
    with pytest.raises(InvalidInputError):
        matrix_exponential(A, 1.0)


def test_expm_rejects_negative_time():
    with pytest.raises(InvalidInputError):
        matrix_exponential([[1.0]], -0.1)


# -- discretize --------------------------------------------------------------

def test_discretize_integrator():
    Ah, Bh = discretize(integrator(), 0.5)
    assert Ah[0, 0] == pytest.approx(1.0)
    assert Bh[0, 0] == pytest.approx(0.5)


def test_discretize_spring_matches_ode():
    Ah, Bh = discretize(spring_mass(), 0.1)
    # unit input from rest gives B_h
    sol = solve_ivp(lambda t, x: np.array([x[1], -2 * x[0] + 1.0]), (0, 0.1), [0.0, 0.0],
                    method="DOP853", rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(Bh[:, 0], sol.y[:, -1], atol=1e-10)
    for j in range(2):
        e = np.eye(2)[j]
        sol = solve_ivp(lambda t, x: np.array([x[1], -2 * x[0]]), (0, 0.1), e,
                        method="DOP853", rtol=1e-13, atol=1e-15)
        np.testing.assert_allclose(Ah[:, j], sol.y[:, -1], atol=1e-10)


@pytest.mark.parametrize("h1,h2", [(0.1, 0.2), (0.3, 0.05), (1.0, 2.0)])
def test_discretize_semigroup(h1, h2):
    sys = spring_mass()
    A1, B1 = discretize(sys, h1)
    A2, B2 = discretize(sys, h2)
    A12, B12 = discretize(sys, h1 + h2)
    np.testing.assert_allclose(A12, A2 @ A1, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(B12, A2 @ B1 + B2, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("h", [0.0, -1.0])
def test_discretize_rejects_nonpositive_step(h):
    with pytest.raises(InvalidInputError):
        discretize(spring_mass(), h)


# -- stage-cost kernel -------------------------------------------------------

@pytest.mark.parametrize("h", [0.1, 0.5, 1.0, 2.0])
def test_kernel_integrator_closed_form(h):
    G = stage_cost_kernel(integrator(), [[1.0]], [[1.0]], h)
    np.testing.assert_allclose(G, integrator_gamma(h), rtol=1e-12, atol=1e-13)


def test_kernel_spring_matches_trapezoid_at_small_step():
    sys = spring_mass()
    Q, R = np.eye(2), np.array([[0.5]])
    G = stage_cost_kernel(sys, Q, R, 0.1)
    ref = trapezoid_kernel(sys, Q, R, 0.1)
    assert np.max(np.abs(G - ref)) <= 1e-9


def corrected_trapezoid_kernel(sys, Q, R, h, panels=10_000):
    """Trapezoid plus the Euler-Maclaurin endpoint term, O(panel^4) accurate."""
    n = sys.n
    base = trapezoid_kernel(sys, Q, R, h, panels)

    def deriv(s):
        if s == 0.0:
            As, Bs = np.eye(n), np.zeros((n, sys.m))
        else:
            As, Bs = discretize(sys, s)
        AB = np.hstack([As, Bs])
        D = np.hstack([sys.A @ As, As @ sys.B])
        return D.T @ Q @ AB + AB.T @ Q @ D

    step = h / panels
    return base - step ** 2 / 12 * (deriv(h) - deriv(0.0))


@pytest.mark.parametrize("h", [0.1, 0.5, 1.0, 3.0])
def test_kernel_spring_matches_corrected_trapezoid(h):
    sys = spring_mass()
    Q, R = np.eye(2), np.array([[0.5]])
    G = stage_cost_kernel(sys, Q, R, h)
    ref = corrected_trapezoid_kernel(sys, Q, R, h)
    assert np.max(np.abs(G - ref)) <= 1e-9


def test_kernel_is_symmetric_positive_definite():
    G = stage_cost_kernel(spring_mass(), np.eye(2), [[0.5]], 3.0)
    np.testing.assert_array_equal(G, G.T)
    assert np.linalg.eigvalsh(G)[0] > 1e-12


def test_kernel_rejects_bad_weights():
    with pytest.raises(InvalidInputError):
        stage_cost_kernel(spring_mass(), -np.eye(2), [[0.5]], 0.1)
    with pytest.raises(InvalidInputError):
        stage_cost_kernel(spring_mass(), np.eye(3), [[0.5]], 0.1)
    with pytest.raises(InvalidInputError):
        stage_cost_kernel(spring_mass(), np.eye(2), [[0.5]], 0.0)


# -- stage cost --------------------------------------------------------------

def test_stage_cost_zero():
    assert stage_cost(np.zeros(2), np.zeros(1), np.eye(3)) == 0.0


def test_stage_cost_integrator_state_only():
    d = 0.3
    assert stage_cost([1.0], [0.0], integrator_gamma(d)) == pytest.approx(d)


def test_stage_cost_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        stage_cost(np.zeros(2), np.zeros(2), np.eye(3))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_cost_splitting(seed, i):
    """F(x, u, i*d) = F(x, u, d) + F(A_d x + B_d u, u, (i-1)*d)."""
    rng = np.random.default_rng(seed)
    table = _spring_table()
    x = rng.uniform(-3, 3, 2)
    u = rng.uniform(-8, 8, 1)
    lhs = stage_cost(x, u, table.Gamma(i))
    x1 = table.Ad(1) @ x + table.Bd(1) @ u
    rhs = stage_cost(x, u, table.Gamma(1)) + stage_cost(x1, u, table.Gamma(i - 1))
    assert lhs == pytest.approx(rhs, rel=1e-9)


_TABLE = {}


def _spring_table():
    if "t" not in _TABLE:
        _TABLE["t"] = DiscretizationTable.build(spring_mass(), np.eye(2), [[0.5]], 0.1, 20, 6)
    return _TABLE["t"]


# -- table -------------------------------------------------------------------

def test_table_invariants(spring_table):
    t = spring_table
    assert t.horizon == pytest.approx(8.0)
    for i in range(1, t.M + 1):
        G = t.Gamma(i)
        np.testing.assert_array_equal(G, G.T)
        assert np.linalg.eigvalsh(G)[0] > 1e-12
    for i, j in [(1, 1), (2, 5), (7, 13), (10, 20)]:
        np.testing.assert_allclose(t.Ad(i + j), t.Ad(j) @ t.Ad(i), rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(t.Bd(i + j), t.Ad(j) @ t.Bd(i) + t.Bd(j),
                                   rtol=1e-10, atol=1e-12)


def test_table_kernels_match_direct_computation(spring_table):
    for i in (1, 7, 30):
        direct = stage_cost_kernel(spring_table.system, np.eye(2), [[0.5]], i * 0.1)
        np.testing.assert_allclose(spring_table.Gamma(i), direct, atol=1e-10)


def test_table_is_read_only(spring_table):
    with pytest.raises(ValueError):
        spring_table.A_h[0, 0, 0] = 1.0


def test_table_rejects_bad_pattern_count():
    with pytest.raises(InvalidInputError):
        DiscretizationTable.build(spring_mass(), np.eye(2), [[0.5]], 0.1, 10, 10)
    with pytest.raises(InvalidInputError):
        spring = DiscretizationTable.build(spring_mass(), np.eye(2), [[0.5]], 0.1, 10, 3)
        spring.Gamma(4)


@pytest.mark.parametrize("kw", [
    dict(A=[[0, 1]], B=[[0], [1]], u_bounds=[1]),
    dict(A=[[0, 1], [0, 0]], B=[[0], [1], [2]], u_bounds=[1]),
    dict(A=[[0, 1], [0, 0]], B=[[0], [1]], u_bounds=[0]),
    dict(A=[[0, 1], [0, 0]], B=[[0], [1]], u_bounds=[np.inf]),
    dict(A=[[0, 1], [0, 0]], B=[[0], [1]], u_bounds=[1, 2]),
])
def test_linear_system_validation(kw):
    with pytest.raises(InvalidInputError):
        LinearSystem(**kw)
