import numpy as np
import pytest
import scipy.linalg

from stmpc import DiscretizationTable, LinearSystem, SynthesisError, TerminalIngredients
from stmpc.terminal import (closed_loop_weight, riccati_fixed_point, sample_ellipsoid,
                            synthesize_terminal, verify_terminal)

from conftest import integrator, random_stabilizable, spring_mass


def _table(sys, delta=0.1, Q=None, R=None):
    Q = np.eye(sys.n) if Q is None else Q
    R = 0.5 * np.eye(sys.m) if R is None else R
    return DiscretizationTable.build(sys, Q, R, delta, 10, 1)


@pytest.mark.parametrize("make", [integrator, spring_mass])
def test_synthesis_passes_verification(make):
    sys = make()
    table = _table(sys)
    ing = synthesize_terminal(sys, table)
    report = verify_terminal(ing, sys, table)
    assert report.passed, report.lines()
    Acl = table.Ad(1) + table.Bd(1) @ ing.K
    assert np.max(np.abs(np.linalg.eigvals(Acl))) < 1.0
    assert ing.epsilon > 0
    assert np.linalg.eigvalsh(ing.P_f)[0] > 0


def test_sampled_invariance_and_admissibility(spring_table, spring_terminal):
    ing = spring_terminal
    X = sample_ellipsoid(ing.P_f, ing.epsilon, 1000, np.random.default_rng(1))
    Acl = spring_table.Ad(1) + spring_table.Bd(1) @ ing.K
    for x in X:
        assert x @ ing.P_f @ x <= ing.epsilon * (1 + 1e-12)
        assert np.all(np.abs(ing.K @ x) <= 8.0 * (1 + 1e-12))
        xn = Acl @ x
        assert xn @ ing.P_f @ xn <= ing.epsilon * (1 + 1e-12)


def test_epsilon_scales_with_bound_squared():
    e1 = synthesize_terminal(spring_mass(4.0), _table(spring_mass(4.0))).epsilon
    e2 = synthesize_terminal(spring_mass(8.0), _table(spring_mass(8.0))).epsilon
    assert e2 == pytest.approx(4.0 * e1, rel=1e-10)


def test_epsilon_is_maximal(spring_table, spring_terminal):
    ing = spring_terminal
    bigger = TerminalIngredients(ing.K, ing.P_f, ing.epsilon * 1.001, ing.delta)
    assert not verify_terminal(bigger, spring_table.system, spring_table).passed


def test_halved_weight_fails(spring_table, spring_terminal):
    ing = spring_terminal
    bad = TerminalIngredients(ing.K, 0.5 * ing.P_f, ing.epsilon, ing.delta)
    report = verify_terminal(bad, spring_table.system, spring_table)
    assert not report.passed
    assert report.lyapunov_max_eig > 1e-10


def test_zero_gain_on_unstable_plant_fails():
    sys = LinearSystem([[0.5]], [[1.0]], [1.0])
    table = _table(sys)
    ing = TerminalIngredients([[0.0]], [[10.0]], 1.0, 0.1)
    assert not verify_terminal(ing, sys, table).passed


def test_unstabilizable_plant_raises():
    sys = LinearSystem([[1.0, 0.0], [0.0, -1.0]], [[0.0], [1.0]], [1.0])
    with pytest.raises(SynthesisError, match="eigenvalue"):
        synthesize_terminal(sys, _table(sys))


def test_stable_uncontrollable_mode_is_fine():
    sys = LinearSystem([[-1.0, 0.0], [0.0, 0.5]], [[0.0], [1.0]], [1.0])
    table = _table(sys)
    ing = synthesize_terminal(sys, table)
    assert verify_terminal(ing, sys, table).passed


@pytest.mark.parametrize("seed", range(5))
def test_riccati_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    A, B = random_stabilizable(rng, 3, 2)
    sys = LinearSystem(A, B, [1.0, 1.0])
    table = _table(sys)
    G = table.Gamma(1)
    Gxx, Gxu, Guu = G[:3, :3], G[:3, 3:], G[3:, 3:]
    P, K = riccati_fixed_point(table.Ad(1), table.Bd(1), Gxx, Gxu, Guu)
    P_ref = scipy.linalg.solve_discrete_are(table.Ad(1), table.Bd(1), Gxx, Guu, s=Gxu)
    np.testing.assert_allclose(P, P_ref, rtol=1e-8, atol=1e-10)
    ing = synthesize_terminal(sys, table)
    np.testing.assert_allclose(ing.P_f, P_ref, rtol=1e-8, atol=1e-10)
    assert verify_terminal(ing, sys, table).passed


def test_closed_loop_weight_identity():
    G = np.arange(9.0).reshape(3, 3)
    G = G + G.T
    K = np.array([[0.0, 0.0]])
    np.testing.assert_array_equal(closed_loop_weight(G, K), G[:2, :2])


def test_ingredients_round_trip(spring_terminal):
    back = TerminalIngredients.from_dict(spring_terminal.to_dict())
    np.testing.assert_array_equal(back.K, spring_terminal.K)
    np.testing.assert_array_equal(back.P_f, spring_terminal.P_f)
    assert back.epsilon == spring_terminal.epsilon
