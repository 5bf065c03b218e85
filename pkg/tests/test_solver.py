"""Exact solving: policy evaluation, policy iteration, value iteration.

Policy iteration and value iteration are deliberately separate code
paths so they can serve as oracles for each other; several tests here
lean on that.
"""

import numpy as np
import pytest

from dilemma.game import Action, PDGame, StateProfile
from dilemma.solver import (
    QTable,
    bellman_residual,
    best_response,
    policy_evaluation,
    value_iteration,
)
from dilemma.strategies import (
    DeterministicStrategy,
    MemoryOneStrategy,
    catalog,
    swap_perspective,
)

ALLD = DeterministicStrategy.from_string("0000")
WSLS = DeterministicStrategy.from_string("1001")
GRIM = DeterministicStrategy.from_string("1000")
GAME9 = PDGame(4, 0, 6, 1, 0.9)


def in_learner_frame(strategy):
    return swap_perspective(strategy)


def test_qtable_helpers():
    q = QTable.from_array(np.arange(8.0))
    assert q.get(Action.C, StateProfile.CD) == 1.0
    assert q.get(Action.D, StateProfile.CD) == 5.0
    assert q.margin(StateProfile.CD) == -4.0
    assert QTable.zeros().qvec == (0.0,) * 8
    assert QTable.constant(2.5).qvec == (2.5,) * 8
    with pytest.raises(ValueError):
        QTable((1.0, 2.0))


def test_mutual_defection_values():
    # All-D against All-D: defecting pays P forever, cooperating pays S once.
    q = policy_evaluation(GAME9, ALLD, in_learner_frame(ALLD))
    for s in StateProfile:
        assert q.get(Action.D, s) == pytest.approx(10.0, abs=1e-12)
        assert q.get(Action.C, s) == pytest.approx(9.0, abs=1e-12)


def test_wsls_self_play_values():
    q = policy_evaluation(GAME9, WSLS, in_learner_frame(WSLS))
    want = (40, 33.3, 33.3, 40, 39.3, 37, 37, 39.3)
    assert q.qvec == pytest.approx(want, abs=1e-9)


def test_grim_self_play_values():
    q = policy_evaluation(GAME9, GRIM, in_learner_frame(GRIM))
    assert q.get(Action.C, StateProfile.CC) == pytest.approx(40.0)
    assert q.get(Action.D, StateProfile.CC) == pytest.approx(15.0)
    assert q.get(Action.C, StateProfile.CD) == pytest.approx(9.0)
    assert q.get(Action.D, StateProfile.DD) == pytest.approx(10.0)


def test_best_response_wsls_high_discount():
    res = best_response(GAME9, in_learner_frame(WSLS))
    assert res.policy.strategy == WSLS
    assert res.tie_states == frozenset()
    want = (40, 33.3, 33.3, 40, 39.3, 37, 37, 39.3)
    assert res.q_star.qvec == pytest.approx(want, abs=1e-9)


def test_best_response_wsls_low_discount():
    game = PDGame(4, 0, 6, 1, 0.2)
    res = best_response(game, in_learner_frame(WSLS))
    assert res.policy.strategy == ALLD
    values = sorted(set(round(v, 10) for v in res.q_star.qvec), reverse=True)
    assert values == pytest.approx([6.2 / 0.96, 5.08 / 0.96, 2.2 / 0.96, 0.44 / 0.96])


def test_best_response_grim_both_discounts():
    res = best_response(GAME9, in_learner_frame(GRIM))
    assert res.policy.strategy == GRIM
    assert res.q_star.get(Action.C, StateProfile.CC) == pytest.approx(40.0)
    assert res.q_star.get(Action.D, StateProfile.CC) == pytest.approx(15.0)

    game = PDGame(4, 0, 6, 1, 0.2)
    res = best_response(game, in_learner_frame(GRIM))
    assert res.policy.strategy == ALLD
    assert res.q_star.get(Action.D, StateProfile.CC) == pytest.approx(6.25)
    assert res.q_star.get(Action.C, StateProfile.CC) == pytest.approx(5.25)


def test_best_response_tft_payoff_branches():
    # T + S < R + P: high discount makes unconditional cooperation optimal.
    game = PDGame(3, 0, 4, 2, 0.8)
    tft = DeterministicStrategy.from_string("1010")
    res = best_response(game, in_learner_frame(tft))
    assert res.policy.strategy == DeterministicStrategy.from_string("1111")

    # Same payoffs, low discount: defect forever.
    game = PDGame(3, 0, 4, 2, 0.3)
    res = best_response(game, in_learner_frame(tft))
    assert res.policy.strategy == ALLD


def test_best_response_vs_allc_defects():
    allc = DeterministicStrategy.from_string("1111")
    res = best_response(GAME9, in_learner_frame(allc))
    assert res.policy.strategy == ALLD
    assert res.q_star.get(Action.D, StateProfile.CC) == pytest.approx(60.0)


def test_tie_states_flagged_on_knife_edge():
    # At these payoffs gamma = 0.2 is exactly (P-S)/(T-P) against TFT.
    game = PDGame(4, 0, 6, 1, 0.2)
    tft = DeterministicStrategy.from_string("1010")
    res = best_response(game, in_learner_frame(tft))
    assert res.tie_states == frozenset({StateProfile.DC, StateProfile.DD})
    assert res.policy.strategy == ALLD  # ties resolve to D


def test_policy_iteration_budget():
    gammas = [0.05, 0.3, 0.55, 0.8, 0.95]
    for entry in catalog():
        opp = in_learner_frame(entry.strategy)
        for g in gammas:
            res = best_response(PDGame(4, 0, 6, 1, g), opp)
            assert res.iterations <= 16


def test_value_iteration_matches_policy_iteration():
    tol = 1e-9
    for entry in catalog():
        opp = in_learner_frame(entry.strategy)
        for g in (0.1, 0.5, 0.9):
            game = PDGame(4, 0, 6, 1, g)
            q_pi = best_response(game, opp).q_star.as_array()
            q_vi = value_iteration(game, opp, tol=tol).as_array()
            assert np.max(np.abs(q_pi - q_vi)) < 2 * tol


def test_value_iteration_stochastic_opponent():
    rng = np.random.default_rng(5)
    for _ in range(20):
        opp = MemoryOneStrategy(tuple(rng.random(4)))
        game = PDGame(4, 0, 6, 1, 0.7)
        q_pi = best_response(game, opp).q_star.as_array()
        q_vi = value_iteration(game, opp).as_array()
        assert np.max(np.abs(q_pi - q_vi)) < 2e-9


def test_bellman_residual_zero_at_optimum():
    res = best_response(GAME9, in_learner_frame(WSLS))
    assert bellman_residual(GAME9, in_learner_frame(WSLS), res.q_star) < 1e-9


def test_bellman_residual_of_uniform_shift():
    # Shifting the optimal table by c moves the sweep by gamma * c,
    # so the residual is |c| * (1 - gamma).
    opp = in_learner_frame(WSLS)
    q_star = best_response(GAME9, opp).q_star
    for c in (1.0, -3.0, 10.0):
        shifted = QTable(tuple(v + c for v in q_star.qvec))
        want = abs(c) * (1 - 0.9)
        assert bellman_residual(GAME9, opp, shifted) == pytest.approx(want, abs=1e-9)


def test_optimality_operator_contraction():
    rng = np.random.default_rng(123)
    opp = MemoryOneStrategy(tuple(rng.random(4)))
    game = PDGame(4, 0, 6, 1, 0.9)
    from dilemma.solver import _optimality_operator, _opponent_coop, _rewards

    pc = _opponent_coop(opp)
    r = _rewards(game)
    for _ in range(500):
        q1 = rng.uniform(-50, 50, 8)
        q2 = rng.uniform(-50, 50, 8)
        lhs = np.max(np.abs(_optimality_operator(q1, 0.9, pc, r) - _optimality_operator(q2, 0.9, pc, r)))
        assert lhs <= 0.9 * np.max(np.abs(q1 - q2)) + 1e-12


def test_q_star_bounds():
    # Any discounted payoff stream lies between S and T each round.
    rng = np.random.default_rng(17)
    for _ in range(50):
        g = float(rng.uniform(0, 0.95))
        opp = MemoryOneStrategy(tuple(rng.random(4)))
        game = PDGame(4, 0, 6, 1, g)
        q = best_response(game, opp).q_star.as_array()
        assert (q >= 0.0 / (1 - g) - 1e-9).all()
        assert (q <= 6.0 / (1 - g) + 1e-9).all()


def _finite_horizon_q(game, own, opponent, horizon):
    """Backward-recursion oracle for policy evaluation, H rounds deep."""
    gamma = float(game.gamma)
    pc = [float(opponent.coop_prob(s)) for s in StateProfile]
    r = [float(x) for x in game.p1_payoffs()]
    q = np.zeros(8)
    for _ in range(horizon):
        nxt_value = np.empty(4)
        for s in range(4):
            own_action = 0 if own.bits[s] else 1
            nxt_value[s] = q[4 * own_action + s]
        nq = np.empty(8)
        for a in (0, 1):
            for s in range(4):
                total = 0.0
                for v, pv in ((0, pc[s]), (1, 1.0 - pc[s])):
                    n = 2 * a + v
                    total += pv * (r[n] + gamma * nxt_value[n])
                nq[4 * a + s] = total
        q = nq
    return q


def test_policy_evaluation_matches_finite_horizon():
    game = PDGame(4, 0, 6, 1, 0.8)
    # gamma^H * T / (1 - gamma) < 1e-8  =>  H > log(3e9) / log(1.25)
    horizon = 110
    tail = 0.8**horizon * 6 / 0.2
    assert tail < 1e-8
    for entry in catalog():
        opp = in_learner_frame(entry.strategy)
        exact = policy_evaluation(game, entry.strategy, opp).as_array()
        approx = _finite_horizon_q(game, entry.strategy, opp, horizon)
        assert np.max(np.abs(exact - approx)) <= tail + 1e-12
