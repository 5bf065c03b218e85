"""Closed-form case solutions and the best-response discount bands.

The formulas are checked against policy_evaluation, which solves the same
linear systems numerically from an entirely separate construction.
"""

from fractions import Fraction

import numpy as np
import pytest

from dilemma.closed_form import (
    BoundaryGamma,
    best_response_region,
    case_consistent,
    case_q,
    case_region_note,
    solve_all_cases,
    solve_case,
)
from dilemma.game import PDGame
from dilemma.solver import best_response, policy_evaluation
from dilemma.strategies import DeterministicStrategy, catalog, swap_perspective


def random_valid_payoffs(rng):
    """Draw (R, S, T, P) satisfying every strict dilemma inequality."""
    while True:
        S = float(rng.uniform(-2, 2))
        P = S + float(rng.uniform(0.1, 3))
        R = P + float(rng.uniform(0.1, 3))
        T = R + float(rng.uniform(0.1, 3))
        if 2 * R > T + S:
            return (R, S, T, P)


def test_case_formulas_match_policy_evaluation():
    # The case formulas must solve the self-play system for every case,
    # consistent or not, across payoffs and discounts.
    rng = np.random.default_rng(2024)
    for trial in range(25):
        R, S, T, P = random_valid_payoffs(rng)
        g = float(rng.uniform(0.01, 0.98))
        game = PDGame(R, S, T, P, g)
        for entry in catalog():
            formula = case_q(game, entry.case_id)
            solved = policy_evaluation(
                game, entry.strategy, swap_perspective(entry.strategy)
            )
            scale = max(1.0, max(abs(v) for v in solved.qvec))
            err = max(abs(a - b) for a, b in zip(formula, solved.qvec))
            assert err < 1e-9 * scale, (trial, entry.case_id, err)


def test_reference_verdicts_by_discount():
    expected = {0.9: {7, 8, 16}, 0.5: {8, 16}, 0.3: {16}}
    for g, want in expected.items():
        game = PDGame(4, 0, 6, 1, g)
        got = {s.case_id for s in solve_all_cases(game) if s.consistent}
        assert got == want, g


def test_alld_always_consistent():
    rng = np.random.default_rng(33)
    for _ in range(50):
        R, S, T, P = random_valid_payoffs(rng)
        game = PDGame(R, S, T, P, float(rng.uniform(0, 0.99)))
        ok, failed = case_consistent(game, 16)
        assert ok and failed == ()


def test_wsls_never_consistent_when_payoffs_exclude_it():
    # With T + P >= 2R the single-round defection gain beats the repair
    # cycle at every discount.
    for g in np.linspace(0.0, 0.98, 40):
        game = PDGame(3, 0, 5, 1.5, float(g))
        ok, _ = case_consistent(game, 7)
        assert not ok


def test_wsls_grim_onset_conditions():
    game = PDGame(4, 0, 6, 1, 0.7)  # above 2/3 and 2/5
    assert case_consistent(game, 7)[0]
    assert case_consistent(game, 8)[0]
    game = PDGame(4, 0, 6, 1, 0.6)  # between 2/5 and 2/3
    assert not case_consistent(game, 7)[0]
    assert case_consistent(game, 8)[0]
    game = PDGame(4, 0, 6, 1, 0.35)  # below both
    assert not case_consistent(game, 7)[0]
    assert not case_consistent(game, 8)[0]


def test_knife_edge_exact_with_fractions():
    # T + S = R + P puts TFT's threshold exactly at (T-R)/(R-S) = 2/3;
    # with Fraction arithmetic the tied comparisons are exact equalities.
    game = PDGame(Fraction(3), Fraction(0), Fraction(5), Fraction(2), Fraction(2, 3))
    q = case_q(game, 6)
    assert q[0] == q[4]  # cooperate-after-CC exactly ties defect
    assert q[1] == q[5]
    ok, failed = case_consistent(game, 6)
    assert not ok
    assert 0 in failed and 1 in failed


def test_case_solution_fields():
    game = PDGame(4, 0, 6, 1, 0.9)
    sol = solve_case(game, 7)
    assert sol.label == "WSLS"
    assert sol.strategy == DeterministicStrategy.from_string("1001")
    assert sol.consistent
    assert sol.condition == "T+P < 2R and gamma > (T-R)/(R-P)"
    sol2 = solve_case(game, 2)
    assert sol2.label == "1110"
    assert not sol2.consistent


def test_region_note_defined_for_all_cases():
    for n in range(1, 17):
        assert isinstance(case_region_note(n), str)
    assert case_region_note(16) == "always"
    assert "never" in case_region_note(3)


@pytest.mark.parametrize(
    "gamma, bits",
    [
        (0.1, "0000"),  # below (P-S)/(T-P) = 0.2
        (0.35, "0011"),  # between 0.2 and (T-R)/(R-S) = 0.5
        (0.8, "1111"),  # above 0.5
    ],
)
def test_tft_bands_high_ts(gamma, bits):
    # (4,0,6,1) has T+S > R+P, the branch with the alternating middle band.
    game = PDGame(4, 0, 6, 1, gamma)
    region = best_response_region(game, "TFT")
    assert region.response == DeterministicStrategy.from_string(bits)


@pytest.mark.parametrize(
    "gamma, bits",
    [
        (0.3, "0000"),  # below (T-R)/(T-P) = 0.5
        (0.6, "1100"),  # between 0.5 and (P-S)/(R-S) = 2/3
        (0.8, "1111"),  # above 2/3
    ],
)
def test_tft_bands_low_ts(gamma, bits):
    game = PDGame(3, 0, 4, 2, gamma)  # T+S < R+P
    region = best_response_region(game, "TFT")
    assert region.response == DeterministicStrategy.from_string(bits)


def test_wsls_and_grim_bands():
    region = best_response_region(PDGame(4, 0, 6, 1, 0.9), "WSLS")
    assert region.response.serialize() == "1001"
    region = best_response_region(PDGame(4, 0, 6, 1, 0.5), "WSLS")
    assert region.response.serialize() == "0000"
    # Payoffs with T + P >= 2R: defection at every discount.
    region = best_response_region(PDGame(3, 0, 5, 1.5, 0.95), "WSLS")
    assert region.response.serialize() == "0000"
    assert region.gamma_hi == 1.0 and region.gamma_lo == 0.0

    region = best_response_region(PDGame(4, 0, 6, 1, 0.41), "GRIM")
    assert region.response.serialize() == "1000"
    region = best_response_region(PDGame(4, 0, 6, 1, 0.39), "GRIM")
    assert region.response.serialize() == "0000"


def test_region_matches_solver_everywhere():
    rng = np.random.default_rng(99)
    opponents = {
        "TFT": DeterministicStrategy.from_string("1010"),
        "WSLS": DeterministicStrategy.from_string("1001"),
        "GRIM": DeterministicStrategy.from_string("1000"),
    }
    checked = 0
    for _ in range(15):
        R, S, T, P = random_valid_payoffs(rng)
        for g in rng.uniform(0.01, 0.98, 6):
            game = PDGame(R, S, T, P, float(g))
            for name, opp in opponents.items():
                try:
                    region = best_response_region(game, name)
                except BoundaryGamma:
                    continue
                res = best_response(game, swap_perspective(opp))
                scale = max(1.0, max(abs(v) for v in res.q_star.qvec))
                err = max(
                    abs(a - b) for a, b in zip(region.q, res.q_star.qvec)
                )
                assert err < 1e-9 * scale, (name, game)
                if not res.tie_states:
                    assert region.response == res.policy.strategy, (name, game)
                checked += 1
    assert checked > 200


def test_boundary_gamma_raised_on_thresholds():
    with pytest.raises(BoundaryGamma):
        best_response_region(PDGame(4, 0, 6, 1, 0.4), "GRIM")
    with pytest.raises(BoundaryGamma):
        best_response_region(PDGame(4, 0, 6, 1, 2 / 3), "WSLS")
    with pytest.raises(BoundaryGamma):
        best_response_region(PDGame(4, 0, 6, 1, 0.2), "TFT")
    # One ulp away is enough to clear the 1e-12 window.
    best_response_region(PDGame(4, 0, 6, 1, 0.4 + 1e-9), "GRIM")


def test_unknown_opponent_rejected():
    with pytest.raises(ValueError, match="TFT, WSLS, or Grim"):
        best_response_region(PDGame(4, 0, 6, 1, 0.9), "REPEAT")


def test_tft_equal_sum_branch():
    # T + S = R + P exactly: the middle band is empty and the two
    # remaining bands meet at (T-R)/(T-P).
    game = PDGame(3, 0, 5, 2, 0.9)
    region = best_response_region(game, "TFT")
    assert region.response.serialize() == "1111"
    game = PDGame(3, 0, 5, 2, 0.3)
    region = best_response_region(game, "TFT")
    assert region.response.serialize() == "0000"
