"""Symmetric equilibria and exact alternating best-response dynamics.

A deterministic strategy is a symmetric equilibrium when it is the unique,
tie-free best response to itself: at every state the exact action values
strictly support the action the strategy prescribes.  Support is measured
per strategy as the minimum signed margin

    support = min over states of [ q(C,s) - q(D,s) signed toward the bit ]

so positive support means every prescribed action strictly wins.
"""

from __future__ import annotations

from dataclasses import dataclass

from .game import PDGame, StateProfile
from .solver import TIE_TOL, best_response
from .strategies import DeterministicStrategy, catalog, swap_perspective

NEAR_MARGIN = 1e-6
ONSET_WIDTH = 1e-6


@dataclass(frozen=True)
class EquilibriumEntry:
    strategy: DeterministicStrategy
    case_id: int
    name: str | None
    support: float

    @property
    def label(self) -> str:
        return self.name if self.name is not None else self.strategy.serialize()


@dataclass(frozen=True)
class EquilibriumReport:
    game: PDGame
    equilibria: tuple
    near_boundary: tuple

    def labels(self) -> tuple:
        return tuple(e.label for e in self.equilibria)


def _self_support(game: PDGame, strategy: DeterministicStrategy) -> float:
    """Minimum signed margin of a strategy's self-best-response."""
    result = best_response(game, swap_perspective(strategy))
    support = None
    for s in StateProfile:
        m = result.q_star.margin(s)
        signed = m if strategy.bits[s] == 1 else -m
        support = signed if support is None else min(support, signed)
    return float(support)


def symmetric_equilibria(game: PDGame, near_margin: float = NEAR_MARGIN) -> EquilibriumReport:
    """Scan the 16 deterministic strategies for symmetric equilibria.

    A strategy with a tie state in its self-best-response is excluded
    (support does not exceed the tie tolerance) and shows up in
    near_boundary, as does any strategy whose support is within
    near_margin of zero on either side.
    """
    equilibria = []
    near = []
    for entry in catalog():
        support = _self_support(game, entry.strategy)
        item = EquilibriumEntry(entry.strategy, entry.case_id, entry.name, support)
        if support > TIE_TOL:
            equilibria.append(item)
        if abs(support) < near_margin:
            near.append(item)
    return EquilibriumReport(game, tuple(equilibria), tuple(near))


@dataclass(frozen=True)
class ScanResult:
    payoffs: tuple
    points: tuple  # (gamma, EquilibriumReport) pairs, grid order
    onsets: dict  # label -> list of (gamma_lo, gamma_hi) brackets

    def labels_at(self, gamma: float) -> tuple:
        for g, report in self.points:
            if g == gamma:
                return report.labels()
        raise KeyError(f"gamma {gamma} not on the scan grid")


def equilibrium_scan(payoffs: tuple, gamma_grid) -> ScanResult:
    """Equilibrium sets along a discount grid plus bracketed onsets.

    Wherever a strategy's membership flips between adjacent grid points,
    the flip location is bisected down to a bracket of width ONSET_WIDTH.
    Membership at a single gamma is strict support of the self-best-response.
    """
    R, S, T, P = payoffs
    grid = sorted(float(g) for g in gamma_grid)
    points = [(g, symmetric_equilibria(PDGame(R, S, T, P, g))) for g in grid]

    def member(strategy: DeterministicStrategy, gamma: float) -> bool:
        return _self_support(PDGame(R, S, T, P, gamma), strategy) > TIE_TOL

    onsets: dict = {}
    for entry in catalog():
        label = entry.name if entry.name is not None else entry.strategy.serialize()
        flags = [
            any(e.strategy == entry.strategy for e in report.equilibria)
            for _, report in points
        ]
        for i in range(len(grid) - 1):
            if flags[i] == flags[i + 1]:
                continue
            lo, hi = grid[i], grid[i + 1]
            lo_in = flags[i]
            while hi - lo > ONSET_WIDTH:
                mid = 0.5 * (lo + hi)
                if member(entry.strategy, mid) == lo_in:
                    lo = mid
                else:
                    hi = mid
            onsets.setdefault(label, []).append((lo, hi))
    return ScanResult(tuple(float(x) for x in payoffs), tuple(points), onsets)


@dataclass(frozen=True)
class DynamicsStep:
    game_index: int
    learner: int
    strategy: DeterministicStrategy


@dataclass(frozen=True)
class DynamicsTrace:
    steps: tuple
    fixed_point: tuple | None = None
    cycle: tuple | None = None  # (first_game_index, period)
    halted_on_tie: tuple | None = None  # (game_index, tie_states)
    budget_exhausted: bool = False


def alternating_dynamics(game: PDGame, initial_p2: DeterministicStrategy, max_games: int = 64) -> DynamicsTrace:
    """Exact alternating best responses, player 1 on odd games, 2 on even.

    Each update freezes the other player's strategy and takes the exact
    best response (each player reasons in their own frame, so the frozen
    strategy is perspective-swapped before solving).  Stops at a fixed
    point (two consecutive updates change nothing), on a detected cycle
    of strategy profiles, on a tie (no unique best response), or when the
    game budget runs out.
    """
    strategies = {1: None, 2: initial_p2}
    steps = []
    unchanged_streak = 0
    seen: dict = {}
    for n in range(1, max_games + 1):
        learner = 1 if n % 2 == 1 else 2
        other = strategies[2 if learner == 1 else 1]
        result = best_response(game, swap_perspective(other))
        if result.tie_states:
            steps.append(DynamicsStep(n, learner, result.policy.strategy))
            return DynamicsTrace(
                tuple(steps), halted_on_tie=(n, tuple(sorted(result.tie_states)))
            )
        new_strategy = result.policy.strategy
        if strategies[learner] == new_strategy:
            unchanged_streak += 1
        else:
            unchanged_streak = 0
        strategies[learner] = new_strategy
        steps.append(DynamicsStep(n, learner, new_strategy))
        if unchanged_streak >= 2:
            return DynamicsTrace(tuple(steps), fixed_point=(strategies[1], strategies[2]))
        key = (
            strategies[1].bits if strategies[1] else None,
            strategies[2].bits,
            n % 2,
        )
        if key in seen:
            return DynamicsTrace(tuple(steps), cycle=(seen[key], n - seen[key]))
        seen[key] = n
    return DynamicsTrace(tuple(steps), budget_exhausted=True)
