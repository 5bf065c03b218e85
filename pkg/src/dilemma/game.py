"""Stage game and Markov-chain primitives for the repeated prisoner's dilemma.

A joint outcome of one round is a StateProfile (pair of actions).  Both
players condition their next action on the previous StateProfile, so the
repeated game is a Markov chain on four states.  The canonical state order
is (C,C), (C,D), (D,C), (D,D); all arrays in this package index states
that way.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class Action(IntEnum):
    C = 0
    D = 1

    def flipped(self) -> "Action":
        return Action(1 - self.value)


class StateProfile(IntEnum):
    """Joint outcome (player-1 action, player-2 action) of one round."""

    CC = 0
    CD = 1
    DC = 2
    DD = 3

    @staticmethod
    def from_actions(a1: Action, a2: Action) -> "StateProfile":
        return StateProfile(2 * int(a1) + int(a2))

    @property
    def p1_action(self) -> Action:
        return Action(self.value >> 1)

    @property
    def p2_action(self) -> Action:
        return Action(self.value & 1)

    def swapped(self) -> "StateProfile":
        """The same outcome as seen from the other chair: (a1,a2) -> (a2,a1)."""
        return StateProfile.from_actions(self.p2_action, self.p1_action)


class OrderingViolation(ValueError):
    """Payoffs fail one of the strict dilemma inequalities."""


class DiscountOutOfRange(ValueError):
    """Discount factor outside [0, 1)."""


@dataclass(frozen=True)
class PDGame:
    """Prisoner's dilemma payoffs plus a discount factor.

    Payoffs may be any real-number type supporting comparison and
    arithmetic (int, float, Fraction); they are stored as given.
    Requires T > R > P > S, 2R > T + S (all strict) and 0 <= gamma < 1.
    """

    R: float
    S: float
    T: float
    P: float
    gamma: float

    def __post_init__(self) -> None:
        R, S, T, P = self.R, self.S, self.T, self.P
        if not T > R:
            raise OrderingViolation(f"need T > R, got T={T}, R={R}")
        if not R > P:
            raise OrderingViolation(f"need R > P, got R={R}, P={P}")
        if not P > S:
            raise OrderingViolation(f"need P > S, got P={P}, S={S}")
        if not 2 * R > T + S:
            raise OrderingViolation(f"need 2R > T + S, got 2R={2 * R}, T+S={T + S}")
        if not (0 <= self.gamma < 1):
            raise DiscountOutOfRange(f"need 0 <= gamma < 1, got gamma={self.gamma}")

    @property
    def payoffs(self) -> tuple:
        return (self.R, self.S, self.T, self.P)

    def p1_payoffs(self) -> tuple:
        """Player-1 payoff per StateProfile, state order (CC, CD, DC, DD)."""
        return (self.R, self.S, self.T, self.P)

    def p2_payoffs(self) -> tuple:
        return (self.R, self.T, self.S, self.P)


def validate_game(R, S, T, P, gamma) -> PDGame:
    """Construct a PDGame, raising OrderingViolation / DiscountOutOfRange.

    The error message names the inequality that failed.
    """
    return PDGame(R, S, T, P, gamma)


def payoff(game: PDGame, player: int, state: StateProfile):
    """One-round payoff to `player` (1 or 2) at a joint outcome."""
    if player == 1:
        return game.p1_payoffs()[state]
    if player == 2:
        return game.p2_payoffs()[state]
    raise ValueError(f"player must be 1 or 2, got {player}")


def transition_matrix(strategy1, strategy2) -> np.ndarray:
    """Round-to-round transition matrix of the joint-outcome chain.

    Entry [i, j] is the probability of moving from previous outcome i to
    next outcome j.  Both strategies are given in their owner's own frame
    (my action, opponent action); player 2's conditionals are re-indexed
    onto joint states internally, so passing the same strategy object
    twice means literal self-play.  Rows sum to 1 within 1e-12.
    """
    p1 = np.asarray([float(strategy1.coop_prob(s)) for s in StateProfile])
    p2 = np.asarray(
        [float(strategy2.coop_prob(s.swapped())) for s in StateProfile]
    )
    out = np.empty((4, 4))
    for j, nxt in enumerate(StateProfile):
        a1 = p1 if nxt.p1_action == Action.C else 1.0 - p1
        a2 = p2 if nxt.p2_action == Action.C else 1.0 - p2
        out[:, j] = a1 * a2
    sums = out.sum(axis=1)
    if np.max(np.abs(sums - 1.0)) > 1e-12:
        raise ValueError(f"transition rows must be stochastic, row sums {sums}")
    out.flags.writeable = False
    return out
