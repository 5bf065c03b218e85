"""Exact action values and best responses against a fixed memory-one opponent.

With the opponent frozen, the learner faces a four-state Markov decision
problem: states are previous joint outcomes, actions are C/D, and the
next state is (own action, opponent action) with the opponent drawn from
its conditional at the current state.  Action values live in an 8-entry
table q(a, s), aliased q1..q8 in the order
q1=q(C,CC), q2=q(C,CD), q3=q(C,DC), q4=q(C,DD), q5..q8 likewise for D.

The opponent argument is always interpreted in the learner's frame: its
conditional at state s is the probability the opponent cooperates when
the previous outcome, written as (learner action, opponent action), was
s.  Swap a strategy with `strategies.swap_perspective` before passing it
here if it is stored in the opponent's own frame.

Two independent routes to the optimum are provided on purpose:
`best_response` iterates over the 16 deterministic policies via exact
policy evaluation, while `value_iteration` contracts from the zero table.
They cross-validate each other and must never be merged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import Action, PDGame, StateProfile
from .strategies import DeterministicStrategy

TIE_TOL = 1e-9


class SolveFailure(RuntimeError):
    """The policy-evaluation linear system could not be solved."""


class CycleDetected(RuntimeError):
    """Policy iteration revisited a policy without converging."""


class NoConvergence(RuntimeError):
    """Value iteration hit max_iter before reaching its stopping width."""

    def __init__(self, max_iter: int):
        super().__init__(f"value iteration did not converge within {max_iter} sweeps")
        self.max_iter = max_iter


@dataclass(frozen=True)
class QTable:
    """Eight action values q(a, s), stored flat in q1..q8 order."""

    qvec: tuple

    def __post_init__(self) -> None:
        if len(self.qvec) != 8:
            raise ValueError(f"need 8 entries, got {len(self.qvec)}")

    @staticmethod
    def from_array(arr) -> "QTable":
        return QTable(tuple(float(x) for x in np.asarray(arr).reshape(8)))

    @staticmethod
    def zeros() -> "QTable":
        return QTable((0.0,) * 8)

    @staticmethod
    def constant(value: float) -> "QTable":
        return QTable((float(value),) * 8)

    def get(self, action: Action, state: StateProfile) -> float:
        return self.qvec[4 * int(action) + int(state)]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.qvec, dtype=float)

    def margin(self, state: StateProfile) -> float:
        """q(C, s) - q(D, s)."""
        return self.qvec[int(state)] - self.qvec[4 + int(state)]


@dataclass(frozen=True)
class GreedyPolicy:
    """Argmax actions per state plus the margins they were read from."""

    actions: tuple
    margins: tuple
    tie_states: frozenset

    @property
    def strategy(self) -> DeterministicStrategy:
        return DeterministicStrategy(
            tuple(1 if a == Action.C else 0 for a in self.actions)
        )


@dataclass(frozen=True)
class BestResponseResult:
    policy: GreedyPolicy
    q_star: QTable
    tie_states: frozenset
    iterations: int


def _opponent_coop(opponent) -> np.ndarray:
    return np.asarray(
        [float(opponent.coop_prob(s)) for s in StateProfile], dtype=float
    )


def _rewards(game: PDGame) -> np.ndarray:
    return np.asarray([float(x) for x in game.p1_payoffs()], dtype=float)


def policy_evaluation(game: PDGame, own: DeterministicStrategy, opponent) -> QTable:
    """Solve the 8-equation linear system for a fixed own policy.

    q(a, s) = sum_v P(opp plays v | s) * [ r(a, v) + gamma * q(pi(s'), s') ]
    with s' = (a, v) and pi the own policy.  Exact solve, no iteration.
    """
    gamma = float(game.gamma)
    pc = _opponent_coop(opponent)
    r = _rewards(game)
    pi = own.bits

    A = np.eye(8)
    b = np.zeros(8)
    for a in (0, 1):
        for s in range(4):
            k = 4 * a + s
            for v, pv in ((0, pc[s]), (1, 1.0 - pc[s])):
                nxt = 2 * a + v
                b[k] += pv * r[nxt]
                A[k, 4 * (1 - pi[nxt]) + nxt] -= gamma * pv
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SolveFailure(f"singular policy-evaluation system: {exc}") from exc
    residual = np.max(np.abs(A @ x - b))
    scale = 1.0 + max(abs(v) for v in map(float, game.payoffs)) / (1.0 - gamma)
    if residual > 1e-10 * scale:
        raise SolveFailure(f"policy-evaluation residual {residual} too large")
    return QTable.from_array(x)


def _greedy_from_q(q: QTable, tie_tol: float) -> GreedyPolicy:
    actions = []
    margins = []
    ties = set()
    for s in StateProfile:
        m = q.margin(s)
        margins.append(m)
        if abs(m) <= tie_tol:
            ties.add(s)
            actions.append(Action.D)  # ties surface in tie_states, D is the default
        else:
            actions.append(Action.C if m > 0 else Action.D)
    return GreedyPolicy(tuple(actions), tuple(margins), frozenset(ties))


def best_response(game: PDGame, opponent, tie_tol: float = TIE_TOL) -> BestResponseResult:
    """Optimal deterministic policy against a fixed opponent, by policy iteration.

    Starts from always-defect and switches to the greedy policy of the
    current evaluation until stable; at most 16 evaluations since policies
    strictly improve.  States where |q(C,s) - q(D,s)| <= tie_tol are
    reported in tie_states and resolve to D in the returned policy.
    """
    pi = (1, 1, 1, 1)  # action indices, 1 = D: start from always-defect
    seen = {pi}
    iterations = 0
    while True:
        q = policy_evaluation(game, DeterministicStrategy(tuple(1 - a for a in pi)), opponent)
        iterations += 1
        new_pi = []
        for s in range(4):
            m = q.qvec[s] - q.qvec[4 + s]
            if m > tie_tol:
                new_pi.append(0)
            elif m < -tie_tol:
                new_pi.append(1)
            else:
                new_pi.append(pi[s])  # keep the incumbent on a tie so iteration halts
        new_pi = tuple(new_pi)
        if new_pi == pi:
            break
        if new_pi in seen:
            raise CycleDetected(f"policy iteration revisited {new_pi}")
        seen.add(new_pi)
        pi = new_pi
        if iterations > 17:
            raise CycleDetected("policy iteration exceeded the 16-policy budget")
    policy = _greedy_from_q(q, tie_tol)
    return BestResponseResult(policy, q, policy.tie_states, iterations)


def _optimality_operator(q: np.ndarray, gamma: float, pc: np.ndarray, r: np.ndarray) -> np.ndarray:
    """One sweep of the optimality recursion on a flat 8-entry table."""
    mx = np.maximum(q[:4], q[4:])
    out = np.empty(8)
    for a in (0, 1):
        for s in range(4):
            total = 0.0
            for v, pv in ((0, pc[s]), (1, 1.0 - pc[s])):
                nxt = 2 * a + v
                total += pv * (r[nxt] + gamma * mx[nxt])
            out[4 * a + s] = total
    return out


def value_iteration(
    game: PDGame, opponent, tol: float = 1e-9, max_iter: int = 200_000
) -> QTable:
    """Independent route to the optimal table: contract from all zeros.

    Stops once the sup-norm update falls below tol * (1 - gamma) / (2 * gamma),
    which bounds the remaining true error by tol.  Raises NoConvergence with
    the sweep budget if that width is never reached.
    """
    gamma = float(game.gamma)
    pc = _opponent_coop(opponent)
    r = _rewards(game)
    stop = tol if gamma == 0.0 else tol * (1.0 - gamma) / (2.0 * gamma)
    q = np.zeros(8)
    for _ in range(max_iter):
        nq = _optimality_operator(q, gamma, pc, r)
        delta = np.max(np.abs(nq - q))
        q = nq
        if delta < stop:
            return QTable.from_array(q)
    raise NoConvergence(max_iter)


def bellman_residual(game: PDGame, opponent, q: QTable) -> float:
    """Sup-norm distance between a table and one optimality sweep of it."""
    arr = q.as_array()
    swept = _optimality_operator(
        arr, float(game.gamma), _opponent_coop(opponent), _rewards(game)
    )
    return float(np.max(np.abs(arr - swept)))
