"""Tabular Q-learning against a frozen memory-one opponent.

One learning step: the learner picks an action epsilon-greedily from the
8-entry table at the previous joint outcome, the opponent samples from its
conditional at the same outcome (with an optional action flip for
implementation error), the learner receives its one-round payoff at the
new outcome and applies the standard update

    q(a, s) += eta * ( r + gamma * max_a' q(a', s') - q(a, s) ).

As in the exact solver, the opponent argument is interpreted in the
learner's frame; swap a strategy stored in the opponent's own frame first
(`alternating_qlearning` does this internally).

Randomness is organised as independent named streams per realization,
each seeded from (seed, phase, realization, tag), so any single draw is
reproducible in isolation and runs are bit-identical for a fixed
configuration.  Stream consumption is fixed: the action choice consumes
exactly two uniforms per step, the opponent one, the noise stream one
per step only when an error rate is active.

Two deliberate conventions, chosen so the simulator reproduces the
documented learning outcomes rather than idealised ones: an exact tie at
the greedy argmax resolves to C (the first action index), and the final
greedy read-out of a table resolves exact ties to D, matching the exact
solver's tie convention.  With an unresponsive punisher such as Grim the
first convention decides whether cooperative play is ever tried, and the
second decides how never-visited states read out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import Action, PDGame, StateProfile
from .solver import QTable
from .strategies import DeterministicStrategy, NoisyStrategy

# Stream tags; the numbers are part of the reproducibility contract.
STREAM_EXPLORE = 0
STREAM_OPPONENT = 1
STREAM_NOISE = 2
STREAM_INIT = 3


def _step_loop(
    q,
    coop,
    err,
    rewards,
    eta,
    gamma,
    epsilon,
    u_choice,
    u_opp,
    u_noise,
    prev,
    sample_every,
    samples,
    counts,
    tail_counts,
    tail_start,
    conv_window,
    conv_tol,
    snapshot,
):
    """Inner loop shared by the plain-Python and jitted paths.

    Mutates q, samples, counts, tail_counts, snapshot in place; returns
    (final_prev, q_min, q_max, stopped_at).  stopped_at < steps only when
    the convergence window fired.
    """
    steps = u_choice.shape[0]
    qlo = q[0]
    qhi = q[0]
    for i in range(1, 8):
        if q[i] < qlo:
            qlo = q[i]
        if q[i] > qhi:
            qhi = q[i]
    stopped_at = steps
    for t in range(steps):
        s = prev
        if u_choice[t, 0] < epsilon:
            a = 0 if u_choice[t, 1] < 0.5 else 1
        else:
            a = 0 if q[s] >= q[4 + s] else 1
        v = 0 if u_opp[t] < coop[s] else 1
        if err > 0.0:
            if u_noise[t] < err:
                v = 1 - v
        nxt = 2 * a + v
        mx = q[nxt] if q[nxt] >= q[4 + nxt] else q[4 + nxt]
        k = 4 * a + s
        q[k] += eta * (rewards[nxt] + gamma * mx - q[k])
        counts[k] += 1
        if t >= tail_start:
            tail_counts[k] += 1
        if q[k] < qlo:
            qlo = q[k]
        if q[k] > qhi:
            qhi = q[k]
        prev = nxt
        if sample_every > 0 and (t + 1) % sample_every == 0:
            j = (t + 1) // sample_every
            for i in range(8):
                samples[j, i] = q[i]
        if conv_window > 0 and (t + 1) % conv_window == 0:
            delta = 0.0
            for i in range(8):
                d = q[i] - snapshot[i]
                if d < 0.0:
                    d = -d
                if d > delta:
                    delta = d
                snapshot[i] = q[i]
            if delta < conv_tol:
                stopped_at = t + 1
                break
    return prev, qlo, qhi, stopped_at


try:
    from numba import njit

    _step_loop_fast = njit(cache=True)(_step_loop)
except ImportError:  # pragma: no cover - numba is a declared dependency
    _step_loop_fast = _step_loop


@dataclass(frozen=True)
class LearnerConfig:
    """Parameters of one learning run; defaults follow the reference setup."""

    eta: float = 0.2
    epsilon: float = 0.01
    initial_q: float = 0.0
    steps_per_phase: int = 200_000
    realizations: int = 1000
    seed: int = 0
    sample_every: int = 100
    initial_state: StateProfile | None = StateProfile.CC  # None draws uniformly
    convergence_window: int = 0  # 0 disables the early stop
    convergence_tol: float = 1e-3

    def __post_init__(self) -> None:
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")
        if not 0 <= self.epsilon <= 1:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.steps_per_phase < 1:
            raise ValueError("steps_per_phase must be positive")
        if self.realizations < 1:
            raise ValueError("realizations must be positive")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        if self.sample_every < 0:
            raise ValueError("sample_every must be >= 0 (0 disables sampling)")


@dataclass
class EnvState:
    """Previous outcome plus the named random streams of one realization."""

    prev: StateProfile
    explore: np.random.Generator
    opponent: np.random.Generator
    noise: np.random.Generator
    init: np.random.Generator


def make_env(config: LearnerConfig, realization: int, phase: int = 0) -> EnvState:
    def stream(tag: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence([config.seed, phase, realization, tag])
        )

    init = stream(STREAM_INIT)
    if config.initial_state is None:
        prev = StateProfile(int(init.integers(0, 4)))
    else:
        prev = config.initial_state
    return EnvState(prev, stream(STREAM_EXPLORE), stream(STREAM_OPPONENT), stream(STREAM_NOISE), init)


def q_update(
    q: QTable,
    state: StateProfile,
    action: Action,
    reward: float,
    next_state: StateProfile,
    eta: float,
    gamma: float,
) -> QTable:
    """One tabular update; returns a new table, other entries untouched."""
    target = reward + gamma * max(
        q.get(Action.C, next_state), q.get(Action.D, next_state)
    )
    k = 4 * int(action) + int(state)
    vec = list(q.qvec)
    vec[k] += eta * (target - vec[k])
    return QTable(tuple(vec))


def epsilon_greedy(
    q: QTable, state: StateProfile, epsilon: float, rng: np.random.Generator
) -> Action:
    """Uniform action with probability epsilon, else greedy (ties to C).

    Consumes exactly two uniforms per call whatever branch is taken, so
    streams stay aligned across alternative histories.
    """
    u_flag = rng.random()
    u_act = rng.random()
    if u_flag < epsilon:
        return Action.C if u_act < 0.5 else Action.D
    return Action.C if q.get(Action.C, state) >= q.get(Action.D, state) else Action.D


def greedy_strategy(q: QTable) -> DeterministicStrategy:
    """Read the greedy policy out of a table; exact ties resolve to D."""
    return DeterministicStrategy(
        tuple(1 if q.qvec[s] > q.qvec[4 + s] else 0 for s in range(4))
    )


def _opponent_arrays(opponent) -> tuple:
    if isinstance(opponent, NoisyStrategy):
        base = opponent.base
        err = float(opponent.error)
    else:
        base = opponent
        err = 0.0
    coop = np.asarray([float(base.coop_prob(s)) for s in StateProfile], dtype=float)
    return coop, err


@dataclass(frozen=True)
class PhaseResult:
    """Output of a single realization's learning phase."""

    q: QTable
    greedy: DeterministicStrategy
    times: np.ndarray
    samples: np.ndarray  # (len(times), 8) table snapshots
    counts: np.ndarray  # per-entry update counts, q1..q8 order
    tail_counts: np.ndarray  # update counts in the final quarter of steps
    q_min: float
    q_max: float
    stopped_at: int


def learn_phase(
    game: PDGame,
    opponent,
    config: LearnerConfig,
    realization: int = 0,
    phase: int = 0,
    initial_q: QTable | None = None,
    initial_state: StateProfile | None = None,
) -> PhaseResult:
    """Run one learning phase of a single realization.

    The opponent is frozen and expressed in the learner's frame.  The
    initial table defaults to the constant config.initial_q, the initial
    previous outcome to config.initial_state (realization-specific
    uniform draw when that is None).  With convergence_window > 0 the
    phase stops early once no entry moved by convergence_tol over the
    window; remaining trace rows repeat the final table.
    """
    env = make_env(config, realization, phase)
    if initial_state is not None:
        env.prev = initial_state
    steps = config.steps_per_phase
    coop, err = _opponent_arrays(opponent)
    rewards = np.asarray([float(x) for x in game.p1_payoffs()], dtype=float)

    q = (
        np.full(8, float(config.initial_q))
        if initial_q is None
        else initial_q.as_array().copy()
    )
    u_choice = env.explore.random((steps, 2))
    u_opp = env.opponent.random(steps)
    u_noise = env.noise.random(steps) if err > 0.0 else np.zeros(0)

    sample_every = config.sample_every
    n_samples = steps // sample_every + 1 if sample_every > 0 else 1
    samples = np.empty((n_samples, 8))
    samples[0] = q
    counts = np.zeros(8, dtype=np.int64)
    tail_counts = np.zeros(8, dtype=np.int64)
    snapshot = q.copy()

    _, qlo, qhi, stopped_at = _step_loop_fast(
        q,
        coop,
        err,
        rewards,
        float(config.eta),
        float(game.gamma),
        float(config.epsilon),
        u_choice,
        u_opp,
        u_noise,
        int(env.prev),
        sample_every,
        samples,
        counts,
        tail_counts,
        (3 * steps) // 4,
        int(config.convergence_window),
        float(config.convergence_tol),
        snapshot,
    )
    if stopped_at < steps and sample_every > 0:
        first_unfilled = stopped_at // sample_every + 1
        samples[first_unfilled:] = q
    times = (
        np.arange(n_samples, dtype=np.int64) * sample_every
        if sample_every > 0
        else np.zeros(1, dtype=np.int64)
    )
    table = QTable.from_array(q)
    return PhaseResult(
        table,
        greedy_strategy(table),
        times,
        samples,
        counts,
        tail_counts,
        float(qlo),
        float(qhi),
        int(stopped_at),
    )


@dataclass(frozen=True)
class LearningTrace:
    """Aggregate of independent realizations of the same phase."""

    realizations: int
    times: np.ndarray
    mean_q: np.ndarray  # (len(times), 8)
    mean_final_q: np.ndarray  # (8,)
    policy_tally: dict  # greedy bit string -> realization count
    mean_counts: np.ndarray  # (8,) mean update counts
    mean_tail_counts: np.ndarray  # (8,) mean update counts, final quarter
    q_min: float
    q_max: float

    def modal_policy(self) -> DeterministicStrategy:
        best = min(self.policy_tally.items(), key=lambda kv: (-kv[1], kv[0]))
        return DeterministicStrategy.from_string(best[0])


def run_learning(game: PDGame, opponent, config: LearnerConfig, phase: int = 0) -> LearningTrace:
    """Aggregate config.realizations independent phases.

    Realizations are mutually independent (each derives its own streams),
    so they could run in any order or in parallel; sums are accumulated
    in realization order to keep the reduction bit-deterministic.
    """
    sum_samples = None
    sum_final = np.zeros(8)
    sum_counts = np.zeros(8, dtype=np.int64)
    sum_tail = np.zeros(8, dtype=np.int64)
    tally: dict = {}
    q_min = np.inf
    q_max = -np.inf
    times = None
    for r in range(config.realizations):
        result = learn_phase(game, opponent, config, realization=r, phase=phase)
        if sum_samples is None:
            sum_samples = np.zeros_like(result.samples)
            times = result.times
        sum_samples += result.samples
        sum_final += result.q.as_array()
        sum_counts += result.counts
        sum_tail += result.tail_counts
        bits = result.greedy.serialize()
        tally[bits] = tally.get(bits, 0) + 1
        q_min = min(q_min, result.q_min)
        q_max = max(q_max, result.q_max)
    n = config.realizations
    return LearningTrace(
        n,
        times,
        sum_samples / n,
        sum_final / n,
        dict(sorted(tally.items())),
        sum_counts / n,
        sum_tail / n,
        float(q_min),
        float(q_max),
    )


@dataclass(frozen=True)
class PhaseSummary:
    """Aggregate of one phase of the alternating protocol."""

    phase: int
    learner: int
    modal: DeterministicStrategy
    policy_tally: dict
    times: np.ndarray
    mean_q: np.ndarray
    mean_final_q: np.ndarray


def alternating_qlearning(
    game: PDGame,
    initial_p2: DeterministicStrategy,
    config: LearnerConfig,
    num_phases: int = 4,
    carry_q: bool = False,
) -> list:
    """Alternating Q-learning: player 1 learns on odd phases, 2 on even.

    Every realization runs the whole protocol independently: within it,
    the learner trains against the other player's current strategy
    (perspective-swapped into the learner's frame), then freezes to its
    greedy policy for the following phases.  Tables restart from
    config.initial_q each phase unless carry_q is set, in which case each
    player resumes from their own previous table.
    """
    from .strategies import swap_perspective

    n = config.realizations
    sums = [None] * num_phases
    finals = [np.zeros(8) for _ in range(num_phases)]
    tallies: list = [dict() for _ in range(num_phases)]
    learners = [1 if (p + 1) % 2 == 1 else 2 for p in range(num_phases)]
    times = None

    for r in range(n):
        strategies = {1: None, 2: initial_p2}
        tables = {1: None, 2: None}
        for p in range(1, num_phases + 1):
            learner = 1 if p % 2 == 1 else 2
            other = strategies[2 if learner == 1 else 1]
            if other is None:
                raise RuntimeError("phase order broke: opponent strategy unset")
            result = learn_phase(
                game,
                swap_perspective(other),
                config,
                realization=r,
                phase=p,
                initial_q=tables[learner] if carry_q else None,
            )
            strategies[learner] = result.greedy
            tables[learner] = result.q
            idx = p - 1
            if sums[idx] is None:
                sums[idx] = np.zeros_like(result.samples)
                times = result.times
            sums[idx] += result.samples
            finals[idx] += result.q.as_array()
            bits = result.greedy.serialize()
            tallies[idx][bits] = tallies[idx].get(bits, 0) + 1

    summaries = []
    for p in range(num_phases):
        tally = dict(sorted(tallies[p].items()))
        modal_bits = min(tally.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        summaries.append(
            PhaseSummary(
                p + 1,
                learners[p],
                DeterministicStrategy.from_string(modal_bits),
                tally,
                times,
                sums[p] / n,
                finals[p] / n,
            )
        )
    return summaries


TRACE_HEADER = "t,qCCC,qCCD,qCDC,qCDD,qDCC,qDCD,qDDC,qDDD"


def export_trace(times, mean_q, path) -> None:
    """Write a sampled mean-table trajectory as CSV (12 significant digits)."""
    lines = [TRACE_HEADER]
    for i, t in enumerate(times):
        row = ",".join(f"{v:.12g}" for v in mean_q[i])
        lines.append(f"{int(t)},{row}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def export_tally(policy_tally: dict, path) -> None:
    """Write the per-realization final-policy counts as CSV."""
    lines = ["strategy_bits,count"]
    for bits in sorted(policy_tally):
        lines.append(f"{bits},{policy_tally[bits]}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
