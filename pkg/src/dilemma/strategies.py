"""Memory-one strategies: catalog, perspective swap, noise, sampling.

A memory-one strategy is four cooperation probabilities, one per previous
joint outcome, always stored in the owner's own frame: index order
(C,C), (C,D), (D,C), (D,D) where the first letter is the owner's own
previous action.  To express what a player-2 strategy does on joint
states (player-1 frame), exchange the (C,D) and (D,C) entries; that is
`swap_perspective`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import StateProfile


class ProbabilityOutOfRange(ValueError):
    """A cooperation probability or error rate lies outside [0, 1]."""


@dataclass(frozen=True)
class MemoryOneStrategy:
    """Cooperation probabilities conditioned on the previous outcome."""

    probs: tuple

    def __post_init__(self) -> None:
        if len(self.probs) != 4:
            raise ProbabilityOutOfRange(f"need 4 probabilities, got {len(self.probs)}")
        for p in self.probs:
            if not (0 <= p <= 1):
                raise ProbabilityOutOfRange(f"cooperation probability {p} outside [0, 1]")

    def coop_prob(self, state: StateProfile) -> float:
        return self.probs[state]

    def is_deterministic(self) -> bool:
        return all(p in (0, 1) for p in self.probs)

    def serialize(self) -> str:
        """4-char bit string if deterministic, else 4 comma-joined decimals."""
        if self.is_deterministic():
            return "".join(str(int(p)) for p in self.probs)
        return ",".join(f"{float(p):.4f}" for p in self.probs)


@dataclass(frozen=True)
class DeterministicStrategy:
    """Memory-one strategy with all-or-nothing cooperation.

    `bits[s]` is 1 to cooperate after outcome s, 0 to defect.
    """

    bits: tuple

    def __post_init__(self) -> None:
        if len(self.bits) != 4 or any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"bits must be four 0/1 values, got {self.bits}")

    @staticmethod
    def from_string(text: str) -> "DeterministicStrategy":
        if len(text) != 4 or any(c not in "01" for c in text):
            raise ValueError(f"expected a 4-character string over 0/1, got {text!r}")
        return DeterministicStrategy(tuple(int(c) for c in text))

    def coop_prob(self, state: StateProfile) -> float:
        return float(self.bits[state])

    def action(self, state: StateProfile):
        from .game import Action

        return Action.C if self.bits[state] else Action.D

    def to_memory_one(self) -> MemoryOneStrategy:
        return MemoryOneStrategy(tuple(float(b) for b in self.bits))

    def serialize(self) -> str:
        return "".join(str(b) for b in self.bits)


@dataclass(frozen=True)
class NoisyStrategy:
    """A base strategy whose chosen action is flipped with probability error."""

    base: MemoryOneStrategy
    error: float

    def __post_init__(self) -> None:
        if not (0 <= self.error <= 1):
            raise ProbabilityOutOfRange(f"error rate {self.error} outside [0, 1]")

    def effective(self) -> MemoryOneStrategy:
        """The memory-one strategy actually played once flips are folded in."""
        e = self.error
        return MemoryOneStrategy(
            tuple((1 - e) * p + e * (1 - p) for p in self.base.probs)
        )

    def coop_prob(self, state: StateProfile) -> float:
        return self.effective().probs[state]


@dataclass(frozen=True)
class StrategyCatalogEntry:
    """One row of the canonical enumeration of deterministic strategies.

    case_id runs 1..16 over sign patterns of cooperate-vs-defect
    preference; bits follow the owner's own frame.  name is the
    conventional label where one exists, otherwise None and the bit
    string stands in.
    """

    case_id: int
    strategy: DeterministicStrategy
    name: str | None

    @property
    def label(self) -> str:
        return self.name if self.name is not None else self.strategy.serialize()


_NAMES = {
    1: "All-C",
    4: "Repeat",
    6: "TFT",
    7: "WSLS",
    8: "Grim",
    9: "anti-Grim",
    10: "AWSLS",
    11: "ATFT",
    13: "anti-Repeat",
    16: "All-D",
}

# CLI-facing aliases, all uppercase, no punctuation.
NAME_ALIASES = {
    "ALLC": "1111",
    "REPEAT": "1100",
    "TFT": "1010",
    "WSLS": "1001",
    "GRIM": "1000",
    "AGRIM": "0111",
    "AWSLS": "0110",
    "ATFT": "0101",
    "AREPEAT": "0011",
    "ALLD": "0000",
}


def catalog() -> list[StrategyCatalogEntry]:
    """All 16 deterministic memory-one strategies in canonical case order.

    case_id n carries the bit pattern of 16 - n, so case 1 is All-C
    (1111) and case 16 is All-D (0000).
    """
    entries = []
    for n in range(1, 17):
        bits = tuple(int(c) for c in format(16 - n, "04b"))
        entries.append(
            StrategyCatalogEntry(n, DeterministicStrategy(bits), _NAMES.get(n))
        )
    return entries


def case_id_of(strategy: DeterministicStrategy) -> int:
    value = int("".join(str(b) for b in strategy.bits), 2)
    return 16 - value


def swap_perspective(strategy):
    """Re-index a strategy between own frame and the other player's frame.

    Exchanges the (C,D) and (D,C) entries; entries for (C,C) and (D,D)
    are unchanged.  Involution: applying it twice returns the original.
    Accepts deterministic or stochastic strategies and preserves the type.
    """
    if isinstance(strategy, DeterministicStrategy):
        b = strategy.bits
        return DeterministicStrategy((b[0], b[2], b[1], b[3]))
    if isinstance(strategy, NoisyStrategy):
        return NoisyStrategy(swap_perspective(strategy.base), strategy.error)
    p = strategy.probs
    return MemoryOneStrategy((p[0], p[2], p[1], p[3]))


def apply_noise(strategy, error: float) -> NoisyStrategy:
    """Wrap a strategy with an implementation error rate in [0, 1]."""
    if isinstance(strategy, DeterministicStrategy):
        strategy = strategy.to_memory_one()
    elif isinstance(strategy, NoisyStrategy):
        strategy = strategy.effective()
    return NoisyStrategy(strategy, error)


def sample_action(strategy, state: StateProfile, rng: np.random.Generator):
    """Draw one action from a strategy's conditional at `state`.

    Consumes exactly one uniform from `rng`.  NoisyStrategy instances are
    sampled through their effective cooperation probability.
    """
    from .game import Action

    p = strategy.coop_prob(state)
    return Action.C if rng.random() < p else Action.D


def parse_strategy(text: str):
    """Parse a CLI strategy token: a name, a 4-bit string, or 4 decimals.

    Returns DeterministicStrategy or MemoryOneStrategy.  Raises ValueError
    listing the accepted names on bad input.
    """
    token = text.strip()
    upper = token.upper().replace("-", "").replace("_", "")
    if upper.startswith("ANTI"):
        upper = "A" + upper[4:]
    if upper in NAME_ALIASES:
        return DeterministicStrategy.from_string(NAME_ALIASES[upper])
    if len(token) == 4 and all(c in "01" for c in token):
        return DeterministicStrategy.from_string(token)
    if "," in token:
        parts = token.split(",")
        if len(parts) != 4:
            raise ValueError(f"expected 4 comma-separated probabilities, got {len(parts)}")
        try:
            probs = tuple(float(p) for p in parts)
        except ValueError as exc:
            raise ValueError(f"could not parse probabilities from {token!r}") from exc
        return MemoryOneStrategy(probs)
    raise ValueError(
        f"unknown strategy {text!r}; use one of {sorted(NAME_ALIASES)}, "
        "a 4-bit string like 1001, or four decimals like 0.9,0.1,0.1,0.9"
    )
