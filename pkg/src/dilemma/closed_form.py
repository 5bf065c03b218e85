"""Closed-form action values for symmetric self-play and three key opponents.

Each of the 16 deterministic strategies induces, in symmetric self-play, a
linear system whose solution is written out here as rational functions of
(R, S, T, P, gamma).  A case is *consistent* when the resulting values
actually rank cooperate/defect the way the strategy's bits claim, all four
comparisons strict.  The same style of formula set covers every best
response against TFT, WSLS, and Grim, organised as bands of the discount
factor.

All arithmetic is plain Python (+, -, *, /), so exact number types such
as fractions.Fraction pass through unchanged; that is how the knife-edge
equalities are checked exactly in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

from .game import PDGame
from .strategies import DeterministicStrategy, catalog

BOUNDARY_TOL = 1e-12


class BoundaryGamma(ValueError):
    """gamma sits numerically on a region boundary; perturb it and retry."""


def _case_formulas(game: PDGame, n: int) -> tuple:
    """q1..q8 for case n (1..16) in symmetric self-play."""
    R, S, T, P, g = game.R, game.S, game.T, game.P, game.gamma
    cont = g * R / (1 - g)  # discounted mutual-cooperation tail
    dd = P / (1 - g)  # discounted mutual-defection tail
    g2 = 1 - g * g
    if n == 1:
        c = R / (1 - g)
        d = T + cont
        return (c, c, c, c, d, d, d, d)
    if n == 2:
        c = R / (1 - g)
        d = T + cont
        return (c, c, c, S + cont, d, d, d, dd)
    if n == 3:
        c = R / (1 - g)
        d = T / (1 - g)
        return (c, S / (1 - g), c, c, d, P + cont, d, d)
    if n == 4:
        c = R / (1 - g)
        s = S / (1 - g)
        d = T / (1 - g)
        return (c, s, c, s, d, dd, d, dd)
    if n == 5:
        c = R / (1 - g)
        st = (S + g * T) / g2
        ts = (T + g * S) / g2
        return (c, c, st, c, ts, ts, P + cont, ts)
    if n == 6:
        c = R / (1 - g)
        st = (S + g * T) / g2
        ts = (T + g * S) / g2
        return (c, c, st, st, ts, ts, dd, dd)
    if n == 7:
        c = R / (1 - g)
        lose = S + g * P + g * g * R / (1 - g)
        win = T + g * P + g * g * R / (1 - g)
        back = P + cont
        return (c, lose, lose, c, win, back, back, win)
    if n == 8:
        punished = S + g * dd
        return (R / (1 - g), punished, punished, punished, T + g * dd, dd, dd, dd)
    if n == 9:
        rp = (R + g * P) / g2
        pr = (P + g * R) / g2
        return (S + g * rp, rp, rp, rp, pr, T + g * rp, T + g * rp, T + g * rp)
    if n == 10:
        a = S + g * R + g * g * dd
        b = R + g * dd
        e = T + g * R + g * g * dd
        return (a, b, b, a, dd, e, e, dd)
    if n == 11:
        s = S / (1 - g)
        rp = (R + g * P) / g2
        pr = (P + g * R) / g2
        t = T / (1 - g)
        return (s, s, rp, rp, pr, pr, t, t)
    if n == 12:
        s = S / (1 - g)
        return (s, s, R + g * dd, s, dd, dd, T / (1 - g), dd)
    if n == 13:
        st = (S + g * T) / g2
        rp = (R + g * P) / g2
        pr = (P + g * R) / g2
        ts = (T + g * S) / g2
        return (st, rp, st, rp, pr, ts, pr, ts)
    if n == 14:
        st = (S + g * T) / g2
        ts = (T + g * S) / g2
        return (st, R + g * dd, st, st, dd, ts, dd, dd)
    if n == 15:
        rp = (R + g * P) / g2
        pr = (P + g * R) / g2
        a = S + g * pr
        return (a, a, a, rp, pr, pr, pr, T + g * pr)
    if n == 16:
        return (S + g * dd,) * 4 + (dd,) * 4
    raise ValueError(f"case_id must be 1..16, got {n}")


# Where each sign pattern can actually be self-supporting, as a readable
# condition on the payoffs and discount.  Verified against the numeric
# sweep in the tests.
_REGION_NOTES = {
    6: "only on the boundary T+S = R+P with gamma = (T-R)/(R-S); no open region",
    7: "T+P < 2R and gamma > (T-R)/(R-P)",
    8: "gamma > (T-R)/(T-P)",
    13: "only on the boundary T+S = R+P at gamma = 1, outside the discount range",
    14: "only on the boundary gamma = (P-S)/(T-S) when T+S > 2P; no open region",
    16: "always",
}


def case_region_note(case_id: int) -> str:
    if case_id in _REGION_NOTES:
        return _REGION_NOTES[case_id]
    return "never: the sign pattern contradicts the payoff ordering"


def case_q(game: PDGame, case_id: int) -> tuple:
    """Closed-form q1..q8 for one case, regardless of consistency."""
    return _case_formulas(game, case_id)


def case_consistent(game: PDGame, case_id: int) -> tuple:
    """Check the four strict sign conditions of a case.

    Returns (consistent, failed_states) where failed_states lists the
    state indices (0..3) whose comparison is not strictly satisfied;
    exact equality counts as a failure, so knife-edge parameter choices
    classify as not consistent.
    """
    bits = tuple(int(c) for c in format(16 - case_id, "04b"))
    q = _case_formulas(game, case_id)
    failed = []
    for s in range(4):
        if bits[s] == 1:
            ok = q[s] > q[4 + s]
        else:
            ok = q[s] < q[4 + s]
        if not ok:
            failed.append(s)
    return (len(failed) == 0, tuple(failed))


@dataclass(frozen=True)
class CaseSolution:
    case_id: int
    strategy: DeterministicStrategy
    name: str | None
    q: tuple
    consistent: bool
    failed_states: tuple
    condition: str

    @property
    def label(self) -> str:
        return self.name if self.name is not None else self.strategy.serialize()


def solve_case(game: PDGame, case_id: int) -> CaseSolution:
    entry = catalog()[case_id - 1]
    consistent, failed = case_consistent(game, case_id)
    return CaseSolution(
        case_id,
        entry.strategy,
        entry.name,
        case_q(game, case_id),
        consistent,
        failed,
        case_region_note(case_id),
    )


def solve_all_cases(game: PDGame) -> list[CaseSolution]:
    return [solve_case(game, n) for n in range(1, 17)]


# ---------------------------------------------------------------------------
# Best-response bands against TFT, WSLS, and Grim.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BestResponseRegion:
    """One discount band against a fixed opponent.

    gamma_lo/gamma_hi bound the band (0 and 1 at the extremes); the
    matching threshold formulas are spelled out in lo_desc/hi_desc, and
    payoff_condition records which payoff branch the band belongs to.
    q is the closed-form table of the response evaluated at game.gamma.
    """

    opponent: str
    payoff_condition: str
    gamma_lo: float
    gamma_hi: float
    lo_desc: str
    hi_desc: str
    response: DeterministicStrategy
    q: tuple


def _q_allc_vs_tft(game: PDGame) -> tuple:
    R, S, T, P, g = game.R, game.S, game.T, game.P, game.gamma
    cont = g * R / (1 - g)
    a = R / (1 - g)
    b = S + cont
    c = T + g * S + g * g * R / (1 - g)
    d = P + g * S + g * g * R / (1 - g)
    return (a, a, b, b, c, c, d, d)


def _q_repeat_vs_tft(game: PDGame) -> tuple:
    R, S, T, P, g = game.R, game.S, game.T, game.P, game.gamma
    a = R / (1 - g)
    b = S + g * R / (1 - g)
    c = T + g * P / (1 - g)
    d = P / (1 - g)
    return (a, a, b, b, c, c, d, d)


def _q_alld_vs_tft(game: PDGame) -> tuple:
    R, S, T, P, g = game.R, game.S, game.T, game.P, game.gamma
    tail = g * T + g * g * P / (1 - g)
    c = T + g * P / (1 - g)
    d = P / (1 - g)
    return (R + tail, R + tail, S + tail, S + tail, c, c, d, d)


def _q_antirepeat_vs_tft(game: PDGame) -> tuple:
    R, S, T, P, g = game.R, game.S, game.T, game.P, game.gamma
    g2 = 1 - g * g
    a = R + g * T / g2 + g * g * S / g2
    b = (S + g * T) / g2
    c = (T + g * S) / g2
    d = P + g * S / g2 + g * g * T / g2
    return (a, a, b, b, c, c, d, d)


def _q_alld_vs_wsls(game: PDGame) -> tuple:
    R, S, T, P, g = game.R, game.S, game.T, game.P, game.gamma
    g2 = 1 - g * g
    a = R + g * T / g2 + g * g * P / g2
    b = S + g * P / g2 + g * g * T / g2
    c = (T + g * P) / g2
    d = (P + g * T) / g2
    return (a, b, b, a, c, d, d, c)


def _q_alld_vs_grim(game: PDGame) -> tuple:
    R, S, T, P, g = game.R, game.S, game.T, game.P, game.gamma
    dd = P / (1 - g)
    punished = S + g * dd
    return (R + g * T + g * g * dd, punished, punished, punished, T + g * dd, dd, dd, dd)


def _require_off_boundary(gamma: float, thresholds: dict) -> None:
    for desc, value in thresholds.items():
        if abs(float(gamma) - float(value)) <= BOUNDARY_TOL:
            raise BoundaryGamma(
                f"gamma={gamma} lies on the region boundary {desc}={value}; "
                "perturb gamma and retry"
            )


def best_response_region(game: PDGame, opponent: str) -> BestResponseRegion:
    """The discount band of game.gamma against TFT, WSLS, or Grim.

    Returns the unique band containing gamma together with the exact
    response and its closed-form values.  Raises BoundaryGamma when gamma
    sits within 1e-12 of a band edge, where the response is not unique.
    """
    R, S, T, P, g = game.R, game.S, game.T, game.P, game.gamma
    name = opponent.strip().upper()
    strat = lambda bits: DeterministicStrategy.from_string(bits)

    if name == "TFT":
        if T + S < R + P:
            cond = "T+S < R+P"
            lo, lo_desc = (T - R) / (T - P), "(T-R)/(T-P)"
            hi, hi_desc = (P - S) / (R - S), "(P-S)/(R-S)"
            middle = (strat("1100"), _q_repeat_vs_tft)
        elif T + S > R + P:
            cond = "T+S > R+P"
            lo, lo_desc = (P - S) / (T - P), "(P-S)/(T-P)"
            hi, hi_desc = (T - R) / (R - S), "(T-R)/(R-S)"
            middle = (strat("0011"), _q_antirepeat_vs_tft)
        else:
            # The middle band closes up: only All-D below, All-C above.
            cond = "T+S = R+P"
            lo = hi = (T - R) / (T - P)
            lo_desc = hi_desc = "(T-R)/(T-P)"
            middle = None
        _require_off_boundary(g, {lo_desc: lo, hi_desc: hi})
        if g < lo:
            return BestResponseRegion(
                "TFT", cond, 0.0, float(lo), "0", lo_desc, strat("0000"), _q_alld_vs_tft(game)
            )
        if g > hi:
            return BestResponseRegion(
                "TFT", cond, float(hi), 1.0, hi_desc, "1", strat("1111"), _q_allc_vs_tft(game)
            )
        response, formula = middle
        return BestResponseRegion(
            "TFT", cond, float(lo), float(hi), lo_desc, hi_desc, response, formula(game)
        )

    if name == "WSLS":
        if T + P < 2 * R:
            thr = (T - R) / (R - P)
            _require_off_boundary(g, {"(T-R)/(R-P)": thr})
            if g > thr:
                return BestResponseRegion(
                    "WSLS", "T+P < 2R", float(thr), 1.0, "(T-R)/(R-P)", "1",
                    strat("1001"), _case_formulas(game, 7),
                )
            return BestResponseRegion(
                "WSLS", "T+P < 2R", 0.0, float(thr), "0", "(T-R)/(R-P)",
                strat("0000"), _q_alld_vs_wsls(game),
            )
        return BestResponseRegion(
            "WSLS", "T+P >= 2R", 0.0, 1.0, "0", "1", strat("0000"), _q_alld_vs_wsls(game)
        )

    if name == "GRIM":
        thr = (T - R) / (T - P)
        _require_off_boundary(g, {"(T-R)/(T-P)": thr})
        if g > thr:
            return BestResponseRegion(
                "Grim", "any payoffs", float(thr), 1.0, "(T-R)/(T-P)", "1",
                strat("1000"), _case_formulas(game, 8),
            )
        return BestResponseRegion(
            "Grim", "any payoffs", 0.0, float(thr), "0", "(T-R)/(T-P)",
            strat("0000"), _q_alld_vs_grim(game),
        )

    raise ValueError(f"no closed-form atlas for opponent {opponent!r}; use TFT, WSLS, or Grim")
