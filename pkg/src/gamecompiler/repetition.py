"""Threshold repetition of games and compiled protocols.

A threshold-repeated game runs t independent copies and accepts when at
least a theta fraction of them accept.  Small instances materialize as
explicit games (product query table, vector answers) so their values can be
brute-forced; protocol-scale instances never materialize the product table:
sequential repetition loops full protocol executions, parallel repetition
carries t-vectors of ciphertexts per round with one fresh key per instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from gamecompiler import qhe
from gamecompiler.games import NonLocalGame
from gamecompiler.protocol import (
    CompiledProtocol,
    PlainQuery,
    ProverInterface,
    run_protocol,
)
from gamecompiler.qhe import PaddedBits, QheError
from gamecompiler.rngutil import spawn, wilson_interval

EXPLICIT_TABLE_GUARD = 100_000


def _theta_fraction(theta) -> Fraction:
    # Decimal thresholds like 0.8 are meant exactly; going through str()
    # keeps theta*t comparisons free of binary-float boundary surprises.
    frac = Fraction(str(theta)) if isinstance(theta, float) else Fraction(theta)
    if not 0 < frac <= 1:
        raise ValueError("theta must be in (0, 1]")
    return frac


def threshold_accepts(wins: int, t: int, theta) -> bool:
    return Fraction(wins, t) >= _theta_fraction(theta)


def threshold_repeat(game: NonLocalGame, t: int, theta) -> NonLocalGame:
    """Materialize the t-fold threshold repetition as an explicit game.

    Per-player queries and answers are t-vectors packed MSB-first (copy 0
    highest).  Only small t is materializable; the guard protects against
    exponential tables.
    """
    if t < 1:
        raise ValueError("t must be at least 1")
    frac = _theta_fraction(theta)
    if len(game.query_table) ** t > EXPLICIT_TABLE_GUARD:
        raise ValueError("explicit repetition table exceeds the guard")
    need = math.ceil(frac * t)

    rows = [((), Fraction(1))]
    for _ in range(t):
        rows = [(qs + (q,), w * wq) for qs, w in rows for q, wq in game.query_table if wq != 0]
    qb, ab, k = game.query_bits, game.answer_bits, game.k

    def pack(tuples: tuple[tuple[int, ...], ...], widths) -> tuple[int, ...]:
        out = []
        for player in range(k):
            value = 0
            for copy in range(t):
                value = (value << widths[player]) | tuples[copy][player]
            out.append(value)
        return tuple(out)

    def unpack(values: tuple[int, ...], widths) -> list[tuple[int, ...]]:
        copies = []
        for copy in range(t):
            shift = t - 1 - copy
            copies.append(
                tuple((values[p] >> (shift * widths[p])) & ((1 << widths[p]) - 1) for p in range(k))
            )
        return copies

    def predicate(q: tuple[int, ...], a: tuple[int, ...]) -> int:
        qs = unpack(q, qb)
        ans = unpack(a, ab)
        wins = sum(bool(game.predicate(qs[i], ans[i])) for i in range(t))
        return int(wins >= need)

    table = tuple((pack(qs, qb), w) for qs, w in rows)
    return NonLocalGame(
        k=k,
        query_bits=tuple(b * t for b in qb),
        answer_bits=tuple(b * t for b in ab),
        query_table=table,
        predicate=predicate,
        name=f"{game.name}-x{t}-thr{frac.numerator}:{frac.denominator}",
    )


def sequential_repeat_run(
    protocol: CompiledProtocol,
    prover: ProverInterface,
    t: int,
    theta,
    rng: np.random.Generator,
) -> bool:
    """t full protocol executions in sequence, threshold verdict."""
    if t < 1:
        raise ValueError("t must be at least 1")
    wins = 0
    for _ in range(t):
        wins += run_protocol(protocol, prover, rng).accept
    return threshold_accepts(wins, t, theta)


@dataclass(frozen=True)
class ParallelRepeatedProtocol:
    """Compilation of the t-fold threshold game, without materializing it.

    Messages are t-vectors: every encrypted round sends one ciphertext per
    instance, each under its own fresh key.
    """

    game: NonLocalGame
    t: int
    theta: Fraction
    lam: int
    mode: str = "ideal"
    rho: int = qhe.DEFAULT_RHO


def parallel_repeat_protocol(
    game: NonLocalGame, t: int, theta, lam: int, mode: str = "ideal", rho: int = qhe.DEFAULT_RHO
) -> ParallelRepeatedProtocol:
    if game.k < 2:
        raise ValueError("compilation needs at least 2 players")
    if t < 1:
        raise ValueError("t must be at least 1")
    return ParallelRepeatedProtocol(game, t, _theta_fraction(theta), int(lam), mode, int(rho))


class VectorProver:
    """t independent sub-provers answering vector rounds coordinate-wise."""

    def __init__(self, factory, t: int):
        self.subs = [factory() for _ in range(t)]
        self.deterministic = all(s.deterministic for s in self.subs)

    def reset(self, rng: np.random.Generator) -> None:
        for sub in self.subs:
            sub.reset(rng)

    def respond(self, messages):
        return tuple(sub.respond(m) for sub, m in zip(self.subs, messages))


def run_parallel(
    protocol: ParallelRepeatedProtocol, prover: VectorProver, rng: np.random.Generator
) -> tuple[bool, int]:
    """One parallel execution; returns (accept, per-instance win count)."""
    game, t = protocol.game, protocol.t
    queries = [game.sample_queries(rng) for _ in range(t)]
    answers = [[None] * game.k for _ in range(t)]
    prover.reset(rng)
    try:
        for i in range(game.k - 1):
            keys = [qhe.gen(protocol.lam, rng, protocol.mode, protocol.rho) for _ in range(t)]
            cts = tuple(
                qhe.enc_bits(keys[s], queries[s][i], game.query_bits[i], rng) for s in range(t)
            )
            replies = prover.respond(cts)
            for s in range(t):
                if not isinstance(replies[s], PaddedBits) or replies[s].width != game.answer_bits[i]:
                    raise QheError("malformed vector answer")
                answers[s][i] = qhe.dec_bits(keys[s], replies[s])
        last = game.k - 1
        plain = tuple(PlainQuery(last, queries[s][last], game.query_bits[last]) for s in range(t))
        replies = prover.respond(plain)
        for s in range(t):
            answers[s][last] = int(replies[s])
    except QheError:
        return False, 0
    wins = sum(bool(game.predicate(queries[s], tuple(answers[s]))) for s in range(t))
    return bool(Fraction(wins, t) >= protocol.theta), wins


def chernoff_bound_check(v_star: float, theta: float, t: int) -> float:
    """Predicted lower bound 1 - 2^(-2 t eps^2), eps = v_star - theta, on the
    accept probability of an i.i.d. strategy with per-copy value v_star."""
    eps = float(v_star) - float(theta)
    if eps < 0:
        raise ValueError("v_star must not be below theta")
    return 1.0 - 2.0 ** (-2.0 * t * eps * eps)


def estimate_repeated_accept(runner, trials: int, rng: np.random.Generator) -> tuple[float, tuple[float, float]]:
    """Accept-rate estimate for a closure running one repeated execution."""
    if trials < 1:
        raise ValueError("need at least one trial")
    wins = 0
    for _ in range(trials):
        wins += bool(runner(spawn(rng)))
    return wins / trials, wilson_interval(wins, trials)
