"""Extraction of local strategies from single-prover protocols, and the
distinguishing experiment that explains why extraction needs hiding.

The two-player pipeline: freeze the protocol's first message at an all-zero
dummy query (fix_prefix), read off the prover's final-round behavior as a
local function of the plain query (build_p2), then pick first-player answers
by best response against that table, either exactly from the conditional
query distribution (exact_argmax_p1) or from hardwired empirical samples
(build_estimator_f).  The k-player pipeline generalizes this with one
hardwired encrypted prefix per level and a sampled argmax whose tail answers
come from live runs of the remaining interactive rounds.

All argmax tie-breaks are lexicographic, so every extracted strategy is a
deterministic table and its game value is computed exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from gamecompiler import qhe
from gamecompiler.games import (
    BRUTE_FORCE_GUARD,
    ConditionalQuerySampler,
    NonLocalGame,
    strategy_pair_value,
)
from gamecompiler.protocol import CompiledProtocol, PlainQuery, ProverInterface
from gamecompiler.qhe import PaddedBits
from gamecompiler.rngutil import spawn, wilson_interval


@dataclass
class FixedPrefix:
    """A frozen opening: dummy first query, its encryption, the prover's
    fixed first response, and the key that binds them."""

    q1_prime: int
    ct1: PaddedBits
    ct2: PaddedBits
    sk: qhe.SecretKey
    a1: int


def fix_prefix(
    prover: ProverInterface,
    game: NonLocalGame,
    lam: int,
    rng: np.random.Generator,
    mode: str = "ideal",
    rho: int = qhe.DEFAULT_RHO,
    replays: int = 3,
) -> FixedPrefix:
    """Freeze the first two messages around the all-zero dummy query.

    Replays the prover on the identical ciphertext and requires the
    decrypted answer to be stable; a prover without fixed coins fails here.
    """
    if not prover.deterministic:
        raise ValueError("extraction requires a deterministic prover (fixed coins)")
    sk = qhe.gen(lam, rng, mode, rho)
    ct1 = qhe.enc_bits(sk, 0, game.query_bits[0], rng)
    prover.reset(rng)
    ct2 = prover.respond(ct1)
    a1 = qhe.dec_bits(sk, ct2)
    for _ in range(max(0, replays - 1)):
        prover.reset(rng)
        replay = prover.respond(ct1)
        if qhe.dec_bits(sk, replay) != a1:
            raise ValueError("prover is not deterministic: replayed answers differ")
    return FixedPrefix(q1_prime=0, ct1=ct1, ct2=ct2, sk=sk, a1=a1)


def build_p2(prefix: FixedPrefix, prover: ProverInterface, game: NonLocalGame):
    """Second player's local function: the prover's final answer after the
    frozen prefix, memoized per plain query."""
    table: dict[int, int] = {}
    last = game.k - 1

    def p2(q2: int) -> int:
        cached = table.get(q2)
        if cached is None:
            prover.reset(None)
            prover.respond(prefix.ct1)
            cached = table[q2] = int(
                prover.respond(PlainQuery(last, q2, game.query_bits[last]))
            )
        return cached

    return p2


def exact_argmax_p1(game: NonLocalGame, p2):
    """First player's best response to the p2 table, exact rationals.

    Returns (function q1 -> a1, dict q1 -> exact conditional win value).
    """
    if game.k != 2:
        raise ValueError("exact_argmax_p1 is a 2-player construction")
    n_answers = 1 << game.answer_bits[0]
    support0 = game.player_support(0)
    if n_answers * len(support0) * len(game.query_table) > BRUTE_FORCE_GUARD:
        raise ValueError("answer enumeration exceeds the brute-force guard")
    answer: dict[int, int] = {}
    best_value: dict[int, Fraction] = {}
    for q1 in support0:
        conditional = [(q[1], w) for q, w in game.query_table if q[0] == q1 and w != 0]
        total = sum(w for _, w in conditional)
        for a1 in range(n_answers):
            value = sum((w for q2, w in conditional if game.predicate((q1, q2), (a1, p2(q2)))), Fraction(0))
            value = value / total
            if q1 not in answer or value > best_value[q1]:
                answer[q1] = a1
                best_value[q1] = value
    return (lambda q1: answer[q1]), best_value


@dataclass
class EstimatorF:
    """Empirical best-response table built from hardwired samples.

    For every first-player query value, N conditional query draws are
    summarized as counts per distinct tuple (a sufficient statistic for the
    i.i.d. sample) and each candidate answer is scored by its empirical win
    fraction p_prime; answers are the lexicographically-smallest argmax.
    """

    n_samples: int
    p_prime: dict[int, dict[int, float]]
    p_exact: dict[int, dict[int, Fraction]]
    answers: dict[int, int]
    counts: dict[int, dict[tuple, int]] = field(repr=False, default_factory=dict)

    def __call__(self, q1: int) -> int:
        return self.answers[q1]

    def max_deviation(self) -> float:
        return max(
            abs(self.p_prime[q1][a1] - float(self.p_exact[q1][a1]))
            for q1 in self.p_prime
            for a1 in self.p_prime[q1]
        )


def estimator_sample_count(lam: int, answer_bits: int, eps: float) -> int:
    return math.ceil(9 * (lam + answer_bits) / (eps * eps))


def build_estimator_f(
    game: NonLocalGame,
    p2,
    lam: int,
    eps: float,
    rng: np.random.Generator,
) -> EstimatorF:
    """Sampled analogue of exact_argmax_p1 with N = ceil(9(lam+|a1|)/eps^2)
    hardwired conditional draws per query value."""
    if not 0 < eps < 1:
        raise ValueError("eps must be in (0,1)")
    if game.k != 2:
        raise ValueError("estimator is a 2-player construction")
    bits = game.answer_bits[0]
    n = estimator_sample_count(lam, bits, eps)
    support0 = game.player_support(0)
    if n * len(support0) > BRUTE_FORCE_GUARD:
        raise ValueError("sample budget exceeds the brute-force guard")
    p_prime: dict[int, dict[int, float]] = {}
    p_exact: dict[int, dict[int, Fraction]] = {}
    answers: dict[int, int] = {}
    all_counts: dict[int, dict[tuple, int]] = {}
    for q1 in support0:
        sampler = ConditionalQuerySampler(game, 0, q1)
        counts = sampler.sample_counts(n, rng)
        all_counts[q1] = counts
        conditional = [(q[1], w) for q, w in game.query_table if q[0] == q1 and w != 0]
        total = sum(w for _, w in conditional)
        p_prime[q1] = {}
        p_exact[q1] = {}
        for a1 in range(1 << bits):
            hits = sum(c for tup, c in counts.items() if game.predicate((q1, tup[1]), (a1, p2(tup[1]))))
            p_prime[q1][a1] = hits / n
            p_exact[q1][a1] = (
                sum((w for q2, w in conditional if game.predicate((q1, q2), (a1, p2(q2)))), Fraction(0)) / total
            )
        answers[q1] = max(p_prime[q1], key=lambda a1: (p_prime[q1][a1], -a1))
    return EstimatorF(n_samples=n, p_prime=p_prime, p_exact=p_exact, answers=answers, counts=all_counts)


@dataclass
class LocalProverPair:
    p1: object
    p2: object
    value: Fraction
    prefix: FixedPrefix
    estimator: EstimatorF | None


def extract_local_provers(
    prover: ProverInterface,
    game: NonLocalGame,
    lam: int,
    eps: float,
    rng: np.random.Generator,
    mode: str = "ideal",
    use_estimator: bool = True,
) -> LocalProverPair:
    """Two-player extraction: frozen prefix, memoized p2, best-response p1
    (sampled by default, exact on request).  The pair's game value is exact."""
    if game.k != 2:
        raise ValueError("extract_local_provers handles 2-player games")
    prefix = fix_prefix(prover, game, lam, rng, mode)
    p2 = build_p2(prefix, prover, game)
    for q2 in game.player_support(1):
        p2(q2)
    estimator = None
    if use_estimator:
        estimator = build_estimator_f(game, p2, lam, eps, rng)
        p1 = estimator
    else:
        p1, _ = exact_argmax_p1(game, p2)
    value = strategy_pair_value(game, [p1, p2])
    return LocalProverPair(p1=p1, p2=p2, value=value, prefix=prefix, estimator=estimator)


def adversary_distinguish(
    prover: ProverInterface,
    game: NonLocalGame,
    lam: int,
    trials: int,
    rng: np.random.Generator,
    mode: str = "ideal",
    rho: int = qhe.DEFAULT_RHO,
) -> dict:
    """Distinguishing experiment: can extraction artifacts built from an
    encryption of one query tell it apart from an encryption of another?

    Per trial two query pairs are drawn, a challenge bit selects which first
    query is encrypted, and the prover's behavior on that single ciphertext
    yields a p2 table and a best-response p1.  Both candidate executions are
    scored; if exactly one wins, the adversary names it (E_Good when that is
    the encrypted one, E_Bad otherwise), else it guesses a coin.  The
    advantage is Pr[guess correct] - 1/2.
    """
    if game.k != 2:
        raise ValueError("the distinguishing experiment is 2-player")
    if not prover.deterministic:
        raise ValueError("experiment requires a deterministic prover")
    last = game.k - 1
    correct = 0
    e_good = e_bad = 0
    for _ in range(trials):
        trial_rng = spawn(rng)
        pair0 = game.sample_queries(trial_rng)
        pair1 = game.sample_queries(trial_rng)
        b_star = int(trial_rng.integers(0, 2))
        sk = qhe.gen(lam, trial_rng, mode, rho)
        challenge = qhe.enc_bits(sk, (pair0, pair1)[b_star][0], game.query_bits[0], trial_rng)

        table: dict[int, int] = {}

        def p2(q2: int, _ct=challenge, _table=table) -> int:
            cached = _table.get(q2)
            if cached is None:
                prover.reset(trial_rng)
                prover.respond(_ct)
                cached = _table[q2] = int(prover.respond(PlainQuery(last, q2, game.query_bits[last])))
            return cached

        p1, _ = exact_argmax_p1(game, p2)
        wins = []
        for q1, q2 in (pair0, pair1):
            a1 = p1(q1)
            wins.append(bool(game.predicate((q1, q2), (a1, p2(q2)))))
        if wins[0] != wins[1]:
            guess = 0 if wins[0] else 1
            if guess == b_star:
                e_good += 1
            else:
                e_bad += 1
        else:
            guess = int(trial_rng.integers(0, 2))
        correct += guess == b_star
    rate = correct / trials
    lo, hi = wilson_interval(correct, trials)
    return {
        "advantage": rate - 0.5,
        "interval": (lo - 0.5, hi - 0.5),
        "e_good": e_good,
        "e_bad": e_bad,
        "e_single_winner": e_good + e_bad,
        "trials": trials,
    }


def k_sample_count(k: int, lam: int, answer_bits: int, eps: float) -> int:
    return math.ceil(18 * k * k * (lam + answer_bits) / (eps * eps))


@dataclass
class KExtraction:
    functions: list
    value: Fraction
    prefixes: list
    sample_count: int


def extract_k_provers(
    prover: ProverInterface,
    game: NonLocalGame,
    lam: int,
    eps: float,
    rng: np.random.Generator,
    mode: str = "ideal",
    rho: int = qhe.DEFAULT_RHO,
    guard: int = 10**6,
) -> KExtraction:
    """k-player extraction with hardwired encrypted prefixes.

    Level by level, player i's local function is a sampled argmax: for each
    of N = ceil(18k^2(lam+|a_i|)/eps^2) conditional query draws, answers of
    players below i come from the already-extracted functions, answers above
    i from a live emulated tail (prefixes replayed, fresh encryptions of the
    sampled queries, decryption with the fresh keys).  The last player is
    the plain emulation of the final round.  Tail answers are cached by
    plaintext query tuple when the prover declares itself
    message-oblivious; otherwise every draw costs a live run, which the
    guard caps.
    """
    if game.k < 2:
        raise ValueError("need at least 2 players")
    if not prover.deterministic:
        raise ValueError("extraction requires a deterministic prover")
    k = game.k
    prefixes: list[FixedPrefix] = []
    marg_rng = spawn(rng)
    for i in range(k - 1):
        sk = qhe.gen(lam, rng, mode, rho)
        q_dummy = int(game.sample_queries(marg_rng)[i])
        ct = qhe.enc_bits(sk, q_dummy, game.query_bits[i], rng)
        prefixes.append(FixedPrefix(q1_prime=q_dummy, ct1=ct, ct2=None, sk=sk, a1=0))

    def replay_prefixes(upto: int):
        prover.reset(rng)
        for prefix in prefixes[:upto]:
            prefix.ct2 = prover.respond(prefix.ct1)

    last_table: dict[int, int] = {}

    def p_last(q: int) -> int:
        cached = last_table.get(q)
        if cached is None:
            replay_prefixes(k - 1)
            cached = last_table[q] = int(prover.respond(PlainQuery(k - 1, q, game.query_bits[k - 1])))
        return cached

    tail_cache: dict[tuple, tuple] = {}
    live_runs = 0

    def run_tail(level: int, tail_queries: tuple[int, ...]) -> tuple[int, ...]:
        """Answers of players level+1 .. k-1 after the hardwired prefixes."""
        nonlocal live_runs
        key = (level, tail_queries)
        if prover.message_oblivious and key in tail_cache:
            return tail_cache[key]
        live_runs += 1
        if live_runs > guard:
            raise ValueError("live tail-run budget exceeds the guard")
        replay_prefixes(level + 1)
        answers = []
        for j, qj in enumerate(tail_queries, start=level + 1):
            if j < k - 1:
                skj = qhe.gen(lam, rng, mode, rho)
                ctj = qhe.enc_bits(skj, qj, game.query_bits[j], rng)
                answers.append(qhe.dec_bits(skj, prover.respond(ctj)))
            else:
                answers.append(int(prover.respond(PlainQuery(j, qj, game.query_bits[j]))))
        result = tuple(answers)
        if prover.message_oblivious:
            tail_cache[key] = result
        return result

    functions: list = []
    n = k_sample_count(k, lam, max(game.answer_bits), eps)
    for level in range(k - 1):
        table: dict[int, int] = {}
        for q_i in game.player_support(level):
            sampler = ConditionalQuerySampler(game, level, q_i)
            counts = sampler.sample_counts(n, rng)
            scores = np.zeros(1 << game.answer_bits[level])
            for tup, count in counts.items():
                below = [functions[j](tup[j]) for j in range(level)]
                tail = run_tail(level, tup[level + 1 :])
                for a_i in range(len(scores)):
                    answers = tuple(below) + (a_i,) + tail
                    if game.predicate(tup, answers):
                        scores[a_i] += count
            best = 0
            for a_i in range(1, len(scores)):
                if scores[a_i] > scores[best]:
                    best = a_i
            table[q_i] = best
        functions.append(lambda q, _t=dict(table): _t[q])
    functions.append(p_last)
    for q in game.player_support(k - 1):
        p_last(q)
    value = strategy_pair_value(game, functions)
    return KExtraction(functions=functions, value=value, prefixes=prefixes, sample_count=n)


def hybrid_values(
    prover: ProverInterface,
    game: NonLocalGame,
    extraction: KExtraction,
    lam: int,
    trials: int,
    rng: np.random.Generator,
    mode: str = "ideal",
    rho: int = qhe.DEFAULT_RHO,
) -> dict:
    """Estimate the hybrid chain Hyb_0 .. Hyb_{k-1}.

    Hyb_j replaces the first j encrypted rounds by the extraction's
    hardwired prefixes and the first j answers by the extracted functions;
    remaining answers come from the live rounds on fresh encryptions of the
    real queries.  The same per-trial query tuple drives every j (paired
    estimation), so differences between adjacent hybrids are estimated with
    common random numbers.
    """
    k = game.k
    wins = [0] * k
    drop_sum = [0] * (k - 1)
    drop_sq = [0] * (k - 1)
    for _ in range(trials):
        trial_rng = spawn(rng)
        queries = game.sample_queries(trial_rng)
        outcomes = []
        for j in range(k):
            answers = [None] * k
            for i in range(j):
                answers[i] = extraction.functions[i](queries[i])
            prover.reset(trial_rng)
            for prefix in extraction.prefixes[:j]:
                prover.respond(prefix.ct1)
            for i in range(j, k - 1):
                sk = qhe.gen(lam, trial_rng, mode, rho)
                ct = qhe.enc_bits(sk, queries[i], game.query_bits[i], trial_rng)
                answers[i] = qhe.dec_bits(sk, prover.respond(ct))
            answers[k - 1] = int(
                prover.respond(PlainQuery(k - 1, queries[k - 1], game.query_bits[k - 1]))
            )
            outcomes.append(int(bool(game.predicate(queries, tuple(answers)))))
            wins[j] += outcomes[-1]
        for j in range(1, k):
            d = outcomes[j - 1] - outcomes[j]
            drop_sum[j - 1] += d
            drop_sq[j - 1] += d * d
    values = [w / trials for w in wins]
    drops = [s / trials for s in drop_sum]
    # paired standard error of each adjacent difference
    drop_sigmas = [
        math.sqrt(max(0.0, drop_sq[j] / trials - drops[j] ** 2) / trials) for j in range(k - 1)
    ]
    return {
        "hybrids": values,
        "intervals": [wilson_interval(w, trials) for w in wins],
        "drops": drops,
        "drop_sigmas": drop_sigmas,
        "trials": trials,
    }
