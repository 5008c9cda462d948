"""Classical test provers for compiled protocols.

All of these answer encrypted rounds with ciphertexts they build
homomorphically from the incoming query's pad handles (constants need a key
context, never the key itself).  They are deterministic by construction:
their coins, if any, live in a tape fixed at build time.
"""

from __future__ import annotations

import numpy as np

from gamecompiler import qhe
from gamecompiler.games import NonLocalGame, classical_value_bruteforce, strategy_pair_value
from gamecompiler.protocol import PlainQuery, ProverInterface
from gamecompiler.qhe import PaddedBits, QheError
from gamecompiler.rngutil import spawn


def _const_answer(query_ct: PaddedBits, value: int, width: int) -> PaddedBits:
    zero = qhe.eval_const(query_ct.pads[0], 0)
    bits = tuple((value >> (width - 1 - i)) & 1 for i in range(width))
    return PaddedBits(bits=bits, pads=(zero,) * width, key_id=query_ct.key_id)


class LocalFunctionProver(ProverInterface):
    """Plays fixed local functions: constants for encrypted rounds (the
    query is unreadable), an arbitrary table for the final plain round."""

    deterministic = True
    message_oblivious = True

    def __init__(self, game: NonLocalGame, constants: tuple[int, ...], last_table):
        if len(constants) != game.k - 1:
            raise ValueError("one constant per encrypted player")
        self.game = game
        self.constants = constants
        self.last_table = dict(last_table)
        self._round = 0
        self._query_ct = None

    def reset(self, rng: np.random.Generator) -> None:
        self._round = 0

    def respond(self, message):
        game = self.game
        if isinstance(message, PaddedBits):
            i = self._round
            self._round += 1
            return _const_answer(message, self.constants[i], game.answer_bits[i])
        if isinstance(message, PlainQuery):
            self._round += 1
            return self.last_table[message.value]
        raise QheError(f"unexpected verifier message {type(message).__name__}")

    def answer_fns(self):
        """The same strategy as plain local functions, for exact valuation."""
        fns = [(lambda q, c=c: c) for c in self.constants]
        fns.append(lambda q: self.last_table[q])
        return fns


def best_local_prover(game: NonLocalGame) -> LocalFunctionProver:
    """Exhaustive search over the compiled-setting local strategies:
    constants for encrypted players, any function of the plain query last.

    For CHSH this reaches the full classical value 3/4; in general it is the
    best a ciphertext-ignoring prover can do.
    """
    support = game.player_support(game.k - 1)
    best = None
    spaces = [range(1 << game.answer_bits[i]) for i in range(game.k - 1)]
    tables = _function_tables(support, 1 << game.answer_bits[game.k - 1])

    def rec(i, acc):
        nonlocal best
        if i == game.k - 1:
            for table in tables:
                fns = [(lambda q, c=c: c) for c in acc] + [lambda q, t=table: t[q]]
                v = strategy_pair_value(game, fns)
                if best is None or v > best[0]:
                    best = (v, tuple(acc), dict(table))
            return
        for c in spaces[i]:
            rec(i + 1, acc + [c])

    rec(0, [])
    return LocalFunctionProver(game, best[1], best[2])


def _function_tables(support, n_answers):
    tables = [{}]
    for q in support:
        tables = [{**t, q: a} for t in tables for a in range(n_answers)]
    return tables


def constant_prover(game: NonLocalGame, answers: tuple[int, ...]) -> LocalFunctionProver:
    support = game.player_support(game.k - 1)
    return LocalFunctionProver(game, answers[:-1], {q: answers[-1] for q in support})


class TapeProver(ProverInterface):
    """Deterministic prover driven by a fixed coin tape.

    The tape maps (round index, observable) to an answer, where the
    observable of an encrypted round is the tuple of padded query bits (all
    a key-less prover can see besides handles) and of the plain round is the
    query value.  Fixing the tape derandomizes a coin-flipping prover.
    """

    deterministic = True
    message_oblivious = False

    def __init__(self, game: NonLocalGame, tape: dict):
        self.game = game
        self.tape = dict(tape)
        self._round = 0

    def reset(self, rng: np.random.Generator) -> None:
        self._round = 0

    def respond(self, message):
        if isinstance(message, PaddedBits):
            i = self._round
            self._round += 1
            value = self.tape[(i, message.bits)]
            return _const_answer(message, value, self.game.answer_bits[i])
        if isinstance(message, PlainQuery):
            self._round += 1
            return self.tape[(message.player, "plain", message.value)]
        raise QheError(f"unexpected verifier message {type(message).__name__}")


def random_tape(game: NonLocalGame, rng: np.random.Generator) -> dict:
    """A full tape: an answer for every reachable observable."""
    tape = {}
    for i in range(game.k - 1):
        for padded in range(1 << game.query_bits[i]):
            bits = tuple((padded >> (game.query_bits[i] - 1 - j)) & 1 for j in range(game.query_bits[i]))
            tape[(i, bits)] = int(rng.integers(0, 1 << game.answer_bits[i]))
    last = game.k - 1
    for q in game.player_support(last):
        tape[(last, "plain", q)] = int(rng.integers(0, 1 << game.answer_bits[last]))
    return tape


def biased_random_prover(
    game: NonLocalGame,
    rng: np.random.Generator,
    candidates: int = 16,
    trials: int = 2000,
    protocol=None,
) -> TapeProver:
    """Derandomized coin-flipping prover: draw candidate tapes, keep the one
    with the best empirical interactive value (stand-in for fixing the coins
    to the best ones, which is infeasible to do exactly)."""
    from gamecompiler.protocol import compile as compile_protocol
    from gamecompiler.protocol import estimate_value

    if protocol is None:
        protocol = compile_protocol(game, 8)
    best = None
    for _ in range(candidates):
        tape = random_tape(game, rng)
        prover = TapeProver(game, tape)
        rate, _ = estimate_value(protocol, prover, trials, spawn(rng))
        if best is None or rate > best[0]:
            best = (rate, tape)
    return TapeProver(game, best[1])


class DecryptingProver(ProverInterface):
    """Attack prover for the leaky scheme: reads each pad bit out of its
    leak-prefixed handle, recovers the queries, and picks a winning final
    answer with full knowledge.  Encrypted rounds answer zero.

    With the ideal scheme the handles carry nothing and this prover fails
    loudly rather than degrade into guessing.
    """

    deterministic = True
    message_oblivious = False

    def __init__(self, game: NonLocalGame):
        self.game = game
        self._round = 0
        self._queries: list[int] = []

    def reset(self, rng: np.random.Generator) -> None:
        self._round = 0
        self._queries = []

    def respond(self, message):
        game = self.game
        if isinstance(message, PaddedBits):
            i = self._round
            self._round += 1
            value = 0
            for bit, pad in zip(message.bits, message.pads):
                if not pad.handle.startswith("leak"):
                    raise QheError("decrypting prover needs leaky handles")
                value = (value << 1) | (bit ^ int(pad.handle[4]))
            self._queries.append(value)
            return _const_answer(message, 0, game.answer_bits[i])
        if isinstance(message, PlainQuery):
            self._round += 1
            q = tuple(self._queries) + (message.value,)
            zeros = (0,) * (game.k - 1)
            for a in range(1 << game.answer_bits[game.k - 1]):
                if game.predicate(q, zeros + (a,)):
                    return a
            return 0
        raise QheError(f"unexpected verifier message {type(message).__name__}")
