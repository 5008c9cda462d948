"""Compilation of k-player games into single-prover interactive protocols.

A compiled protocol has 2k rounds.  For players i < k the verifier sends the
query encrypted under a fresh key (round 2i+1) and receives a ciphertext
answer (round 2i+2); the final player's query and answer travel in plain.
The verifier decrypts every ciphertext answer and applies the game predicate
to the full tuple.  Honest provers hold the strategy's entangled state and
evaluate their measurement circuits homomorphically on encrypted queries.

Messages are native objects, not wire bytes: an encrypted query or answer is
a PaddedBits value, a plain query is a PlainQuery, and a plain answer is an
int.  A malformed prover message rejects the transcript with a recorded
cause instead of raising.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from gamecompiler import qhe
from gamecompiler.games import NonLocalGame, QuantumStrategy
from gamecompiler.qhe import PaddedBits, QheError, SecretKey
from gamecompiler.rngutil import spawn, wilson_interval


@dataclass(frozen=True)
class PlainQuery:
    player: int
    value: int
    width: int


@dataclass(frozen=True)
class CompiledProtocol:
    """Round plan for one game: which player is encrypted, key parameters."""

    game: NonLocalGame
    lam: int
    mode: str = "ideal"
    rho: int = qhe.DEFAULT_RHO

    @property
    def k(self) -> int:
        return self.game.k

    def round_plan(self) -> tuple[tuple[str, int], ...]:
        plan: list[tuple[str, int]] = []
        for i in range(self.k - 1):
            plan.append(("enc-query", i))
            plan.append(("ct-answer", i))
        plan.append(("plain-query", self.k - 1))
        plan.append(("plain-answer", self.k - 1))
        return tuple(plan)


def compile(game: NonLocalGame, lam: int, mode: str = "ideal", rho: int = qhe.DEFAULT_RHO) -> CompiledProtocol:
    """Build the 2k-round protocol for a game.  Keys are not sampled here;
    every execution draws k-1 fresh ones."""
    if game.k < 2:
        raise ValueError("compilation needs at least 2 players")
    if lam < 1:
        raise ValueError("security parameter must be positive")
    return CompiledProtocol(game, int(lam), mode, int(rho))


@dataclass
class Transcript:
    queries: tuple[int, ...]
    key_ids: tuple[str, ...]
    messages: list = field(default_factory=list)
    answers: tuple = ()
    accept: bool = False
    error: str | None = None

    def recheck(self, game: NonLocalGame) -> bool:
        if self.error is not None or None in self.answers:
            return False
        return bool(game.predicate(self.queries, tuple(self.answers)))

    def to_json(self) -> str:
        rounds = []
        for tag, payload in self.messages:
            if isinstance(payload, PaddedBits):
                rounds.append({"round": tag, "bits": list(payload.bits), "handles": [p.handle for p in payload.pads]})
            elif isinstance(payload, PlainQuery):
                rounds.append({"round": tag, "player": payload.player, "value": payload.value})
            else:
                rounds.append({"round": tag, "value": payload})
        return json.dumps(
            {
                "queries": list(self.queries),
                "key_ids": list(self.key_ids),
                "rounds": rounds,
                "answers": [a if a is None else int(a) for a in self.answers],
                "accept": self.accept,
                "error": self.error,
            },
            sort_keys=True,
        )


class ProverInterface:
    """Stateful round-message function with reset.

    ``deterministic`` promises that identical message sequences yield
    identical decrypted answers (fixed coins); the extractor requires it.
    ``message_oblivious`` additionally promises encrypted-round answers do
    not depend on the incoming ciphertext at all, which lets experiment
    harnesses cache emulated tails by plaintext query.
    """

    deterministic = False
    message_oblivious = False

    def reset(self, rng: np.random.Generator) -> None:
        raise NotImplementedError

    def respond(self, message):
        raise NotImplementedError


class HonestQuantumProver(ProverInterface):
    """Prepares the strategy state; evaluates measurement circuits under the
    pad encryption for encrypted queries, plainly for the final query."""

    deterministic = False
    message_oblivious = False

    def __init__(self, strategy: QuantumStrategy):
        for i in range(strategy.game.k - 1):
            if strategy.oblivious[i] is None:
                raise QheError(f"player {i} has no query-oblivious circuit to evaluate")
            for op in strategy.oblivious[i].gates:
                if op.kind not in ("X", "Z", "H", "S", "CNOT", "TOFFOLI"):
                    raise QheError(f"circuit not evaluable: unsupported gate {op.kind}")
        self.strategy = strategy
        self._template = strategy.prep()
        self.state = None
        self.rng = None
        self._round = 0

    def reset(self, rng: np.random.Generator) -> None:
        self.state = self._template.copy()
        self.rng = rng
        self._round = 0

    def respond(self, message):
        strat = self.strategy
        if isinstance(message, PaddedBits):
            i = self._round
            self._round += 1
            circuit = strat.oblivious[i]
            data = self.state.registers[f"A{i + 1}"]
            anc = self.state.registers.get(f"anc{i + 1}", ())
            return qhe.eval_circuit(
                circuit.gates, circuit.measure, message, self.state, data, anc, self.rng
            )
        if isinstance(message, PlainQuery):
            self._round += 1
            i = message.player
            circuit = strat.circuits[i][message.value]
            local = strat.player_qubits(self.state, i)
            for op in circuit.gates:
                self.state.apply(op.remapped(list(local)))
            outcome = self.state.measure(tuple(local[m] for m in circuit.measure), self.rng)
            bits = 0
            for b in outcome:
                bits = (bits << 1) | b
            return bits
        raise QheError(f"unexpected verifier message {type(message).__name__}")


def run_protocol(protocol: CompiledProtocol, prover: ProverInterface, rng: np.random.Generator) -> Transcript:
    """One full execution: fresh keys, all 2k rounds, decryption, verdict."""
    game = protocol.game
    prover.reset(rng)
    queries = game.sample_queries(rng)
    keys: list[SecretKey] = [
        qhe.gen(protocol.lam, rng, protocol.mode, protocol.rho) for _ in range(game.k - 1)
    ]
    transcript = Transcript(queries=queries, key_ids=tuple(sk.key_id for sk in keys))
    answers: list = [None] * game.k

    def reject(cause: str) -> Transcript:
        transcript.answers = tuple(answers)
        transcript.accept = False
        transcript.error = cause
        return transcript

    for i in range(game.k - 1):
        sk = keys[i]
        ct = qhe.enc_bits(sk, queries[i], game.query_bits[i], rng)
        transcript.messages.append((f"enc-query-{i}", ct))
        try:
            reply = prover.respond(ct)
        except QheError as exc:
            return reject(f"prover error in round {2 * i + 2}: {exc}")
        transcript.messages.append((f"ct-answer-{i}", reply))
        if not isinstance(reply, PaddedBits) or reply.width != game.answer_bits[i]:
            return reject(f"malformed answer ciphertext in round {2 * i + 2}")
        try:
            answers[i] = qhe.dec_bits(sk, reply)
        except QheError as exc:
            return reject(f"undecryptable answer in round {2 * i + 2}: {exc}")

    last = game.k - 1
    pq = PlainQuery(last, queries[last], game.query_bits[last])
    transcript.messages.append((f"plain-query-{last}", pq))
    try:
        reply = prover.respond(pq)
    except QheError as exc:
        return reject(f"prover error in round {2 * game.k}: {exc}")
    transcript.messages.append((f"plain-answer-{last}", reply))
    if not isinstance(reply, (int, np.integer)) or not 0 <= reply < (1 << game.answer_bits[last]):
        return reject(f"malformed plain answer in round {2 * game.k}")
    answers[last] = int(reply)

    transcript.answers = tuple(answers)
    transcript.accept = bool(game.predicate(queries, tuple(answers)))
    return transcript


def estimate_value(
    protocol: CompiledProtocol,
    prover: ProverInterface,
    trials: int,
    rng: np.random.Generator,
) -> tuple[float, tuple[float, float]]:
    """Mean accept rate over independent runs, with a Wilson 95% interval.

    Each trial runs on its own child stream so a prover that consumes a
    different amount of randomness cannot shift later trials.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    wins = 0
    for _ in range(trials):
        trial_rng = spawn(rng)
        wins += run_protocol(protocol, prover, trial_rng).accept
    return wins / trials, wilson_interval(wins, trials)
