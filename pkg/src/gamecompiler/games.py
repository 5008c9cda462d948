"""Non-local games: query distributions, predicates, values, strategies.

A k-player game is a distribution over query tuples together with a total
predicate on (queries, answers).  Queries and answers are integers of a
fixed bit width per player.  Query weights are exact rationals wherever
possible so the classical value of a finite game is an exact fraction.

The built-in games come with their standard optimal quantum strategies:

- ``chsh``: two players share one EPR pair; the first measures in the
  Hadamard basis on query 0 and the standard basis on query 1, the second
  measures at angles pi/8 and 3*pi/8.
- ``ghz3``: three players share a GHZ state and measure X or Y.
- ``magic_square``: two players share two EPR pairs and measure commuting
  two-qubit observables from the standard 3x3 sign table.

For players evaluated under encryption, the strategy also carries a single
"oblivious" circuit per player that takes the query as an input register, so
the same circuit is applied whatever the (hidden) query value is.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from gamecompiler.sim import GateOp, Statevector, bits_to_int, int_to_bits

BRUTE_FORCE_GUARD = 10**8


@dataclass(frozen=True)
class NonLocalGame:
    """A k-player one-round game with an explicit query table.

    ``query_table`` maps query tuples to weights (Fraction or float); the
    weights must be nonnegative and sum to one.  ``predicate`` must be total
    over the full rectangular query/answer ranges implied by the bit widths.
    """

    k: int
    query_bits: tuple[int, ...]
    answer_bits: tuple[int, ...]
    query_table: tuple[tuple[tuple[int, ...], Fraction], ...]
    predicate: Callable[[tuple[int, ...], tuple[int, ...]], int]
    name: str = "custom"

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if len(self.query_bits) != self.k or len(self.answer_bits) != self.k:
            raise ValueError("per-player bit widths must have length k")
        if any(b < 1 for b in self.query_bits + self.answer_bits):
            raise ValueError("bit widths must be positive")
        total = sum((w for _, w in self.query_table), start=Fraction(0))
        if isinstance(total, Fraction):
            ok = total == 1
        else:
            ok = abs(float(total) - 1.0) <= 1e-12
        if not ok:
            raise ValueError("query weights must sum to 1")
        for q, w in self.query_table:
            if w < 0:
                raise ValueError("query weights must be nonnegative")
            if len(q) != self.k:
                raise ValueError("query tuples must have length k")
            for i, qi in enumerate(q):
                if not 0 <= qi < (1 << self.query_bits[i]):
                    raise ValueError("query value out of range")

    # -- sampling ----------------------------------------------------------

    def support(self) -> list[tuple[int, ...]]:
        return [q for q, w in self.query_table if w > 0]

    def cumulative(self) -> tuple[list[tuple[int, ...]], np.ndarray]:
        qs = [q for q, w in self.query_table if w > 0]
        ws = np.cumsum([float(w) for q, w in self.query_table if w > 0])
        return qs, ws

    def sample_queries(self, rng: np.random.Generator) -> tuple[int, ...]:
        qs, cum = self._sampler
        i = int(np.searchsorted(cum, rng.random() * cum[-1]))
        return qs[min(i, len(qs) - 1)]

    @property
    def _sampler(self):
        cached = _SAMPLER_CACHE.get(id(self))
        if cached is None or cached[0] is not self:
            cached = (self, self.cumulative())
            _SAMPLER_CACHE[id(self)] = cached
        return cached[1]

    def player_support(self, player: int) -> list[int]:
        seen: dict[int, None] = {}
        for q, w in self.query_table:
            if w > 0:
                seen.setdefault(q[player], None)
        return list(seen)

    def marginal(self, player: int, value: int) -> Fraction:
        return sum(
            (w for q, w in self.query_table if w > 0 and q[player] == value),
            start=Fraction(0),
        )


_SAMPLER_CACHE: dict[int, tuple] = {}


class ConditionalQuerySampler:
    """Distribution over the other players' queries given one fixed query."""

    def __init__(self, game: NonLocalGame, player: int, value: int):
        if not 0 <= player < game.k:
            raise ValueError("player index out of range")
        rows = [(q, w) for q, w in game.query_table if w > 0 and q[player] == value]
        if not rows:
            raise ValueError(f"query {value} for player {player} has zero marginal")
        total = sum((w for _, w in rows), start=Fraction(0))
        self.player = player
        self.value = value
        # Rows keep the conditioned coordinate in place: samples are full
        # query tuples, directly usable with the game predicate.
        self.table: list[tuple[tuple[int, ...], Fraction]] = [
            (q, w / total) for q, w in rows
        ]
        self._cum = np.cumsum([float(w) for _, w in self.table])

    def sample(self, rng: np.random.Generator) -> tuple[int, ...]:
        i = int(np.searchsorted(self._cum, rng.random() * self._cum[-1]))
        return self.table[min(i, len(self.table) - 1)][0]

    def sample_counts(self, n: int, rng: np.random.Generator) -> dict[tuple[int, ...], int]:
        """Counts of ``n`` iid draws, as a multinomial over the support."""
        probs = np.array([float(w) for _, w in self.table])
        probs = probs / probs.sum()
        counts = rng.multinomial(n, probs)
        return {q: int(c) for (q, _), c in zip(self.table, counts) if c}


# -- values ----------------------------------------------------------------


def classical_value_bruteforce(game: NonLocalGame) -> Fraction:
    """Exact classical value: max over deterministic strategy tuples.

    Player 0's best response is computed per query value given the other
    players' strategies, which enumerates the same maximum as a full product
    scan but with a far smaller loop.  Strategies only need to be defined on
    each player's query support; off-support values cannot affect the value.
    """
    supports = [game.player_support(i) for i in range(game.k)]
    n_answers = [1 << a for a in game.answer_bits]
    space = 1
    for i in range(1, game.k):
        space *= n_answers[i] ** len(supports[i])
    for q0 in supports[0]:
        space *= n_answers[0]
    if space > BRUTE_FORCE_GUARD:
        raise ValueError("strategy space too large for brute force")

    by_q0: dict[int, list[tuple[tuple[int, ...], Fraction]]] = {v: [] for v in supports[0]}
    for q, w in game.query_table:
        if w > 0:
            by_q0[q[0]].append((q, w))

    others = list(range(1, game.k))
    tables = [
        list(itertools.product(range(n_answers[i]), repeat=len(supports[i])))
        for i in others
    ]
    index = [{v: j for j, v in enumerate(supports[i])} for i in range(game.k)]
    best = Fraction(0)
    for choice in itertools.product(*tables):
        value = Fraction(0)
        for q0 in supports[0]:
            per_answer = [Fraction(0)] * n_answers[0]
            for q, w in by_q0[q0]:
                answers = [0] * game.k
                for pos, i in enumerate(others):
                    answers[i] = choice[pos][index[i][q[i]]]
                for a0 in range(n_answers[0]):
                    answers[0] = a0
                    if game.predicate(q, tuple(answers)):
                        per_answer[a0] += w
            value += max(per_answer)
        best = max(best, value)
    return best


def strategy_pair_value(game: NonLocalGame, answer_fns: Sequence[Callable[[int], int]]) -> Fraction:
    """Exact value of a tuple of deterministic per-player answer functions."""
    if len(answer_fns) != game.k:
        raise ValueError("need one answer function per player")
    value = Fraction(0)
    for q, w in game.query_table:
        if w == 0:
            continue
        a = tuple(int(fn(qi)) for fn, qi in zip(answer_fns, q))
        if game.predicate(q, a):
            value += w
    return value


# -- quantum strategies ----------------------------------------------------


@dataclass(frozen=True)
class PlayerCircuit:
    """Gates plus the list of qubits measured for the answer (MSB first).

    Indices are local: for per-query circuits, 0..r-1 address the player's
    register then its ancilla block; for oblivious circuits the query qubits
    come first, then the register, then the ancillas.
    """

    gates: tuple[GateOp, ...]
    measure: tuple[int, ...]


@dataclass(frozen=True)
class QuantumStrategy:
    """Shared entangled state plus per-player measurement circuits.

    ``prep`` rebuilds the shared state (registers named A1..Ak, with an
    optional ancilla register anc_i per player).  ``circuits[i][q]`` is the
    circuit player i applies on query q; ``oblivious[i]``, when present, is
    a single circuit taking the query bits as an input register, usable when
    the query arrives encrypted.  Circuits touch only their player's qubits.
    """

    game: NonLocalGame
    prep: Callable[[], Statevector]
    circuits: tuple[dict[int, PlayerCircuit], ...]
    oblivious: tuple[PlayerCircuit | None, ...] = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.oblivious is None:
            object.__setattr__(self, "oblivious", (None,) * self.game.k)
        if len(self.circuits) != self.game.k or len(self.oblivious) != self.game.k:
            raise ValueError("need circuit maps for every player")

    def player_qubits(self, state: Statevector, player: int) -> tuple[int, ...]:
        qs = state.registers[f"A{player + 1}"]
        anc = state.registers.get(f"anc{player + 1}", ())
        return qs + anc


def quantum_strategy_value(game: NonLocalGame, strategy: QuantumStrategy) -> float:
    """Exact winning probability of the strategy, no sampling involved."""
    total = 0.0
    base = strategy.prep()
    for q, w in game.query_table:
        if w == 0:
            continue
        state = base.copy()
        measure_qubits: list[int] = []
        widths: list[int] = []
        for i in range(game.k):
            local = strategy.player_qubits(state, i)
            circuit = strategy.circuits[i][q[i]]
            for op in circuit.gates:
                state.apply(op.remapped(list(local)))
            measure_qubits.extend(local[m] for m in circuit.measure)
            widths.append(len(circuit.measure))
        probs = state.probabilities(tuple(measure_qubits))
        win = 0.0
        for outcome, p in enumerate(probs):
            if p == 0.0:
                continue
            bits = int_to_bits(outcome, len(measure_qubits))
            answers = []
            at = 0
            for width in widths:
                answers.append(bits_to_int(bits[at : at + width]))
                at += width
            if game.predicate(q, tuple(answers)):
                win += float(p)
        total += float(w) * win
    return total


# -- built-in games --------------------------------------------------------


def _uniform_table(tuples: list[tuple[int, ...]]) -> tuple:
    w = Fraction(1, len(tuples))
    return tuple((q, w) for q in tuples)


def _chsh() -> tuple[NonLocalGame, QuantumStrategy]:
    game = NonLocalGame(
        k=2,
        query_bits=(1, 1),
        answer_bits=(1, 1),
        query_table=_uniform_table([(a, b) for a in (0, 1) for b in (0, 1)]),
        predicate=lambda q, a: int((a[0] ^ a[1]) == (q[0] & q[1])),
        name="chsh",
    )

    def prep() -> Statevector:
        state = Statevector(2)
        state.name_register("A1", (0,))
        state.name_register("A2", (1,))
        state.allocate(1, name="anc1")
        state.apply(GateOp("H", (0,)))
        state.apply(GateOp("CNOT", (0, 1)))
        return state

    # Player 1 measures Hadamard basis on query 0, standard basis on query 1.
    # Player 2 measures at pi/8 or 3*pi/8; an angle-theta measurement is
    # RY(-2*theta) then a standard-basis readout.
    circuits = (
        {
            0: PlayerCircuit((GateOp("H", (0,)),), (0,)),
            1: PlayerCircuit((), (0,)),
        },
        {
            0: PlayerCircuit((GateOp("RY", (0,), theta=-np.pi / 4),), (0,)),
            1: PlayerCircuit((GateOp("RY", (0,), theta=-3 * np.pi / 4),), (0,)),
        },
    )
    # Oblivious circuit for player 1 on (query q, data A, ancilla w):
    # swap A and w when q=1, apply H, swap back.  Branch q=0 gets H applied
    # to A; branch q=1 ends with A untouched and the leftover |+> parked in
    # w.  Each controlled swap is one Toffoli conjugated by CNOTs.
    def fredkin(c: int, x: int, y: int) -> tuple[GateOp, ...]:
        return (
            GateOp("CNOT", (y, x)),
            GateOp("TOFFOLI", (c, x, y)),
            GateOp("CNOT", (y, x)),
        )

    oblivious_a = PlayerCircuit(
        fredkin(0, 1, 2) + (GateOp("H", (1,)),) + fredkin(0, 1, 2),
        (1,),
    )
    strategy = QuantumStrategy(game, prep, circuits, (oblivious_a, None))
    return game, strategy


def _ghz3() -> tuple[NonLocalGame, QuantumStrategy]:
    game = NonLocalGame(
        k=3,
        query_bits=(1, 1, 1),
        answer_bits=(1, 1, 1),
        query_table=_uniform_table([(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)]),
        predicate=lambda q, a: int((a[0] ^ a[1] ^ a[2]) == (q[0] | q[1] | q[2])),
        name="ghz3",
    )

    def prep() -> Statevector:
        state = Statevector(3)
        for i in range(3):
            state.name_register(f"A{i + 1}", (i,))
        state.allocate(1, name="anc1")
        state.allocate(1, name="anc2")
        state.apply(GateOp("H", (0,)))
        state.apply(GateOp("CNOT", (0, 1)))
        state.apply(GateOp("CNOT", (0, 2)))
        return state

    # X measurement on query 0, Y measurement on query 1 (S dagger = Z then
    # S, then H, then standard readout).
    x_meas = PlayerCircuit((GateOp("H", (0,)),), (0,))
    y_meas = PlayerCircuit(
        (GateOp("Z", (0,)), GateOp("S", (0,)), GateOp("H", (0,))), (0,)
    )
    per_query = {0: x_meas, 1: y_meas}
    # Oblivious form on (query q, data A, ancilla w): controlled S dagger
    # via a Toffoli pair writing q AND a into w, phasing it, and
    # uncomputing; then H.  The ancilla returns to |0>.
    csdg = (
        GateOp("TOFFOLI", (0, 1, 2)),
        GateOp("Z", (2,)),
        GateOp("S", (2,)),
        GateOp("TOFFOLI", (0, 1, 2)),
    )
    oblivious = PlayerCircuit(csdg + (GateOp("H", (1,)),), (1,))
    strategy = QuantumStrategy(
        game,
        prep,
        (dict(per_query), dict(per_query), dict(per_query)),
        (oblivious, oblivious, None),
    )
    return game, strategy


def _magic_square() -> tuple[NonLocalGame, QuantumStrategy]:
    def predicate(q: tuple[int, ...], a: tuple[int, ...]) -> int:
        r, c = q
        if r > 2 or c > 2:
            return 0
        row_bits = int_to_bits(a[0], 3)
        col_bits = int_to_bits(a[1], 3)
        if sum(row_bits) % 2 != 0 or sum(col_bits) % 2 != 1:
            return 0
        return int(row_bits[c] == col_bits[r])

    game = NonLocalGame(
        k=2,
        query_bits=(2, 2),
        answer_bits=(3, 3),
        query_table=_uniform_table([(r, c) for r in range(3) for c in range(3)]),
        predicate=predicate,
        name="magic_square",
    )

    def prep() -> Statevector:
        state = Statevector(4)
        state.name_register("A1", (0, 1))
        state.name_register("A2", (2, 3))
        state.allocate(1, name="anc1")
        state.allocate(1, name="anc2")
        for a, b in ((0, 2), (1, 3)):
            state.apply(GateOp("H", (a,)))
            state.apply(GateOp("CNOT", (a, b)))
        return state

    # Observable table (rows multiply to +I, columns to -I):
    #   row 0:  I Z | Z I | Z Z      row 1:  X I | I X | X X
    #   row 2: -X Z | -Z X | Y Y
    # Each player's circuit rotates its two qubits to the simultaneous
    # eigenbasis of its line, then writes the three outcome bits (one per
    # cell, MSB first) into (qubit, qubit, ancilla) in standard basis.
    def parity_into(anc: int, sources: tuple[int, ...], flip: bool) -> tuple[GateOp, ...]:
        ops = tuple(GateOp("CNOT", (s, anc)) for s in sources)
        if flip:
            ops += (GateOp("X", (anc,)),)
        return ops

    def cz(a: int, b: int) -> tuple[GateOp, ...]:
        return (GateOp("H", (b,)), GateOp("CNOT", (a, b)), GateOp("H", (b,)))

    rows = {
        # cells (I Z, Z I, Z Z): bits (m2, m1, m1^m2)
        0: PlayerCircuit(parity_into(2, (0, 1), False), (1, 0, 2)),
        # cells (X I, I X, X X): H both, bits (m1, m2, m1^m2)
        1: PlayerCircuit(
            (GateOp("H", (0,)), GateOp("H", (1,))) + parity_into(2, (0, 1), False),
            (0, 1, 2),
        ),
        # cells (-X Z, -Z X, Y Y): CZ then H both diagonalizes X Z and Z X;
        # the first two cells carry a sign flip, the third is their product.
        2: PlayerCircuit(
            cz(0, 1)
            + (GateOp("H", (0,)), GateOp("H", (1,)))
            + parity_into(2, (0, 1), False)
            + (GateOp("X", (0,)), GateOp("X", (1,))),
            (0, 1, 2),
        ),
    }
    cols = {
        # column 0 (I Z, X I, -X Z): H on first qubit, bits (m2, m1, 1^m1^m2)
        0: PlayerCircuit(
            (GateOp("H", (0,)),) + parity_into(2, (0, 1), True), (1, 0, 2)
        ),
        # column 1 (Z I, I X, -Z X): H on second qubit, bits (m1, m2, 1^m1^m2)
        1: PlayerCircuit(
            (GateOp("H", (1,)),) + parity_into(2, (0, 1), True), (0, 1, 2)
        ),
        # column 2 (Z Z, X X, Y Y): Bell basis, bits (m2, m1, 1^m1^m2)
        2: PlayerCircuit(
            (GateOp("CNOT", (0, 1)), GateOp("H", (0,))) + parity_into(2, (0, 1), True),
            (1, 0, 2),
        ),
    }
    # Predicate is total: give the unused query value 3 a harmless circuit.
    rows[3] = PlayerCircuit((), (0, 1, 2))
    cols[3] = PlayerCircuit((), (0, 1, 2))
    strategy = QuantumStrategy(game, prep, (rows, cols))
    return game, strategy


_BUILTINS = {"chsh": _chsh, "ghz3": _ghz3, "magic_square": _magic_square}


def builtin_game(name: str) -> tuple[NonLocalGame, QuantumStrategy]:
    """Return a built-in game and its standard optimal quantum strategy."""
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown game {name!r}; choose from {sorted(_BUILTINS)}")
    return factory()


# -- serialization ---------------------------------------------------------


def game_to_json(game: NonLocalGame) -> str:
    """Serialize a game; the predicate becomes a row-major truth table."""
    q_ranges = [1 << b for b in game.query_bits]
    a_ranges = [1 << b for b in game.answer_bits]
    bits = []
    for q in itertools.product(*(range(r) for r in q_ranges)):
        for a in itertools.product(*(range(r) for r in a_ranges)):
            bits.append(int(bool(game.predicate(q, a))))
    payload = {
        "k": game.k,
        "name": game.name,
        "query_bits": list(game.query_bits),
        "answer_bits": list(game.answer_bits),
        "queries": [
            {"q": list(q), "w": str(Fraction(w))} for q, w in game.query_table
        ],
        "predicate": bits,
    }
    return json.dumps(payload, sort_keys=True)


def game_from_json(text: str) -> NonLocalGame:
    payload = json.loads(text)
    k = int(payload["k"])
    query_bits = tuple(int(b) for b in payload["query_bits"])
    answer_bits = tuple(int(b) for b in payload["answer_bits"])
    q_ranges = [1 << b for b in query_bits]
    a_ranges = [1 << b for b in answer_bits]
    expected = math.prod(q_ranges) * math.prod(a_ranges)
    bits = [int(b) for b in payload["predicate"]]
    if len(bits) != expected:
        raise ValueError("predicate table has wrong length")
    a_strides = [0] * k
    acc = 1
    for i in reversed(range(k)):
        a_strides[i] = acc
        acc *= a_ranges[i]
    q_strides = [0] * k
    qacc = acc
    for i in reversed(range(k)):
        q_strides[i] = qacc
        qacc *= q_ranges[i]

    def predicate(q: tuple[int, ...], a: tuple[int, ...]) -> int:
        idx = sum(qi * s for qi, s in zip(q, q_strides))
        idx += sum(ai * s for ai, s in zip(a, a_strides))
        return bits[idx]

    table = tuple(
        (tuple(int(x) for x in row["q"]), Fraction(row["w"]))
        for row in payload["queries"]
    )
    return NonLocalGame(
        k=k,
        query_bits=query_bits,
        answer_bits=answer_bits,
        query_table=table,
        predicate=predicate,
        name=str(payload.get("name", "custom")),
    )
