"""Game definitions, brute-force values, and the built-in strategies."""

import math
from fractions import Fraction

import numpy as np
import pytest

from gamecompiler.games import (
    ConditionalQuerySampler,
    NonLocalGame,
    builtin_game,
    classical_value_bruteforce,
    game_from_json,
    game_to_json,
    quantum_strategy_value,
    strategy_pair_value,
)
from gamecompiler.rngutil import labeled_rng

COS_PI_8_SQ = math.cos(math.pi / 8) ** 2


class TestBuiltinValues:
    def test_chsh_classical_value(self):
        game, _ = builtin_game("chsh")
        assert classical_value_bruteforce(game) == Fraction(3, 4)

    def test_chsh_quantum_value(self):
        game, strategy = builtin_game("chsh")
        value = quantum_strategy_value(game, strategy)
        assert abs(value - COS_PI_8_SQ) < 1e-9

    def test_ghz3_values(self):
        game, strategy = builtin_game("ghz3")
        assert classical_value_bruteforce(game) == Fraction(3, 4)
        assert abs(quantum_strategy_value(game, strategy) - 1.0) < 1e-9

    def test_magic_square_values(self):
        game, strategy = builtin_game("magic_square")
        assert classical_value_bruteforce(game) == Fraction(8, 9)
        assert abs(quantum_strategy_value(game, strategy) - 1.0) < 1e-9

    def test_unknown_game(self):
        with pytest.raises(ValueError):
            builtin_game("nosuch")


class TestStrategyPairValue:
    def test_best_chsh_deterministic_pair(self):
        game, _ = builtin_game("chsh")
        # constant zero answers win except on (1, 1)
        fns = (lambda q: 0, lambda q: 0)
        assert strategy_pair_value(game, fns) == Fraction(3, 4)

    def test_losing_pair(self):
        game, _ = builtin_game("chsh")
        fns = (lambda q: 0, lambda q: 1)
        assert strategy_pair_value(game, fns) == Fraction(1, 4)

    def test_ghz3_triples(self):
        game, _ = builtin_game("ghz3")
        # all zeros only wins the all-zero query
        assert strategy_pair_value(game, (lambda q: 0,) * 3) == Fraction(1, 4)
        # an optimal triple: answers 0, 0, and the raw query bit
        fns = (lambda q: 0, lambda q: 0, lambda q: q)
        assert strategy_pair_value(game, fns) == Fraction(3, 4)


class TestQueryDistribution:
    def test_table_weights_normalized(self):
        for name in ("chsh", "ghz3", "magic_square"):
            game, _ = builtin_game(name)
            assert sum(w for _, w in game.query_table) == 1

    def test_sampler_frequencies(self):
        game, _ = builtin_game("chsh")
        rng = labeled_rng(21, "qfreq")
        counts = {}
        for _ in range(8000):
            q = game.sample_queries(rng)
            counts[q] = counts.get(q, 0) + 1
        for q, w in game.query_table:
            assert abs(counts.get(q, 0) / 8000 - float(w)) < 0.02

    def test_conditional_sampler_keeps_full_tuples(self):
        game, _ = builtin_game("chsh")
        sampler = ConditionalQuerySampler(game, player=0, value=1)
        rng = labeled_rng(22, "cond")
        for _ in range(50):
            q = sampler.sample(rng)
            assert q[0] == 1
            assert len(q) == 2

    def test_conditional_sampler_counts(self):
        game, _ = builtin_game("chsh")
        sampler = ConditionalQuerySampler(game, player=0, value=0)
        rng = labeled_rng(23, "condcount")
        counts = sampler.sample_counts(1200, rng)
        assert sum(counts.values()) == 1200
        assert all(q[0] == 0 for q in counts)
        # conditional law is uniform over the two second queries
        for q in counts:
            assert abs(counts[q] / 1200 - 0.5) < 0.06


class TestSerialization:
    def test_round_trip(self):
        game, _ = builtin_game("chsh")
        clone = game_from_json(game_to_json(game))
        assert clone.k == game.k
        assert clone.query_bits == game.query_bits
        assert clone.answer_bits == game.answer_bits
        assert clone.query_table == game.query_table
        for q, _ in game.query_table:
            for a0 in range(4):
                a = (a0 >> 1, a0 & 1)
                assert clone.predicate(q, a) == game.predicate(q, a)
        assert classical_value_bruteforce(clone) == Fraction(3, 4)


class TestValidation:
    def test_bad_weight_sum(self):
        with pytest.raises(ValueError):
            NonLocalGame(
                k=2,
                query_bits=(1, 1),
                answer_bits=(1, 1),
                query_table=(((0, 0), Fraction(1, 2)),),
                predicate=lambda q, a: 1,
                name="bad",
            )

    def test_brute_force_guard(self):
        # 2 players, 8-bit answers on 4 queries each: search space too large
        table = tuple(((q, q), Fraction(1, 4)) for q in range(4))
        game = NonLocalGame(
            k=2,
            query_bits=(2, 2),
            answer_bits=(8, 8),
            query_table=table,
            predicate=lambda q, a: 1,
            name="huge",
        )
        with pytest.raises(ValueError):
            classical_value_bruteforce(game)


def test_quantum_beats_classical_on_chsh():
    game, strategy = builtin_game("chsh")
    classical = float(classical_value_bruteforce(game))
    assert quantum_strategy_value(game, strategy) > classical + 0.1
