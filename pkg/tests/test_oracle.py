from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from gameconn.dynamics import DynamicKind, DynamicParams, construct_dominant_game, construct_sticky_game, sticky_cycle_profiles
from gameconn.errors import ShapeTooLarge
from gameconn.game import GameShape, figure_one_game
from gameconn.graphs import build_best_response_graph
from gameconn.oracle import (
    brute_force_absorption,
    brute_force_reachability,
    enumerate_generic_games,
    enumerate_winner_tables,
    exact_class_proportions,
    generic_game_count,
    transition_matrix,
    winner_table_count,
)

from .helpers import label


@pytest.mark.parametrize("k, count", [((2, 2), 16), ((2, 2, 2), 4096), ((3, 3), 729)])
def test_winner_table_counts(k, count):
    tables = list(enumerate_winner_tables(k))
    assert len(tables) == count == winner_table_count(GameShape(k))
    assert len({t.winners.tobytes() for t in tables}) == count


def test_winner_tables_lexicographic():
    tables = [t.winners.tolist() for t in enumerate_winner_tables((2, 2))]
    assert tables == sorted(tables)
    assert tables[0] == [0, 0, 0, 0] and tables[-1] == [1, 1, 1, 1]
    part = [t.winners.tolist() for t in enumerate_winner_tables((2, 2), start=3, stop=6)]
    assert part == tables[3:6]


def test_generic_game_counts():
    assert sum(1 for _ in enumerate_generic_games((2, 2))) == 16
    assert generic_game_count(GameShape((3, 3))) == 46656
    rng = np.random.default_rng(0)
    checked = 0
    while checked < 5:
        k = tuple(int(x) for x in rng.integers(2, 4, size=int(rng.integers(2, 4))))
        total = generic_game_count(GameShape(k))
        if total > 50_000:
            continue
        assert sum(1 for _ in enumerate_generic_games(k)) == total
        expected = math.prod(math.factorial(ki) ** (math.prod(k) // ki) for ki in k)
        assert total == expected
        checked += 1


def test_enumeration_cap():
    with pytest.raises(ShapeTooLarge):
        next(enumerate_winner_tables(GameShape.uniform(4, 3)))
    with pytest.raises(ShapeTooLarge):
        next(enumerate_generic_games((3, 3), cap=1000))


def test_exact_two_by_two():
    e = exact_class_proportions((2, 2))
    assert (e.total, e.with_pne) == (16, 14)
    assert e.proportion("connected") == 1 and e.proportion("acyclic") == 1
    assert e.proportion("super_connected") == Fraction(2, 14)


def test_exact_three_players():
    e = exact_class_proportions((2, 2, 2))
    assert (e.total, e.with_pne) == (4096, 3134)
    assert e.proportion("connected") == Fraction(1246, 1567)
    assert e.proportion("acyclic") == Fraction(931, 1567)
    assert e.proportion("super_connected") == Fraction(192, 1567)
    assert e.to_dict()["given_pne"]["super_connected"]["numerator"] == 192


def test_exact_three_by_three_matches_figure_values():
    e = exact_class_proportions((3, 3))
    assert e.total == 729
    assert round(float(e.proportion("connected")), 4) == 0.7068
    assert round(float(e.proportion("acyclic")), 4) == 0.9686
    assert e.proportion("super_connected") == 0


def test_game_and_table_enumeration_agree():
    tables = exact_class_proportions((2, 2))
    games = exact_class_proportions((2, 2), ("connected", "super_connected", "globally_connected"))
    assert games.games and not tables.games
    assert games.proportion("connected") == tables.proportion("connected")
    assert games.proportion("super_connected") == tables.proportion("super_connected")


def test_closure_basics():
    assert np.array_equal(brute_force_reachability(np.zeros((5, 5), dtype=bool)), np.eye(5, dtype=bool))
    with pytest.raises(ShapeTooLarge):
        brute_force_reachability(np.zeros((257, 257), dtype=bool))
    g = build_best_response_graph(figure_one_game())
    reach = brute_force_reachability(g)
    s = g.shape
    cycle = [v for v in range(8) if label(s, v) not in ("111", "222")]
    assert reach[np.ix_(cycle, cycle)].all()
    for v in (0, 7):
        assert reach[v].sum() == 1


def test_transition_matrix_is_stochastic():
    g = figure_one_game()
    P = transition_matrix(g, [0.3, 0.5, 0.7])
    assert np.allclose(P.sum(axis=1), 1)
    assert P[0, 0] == 1 and P[7, 7] == 1


def test_absorption_dominant():
    h = brute_force_absorption(construct_dominant_game((2, 2)), DynamicParams(p=0.5))
    assert np.allclose(h, 1)


def test_absorption_sticky():
    s = GameShape.uniform(4, 2)
    h = brute_force_absorption(construct_sticky_game(s), DynamicParams(p=0.5))
    for v in sticky_cycle_profiles(s):
        assert h[v] == 0
    assert h.max() == 1


def test_weakly_acyclic_two_by_two_tables_absorb():
    for t in enumerate_winner_tables((2, 2)):
        from gameconn.connectivity import is_weakly_acyclic

        if is_weakly_acyclic(t):
            assert np.allclose(brute_force_absorption(t, DynamicParams(p=(0.3, 0.6))), 1)


def test_absorption_limits():
    with pytest.raises(ShapeTooLarge):
        brute_force_absorption(construct_dominant_game((2,) * 7), DynamicParams())
    with pytest.raises(ValueError):
        brute_force_absorption(figure_one_game(), DynamicParams(DynamicKind.ONE_AT_A_TIME))
