"""Exhaustive enumeration and brute-force reference algorithms.

Nothing here uses the compiled kernels: graphs are rebuilt from the winner
table (or rankings) with plain numpy, reachability is a dense transitive
closure, and the connectivity classes are evaluated straight from their
definitions.  This keeps the oracle an independent route for checking the
fast implementation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from .connectivity import ALL_FLAGS, FLAG_NAMES, GLOBAL_FLAG_NAMES, classify
from .dynamics import DynamicKind, DynamicParams
from .errors import ShapeTooLarge
from .game import GameLike, GameShape, OrdinalGame, WinnerTable, as_shape, winner_table_of
from .graphs import ResponseGraph

ENUMERATION_CAP = 2**24
CLOSURE_CAP = 256
ABSORPTION_CAP = 64


# --- enumeration ------------------------------------------------------------------------


def winner_table_count(shape: GameShape) -> int:
    return math.prod(ki**lp for ki, lp in zip(shape.k, shape.lines_per_player))


def generic_game_count(shape: GameShape) -> int:
    return math.prod(math.factorial(ki) ** lp for ki, lp in zip(shape.k, shape.lines_per_player))


def _line_choices(shape: GameShape) -> list[int]:
    return [ki for ki, lp in zip(shape.k, shape.lines_per_player) for _ in range(lp)]


def enumerate_winner_tables(
    shape: Union[GameShape, Sequence[int]],
    *,
    cap: int = ENUMERATION_CAP,
    start: int = 0,
    stop: Optional[int] = None,
) -> Iterator[WinnerTable]:
    """Every winner table once, in lexicographic order of the winner vector.

    ``start``/``stop`` select a slice of that order so sweeps can be split.
    """
    shape = as_shape(shape)
    total = winner_table_count(shape)
    if total > cap:
        raise ShapeTooLarge(f"{total} winner tables exceed the enumeration cap of {cap}")
    stop = total if stop is None else min(stop, total)
    product = itertools.product(*(range(c) for c in _line_choices(shape)))
    for w in itertools.islice(product, start, stop):
        yield WinnerTable(shape, np.array(w))


def enumerate_generic_games(
    shape: Union[GameShape, Sequence[int]],
    *,
    cap: int = ENUMERATION_CAP,
    start: int = 0,
    stop: Optional[int] = None,
) -> Iterator[OrdinalGame]:
    """Every assignment of a strict ranking to each line, lexicographically."""
    shape = as_shape(shape)
    total = generic_game_count(shape)
    if total > cap:
        raise ShapeTooLarge(f"{total} games exceed the enumeration cap of {cap}")
    stop = total if stop is None else min(stop, total)
    perms = [list(itertools.permutations(range(c))) for c in _line_choices(shape)]
    for choice in itertools.islice(itertools.product(*perms), start, stop):
        yield OrdinalGame(shape, np.concatenate(choice))


@dataclass(frozen=True)
class ExactProportions:
    shape: GameShape
    total: int
    with_pne: int
    counts: dict = field(default_factory=dict)
    games: bool = False  # True when full games (not winner tables) were enumerated

    def proportion(self, flag: str) -> Fraction:
        """Exact share of ``flag`` among the tables with a pure equilibrium."""
        return Fraction(self.counts[flag], self.with_pne) if self.with_pne else Fraction(0)

    @property
    def pne_proportion(self) -> Fraction:
        return Fraction(self.with_pne, self.total)

    def to_dict(self) -> dict:
        def frac(f: Fraction) -> dict:
            return {"numerator": f.numerator, "denominator": f.denominator, "value": float(f)}

        return {
            "n": self.shape.n,
            "k": list(self.shape.k),
            "enumerated": "games" if self.games else "winner_tables",
            "total": self.total,
            "with_pne": self.with_pne,
            "pne": frac(self.pne_proportion),
            "counts": dict(self.counts),
            "given_pne": {f: frac(self.proportion(f)) for f in self.counts},
        }


def exact_class_proportions(
    shape: Union[GameShape, Sequence[int]],
    flags: Sequence[str] = FLAG_NAMES,
    *,
    cap: int = ENUMERATION_CAP,
) -> ExactProportions:
    """Exact flag counts over all winner tables, or all games if a global flag is asked for.

    Best-response flags depend only on winners, and every table corresponds
    to the same number of games, so the conditioned proportions agree.
    """
    shape = as_shape(shape)
    unknown = set(flags) - set(ALL_FLAGS)
    if unknown:
        raise ValueError(f"unknown flags {sorted(unknown)}")
    need_games = any(f in GLOBAL_FLAG_NAMES for f in flags)
    source = enumerate_generic_games(shape, cap=cap) if need_games else enumerate_winner_tables(shape, cap=cap)
    counts = dict.fromkeys(flags, 0)
    total = with_pne = 0
    for item in source:
        rec = classify(item, global_flags=need_games)
        total += 1
        with_pne += rec.num_pne > 0
        for f in flags:
            counts[f] += bool(getattr(rec, f))
    return ExactProportions(shape, total, with_pne, counts, need_games)


# --- brute-force graphs and classes -----------------------------------------------------


def _profiles(shape: GameShape) -> np.ndarray:
    """All profiles as rows, last player varying fastest."""
    return np.array(list(itertools.product(*(range(ki) for ki in shape.k))), dtype=np.int64).reshape(
        shape.vertex_count, shape.n
    )


def _line_rows(shape: GameShape, prof: np.ndarray, i: int) -> np.ndarray:
    """Line index of every profile for player ``i`` (context = the other coordinates)."""
    dims = tuple(kj for j, kj in enumerate(shape.k) if j != i)
    others = np.delete(prof, i, axis=1)
    ctx = np.ravel_multi_index(others.T, dims) if dims else np.zeros(len(prof), dtype=np.int64)
    return int(shape.line_offsets[i]) + ctx


def best_response_adjacency(source: GameLike) -> np.ndarray:
    table = winner_table_of(source)
    shape = table.shape
    prof = _profiles(shape)
    nv = shape.vertex_count
    adj = np.zeros((nv, nv), dtype=bool)
    for i in range(shape.n):
        lines = _line_rows(shape, prof, i)
        win = table.winners.astype(np.int64)[lines]
        for v in range(nv):
            if prof[v, i] != win[v]:
                w = prof[v].copy()
                w[i] = win[v]
                adj[v, np.ravel_multi_index(tuple(w), shape.k)] = True
    return adj


def better_response_adjacency(game: OrdinalGame) -> np.ndarray:
    shape = game.shape
    prof = _profiles(shape)
    nv = shape.vertex_count
    adj = np.zeros((nv, nv), dtype=bool)
    for i in range(shape.n):
        lines = _line_rows(shape, prof, i)
        for v in range(nv):
            ranking = list(game.ranking(int(lines[v])))
            here = ranking.index(prof[v, i])
            for a in ranking[:here]:
                w = prof[v].copy()
                w[i] = a
                adj[v, np.ravel_multi_index(tuple(w), shape.k)] = True
    return adj


def graph_adjacency(g: ResponseGraph) -> np.ndarray:
    adj = np.zeros((g.vertex_count, g.vertex_count), dtype=bool)
    for v, w in g.edges():
        adj[v, w] = True
    return adj


def transitive_closure(adj: np.ndarray) -> np.ndarray:
    """Reflexive-transitive closure by repeated squaring."""
    nv = adj.shape[0]
    if nv > CLOSURE_CAP:
        raise ShapeTooLarge(f"brute-force closure is limited to {CLOSURE_CAP} vertices")
    r = (adj | np.eye(nv, dtype=bool)).astype(np.int64)
    while True:
        nxt = ((r @ r) > 0).astype(np.int64)
        if np.array_equal(nxt, r):
            return r.astype(bool)
        r = nxt


def brute_force_reachability(g: Union[ResponseGraph, np.ndarray]) -> np.ndarray:
    """``R[v, w]`` is True when ``w`` is reachable from ``v`` (every vertex reaches itself)."""
    adj = g if isinstance(g, np.ndarray) else graph_adjacency(g)
    return transitive_closure(adj)


@dataclass(frozen=True)
class BruteClasses:
    num_pne: int
    acyclic: bool
    weakly_acyclic: bool
    connected: bool
    super_connected: bool
    v_connected: tuple
    v_super_connected: tuple


def brute_force_classes(adj: np.ndarray) -> BruteClasses:
    """Connectivity classes evaluated directly from their definitions."""
    nv = adj.shape[0]
    reach = transitive_closure(adj)
    strict = (reach.astype(np.int64) @ adj.astype(np.int64)) > 0  # paths of length >= 1
    sink = ~adj.any(axis=1)
    source = ~adj.any(axis=0)
    has_sink = bool(sink.any())
    acyclic = not bool(np.diag(strict).any())
    weakly = all(reach[v, sink].any() for v in range(nv))
    vc = [has_sink and (sink[v] or bool(reach[v, sink].all())) for v in range(nv)]
    vsc = [has_sink and (sink[v] or bool(reach[v, ~source].all())) for v in range(nv)]
    return BruteClasses(
        num_pne=int(sink.sum()),
        acyclic=acyclic,
        weakly_acyclic=has_sink and weakly,
        connected=all(vc),
        super_connected=all(vsc),
        v_connected=tuple(vc),
        v_super_connected=tuple(vsc),
    )


def brute_force_record(source: GameLike) -> dict:
    """Flag values for a game, with global flags when rankings are available."""
    out = {}
    b = brute_force_classes(best_response_adjacency(source))
    out.update(num_pne=b.num_pne, **{f: getattr(b, f) for f in FLAG_NAMES})
    if isinstance(source, OrdinalGame):
        gb = brute_force_classes(better_response_adjacency(source))
        out.update({"globally_" + f: getattr(gb, f) for f in FLAG_NAMES})
    return out


# --- exact absorption ------------------------------------------------------------------


def transition_matrix(game: GameLike, p: Sequence[float]) -> np.ndarray:
    """Exact one-step kernel of best-response dynamics with inertia."""
    table = winner_table_of(game)
    shape = table.shape
    prof = _profiles(shape)
    best = np.stack(
        [table.winners.astype(np.int64)[_line_rows(shape, prof, i)] for i in range(shape.n)], axis=1
    )
    nv = shape.vertex_count
    P = np.zeros((nv, nv))
    for v in range(nv):
        options = []
        for i in range(shape.n):
            cur, b = int(prof[v, i]), int(best[v, i])
            options.append([(cur, 1.0)] if cur == b else [(cur, 1.0 - p[i]), (b, p[i])])
        for combo in itertools.product(*options):
            coords = tuple(a for a, _ in combo)
            P[v, np.ravel_multi_index(coords, shape.k)] += math.prod(q for _, q in combo)
    return P


def brute_force_absorption(game: GameLike, params: DynamicParams) -> np.ndarray:
    """Probability of eventually reaching a pure equilibrium, from every start."""
    if params.kind is not DynamicKind.BEST_RESPONSE_INERTIA:
        raise ValueError("exact absorption is implemented for best-response dynamics with inertia only")
    shape = game.shape
    if shape.vertex_count > ABSORPTION_CAP:
        raise ShapeTooLarge(f"exact absorption is limited to {ABSORPTION_CAP} profiles")
    P = transition_matrix(game, params.p_array(shape.n))
    absorbing = np.isclose(np.diag(P), 1.0)
    reach = transitive_closure(P > 0)
    can_absorb = reach[:, absorbing].any(axis=1)
    h = np.zeros(shape.vertex_count)
    h[absorbing] = 1.0
    T = np.flatnonzero(can_absorb & ~absorbing)
    if T.size:
        Q = P[np.ix_(T, T)]
        b = P[np.ix_(T, np.flatnonzero(absorbing))].sum(axis=1)
        h[T] = np.linalg.solve(np.eye(T.size) - Q, b)
    return h
