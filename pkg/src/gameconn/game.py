"""Finite ordinal generic games.

A game is stored through its line restrictions only: for every line (one
player varying their action while everyone else is fixed) we keep that
player's strict ranking of their actions.  Action profiles are vertices,
encoded as mixed-radix integers with the last player as the least
significant digit.

Lines are numbered globally: ascending player first, then ascending
mixed-radix encoding of the remaining ``n - 1`` coordinates (the context).
"""

from __future__ import annotations

import json
import math
from functools import cached_property
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import InvalidGame, InvalidLine, InvalidProfile, InvalidShape, ShapeTooLarge

FORMAT_TAG = "gameconn-v1"
DEFAULT_VERTEX_CAP = 2**32


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def action_dtype(kmax: int) -> np.dtype:
    return np.dtype(np.uint8) if kmax <= 255 else np.dtype(np.int32)


@dataclass(frozen=True)
class GameShape:
    """Number of actions of each player; ``n = len(k)``."""

    k: tuple[int, ...]
    cap: int = field(default=DEFAULT_VERTEX_CAP, compare=False, repr=False)

    def __post_init__(self):
        k = tuple(int(x) for x in self.k)
        object.__setattr__(self, "k", k)
        if len(k) < 2:
            raise InvalidShape(f"need at least 2 players, got {len(k)}")
        if any(x < 2 for x in k):
            raise InvalidShape(f"every player needs at least 2 actions, got {k}")
        if math.prod(k) > self.cap:
            raise ShapeTooLarge(
                f"shape {k} has {math.prod(k)} vertices, above the cap of {self.cap}"
            )

    @classmethod
    def uniform(cls, n: int, k: int, **kw) -> "GameShape":
        return cls((k,) * n, **kw)

    @property
    def n(self) -> int:
        return len(self.k)

    @cached_property
    def kmax(self) -> int:
        return max(self.k)

    @cached_property
    def vertex_count(self) -> int:
        return math.prod(self.k)

    @cached_property
    def lines_per_player(self) -> tuple[int, ...]:
        v = self.vertex_count
        return tuple(v // ki for ki in self.k)

    @cached_property
    def line_count(self) -> int:
        return sum(self.lines_per_player)

    @cached_property
    def strides(self) -> np.ndarray:
        s = np.ones(self.n, dtype=np.int64)
        for i in range(self.n - 2, -1, -1):
            s[i] = s[i + 1] * self.k[i + 1]
        return _freeze(s)

    @cached_property
    def line_offsets(self) -> np.ndarray:
        """Global id of the first line of each player."""
        return _freeze(np.concatenate(([0], np.cumsum(self.lines_per_player)[:-1])).astype(np.int64))

    @cached_property
    def ranking_offsets(self) -> np.ndarray:
        """Start of each player's block in a flat ranking array."""
        sizes = [lp * ki for lp, ki in zip(self.lines_per_player, self.k)]
        return _freeze(np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.int64))

    @cached_property
    def k_array(self) -> np.ndarray:
        return _freeze(np.asarray(self.k, dtype=np.int64))

    def label(self) -> str:
        """Compact text form: ``2`` for uniform shapes, ``2-3-2`` otherwise."""
        if len(set(self.k)) == 1:
            return str(self.k[0])
        return "-".join(map(str, self.k))

    def __str__(self) -> str:
        return f"({self.n},{self.k})"


def as_shape(shape: Union[GameShape, Sequence[int]]) -> GameShape:
    return shape if isinstance(shape, GameShape) else GameShape(tuple(shape))


# --- profiles -------------------------------------------------------------


def encode_profile(shape: GameShape, coords: Sequence[int]) -> int:
    if len(coords) != shape.n:
        raise InvalidProfile(f"profile {tuple(coords)} has {len(coords)} coordinates, expected {shape.n}")
    v = 0
    for c, ki in zip(coords, shape.k):
        if not 0 <= c < ki:
            raise InvalidProfile(f"profile {tuple(coords)} out of range for k={shape.k}")
        v = v * ki + int(c)
    return v


def decode_profile(shape: GameShape, v: int) -> tuple[int, ...]:
    if not 0 <= v < shape.vertex_count:
        raise InvalidProfile(f"vertex {v} out of range [0, {shape.vertex_count})")
    out = []
    for ki in reversed(shape.k):
        v, r = divmod(v, ki)
        out.append(r)
    return tuple(reversed(out))


def decode_all(shape: GameShape) -> np.ndarray:
    """(vertex_count, n) array of coordinates, vertex order."""
    v = np.arange(shape.vertex_count, dtype=np.int64)
    return ((v[:, None] // shape.strides[None, :]) % shape.k_array[None, :]).astype(np.int64)


# --- lines ------------------------------------------------------------------


@dataclass(frozen=True)
class LineId:
    player: int
    context: tuple[int, ...]


def _context_index(shape: GameShape, player: int, context: Sequence[int]) -> int:
    ks = [shape.k[j] for j in range(shape.n) if j != player]
    if len(context) != len(ks):
        raise InvalidLine(f"context {tuple(context)} must have {len(ks)} coordinates")
    idx = 0
    for c, kj in zip(context, ks):
        if not 0 <= c < kj:
            raise InvalidLine(f"context {tuple(context)} out of range for player {player}")
        idx = idx * kj + int(c)
    return idx


def line_index(shape: GameShape, line: LineId) -> int:
    """Global id of a line."""
    if not 0 <= line.player < shape.n:
        raise InvalidLine(f"player {line.player} out of range")
    return int(shape.line_offsets[line.player]) + _context_index(shape, line.player, line.context)


def line_from_index(shape: GameShape, index: int) -> LineId:
    if not 0 <= index < shape.line_count:
        raise InvalidLine(f"line {index} out of range [0, {shape.line_count})")
    offsets = shape.line_offsets
    player = int(np.searchsorted(offsets, index, side="right") - 1)
    ctx = index - int(offsets[player])
    ks = [shape.k[j] for j in range(shape.n) if j != player]
    context = []
    for kj in reversed(ks):
        ctx, r = divmod(ctx, kj)
        context.append(r)
    return LineId(player, tuple(reversed(context)))


def line_of(shape: GameShape, v: int, player: int) -> int:
    """Global id of the line in coordinate ``player`` through vertex ``v``."""
    s = int(shape.strides[player])
    ctx = (v // (s * shape.k[player])) * s + v % s
    return int(shape.line_offsets[player]) + ctx


def line_base_vertex(shape: GameShape, index: int) -> tuple[int, int]:
    """(player, vertex with the varying coordinate set to 0) for a line id."""
    line = line_from_index(shape, index)
    coords = list(line.context)
    coords.insert(line.player, 0)
    return line.player, encode_profile(shape, coords)


def line_members(shape: GameShape, line: Union[LineId, int]) -> list[int]:
    """Vertices of a line, sorted by the varying coordinate."""
    index = line if isinstance(line, int) else line_index(shape, line)
    player, base = line_base_vertex(shape, index)
    s = int(shape.strides[player])
    return [base + a * s for a in range(shape.k[player])]


def lines_of_vertices(shape: GameShape, player: int) -> np.ndarray:
    """Line id in coordinate ``player`` for every vertex (vectorised)."""
    v = np.arange(shape.vertex_count, dtype=np.int64)
    s = int(shape.strides[player])
    return shape.line_offsets[player] + (v // (s * shape.k[player])) * s + v % s


# --- games --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WinnerTable:
    """One winning action per line; determines the best-response graph."""

    shape: GameShape
    winners: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.winners)
        if w.shape != (self.shape.line_count,):
            raise InvalidGame(f"expected {self.shape.line_count} winners, got shape {w.shape}")
        bound = np.repeat(self.shape.k_array, self.shape.lines_per_player)
        if w.size and (w.min() < 0 or np.any(w >= bound)):
            raise InvalidGame("winner action out of range")
        object.__setattr__(self, "winners", _freeze(w.astype(action_dtype(self.shape.kmax), copy=True)))

    def __eq__(self, other):
        return (
            isinstance(other, WinnerTable)
            and self.shape == other.shape
            and np.array_equal(self.winners, other.winners)
        )

    def __hash__(self):
        return hash((self.shape, self.winners.tobytes()))


@dataclass(frozen=True, eq=False)
class OrdinalGame:
    """Per-line strict rankings, best action first.

    ``rankings`` is flat: player ``i``'s lines occupy
    ``shape.ranking_offsets[i]`` onwards, ``k[i]`` entries per line in
    canonical line order.
    """

    shape: GameShape
    rankings: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rankings).reshape(-1)
        expected = sum(lp * ki for lp, ki in zip(self.shape.lines_per_player, self.shape.k))
        if r.size != expected:
            raise InvalidGame(f"expected {expected} ranking entries, got {r.size}")
        r = r.astype(action_dtype(self.shape.kmax), copy=True)
        for i, ki in enumerate(self.shape.k):
            block = self.player_rankings_of(r, i)
            if not np.array_equal(np.sort(block, axis=1), np.broadcast_to(np.arange(ki), block.shape)):
                raise InvalidGame(f"player {i} has a ranking that is not a permutation (ties are not allowed)")
        object.__setattr__(self, "rankings", _freeze(r))

    def player_rankings_of(self, flat: np.ndarray, player: int) -> np.ndarray:
        start = int(self.shape.ranking_offsets[player])
        lp, ki = self.shape.lines_per_player[player], self.shape.k[player]
        return flat[start : start + lp * ki].reshape(lp, ki)

    def player_rankings(self, player: int) -> np.ndarray:
        """(lines of player, k[player]) array of rankings."""
        return self.player_rankings_of(self.rankings, player)

    def ranking(self, line: Union[LineId, int]) -> np.ndarray:
        index = line if isinstance(line, int) else line_index(self.shape, line)
        if not 0 <= index < self.shape.line_count:
            raise InvalidLine(f"line {index} out of range")
        player = int(np.searchsorted(self.shape.line_offsets, index, side="right") - 1)
        return self.player_rankings(player)[index - int(self.shape.line_offsets[player])]

    def winner_table(self) -> WinnerTable:
        return WinnerTable(
            self.shape,
            np.concatenate([self.player_rankings(i)[:, 0] for i in range(self.shape.n)]),
        )

    def __eq__(self, other):
        return (
            isinstance(other, OrdinalGame)
            and self.shape == other.shape
            and np.array_equal(self.rankings, other.rankings)
        )

    def __hash__(self):
        return hash((self.shape, self.rankings.tobytes()))


GameLike = Union[OrdinalGame, WinnerTable]


def winner_table_of(source: GameLike) -> WinnerTable:
    return source.winner_table() if isinstance(source, OrdinalGame) else source


def game_from_rankings(shape: GameShape, per_player: Sequence[np.ndarray]) -> OrdinalGame:
    """Build a game from one (lines, k[i]) ranking array per player."""
    return OrdinalGame(shape, np.concatenate([np.asarray(b).reshape(-1) for b in per_player]))


def game_from_payoffs(payoffs: np.ndarray) -> OrdinalGame:
    """Ordinal game from a utility array of shape ``(*k, n)``.

    Raises InvalidGame if any line has a payoff tie.
    """
    payoffs = np.asarray(payoffs)
    shape = GameShape(payoffs.shape[:-1])
    flat = payoffs.reshape(shape.vertex_count, shape.n)
    blocks = []
    for i in range(shape.n):
        members = lines_of_vertices(shape, i)
        order = np.argsort(members, kind="stable")
        # vertices grouped by line, ascending action within each line
        u = flat[order, i].reshape(shape.lines_per_player[i], shape.k[i])
        srt = np.sort(u, axis=1)
        if np.any(srt[:, 1:] == srt[:, :-1]):
            raise InvalidGame(f"payoff tie for player {i}; only generic games are supported")
        blocks.append(np.argsort(-u, axis=1, kind="stable"))
    return game_from_rankings(shape, blocks)


def best_response(game: GameLike, line: Union[LineId, int]) -> int:
    """The unique best action on a line."""
    index = line if isinstance(line, int) else line_index(game.shape, line)
    if not 0 <= index < game.shape.line_count:
        raise InvalidLine(f"line {index} out of range")
    return int(winner_table_of(game).winners[index])


def win_counts(table: WinnerTable) -> np.ndarray:
    """Number of incident lines each vertex wins."""
    shape = table.shape
    counts = np.zeros(shape.vertex_count, dtype=np.int64)
    v = np.arange(shape.vertex_count, dtype=np.int64)
    w = table.winners.astype(np.int64)
    for i in range(shape.n):
        s = int(shape.strides[i])
        digit = (v // s) % shape.k[i]
        counts += w[lines_of_vertices(shape, i)] == digit
    return counts


def pure_nash_profiles(game: GameLike) -> frozenset[int]:
    """Profiles that win all ``n`` of their lines."""
    table = winner_table_of(game)
    return frozenset(np.flatnonzero(win_counts(table) == table.shape.n).tolist())


def game_from_winners(table: WinnerTable) -> OrdinalGame:
    """Canonical game for a winner table: winner first, other actions ascending."""
    shape = table.shape
    blocks = []
    for i, ki in enumerate(shape.k):
        lo = int(shape.line_offsets[i])
        w = table.winners[lo : lo + shape.lines_per_player[i]].astype(np.int64)[:, None]
        rest = np.tile(np.arange(ki - 1, dtype=np.int64), (w.shape[0], 1))
        rest += rest >= w
        blocks.append(np.hstack([w, rest]))
    return game_from_rankings(shape, blocks)


# --- fixtures -------------------------------------------------------------------


def dominant_game(shape: GameShape) -> OrdinalGame:
    """Every line ranks its actions in ascending order (action 0 best)."""
    return game_from_rankings(
        shape,
        [np.tile(np.arange(ki), (lp, 1)) for lp, ki in zip(shape.lines_per_player, shape.k)],
    )


def figure_one_game() -> OrdinalGame:
    """Three players, two actions each; pure equilibria at (A,A,A) and (B,B,B).

    Axis order of the payoff array is (player 1, player 2, player 3); A=0, B=1.
    """
    u = np.zeros((2, 2, 2, 3))
    u[0, 0, 0] = (1, 1, 1)
    u[0, 1, 0] = (0, 0, 1)
    u[1, 0, 0] = (0, 1, 0)
    u[1, 1, 0] = (1, 0, 0)
    u[0, 0, 1] = (1, 0, 0)
    u[0, 1, 1] = (0, 1, 0)
    u[1, 0, 1] = (0, 0, 1)
    u[1, 1, 1] = (1, 1, 1)
    return game_from_payoffs(u)


def table_from_edges(shape: GameShape, edges: Iterable[tuple[Sequence[int], Sequence[int]]]) -> WinnerTable:
    """Winner table whose best-response graph has the given edges.

    Each edge names two profiles differing in one coordinate; its head wins
    that line.  Lines without an edge are rejected, as are conflicting edges.
    """
    winners = np.full(shape.line_count, -1, dtype=np.int64)
    for tail, head in edges:
        diff = [i for i in range(shape.n) if tail[i] != head[i]]
        if len(diff) != 1:
            raise InvalidGame(f"edge {tail}->{head} does not lie on a line")
        i = diff[0]
        L = line_of(shape, encode_profile(shape, tail), i)
        if winners[L] not in (-1, head[i]):
            raise InvalidGame(f"conflicting winners on line {L}")
        winners[L] = head[i]
    if np.any(winners < 0):
        raise InvalidGame("some lines have no winner")
    return WinnerTable(shape, winners)


# --- JSON ---------------------------------------------------------------------
# Serialized files are 1-based (players, actions, contexts), matching the
# [k_i] = {1..k_i} convention; everything in memory is 0-based.


def _iter_lines(shape: GameShape):
    for L in range(shape.line_count):
        yield L, line_from_index(shape, L)


def game_to_dict(game: GameLike) -> dict:
    shape = game.shape
    out: dict = {"format": FORMAT_TAG, "n": shape.n, "k": list(shape.k)}
    if isinstance(game, WinnerTable):
        out["winners"] = (game.winners.astype(np.int64) + 1).tolist()
        return out
    lines = []
    for L, line in _iter_lines(shape):
        lines.append(
            {
                "player": line.player + 1,
                "context": [c + 1 for c in line.context],
                "ranking": (game.ranking(L).astype(np.int64) + 1).tolist(),
            }
        )
    out["lines"] = lines
    return out


def game_from_dict(data: dict) -> GameLike:
    if data.get("format") != FORMAT_TAG:
        raise InvalidGame(f"unsupported format {data.get('format')!r}, expected {FORMAT_TAG!r}")
    try:
        k = tuple(int(x) for x in data["k"])
        n = int(data["n"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidGame(f"missing or malformed n/k: {exc}") from None
    if n != len(k):
        raise InvalidGame(f"n={n} does not match len(k)={len(k)}")
    shape = GameShape(k)
    if "winners" in data:
        return WinnerTable(shape, np.asarray(data["winners"], dtype=np.int64) - 1)
    lines = data.get("lines")
    if lines is None or len(lines) != shape.line_count:
        raise InvalidGame(f"expected {shape.line_count} lines")
    flat = np.empty(sum(lp * ki for lp, ki in zip(shape.lines_per_player, shape.k)), dtype=np.int64)
    offsets = shape.ranking_offsets
    for L, entry in enumerate(lines):
        line = LineId(int(entry["player"]) - 1, tuple(int(c) - 1 for c in entry["context"]))
        if line_index(shape, line) != L:
            raise InvalidGame(f"line {L} is out of canonical order")
        ki = shape.k[line.player]
        ranking = np.asarray(entry["ranking"], dtype=np.int64) - 1
        if ranking.shape != (ki,):
            raise InvalidGame(f"line {L}: ranking must list {ki} actions")
        start = int(offsets[line.player]) + (L - int(shape.line_offsets[line.player])) * ki
        flat[start : start + ki] = ranking
    return OrdinalGame(shape, flat)


def dump_game(game: GameLike, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(game_to_dict(game), indent=1) + "\n", encoding="utf-8")


def load_game(path: Union[str, Path]) -> GameLike:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidGame(f"{path}: not valid JSON ({exc})") from None
    return game_from_dict(data)
