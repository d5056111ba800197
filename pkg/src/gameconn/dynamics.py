"""Adaptive dynamics on ordinal games and the fixture games used to test them."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels as K
from .errors import InvalidProfile, InvalidShape
from .game import (
    GameLike,
    GameShape,
    OrdinalGame,
    WinnerTable,
    action_dtype,
    as_shape,
    decode_profile,
    dominant_game,
    encode_profile,
    game_from_winners,
    line_of,
    winner_table_of,
)

MAX_RECORDED_STEPS = 10**4
DEFAULT_STEP_CAP = 10**5


class DynamicKind(enum.Enum):
    BEST_RESPONSE_INERTIA = "best-inertia"
    BETTER_RESPONSE_INERTIA = "better-inertia"
    ONE_AT_A_TIME = "one-at-a-time"

    @property
    def code(self) -> int:
        return _CODES[self]


_CODES = {
    DynamicKind.BEST_RESPONSE_INERTIA: K.BEST_INERTIA,
    DynamicKind.BETTER_RESPONSE_INERTIA: K.BETTER_INERTIA,
    DynamicKind.ONE_AT_A_TIME: K.ONE_AT_A_TIME,
}


@dataclass(frozen=True)
class DynamicParams:
    """``p`` is a single probability or one per player; ignored by one-at-a-time."""

    kind: DynamicKind = DynamicKind.BEST_RESPONSE_INERTIA
    p: Union[float, tuple[float, ...]] = 0.5
    step_cap: int = DEFAULT_STEP_CAP

    def __post_init__(self):
        object.__setattr__(self, "kind", DynamicKind(self.kind))
        ps = (self.p,) if np.isscalar(self.p) else tuple(self.p)
        if not ps or not all(0.0 < float(x) < 1.0 for x in ps):
            raise ValueError("inertia probabilities must lie strictly between 0 and 1")
        if int(self.step_cap) < 1:
            raise ValueError("step_cap must be at least 1")

    def p_array(self, n: int) -> np.ndarray:
        if np.isscalar(self.p):
            return np.full(n, float(self.p))
        if len(self.p) != n:
            raise ValueError(f"expected {n} probabilities, got {len(self.p)}")
        return np.asarray(self.p, dtype=np.float64)


@dataclass(frozen=True)
class DynamicsTrace:
    start: int
    steps_taken: int
    absorbed: bool
    final_profile: int
    trajectory: Optional[tuple[int, ...]] = None

    @property
    def absorbing_profile(self) -> Optional[int]:
        return self.final_profile if self.absorbed else None


def _arrays(game: GameLike, kind: DynamicKind):
    table = winner_table_of(game)
    if kind is DynamicKind.BETTER_RESPONSE_INERTIA:
        if not isinstance(game, OrdinalGame):
            raise TypeError("better-response dynamics need full rankings")
        rankings = game.rankings
    else:
        rankings = np.zeros(0, dtype=table.winners.dtype)
    s = table.shape
    return table.winners, rankings, s.ranking_offsets, s.k_array, s.strides, s.line_offsets


def _check(shape: GameShape, v: int) -> int:
    if not 0 <= int(v) < shape.vertex_count:
        raise InvalidProfile(f"profile {v} out of range")
    return int(v)


def step(game: GameLike, current: int, params: DynamicParams, rng: np.random.Generator) -> int:
    """One synchronous update; players draw their coins in index order."""
    shape = game.shape
    w, r, roff, k, strides, loff = _arrays(game, params.kind)
    return int(K.step_profile(np.int64(_check(shape, current)), params.kind.code, params.p_array(shape.n),
                              w, r, roff, k, strides, loff, rng))


def run(
    game: GameLike,
    start: int,
    params: DynamicParams,
    rng: np.random.Generator,
    *,
    record: bool = False,
) -> DynamicsTrace:
    """Iterate ``step`` until a pure equilibrium is reached or the cap is hit.

    With ``record`` the first ``MAX_RECORDED_STEPS`` profiles (start included)
    are kept.
    """
    shape = game.shape
    w, r, roff, k, strides, loff = _arrays(game, params.kind)
    buf = np.empty(min(params.step_cap + 1, MAX_RECORDED_STEPS) if record else 0, dtype=np.int64)
    steps, absorbed, final, nrec = K.run_dynamics(
        np.int64(_check(shape, start)), params.kind.code, params.p_array(shape.n),
        w, r, roff, k, strides, loff, np.int64(params.step_cap), rng, buf,
    )
    traj = tuple(int(x) for x in buf[:nrec]) if record else None
    return DynamicsTrace(int(start), int(steps), bool(absorbed), int(final), traj)


def is_pure_nash(game: GameLike, v: int) -> bool:
    t = winner_table_of(game)
    s = t.shape
    return bool(K.is_sink_profile(np.int64(_check(s, v)), t.winners, s.k_array, s.strides, s.line_offsets))


# --- fixtures -------------------------------------------------------------------

STICKY_CYCLE = ((0, 0), (0, 1), (1, 1), (1, 0))


def sticky_cycle_profiles(shape: GameShape) -> list[int]:
    shape = as_shape(shape)
    rest = (0,) * (shape.n - 2)
    return [encode_profile(shape, head + rest) for head in STICKY_CYCLE]


def sticky_sink_profile(shape: GameShape) -> int:
    """A profile differing from every cycle profile in at least two coordinates."""
    shape = as_shape(shape)
    return encode_profile(shape, (0, 0, 1, 1) + (0,) * (shape.n - 4))


def construct_sticky_game(shape: Union[GameShape, Sequence[int]]) -> OrdinalGame:
    """A game with a pure equilibrium whose best-response graph has a closed 4-cycle.

    The cycle runs (0,0) -> (0,1) -> (1,1) -> (1,0) -> (0,0) in the first two
    coordinates with zeros elsewhere.  Every other line through a cycle
    profile is won by that profile, so nothing escapes the cycle.  The profile
    (0,0,1,1,0,...) shares no line with the cycle and wins all of its lines.
    Remaining lines prefer action 0.
    """
    shape = as_shape(shape)
    if shape.n < 4:
        raise InvalidShape("the sticky construction needs at least four players")
    winners = winner_table_of(dominant_game(shape)).winners.astype(np.int64)
    cycle = sticky_cycle_profiles(shape)
    for v in cycle:
        a = decode_profile(shape, v)
        for i in range(2, shape.n):
            winners[line_of(shape, v, i)] = a[i]
    for a, b in zip(cycle, cycle[1:] + cycle[:1]):
        da, db = decode_profile(shape, a), decode_profile(shape, b)
        i = next(j for j in range(shape.n) if da[j] != db[j])
        winners[line_of(shape, a, i)] = db[i]
    sink = sticky_sink_profile(shape)
    ds = decode_profile(shape, sink)
    for i in range(shape.n):
        winners[line_of(shape, sink, i)] = ds[i]
    return game_from_winners(WinnerTable(shape, winners.astype(action_dtype(shape.kmax))))


def construct_dominant_game(shape: Union[GameShape, Sequence[int]]) -> OrdinalGame:
    """Every line ranks action 0 first, then ascending."""
    return dominant_game(as_shape(shape))
