"""Seeded uniform sampling of generic games and winner tables.

Trial streams are derived in counter mode: the pair (master seed, trial
index), optionally prefixed by a stream key such as the shape of an
experiment cell, is hashed by :class:`numpy.random.SeedSequence` into a
PCG64 state.  The derivation depends on nothing else, so results do not
change with worker count or scheduling.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels as K
from .errors import ConditioningTimeout
from .game import GameShape, OrdinalGame, WinnerTable, action_dtype, game_from_rankings

DEFAULT_MAX_REJECTIONS = 10**6
SEED_ENV = "GAMECONN_SEED"
_U64 = 2**64


class Condition(enum.Enum):
    UNCONDITIONED = "none"
    AT_LEAST_ONE_PNE = "pne"
    EXACTLY_Z_PNE = "pne="


@dataclass(frozen=True)
class SampleCondition:
    variant: Condition = Condition.UNCONDITIONED
    z: int = 0

    def __post_init__(self):
        if self.variant is Condition.EXACTLY_Z_PNE and self.z < 0:
            raise ValueError("z must be non-negative")

    @classmethod
    def parse(cls, text: str) -> "SampleCondition":
        """``none``, ``pne`` (at least one) or ``pne=z`` (exactly z)."""
        text = text.strip().lower()
        if text == "none":
            return cls()
        if text == "pne":
            return cls(Condition.AT_LEAST_ONE_PNE)
        if text.startswith("pne="):
            try:
                return cls(Condition.EXACTLY_Z_PNE, int(text[4:]))
            except ValueError:
                pass
        raise ValueError(f"bad condition {text!r}; expected none, pne or pne=<z>")

    def accepts(self, num_pne: int) -> bool:
        if self.variant is Condition.UNCONDITIONED:
            return True
        if self.variant is Condition.AT_LEAST_ONE_PNE:
            return num_pne >= 1
        return num_pne == self.z

    def __str__(self) -> str:
        if self.variant is Condition.EXACTLY_Z_PNE:
            return f"pne={self.z}"
        return self.variant.value


UNCONDITIONED = SampleCondition()
AT_LEAST_ONE_PNE = SampleCondition(Condition.AT_LEAST_ONE_PNE)


def exactly(z: int) -> SampleCondition:
    return SampleCondition(Condition.EXACTLY_Z_PNE, z)


@dataclass(frozen=True)
class TrialSeed:
    master_seed: int
    trial_index: int


def derive_trial_rng(seed: TrialSeed, stream: Sequence[int] = ()) -> np.random.Generator:
    """Independent generator for one trial.

    ``SeedSequence(entropy=master_seed mod 2**64, spawn_key=(*stream, trial_index))``
    feeding PCG64.
    """
    if seed.trial_index < 0:
        raise ValueError("trial index must be non-negative")
    ss = np.random.SeedSequence(
        entropy=int(seed.master_seed) % _U64,
        spawn_key=tuple(int(x) for x in stream) + (int(seed.trial_index),),
    )
    return np.random.Generator(np.random.PCG64(ss))


def seed_from_env(default: Optional[int] = None) -> Optional[int]:
    value = os.environ.get(SEED_ENV)
    if value is None or value.strip() == "":
        return default
    return int(value, 0) % _U64


def shape_stream(shape: GameShape) -> tuple[int, ...]:
    return (shape.n, *shape.k)


# --- samplers -----------------------------------------------------------------------


def _winners(shape: GameShape, rng: np.random.Generator) -> np.ndarray:
    dt = action_dtype(shape.kmax)
    return np.concatenate(
        [rng.integers(0, ki, size=lp, dtype=dt) for ki, lp in zip(shape.k, shape.lines_per_player)]
    )


def sample_winner_table(shape: GameShape, rng: np.random.Generator) -> WinnerTable:
    """Independent uniform winner on every line."""
    return WinnerTable(shape, _winners(shape, rng))


def sample_generic_game(shape: GameShape, rng: np.random.Generator) -> OrdinalGame:
    """Independent uniform permutation (Fisher-Yates) on every line."""
    blocks = [
        rng.permuted(np.tile(np.arange(ki, dtype=np.int64), (lp, 1)), axis=1)
        for ki, lp in zip(shape.k, shape.lines_per_player)
    ]
    return game_from_rankings(shape, blocks)


def complete_rankings(table: WinnerTable, rng: np.random.Generator) -> OrdinalGame:
    """Uniform game among those with the given winners.

    The actions below the winner are a uniform permutation of the rest, so
    sampling winners first and completing afterwards gives the uniform law.
    """
    shape = table.shape
    blocks = []
    start = 0
    for ki, lp in zip(shape.k, shape.lines_per_player):
        w = table.winners[start : start + lp].astype(np.int64)[:, None]
        start += lp
        rest = rng.permuted(np.tile(np.arange(ki - 1, dtype=np.int64), (lp, 1)), axis=1)
        rest += rest >= w
        blocks.append(np.hstack([w, rest]))
    return game_from_rankings(shape, blocks)


def count_pne(table: WinnerTable) -> int:
    s = table.shape
    return int(K.count_sinks(table.winners, s.k_array, s.strides, s.line_offsets, s.vertex_count))


def sample_conditioned_table(
    shape: GameShape,
    condition: SampleCondition,
    rng: np.random.Generator,
    max_rejections: int = DEFAULT_MAX_REJECTIONS,
) -> tuple[WinnerTable, int]:
    """Rejection sampling on the pure-equilibrium count of the winner table."""
    if condition.variant is Condition.EXACTLY_Z_PNE and condition.z > shape.vertex_count:
        raise ValueError(f"cannot have {condition.z} equilibria among {shape.vertex_count} profiles")
    rejections = 0
    while True:
        table = sample_winner_table(shape, rng)
        if condition.variant is Condition.UNCONDITIONED or condition.accepts(count_pne(table)):
            return table, rejections
        rejections += 1
        if rejections > max_rejections:
            raise ConditioningTimeout(
                f"no sample satisfying {condition} after {max_rejections} rejections at shape {shape}",
                rejections,
            )


def sample_conditioned(
    shape: GameShape,
    condition: SampleCondition,
    rng: np.random.Generator,
    max_rejections: int = DEFAULT_MAX_REJECTIONS,
) -> tuple[OrdinalGame, int]:
    """Uniform generic game conditioned on its equilibrium count.

    Winners are rejection-sampled first; the remaining ranks are then drawn
    once for the accepted table.
    """
    table, rejections = sample_conditioned_table(shape, condition, rng, max_rejections)
    game = complete_rankings(table, rng)
    assert condition.accepts(count_pne(game.winner_table()))
    return game, rejections


def sample(
    shape: GameShape,
    rng: np.random.Generator,
    *,
    condition: SampleCondition = UNCONDITIONED,
    full: bool = True,
    max_rejections: int = DEFAULT_MAX_REJECTIONS,
) -> tuple[Union[OrdinalGame, WinnerTable], int]:
    if full:
        return sample_conditioned(shape, condition, rng, max_rejections)
    return sample_conditioned_table(shape, condition, rng, max_rejections)
