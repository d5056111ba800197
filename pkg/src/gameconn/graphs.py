"""Best- and better-response graphs over action profiles."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from . import _kernels as K
from .errors import InvalidProfile, ShapeTooLarge, UseImplicit
from .game import GameLike, GameShape, OrdinalGame, WinnerTable, decode_profile, winner_table_of

EXPLICIT_BEST_CAP = 2**22
EXPLICIT_BETTER_CAP = 2**20
DOT_CAP = 2**10


class Flavor(enum.Enum):
    BEST = "best"
    BETTER = "better"


class Storage(enum.Enum):
    EXPLICIT = "explicit"
    IMPLICIT = "implicit"
    AUTO = "auto"


@dataclass(frozen=True, eq=False)
class ResponseGraph:
    """Directed graph on vertex ids ``0 .. vertex_count - 1``.

    Explicit graphs hold forward and reverse CSR arrays; implicit ones keep
    a reference to the winner table and generate edges on demand.
    """

    shape: GameShape
    flavor: Flavor
    storage: Storage
    table: Optional[WinnerTable] = None
    fptr: Optional[np.ndarray] = None
    fidx: Optional[np.ndarray] = None
    rptr: Optional[np.ndarray] = None
    ridx: Optional[np.ndarray] = None

    @property
    def vertex_count(self) -> int:
        return self.shape.vertex_count

    @property
    def edge_count(self) -> int:
        if self.storage is Storage.EXPLICIT:
            return int(self.fptr[-1])
        # every line is a star into its winner
        return self.shape.n * self.vertex_count - self.shape.line_count

    def kernel_args(self) -> tuple:
        shape = self.shape
        k = shape.k_array
        if self.storage is Storage.EXPLICIT:
            return (K.CSR, self.fptr, self.fidx, self.rptr, self.ridx,
                    np.zeros(0, np.uint8), k, shape.strides, shape.line_offsets, np.int64(shape.kmax))
        empty = np.zeros(1, np.int64)
        return (K.IMPLICIT_BEST, empty, empty[:0], empty, empty[:0],
                self.table.winners, k, shape.strides, shape.line_offsets, np.int64(shape.kmax))

    def _check(self, v: int) -> int:
        if not 0 <= v < self.vertex_count:
            raise InvalidProfile(f"vertex {v} out of range")
        return int(v)

    def out_neighbors(self, v: int) -> Iterator[int]:
        return self._neighbors(self._check(v), True)

    def in_neighbors(self, v: int) -> Iterator[int]:
        return self._neighbors(self._check(v), False)

    def _neighbors(self, v: int, forward: bool) -> Iterator[int]:
        if self.storage is Storage.EXPLICIT:
            ptr, idx = (self.fptr, self.fidx) if forward else (self.rptr, self.ridx)
            yield from (int(x) for x in idx[ptr[v] : ptr[v + 1]])
            return
        g = self.kernel_args()
        cur = 0
        while True:
            w, cur = K.next_nbr(g, v, forward, cur)
            if w < 0:
                return
            yield int(w)

    def edges(self) -> Iterator[tuple[int, int]]:
        for v in range(self.vertex_count):
            for w in self.out_neighbors(v):
                yield v, w

    def to_explicit(self) -> "ResponseGraph":
        if self.storage is Storage.EXPLICIT:
            return self
        return build_best_response_graph(self.table, Storage.EXPLICIT, explicit_cap=self.vertex_count)


def _frozen(*arrays):
    for a in arrays:
        a.setflags(write=False)
    return arrays


def build_best_response_graph(
    source: GameLike,
    mode: Storage = Storage.AUTO,
    *,
    explicit_cap: int = EXPLICIT_BEST_CAP,
) -> ResponseGraph:
    """Edge ``a -> b`` when ``b`` is the winner of a line through ``a``."""
    table = winner_table_of(source)
    shape = table.shape
    mode = Storage(mode)
    if mode is Storage.AUTO:
        mode = Storage.EXPLICIT if shape.vertex_count <= explicit_cap else Storage.IMPLICIT
    if mode is Storage.IMPLICIT:
        return ResponseGraph(shape, Flavor.BEST, Storage.IMPLICIT, table=table)
    if shape.vertex_count > explicit_cap:
        raise UseImplicit(
            f"{shape.vertex_count} vertices exceed the explicit cap of {explicit_cap}; use implicit storage"
        )
    fptr, fidx, rptr, ridx = _frozen(*K.best_response_csr(
        table.winners, shape.k_array, shape.strides, shape.line_offsets, shape.vertex_count
    ))
    return ResponseGraph(shape, Flavor.BEST, Storage.EXPLICIT, table, fptr, fidx, rptr, ridx)


def build_better_response_graph(
    game: OrdinalGame,
    mode: Storage = Storage.AUTO,
    *,
    explicit_cap: int = EXPLICIT_BETTER_CAP,
) -> ResponseGraph:
    """Edge ``a -> b`` when ``b`` is strictly better than ``a`` on their line.

    Always explicit: each line carries a full transitive tournament.
    """
    if not isinstance(game, OrdinalGame):
        raise TypeError("better-response graphs need full rankings, not a winner table")
    shape = game.shape
    if Storage(mode) is Storage.IMPLICIT:
        raise ValueError("better-response graphs are only built with explicit storage")
    if shape.vertex_count > explicit_cap:
        raise ShapeTooLarge(
            f"{shape.vertex_count} vertices exceed the better-response cap of {explicit_cap}"
        )
    fptr, fidx, rptr, ridx = _frozen(*K.better_response_csr(
        game.rankings, shape.k_array, shape.strides, shape.line_offsets,
        shape.ranking_offsets, shape.vertex_count,
    ))
    return ResponseGraph(shape, Flavor.BETTER, Storage.EXPLICIT, game.winner_table(), fptr, fidx, rptr, ridx)


def out_neighbors(g: ResponseGraph, v: int) -> Iterator[int]:
    return g.out_neighbors(v)


def in_neighbors(g: ResponseGraph, v: int) -> Iterator[int]:
    return g.in_neighbors(v)


def to_dot(g: ResponseGraph, *, highlight_sinks: bool = True) -> str:
    """Graphviz text for small graphs; vertex labels are 1-based profiles."""
    if g.vertex_count > DOT_CAP:
        raise ShapeTooLarge(f"DOT export is limited to {DOT_CAP} vertices")

    sep = "" if g.shape.kmax < 10 else ","

    def name(v: int) -> str:
        return '"' + sep.join(str(c + 1) for c in decode_profile(g.shape, v)) + '"'

    lines = [f"digraph {g.flavor.value}_response {{"]
    for v in range(g.vertex_count):
        sink = next(iter(g.out_neighbors(v)), None) is None
        style = " [shape=doublecircle]" if (sink and highlight_sinks) else ""
        lines.append(f"  {name(v)}{style};")
    for v, w in g.edges():
        lines.append(f"  {name(v)} -> {name(w)};")
    lines.append("}")
    return "\n".join(lines) + "\n"
