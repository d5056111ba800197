"""Connectivity classes of response graphs.

All reachability questions go through the strongly connected components of
the graph (Tarjan, single pass) and plain breadth-first traversals.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, fields
from typing import Optional, Union

import numpy as np

from . import _kernels as K
from .game import GameLike, OrdinalGame, WinnerTable, win_counts, winner_table_of
from .graphs import (
    EXPLICIT_BETTER_CAP,
    ResponseGraph,
    Storage,
    build_best_response_graph,
    build_better_response_graph,
)

BITSET_COMPONENT_CAP = 2**14

FLAG_NAMES = ("acyclic", "weakly_acyclic", "connected", "super_connected")
GLOBAL_FLAG_NAMES = tuple("globally_" + f for f in FLAG_NAMES)
ALL_FLAGS = FLAG_NAMES + GLOBAL_FLAG_NAMES


@dataclass(frozen=True, eq=False)
class Condensation:
    component_of: np.ndarray
    count: int
    size: np.ndarray
    succ_ptr: np.ndarray
    succ: np.ndarray
    pred_ptr: np.ndarray
    pred: np.ndarray
    contains_sink: np.ndarray
    contains_source: np.ndarray
    contains_non_sink: np.ndarray
    contains_non_source: np.ndarray

    def successors(self, c: int) -> np.ndarray:
        return self.succ[self.succ_ptr[c] : self.succ_ptr[c + 1]]

    def predecessors(self, c: int) -> np.ndarray:
        return self.pred[self.pred_ptr[c] : self.pred_ptr[c + 1]]

    @property
    def terminal(self) -> np.ndarray:
        """Components with no edge leaving them."""
        return np.diff(self.succ_ptr) == 0

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.component_of == c)


@dataclass(frozen=True)
class ClassificationRecord:
    num_pne: int
    acyclic: bool
    weakly_acyclic: bool
    connected: bool
    super_connected: bool
    globally_acyclic: Optional[bool] = None
    globally_weakly_acyclic: Optional[bool] = None
    globally_connected: Optional[bool] = None
    globally_super_connected: Optional[bool] = None
    v_connected: Optional[tuple[bool, ...]] = None
    v_super_connected: Optional[tuple[bool, ...]] = None

    def flag(self, name: str) -> Optional[bool]:
        return getattr(self, name)

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("v_connected", "v_super_connected"):
            if out[key] is None:
                del out[key]
            else:
                out[key] = list(out[key])
        return out

    @staticmethod
    def csv_header() -> list[str]:
        return ["num_pne", *ALL_FLAGS]

    def csv_row(self) -> list[str]:
        def cell(x):
            return "" if x is None else str(int(x))

        return [str(self.num_pne)] + [cell(getattr(self, f)) for f in ALL_FLAGS]

    def lattice_violations(self) -> list[str]:
        """Implications between the classes that fail in this record."""
        rules = [
            ("super_connected", "connected"),
            ("connected", "weakly_acyclic"),
            ("acyclic", "weakly_acyclic"),
            ("globally_acyclic", "acyclic"),
            ("weakly_acyclic", "globally_weakly_acyclic"),
            ("connected", "globally_connected"),
            ("super_connected", "globally_super_connected"),
            ("globally_super_connected", "globally_connected"),
            ("globally_connected", "globally_weakly_acyclic"),
            ("globally_acyclic", "globally_weakly_acyclic"),
        ]
        bad = []
        for a, b in rules:
            x, y = getattr(self, a), getattr(self, b)
            if x is None or y is None:
                continue
            if x and not y:
                bad.append(f"{a} => {b}")
        if self.weakly_acyclic and self.num_pne < 1:
            bad.append("weakly_acyclic => num_pne >= 1")
        return bad


# --- basic sets -------------------------------------------------------------------


def _as_graph(g: Union[ResponseGraph, GameLike]) -> ResponseGraph:
    if isinstance(g, ResponseGraph):
        return g
    return build_best_response_graph(g)


def sink_source_masks(g: ResponseGraph) -> tuple[np.ndarray, np.ndarray]:
    return K.sink_source_flags(g.kernel_args(), g.vertex_count)


def sinks(g: ResponseGraph) -> frozenset[int]:
    return frozenset(np.flatnonzero(sink_source_masks(_as_graph(g))[0]).tolist())


def sources(g: ResponseGraph) -> frozenset[int]:
    return frozenset(np.flatnonzero(sink_source_masks(_as_graph(g))[1]).tolist())


def condensation(g: ResponseGraph) -> Condensation:
    g = _as_graph(g)
    args = g.kernel_args()
    comp, ncomp = K.tarjan(args, g.vertex_count)
    size, _, succ_ptr, succ, pred_ptr, pred = K.component_structure(args, g.vertex_count, comp, ncomp)
    sink, source = K.sink_source_flags(args, g.vertex_count)

    def any_in(mask):
        out = np.zeros(ncomp, dtype=bool)
        out[comp[mask]] = True
        return out

    return Condensation(
        component_of=comp,
        count=int(ncomp),
        size=size,
        succ_ptr=succ_ptr,
        succ=succ,
        pred_ptr=pred_ptr,
        pred=pred,
        contains_sink=any_in(sink),
        contains_source=any_in(source),
        contains_non_sink=any_in(~sink),
        contains_non_source=any_in(~source),
    )


# --- predicates ---------------------------------------------------------------------


def _classify_graph(g: ResponseGraph) -> tuple[int, bool, bool, bool, bool]:
    nsinks, acyclic, weakly, connected, superc = K.classify(g.kernel_args(), g.vertex_count)
    return int(nsinks), bool(acyclic), bool(weakly), bool(connected), bool(superc)


def is_acyclic(g) -> bool:
    return _classify_graph(_as_graph(g))[1]


def is_weakly_acyclic(g, *, cross_check: bool = False) -> bool:
    """Every terminal component of the condensation is a single sink.

    With ``cross_check`` the answer is recomputed by backward traversal from
    the sinks and the two must agree.
    """
    g = _as_graph(g)
    result = _classify_graph(g)[2]
    if cross_check:
        other = bool(K.weakly_acyclic_by_bfs(g.kernel_args(), g.vertex_count))
        if other != result:
            raise AssertionError("weak acyclicity: condensation and traversal disagree")
    return result


def is_connected(g) -> bool:
    return _classify_graph(_as_graph(g))[3]


def is_super_connected(g) -> bool:
    return _classify_graph(_as_graph(g))[4]


def _reach_from(g: ResponseGraph, v: int, forward: bool) -> np.ndarray:
    return K.bfs(g.kernel_args(), g.vertex_count, np.array([v], dtype=np.int64), forward)


def v_connected(g, v: int) -> bool:
    """A sink exists and, if ``v`` is not a sink, ``v`` reaches every sink."""
    g = _as_graph(g)
    sink, _ = sink_source_masks(g)
    if not sink.any():
        return False
    if sink[v]:
        return True
    return bool(np.all(_reach_from(g, v, True)[sink]))


def v_super_connected(g, v: int) -> bool:
    """A sink exists and, if ``v`` is not a sink, ``v`` reaches every non-source."""
    g = _as_graph(g)
    sink, source = sink_source_masks(g)
    if not sink.any():
        return False
    if sink[v]:
        return True
    return bool(np.all(_reach_from(g, v, True)[~source]))


# --- reach counts ---------------------------------------------------------------------


def _component_sums(cond: Condensation, weights: np.ndarray, descendants: bool) -> np.ndarray:
    ptr, adj = (cond.succ_ptr, cond.succ) if descendants else (cond.pred_ptr, cond.pred)
    w = np.ascontiguousarray(weights, dtype=np.int64)
    if cond.count <= BITSET_COMPONENT_CAP:
        return K.reach_sums(ptr, adj, cond.count, w, descendants)
    return K.reach_sums_bfs(ptr, adj, cond.count, w, descendants)


def _per_vertex(cond: Condensation, mask: Optional[np.ndarray], descendants: bool) -> np.ndarray:
    if mask is None:
        weights = cond.size
    else:
        weights = np.bincount(cond.component_of[mask], minlength=cond.count)
    return _component_sums(cond, weights, descendants)[cond.component_of]


def reach_counts(g) -> np.ndarray:
    """Number of vertices each vertex can reach, itself included."""
    return _per_vertex(condensation(g), None, True)


def reached_from_counts(g) -> np.ndarray:
    """Number of vertices each vertex can be reached from, itself included."""
    return _per_vertex(condensation(g), None, False)


def reach_count(g, v: int) -> int:
    return int(_reach_from(_as_graph(g), v, True).sum())


def reached_from_count(g, v: int) -> int:
    return int(_reach_from(_as_graph(g), v, False).sum())


def reach_histogram(g, *, backward: bool = True) -> dict[int, int]:
    """m -> number of vertices reached from (or reaching) exactly m vertices."""
    counts = reached_from_counts(g) if backward else reach_counts(g)
    return dict(sorted(Counter(counts.tolist()).items()))


def vertex_flags(g) -> tuple[np.ndarray, np.ndarray]:
    """Per-vertex v-connected and v-super-connected flags."""
    g = _as_graph(g)
    cond = condensation(g)
    sink, source = sink_source_masks(g)
    if not sink.any():
        false = np.zeros(g.vertex_count, dtype=bool)
        return false, false.copy()
    sinks_reached = _per_vertex(cond, sink, True)
    nonsources_reached = _per_vertex(cond, ~source, True)
    vc = sink | (sinks_reached == sink.sum())
    vsc = sink | (nonsources_reached == (~source).sum())
    return vc, vsc


# --- diagnostics ------------------------------------------------------------------------


def count_good_vertices(table: WinnerTable) -> int:
    """Vertices winning between n/(3K) and 3n/4 of their lines."""
    shape = table.shape
    w = win_counts(table)
    lo = shape.n / (3 * shape.kmax)
    hi = 3 * shape.n / 4
    return int(np.count_nonzero((w >= lo) & (w <= hi)))


def dichotomy_threshold(kmax: int) -> float:
    """log K / (log K - log(K-1)); equals 1 for K = 2."""
    if kmax == 2:
        return 1.0
    return math.log(kmax) / (math.log(kmax) - math.log(kmax - 1))


# --- full classification ------------------------------------------------------------------


def classify(
    source: Union[GameLike, ResponseGraph],
    *,
    global_flags: Optional[bool] = None,
    vertex_flags_: bool = False,
    better_cap: int = EXPLICIT_BETTER_CAP,
) -> ClassificationRecord:
    """Classify a game (or a prebuilt best-response graph).

    Global flags need full rankings and an explicit better-response graph;
    ``global_flags=None`` computes them whenever that is possible.
    """
    if isinstance(source, ResponseGraph):
        g = source
        game = None
    else:
        g = build_best_response_graph(source)
        game = source if isinstance(source, OrdinalGame) else None
    nsinks, acyclic, weakly, connected, superc = _classify_graph(g)
    extra: dict = {}
    can_global = game is not None and game.shape.vertex_count <= better_cap
    if global_flags and not can_global:
        raise ValueError("global flags need an OrdinalGame within the better-response cap")
    if can_global and global_flags is not False:
        gb = build_better_response_graph(game, explicit_cap=better_cap)
        _, ga, gw, gc, gs = _classify_graph(gb)
        extra.update(
            globally_acyclic=ga,
            globally_weakly_acyclic=gw,
            globally_connected=gc,
            globally_super_connected=gs,
        )
    if vertex_flags_:
        vc, vsc = vertex_flags(g)
        extra.update(v_connected=tuple(map(bool, vc)), v_super_connected=tuple(map(bool, vsc)))
    return ClassificationRecord(nsinks, acyclic, weakly, connected, superc, **extra)


def classify_table_fast(table: WinnerTable) -> tuple[int, bool, bool, bool, bool]:
    """(num_pne, acyclic, weakly_acyclic, connected, super_connected) without
    building a record; used in hot Monte Carlo loops."""
    return _classify_graph(build_best_response_graph(table))


def record_field_names() -> list[str]:
    return [f.name for f in fields(ClassificationRecord)]
