"""Deterministic Monte Carlo experiments over random games.

Every trial draws from its own generator, derived from (master seed, cell
shape, trial index), so results are identical for any number of workers.
Workers are forked processes; chunks come back in trial order and are
concatenated before anything is aggregated.
"""

from __future__ import annotations

import csv
import io
import json
import math
import multiprocessing as mp
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import _kernels as K
from .connectivity import (
    ALL_FLAGS,
    FLAG_NAMES,
    GLOBAL_FLAG_NAMES,
    _per_vertex,
    classify,
    condensation,
    dichotomy_threshold,
    is_connected,
    sink_source_masks,
)
from .dynamics import DynamicKind, DynamicParams, run
from .errors import ConditioningTimeout, ShapeTooLarge
from .game import GameLike, GameShape, WinnerTable, as_shape, winner_table_of
from .graphs import EXPLICIT_BETTER_CAP, build_best_response_graph
from .sampling import (
    AT_LEAST_ONE_PNE,
    DEFAULT_MAX_REJECTIONS,
    UNCONDITIONED,
    SampleCondition,
    TrialSeed,
    _winners,
    derive_trial_rng,
    sample_conditioned,
    shape_stream,
)

Z95 = NormalDist().inv_cdf(0.975)
REACH_BUDGET = 2**16
CSV_HEADER = ("shape_n", "shape_k", "flag", "trials", "successes", "proportion", "ci_low", "ci_high", "seed")


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    phat = successes / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


# --- parallel plumbing --------------------------------------------------------------------


def warm_up() -> None:
    """Load or compile every kernel signature the experiments use, so timings
    exclude compilation and forked workers inherit ready code."""
    from .game import figure_one_game

    g = figure_one_game()
    classify(g, global_flags=True, vertex_flags_=True)
    rng = np.random.default_rng(0)
    for kind in DynamicKind:
        run(g, 1, DynamicParams(kind, 0.5, 10), rng)
        if kind is not DynamicKind.BETTER_RESPONSE_INERTIA:
            run(g.winner_table(), 1, DynamicParams(kind, 0.5, 10), rng, record=True)
    shape = g.shape
    _cell_chunk((shape, AT_LEAST_ONE_PNE, 0, FLAG_NAMES, 100), 0, 2)
    _cell_chunk((shape, AT_LEAST_ONE_PNE, 0, ALL_FLAGS, 100), 0, 1)
    _pne_chunk((shape, 0), 0, 1)
    _reach_chunk((shape, 0, 1.0), 0, 1)
    _convergence_trial((shape, DynamicParams(), 0, AT_LEAST_ONE_PNE, 1, "cycle", True, 100), 0, 0)


def _chunks(n: int, parts: int) -> list[tuple[int, int]]:
    size = max(1, -(-n // parts))
    return [(a, min(n, a + size)) for a in range(0, n, size)]


def parallel_trials(func: Callable, payload, trials: int, workers: int = 1) -> list:
    """``func(payload, start, stop)`` returns a list per chunk; results are
    concatenated in trial order."""
    if trials <= 0:
        return []
    if workers <= 1 or trials == 1:
        return list(func(payload, 0, trials))
    warm_up()
    ranges = _chunks(trials, workers * 4)
    out: list = []
    ctx = mp.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        futures = [pool.submit(func, payload, a, b) for a, b in ranges]
        for f in futures:
            out.extend(f.result())
    return out


# --- class proportions ------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    cells: list = field(default_factory=list)
    trials: int = 10_000
    condition: SampleCondition = AT_LEAST_ONE_PNE
    master_seed: int = 0
    workers: int = 1
    flags: tuple = ("connected", "acyclic", "super_connected")
    out: Optional[str] = None
    fmt: str = "csv"
    max_rejections: int = DEFAULT_MAX_REJECTIONS

    def __post_init__(self):
        self.cells = [as_shape(c) for c in self.cells]
        self.flags = tuple(self.flags)
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        unknown = set(self.flags) - set(ALL_FLAGS)
        if unknown:
            raise ValueError(f"unknown flags {sorted(unknown)}; choose from {', '.join(ALL_FLAGS)}")
        if any(f in GLOBAL_FLAG_NAMES for f in self.flags):
            for c in self.cells:
                if c.vertex_count > EXPLICIT_BETTER_CAP:
                    raise ShapeTooLarge(f"global flags are not computable at {c}: too many profiles")


@dataclass
class CellStats:
    shape: GameShape
    trials: int
    successes: dict
    rejections: int
    seed: int
    wall_time: float = 0.0

    def proportion(self, flag: str) -> float:
        return self.successes[flag] / self.trials

    def interval(self, flag: str) -> tuple[float, float]:
        return wilson_interval(self.successes[flag], self.trials)

    @property
    def acceptance_rate(self) -> float:
        return self.trials / (self.trials + self.rejections)

    def rows(self) -> list[list[str]]:
        out = []
        for f, s in self.successes.items():
            lo, hi = self.interval(f)
            out.append([
                str(self.shape.n), self.shape.label(), f, str(self.trials), str(s),
                f"{self.proportion(f):.6f}", f"{lo:.6f}", f"{hi:.6f}", str(self.seed),
            ])
        return out

    def to_dict(self) -> dict:
        return {
            "n": self.shape.n,
            "k": list(self.shape.k),
            "trials": self.trials,
            "rejections": self.rejections,
            "acceptance_rate": round(self.acceptance_rate, 6),
            "seed": self.seed,
            "flags": {
                f: {
                    "successes": s,
                    "proportion": round(self.proportion(f), 6),
                    "ci_low": round(self.interval(f)[0], 6),
                    "ci_high": round(self.interval(f)[1], 6),
                }
                for f, s in self.successes.items()
            },
        }


def _flag_index(flags: Sequence[str]) -> list[int]:
    # position of each best-response flag in the kernel result tuple
    return [1 + FLAG_NAMES.index(f) for f in flags]


def _cell_chunk(payload, start: int, stop: int) -> list:
    shape, condition, seed, flags, max_rejections = payload
    full = any(f in GLOBAL_FLAG_NAMES for f in flags)
    stream = shape_stream(shape)
    k, strides, loff, nv = shape.k_array, shape.strides, shape.line_offsets, shape.vertex_count
    out = []
    for t in range(start, stop):
        rng = derive_trial_rng(TrialSeed(seed, t), stream)
        if full:
            game, rej = sample_conditioned(shape, condition, rng, max_rejections)
            rec = classify(game, global_flags=True)
            out.append((tuple(bool(getattr(rec, f)) for f in flags), rej))
            continue
        rej = 0
        while True:
            w = _winners(shape, rng)
            if condition.accepts(int(K.count_sinks(w, k, strides, loff, nv))):
                break
            rej += 1
            if rej > max_rejections:
                raise ConditioningTimeout(f"no sample satisfying {condition} at {shape}", rej)
        fptr, fidx, rptr, ridx = K.best_response_csr(w, k, strides, loff, nv)
        g = (K.CSR, fptr, fidx, rptr, ridx, w, k, strides, loff, np.int64(shape.kmax))
        res = K.classify(g, nv)
        out.append((tuple(bool(res[i]) for i in _flag_index(flags)), rej))
    return out


def estimate_cell(shape: GameShape, config: ExperimentConfig) -> CellStats:
    t0 = time.perf_counter()
    payload = (shape, config.condition, config.master_seed, config.flags, config.max_rejections)
    results = parallel_trials(_cell_chunk, payload, config.trials, config.workers)
    counts = {f: 0 for f in config.flags}
    rejections = 0
    for bits, rej in results:
        rejections += rej
        for f, b in zip(config.flags, bits):
            counts[f] += b
    return CellStats(shape, config.trials, counts, rejections, config.master_seed, time.perf_counter() - t0)


def estimate_class_proportions(config: ExperimentConfig) -> list[CellStats]:
    return [estimate_cell(shape, config) for shape in config.cells]


# --- output ------------------------------------------------------------------------------


def results_csv(table: Sequence[CellStats]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for cell in table:
        w.writerows(cell.rows())
    return buf.getvalue()


def results_json(table: Sequence[CellStats]) -> str:
    return json.dumps({"cells": [c.to_dict() for c in table]}, indent=2) + "\n"


_PANEL_ORDER = ("connected", "acyclic", "super_connected")
_COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def results_svg(table: Sequence[CellStats]) -> str:
    """One panel per flag: proportion against the number of players, one line per action count."""
    flags = [f for f in _PANEL_ORDER if table and f in table[0].successes]
    flags += [f for f in (table[0].successes if table else ()) if f not in flags]
    pw, ph, pad = 320, 240, 40
    width = max(1, len(flags)) * (pw + pad) + pad
    height = ph + 2 * pad + 20
    ns = sorted({c.shape.n for c in table}) or [2, 3]
    nmin, nmax = ns[0], max(ns[-1], ns[0] + 1)
    ks = sorted({c.shape.label() for c in table})
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for p, flag in enumerate(flags):
        x0, y0 = pad + p * (pw + pad), pad

        def px(n):
            return x0 + (n - nmin) / (nmax - nmin) * pw

        def py(q):
            return y0 + (1 - q) * ph

        parts.append(f'<rect x="{x0}" y="{y0}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
        parts.append(f'<text x="{x0 + pw / 2}" y="{y0 - 10}" text-anchor="middle">{flag.replace("_", "-")}</text>')
        for q in (0, 0.5, 1):
            parts.append(f'<text x="{x0 - 4}" y="{py(q) + 4:.1f}" text-anchor="end">{q:g}</text>')
        for n in ns:
            parts.append(f'<text x="{px(n):.1f}" y="{y0 + ph + 14}" text-anchor="middle">{n}</text>')
        for j, label in enumerate(ks):
            colour = _COLOURS[j % len(_COLOURS)]
            pts = sorted((c.shape.n, c.proportion(flag)) for c in table if c.shape.label() == label)
            coords = " ".join(f"{px(n):.1f},{py(q):.1f}" for n, q in pts)
            parts.append(f'<polyline points="{coords}" fill="none" stroke="{colour}"/>')
            for n, q in pts:
                parts.append(f'<circle cx="{px(n):.1f}" cy="{py(q):.1f}" r="2.5" fill="{colour}"/>')
            if p == 0:
                parts.append(f'<text x="{x0 + 6 + 50 * j}" y="{y0 + ph + 30}" fill="{colour}">k={label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_results(table: Sequence[CellStats], fmt: str = "csv", path: Union[str, Path, None] = None) -> str:
    """Render ``table`` as csv, json or svg; write it to ``path`` when given."""
    render = {"csv": results_csv, "json": results_json, "svg": results_svg}
    if fmt not in render:
        raise ValueError(f"unknown format {fmt!r}; expected csv, json or svg")
    text = render[fmt](table)
    if path is not None:
        Path(path).write_text(text)
    return text


# --- equilibrium counts ----------------------------------------------------------------------


@dataclass
class PneDistribution:
    shape: GameShape
    trials: int
    counts: dict
    seed: int

    def frequency(self, z: int) -> float:
        return self.counts.get(z, 0) / self.trials

    @staticmethod
    def poisson(z: int) -> float:
        return math.exp(-1) / math.factorial(z)

    @property
    def zmax(self) -> int:
        return max(self.counts) if self.counts else 0

    @property
    def total_variation(self) -> float:
        """Total-variation distance to Poisson(1), including its tail beyond ``zmax``."""
        head = sum(abs(self.frequency(z) - self.poisson(z)) for z in range(self.zmax + 1))
        tail = 1 - sum(self.poisson(z) for z in range(self.zmax + 1))
        return 0.5 * (head + tail)

    def to_dict(self) -> dict:
        return {
            "n": self.shape.n,
            "k": list(self.shape.k),
            "trials": self.trials,
            "seed": self.seed,
            "distribution": [
                {"z": z, "count": self.counts.get(z, 0), "frequency": round(self.frequency(z), 6),
                 "poisson": round(self.poisson(z), 6)}
                for z in range(self.zmax + 1)
            ],
            "total_variation": round(self.total_variation, 6),
        }

    def csv(self) -> str:
        lines = ["z,count,frequency,poisson"]
        for z in range(self.zmax + 1):
            lines.append(f"{z},{self.counts.get(z, 0)},{self.frequency(z):.6f},{self.poisson(z):.6f}")
        return "\n".join(lines) + "\n"


def _pne_chunk(payload, start: int, stop: int) -> list:
    shape, seed = payload
    stream = shape_stream(shape)
    out = []
    for t in range(start, stop):
        w = _winners(shape, derive_trial_rng(TrialSeed(seed, t), stream))
        out.append(int(K.count_sinks(w, shape.k_array, shape.strides, shape.line_offsets, shape.vertex_count)))
    return out


def pne_count_distribution(shape, trials: int, seed: int, workers: int = 1) -> PneDistribution:
    shape = as_shape(shape)
    counts: dict[int, int] = {}
    for z in parallel_trials(_pne_chunk, (shape, seed), trials, workers):
        counts[z] = counts.get(z, 0) + 1
    return PneDistribution(shape, trials, dict(sorted(counts.items())), seed)


# --- reach counts ------------------------------------------------------------------------


@dataclass
class ReachReport:
    shape: GameShape
    trials: int
    seed: int
    threshold: float
    histogram: dict
    violations: list  # per sample: vertices reached from more than the threshold but not from every non-sink

    @property
    def clean_fraction(self) -> float:
        return sum(v == 0 for v in self.violations) / self.trials

    def to_dict(self) -> dict:
        return {
            "n": self.shape.n,
            "k": list(self.shape.k),
            "trials": self.trials,
            "seed": self.seed,
            "threshold": self.threshold,
            "clean_fraction": round(self.clean_fraction, 6),
            "violations": self.violations,
            "histogram": {str(m): c for m, c in self.histogram.items()},
        }

    def csv(self) -> str:
        lines = ["reached_from,vertices"]
        lines += [f"{m},{c}" for m, c in self.histogram.items()]
        return "\n".join(lines) + "\n"


def reach_profile(table: WinnerTable, threshold: float) -> tuple[np.ndarray, int]:
    """Reached-from counts and the number of vertices breaking the dichotomy."""
    g = build_best_response_graph(table)
    cond = condensation(g)
    sink, _ = sink_source_masks(g)
    counts = _per_vertex(cond, None, False)
    from_nonsinks = _per_vertex(cond, ~sink, False)
    everyone = from_nonsinks == int((~sink).sum())
    bad = (counts > threshold) & ~everyone
    return counts, int(bad.sum())


def _reach_chunk(payload, start: int, stop: int) -> list:
    shape, seed, threshold = payload
    stream = shape_stream(shape)
    out = []
    for t in range(start, stop):
        rng = derive_trial_rng(TrialSeed(seed, t), stream)
        counts, bad = reach_profile(WinnerTable(shape, _winners(shape, rng)), threshold)
        values, freq = np.unique(counts, return_counts=True)
        out.append((dict(zip(values.tolist(), freq.tolist())), bad))
    return out


def reach_threshold_experiment(
    shape, trials: int, seed: int, *, workers: int = 1, budget: int = REACH_BUDGET
) -> ReachReport:
    """Histogram of reached-from counts over unconditioned winner tables.

    Refuses shapes with more than ``budget`` profiles.
    """
    shape = as_shape(shape)
    if shape.vertex_count > budget:
        raise ShapeTooLarge(
            f"{shape} has {shape.vertex_count} profiles, over the reach-count budget of {budget}"
        )
    threshold = dichotomy_threshold(shape.kmax)
    hist: dict[int, int] = {}
    violations = []
    for h, bad in parallel_trials(_reach_chunk, (shape, seed, threshold), trials, workers):
        violations.append(bad)
        for m, c in h.items():
            hist[m] = hist.get(m, 0) + c
    return ReachReport(shape, trials, seed, threshold, dict(sorted(hist.items())), violations)


# --- dynamics ------------------------------------------------------------------------------


@dataclass(frozen=True)
class RunRecord:
    game: int
    start: int
    absorbed: bool
    steps: int
    final: int


@dataclass
class ConvergenceStats:
    shape: GameShape
    params: DynamicParams
    seed: int
    runs: list
    skipped_games: int = 0  # conditioned draws discarded by require_connected

    @property
    def absorbed(self) -> int:
        return sum(r.absorbed for r in self.runs)

    @property
    def fraction(self) -> float:
        return self.absorbed / len(self.runs) if self.runs else 0.0

    def step_quantiles(self, qs=(0.5, 0.9, 0.99, 1.0)) -> dict:
        steps = [r.steps for r in self.runs if r.absorbed]
        if not steps:
            return {}
        return {str(q): float(np.quantile(steps, q)) for q in qs}

    def to_dict(self) -> dict:
        return {
            "n": self.shape.n,
            "k": list(self.shape.k),
            "kind": self.params.kind.value,
            "step_cap": self.params.step_cap,
            "seed": self.seed,
            "runs": len(self.runs),
            "absorbed": self.absorbed,
            "fraction": round(self.fraction, 6),
            "skipped_games": self.skipped_games,
            "step_quantiles": self.step_quantiles(),
        }

    def csv(self) -> str:
        lines = ["seed,game,start,absorbed,steps,final"]
        lines += [f"{self.seed},{r.game},{r.start},{int(r.absorbed)},{r.steps},{r.final}" for r in self.runs]
        return "\n".join(lines) + "\n"


def cycle_vertices(game: GameLike) -> np.ndarray:
    """Profiles lying on a best-response cycle."""
    cond = condensation(build_best_response_graph(game))
    return np.flatnonzero(cond.size[cond.component_of] > 1)


def choose_starts(game: GameLike, count: int, mode: str, rng: np.random.Generator) -> list[int]:
    """``random``: uniform profiles; ``cycle``: uniform among profiles on a cycle
    (falling back to non-equilibria, then to anything)."""
    nv = game.shape.vertex_count
    if mode == "random":
        return [int(x) for x in rng.integers(0, nv, size=count)]
    if mode != "cycle":
        raise ValueError(f"unknown start mode {mode!r}")
    pool = cycle_vertices(game)
    if pool.size == 0:
        sink, _ = sink_source_masks(build_best_response_graph(game))
        pool = np.flatnonzero(~sink)
    if pool.size == 0:
        pool = np.arange(nv)
    return [int(x) for x in pool[rng.integers(0, pool.size, size=count)]]


def _convergence_trial(payload, t: int, record_start: int = -1):
    """Game ``t`` of a convergence experiment; optionally records one run's trajectory."""
    shape, params, seed, condition, starts, mode, require_connected, max_rejections = payload
    rng = derive_trial_rng(TrialSeed(seed, t), shape_stream(shape))
    skipped = 0
    while True:
        game, _ = sample_conditioned(shape, condition, rng, max_rejections)
        if not require_connected or is_connected(game):
            break
        skipped += 1
        if skipped > max_rejections:
            raise ConditioningTimeout(f"no connected game at {shape}", skipped)
    source = game if params.kind is DynamicKind.BETTER_RESPONSE_INERTIA else game.winner_table()
    runs = []
    trajectory = None
    for j, s in enumerate(choose_starts(source, starts, mode, rng)):
        tr = run(source, s, params, rng, record=(j == record_start))
        if j == record_start:
            trajectory = tr.trajectory
        runs.append(RunRecord(t, s, tr.absorbed, tr.steps_taken, tr.final_profile))
    return runs, skipped, trajectory


def _convergence_chunk(payload, start: int, stop: int) -> list:
    return [_convergence_trial(payload, t)[:2] for t in range(start, stop)]


def convergence_experiment(
    shape,
    trials: int,
    params: DynamicParams,
    seed: int,
    *,
    starts: int = 10,
    start_mode: str = "random",
    condition: SampleCondition = AT_LEAST_ONE_PNE,
    require_connected: bool = False,
    workers: int = 1,
    max_rejections: int = DEFAULT_MAX_REJECTIONS,
) -> ConvergenceStats:
    """Run the dynamic on ``trials`` sampled games from ``starts`` profiles each."""
    shape = as_shape(shape)
    payload = (shape, params, seed, condition, starts, start_mode, require_connected, max_rejections)
    runs: list = []
    skipped = 0
    for r, s in parallel_trials(_convergence_chunk, payload, trials, workers):
        runs.extend(r)
        skipped += s
    return ConvergenceStats(shape, params, seed, runs, skipped)


def convergence_trajectory(
    shape,
    params: DynamicParams,
    seed: int,
    *,
    game_index: int = 0,
    run_index: int = 0,
    starts: int = 10,
    start_mode: str = "random",
    condition: SampleCondition = AT_LEAST_ONE_PNE,
    require_connected: bool = False,
    max_rejections: int = DEFAULT_MAX_REJECTIONS,
) -> tuple:
    """Replay one run of ``convergence_experiment`` and return its recorded profiles."""
    shape = as_shape(shape)
    payload = (shape, params, seed, condition, starts, start_mode, require_connected, max_rejections)
    return _convergence_trial(payload, game_index, run_index)[2]


def _fixed_game_run(game, starts, params, seed, t, record=False):
    rng = derive_trial_rng(TrialSeed(seed, t), (0,))
    return run(game, starts[t % len(starts)], params, rng, record=record)


def _fixed_game_chunk(payload, start: int, stop: int) -> list:
    game, starts, params, seed = payload
    out = []
    for t in range(start, stop):
        tr = _fixed_game_run(game, starts, params, seed, t)
        out.append(RunRecord(0, tr.start, tr.absorbed, tr.steps_taken, tr.final_profile))
    return out


def absorption_runs(
    game: GameLike,
    starts: Sequence[int],
    params: DynamicParams,
    runs: int,
    seed: int,
    *,
    workers: int = 1,
) -> ConvergenceStats:
    """``runs`` independent runs on one fixed game, cycling through ``starts``."""
    records = parallel_trials(_fixed_game_chunk, (game, list(starts), params, seed), runs, workers)
    return ConvergenceStats(game.shape, params, seed, records)


def fixed_game_trajectory(game: GameLike, starts: Sequence[int], params: DynamicParams, seed: int,
                          run_index: int = 0) -> tuple:
    """Replay run ``run_index`` of ``absorption_runs`` and return its recorded profiles."""
    return _fixed_game_run(game, list(starts), params, seed, run_index, record=True).trajectory
