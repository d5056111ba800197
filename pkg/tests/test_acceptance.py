"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Seeds are fixed constants chosen before the first run.
"""
from __future__ import annotations

import math
import os
import time
from collections import Counter
from fractions import Fraction

import numpy as np

from gameconn.connectivity import (
    classify,
    is_weakly_acyclic,
    reach_counts,
    reached_from_counts,
    sinks,
    sources,
)
from gameconn.dynamics import (
    DynamicParams,
    construct_dominant_game,
    construct_sticky_game,
    sticky_cycle_profiles,
)
from gameconn.experiments import (
    ExperimentConfig,
    absorption_runs,
    convergence_experiment,
    emit_results,
    estimate_class_proportions,
    parallel_trials,
    pne_count_distribution,
    wilson_interval,
)
from gameconn.game import GameShape, figure_one_game
from gameconn.graphs import Storage, build_best_response_graph, build_better_response_graph
from gameconn.oracle import (
    best_response_adjacency,
    better_response_adjacency,
    brute_force_absorption,
    brute_force_classes,
    brute_force_reachability,
    enumerate_generic_games,
    exact_class_proportions,
)
from gameconn.sampling import (
    AT_LEAST_ONE_PNE,
    TrialSeed,
    derive_trial_rng,
    sample_conditioned,
    sample_generic_game,
    sample_winner_table,
)

WORKERS = max(1, min(8, os.cpu_count() or 1))
FLAGS = ("connected", "acyclic", "super_connected")

MC_SEED = 2026
FIGURE2_SEED = 7
POISSON_SEED = 14
LATTICE_SEED = 5
GRAPH_SEED = 6
DYNAMICS_SEED = 77
DETERMINISM_SEED = 8


def _fmt(x: float) -> str:
    return f"{x:.4f}"


# --- 1 -----------------------------------------------------------------------------


def test_criterion_1_exact_two_by_two(report):
    t0 = time.perf_counter()
    e = exact_class_proportions((2, 2))
    elapsed = time.perf_counter() - t0
    got = tuple(e.proportion(f) for f in FLAGS)
    ok = (
        (e.total, e.with_pne) == (16, 14)
        and got == (1, 1, Fraction(2, 14))
        and tuple(round(float(x), 4) for x in got) == (1.0, 1.0, 0.1429)
        and elapsed < 1.0
    )
    report(1, ok, f"tables={e.total} with_pne={e.with_pne} connected|acyclic|super = "
                  f"{got[0]}, {got[1]}, {got[2]} in {elapsed:.3f}s (< 1 s)")
    assert ok


# --- 2 -----------------------------------------------------------------------------


def test_criterion_2_oracle_vs_monte_carlo(report):
    paper = {"connected": 0.7951, "acyclic": 0.5941, "super_connected": 0.1225}
    t0 = time.perf_counter()
    e = exact_class_proportions((2, 2, 2))
    exact = {f: float(e.proportion(f)) for f in FLAGS}
    cell = estimate_class_proportions(
        ExperimentConfig(cells=[GameShape.uniform(3, 2)], trials=10_000, master_seed=MC_SEED, flags=FLAGS)
    )[0]
    elapsed = time.perf_counter() - t0
    parts, ok = [], e.total == 4096 and elapsed < 10.0
    for f in FLAGS:
        lo, hi = cell.interval(f)
        close = abs(exact[f] - paper[f]) <= 0.02
        inside = lo <= exact[f] <= hi
        ok &= close and inside
        parts.append(f"{f} exact={_fmt(exact[f])} paper={paper[f]} mc={_fmt(cell.proportion(f))} "
                     f"ci=[{_fmt(lo)},{_fmt(hi)}]")
    report(2, ok, "; ".join(parts) + f"; seed={MC_SEED}; {elapsed:.2f}s (< 10 s)")
    assert ok


# --- 3 -----------------------------------------------------------------------------

FIGURE2_TARGETS = [
    ((10, 2), "connected", 0.9796),
    ((6, 3), "connected", 0.9541),
    ((5, 4), "connected", 0.9464),
    ((4, 2), "acyclic", 0.0665),
    ((3, 3), "acyclic", 0.1175),
    ((8, 2), "super_connected", 0.8542),
    ((5, 3), "super_connected", 0.0334),
    ((4, 4), "super_connected", None),  # paper bound: at most 0.01
]


def test_criterion_3_figure_two_cells(report):
    cells = [GameShape.uniform(n, k) for (n, k), _, _ in FIGURE2_TARGETS]
    t0 = time.perf_counter()
    table = estimate_class_proportions(
        ExperimentConfig(cells=cells, trials=10_000, master_seed=FIGURE2_SEED, workers=WORKERS, flags=FLAGS)
    )
    elapsed = time.perf_counter() - t0
    ok, parts = elapsed <= 15 * 60, []
    for cell, ((n, k), flag, target) in zip(table, FIGURE2_TARGETS):
        p = cell.proportion(flag)
        good = p <= 0.01 if target is None else abs(p - target) <= 0.02
        ok &= good
        want = "<=0.01" if target is None else f"{target}"
        parts.append(f"({n},{k}) {flag}={_fmt(p)} vs {want}{'' if good else ' MISS'}")
    report(3, ok, "; ".join(parts) + f"; {elapsed:.1f}s on {WORKERS} worker(s) (<= 900 s)")
    assert ok


# --- 4 -----------------------------------------------------------------------------


def test_criterion_4_poisson_law(report):
    t0 = time.perf_counter()
    dist = pne_count_distribution(GameShape.uniform(14, 2), 10_000, seed=POISSON_SEED, workers=WORKERS)
    elapsed = time.perf_counter() - t0
    ok, parts = elapsed < 300, []
    for z in range(4):
        f, target = dist.frequency(z), math.exp(-1) / math.factorial(z)
        ok &= abs(f - target) <= 0.02
        parts.append(f"P({z})={_fmt(f)} vs {_fmt(target)}")
    report(4, ok, "; ".join(parts) + f"; TV={_fmt(dist.total_variation)}; {elapsed:.1f}s (< 300 s)")
    assert ok


# --- 5 -----------------------------------------------------------------------------

LATTICE_GAMES = 100_000
LARGEST = GameShape.uniform(8, 3)


def _lattice_shape(rng: np.random.Generator, t: int) -> GameShape:
    if t % 1000 == 0:
        return LARGEST
    n = int(rng.integers(2, 9))
    return GameShape(tuple(int(x) for x in rng.integers(2, 4, size=n)))


def _lattice_chunk(seed: int, start: int, stop: int) -> list:
    out = []
    for t in range(start, stop):
        rng = derive_trial_rng(TrialSeed(seed, t))
        game = sample_generic_game(_lattice_shape(rng, t), rng)
        rec = classify(game, global_flags=True)
        out.append(tuple(rec.lattice_violations()))
    return out


def test_criterion_5_implication_lattice(report):
    t0 = time.perf_counter()
    exhaustive: Counter = Counter()
    examined = 0
    for k in ((2, 2), (2, 2, 2), (3, 3)):
        for game in enumerate_generic_games(k):
            examined += 1
            exhaustive.update(classify(game, global_flags=True).lattice_violations())
    random_hits = parallel_trials(_lattice_chunk, LATTICE_SEED, LATTICE_GAMES, WORKERS)
    sampled: Counter = Counter(v for hit in random_hits for v in hit)
    elapsed = time.perf_counter() - t0
    ok = examined == 16 + 4096 + 46656 and not exhaustive and not sampled
    detail = (
        f"exhaustive {examined} games: {sum(exhaustive.values())} violations {dict(exhaustive)}; "
        f"random {len(random_hits)} games (seed {LATTICE_SEED}, up to {LARGEST}): "
        f"{sum(1 for h in random_hits if h)} games with violations {dict(sampled)}; {elapsed:.1f}s"
    )
    report(5, ok, detail)
    assert ok


# --- 6 -----------------------------------------------------------------------------


def _random_small_shape(rng: np.random.Generator) -> GameShape:
    while True:
        n = int(rng.integers(2, 9))
        k = tuple(int(x) for x in rng.integers(2, 5, size=n))
        if math.prod(k) <= 256:
            return GameShape(k)


def _graph_mismatches(t: int) -> list[str]:
    rng = derive_trial_rng(TrialSeed(GRAPH_SEED, t))
    shape = _random_small_shape(rng)
    if t % 2 == 0:
        table = sample_winner_table(shape, rng)
        storage = Storage.EXPLICIT if t % 4 == 0 else Storage.IMPLICIT
        graph = build_best_response_graph(table, storage)
        adj = best_response_adjacency(table)
    else:
        game = sample_generic_game(shape, rng)
        graph = build_better_response_graph(game)
        adj = better_response_adjacency(game)
    reach = brute_force_reachability(adj)
    brute = brute_force_classes(adj)
    rec = classify(graph, vertex_flags_=True)
    checks = {
        "num_pne": rec.num_pne == brute.num_pne,
        "acyclic": rec.acyclic == brute.acyclic,
        "weakly_acyclic": rec.weakly_acyclic == brute.weakly_acyclic,
        "weakly_acyclic_bfs": is_weakly_acyclic(graph, cross_check=True) == brute.weakly_acyclic,
        "connected": rec.connected == brute.connected,
        "super_connected": rec.super_connected == brute.super_connected,
        "v_connected": tuple(rec.v_connected) == tuple(brute.v_connected),
        "v_super_connected": tuple(rec.v_super_connected) == tuple(brute.v_super_connected),
        "reach_counts": np.array_equal(reach_counts(graph), reach.sum(axis=1)),
        "reached_from_counts": np.array_equal(reached_from_counts(graph), reach.sum(axis=0)),
        "sinks": sinks(graph) == set(np.flatnonzero(~adj.any(axis=1)).tolist()),
        "sources": sources(graph) == set(np.flatnonzero(~adj.any(axis=0)).tolist()),
    }
    return [name for name, good in checks.items() if not good]


def test_criterion_6_reachability_oracle(report):
    t0 = time.perf_counter()
    bad: Counter = Counter()
    graphs = 1000
    for t in range(graphs):
        bad.update(_graph_mismatches(t))
    elapsed = time.perf_counter() - t0
    ok = not bad
    report(6, ok, f"{graphs} graphs (<= 256 vertices, best and better response, seed {GRAPH_SEED}): "
                  f"{sum(bad.values())} mismatches {dict(bad)}; {elapsed:.1f}s")
    assert ok


# --- 7 -----------------------------------------------------------------------------


def _absorption_fixtures():
    """(label, game, start, params) on games with at most 64 profiles."""
    half = DynamicParams(p=0.5, step_cap=1000)
    out = [("dominant(2,2,2)", construct_dominant_game((2, 2, 2)), 7, half)]
    sticky = construct_sticky_game(GameShape.uniform(4, 2))
    cycle = set(sticky_cycle_profiles(sticky.shape))
    out += [(f"sticky(4,2)@{v}", sticky, v, half) for v in range(16) if v not in cycle]
    mixed = DynamicParams(p=(0.3, 0.5, 0.7), step_cap=1000)
    out += [(f"figure1@{v}", figure_one_game(), v, mixed) for v in range(8)]
    rng = derive_trial_rng(TrialSeed(DYNAMICS_SEED, 0), (1,))
    for i, k in enumerate([(2, 2, 2), (3, 3), (2, 3, 2), (3, 2, 2, 2), (4, 4), (2, 2, 2, 2, 2)]):
        game, _ = sample_conditioned(GameShape(k), AT_LEAST_ONE_PNE, rng)
        h = brute_force_absorption(game, half)
        # the two starts whose exact probability is closest to one half
        for v in np.argsort(np.abs(h - 0.5), kind="stable")[:2]:
            out.append((f"sampled{i}{k}@{int(v)}", game, int(v), half))
    return out


def test_criterion_7_dynamics(report):
    t0 = time.perf_counter()
    conv = convergence_experiment(
        GameShape.uniform(8, 2), 1000, DynamicParams(p=0.5, step_cap=100_000), DYNAMICS_SEED,
        starts=10, require_connected=True, workers=WORKERS,
    )
    conv_ok = len(conv.runs) == 10_000 and conv.fraction == 1.0

    sticky = construct_sticky_game(GameShape.uniform(4, 2))
    trap = absorption_runs(
        sticky, sticky_cycle_profiles(sticky.shape), DynamicParams(p=0.5, step_cap=10_000), 1000,
        DYNAMICS_SEED, workers=WORKERS,
    )
    trap_ok = len(trap.runs) == 1000 and trap.absorbed == 0

    worst, worst_label, fixtures = 0.0, "", _absorption_fixtures()
    for label, game, start, params in fixtures:
        exact = float(brute_force_absorption(game, params)[start])
        sim = absorption_runs(game, [start], params, 10_000, DYNAMICS_SEED, workers=WORKERS).fraction
        if abs(sim - exact) >= worst:
            worst, worst_label = abs(sim - exact), f"{label} sim={_fmt(sim)} exact={_fmt(exact)}"
    exact_ok = worst <= 0.02
    elapsed = time.perf_counter() - t0
    ok = conv_ok and trap_ok and exact_ok
    report(7, ok, f"connected (8,2): {conv.absorbed}/{len(conv.runs)} absorbed, max steps "
                  f"{conv.step_quantiles()['1.0']:.0f}; sticky cycle: {trap.absorbed}/{len(trap.runs)} absorbed; "
                  f"{len(fixtures)} exact fixtures, worst gap {_fmt(worst)} ({worst_label}); {elapsed:.1f}s")
    assert ok


# --- 8 -----------------------------------------------------------------------------


def test_criterion_8_determinism(report):
    cells = [GameShape.uniform(n, 2) for n in range(2, 7)] + [GameShape.uniform(3, 3), GameShape((2, 3, 4))]
    outputs: dict[str, set] = {"figure2": set(), "pne-dist": set(), "dynamics": set()}
    t0 = time.perf_counter()
    for workers in (1, 4, 8):
        cfg = ExperimentConfig(cells=cells, trials=2000, master_seed=DETERMINISM_SEED, workers=workers, flags=FLAGS)
        outputs["figure2"].add(emit_results(estimate_class_proportions(cfg), "csv"))
        outputs["pne-dist"].add(
            pne_count_distribution(GameShape.uniform(8, 2), 3000, seed=DETERMINISM_SEED, workers=workers).csv()
        )
        outputs["dynamics"].add(
            convergence_experiment(GameShape.uniform(5, 2), 100, DynamicParams(p=0.5, step_cap=10_000),
                                   DETERMINISM_SEED, starts=5, workers=workers).csv()
        )
    elapsed = time.perf_counter() - t0
    ok = all(len(v) == 1 for v in outputs.values())
    report(8, ok, ", ".join(f"{k}: {len(v)} distinct CSV" for k, v in outputs.items())
           + f" across 1/4/8 workers; {elapsed:.1f}s")
    assert ok


def test_wilson_interval_sanity():
    # the interval used by criterion 2 is centred near the estimate
    lo, hi = wilson_interval(5000, 10_000)
    assert lo < 0.5 < hi and hi - lo < 0.02
