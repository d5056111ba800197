"""Command-line entry point: ``gameconn <subcommand> ...``.

Exit status is 0 on success, 1 on a usage error and 2 when the work itself
fails.  All randomness flows from ``--seed`` (default: $GAMECONN_SEED, then 0).
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from . import experiments as ex
from .connectivity import ALL_FLAGS, FLAG_NAMES, classify
from .dynamics import (
    DynamicKind,
    DynamicParams,
    MAX_RECORDED_STEPS,
    construct_dominant_game,
    construct_sticky_game,
    sticky_cycle_profiles,
)
from .errors import GameconnError
from .game import GameShape, game_to_dict, load_game
from .graphs import DOT_CAP, build_best_response_graph, build_better_response_graph, to_dot
from .oracle import ENUMERATION_CAP, exact_class_proportions
from .sampling import SampleCondition, TrialSeed, derive_trial_rng, sample, seed_from_env

BUILTIN_GAMES = {"@figure1": "figure1.json"}


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1 after a one-line reason and the synopsis."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# --- argument types --------------------------------------------------------------------


def int_list(text: str) -> list[int]:
    """``3``, ``2,3,5`` or an inclusive range ``2..8``."""
    out: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if ".." in part:
                lo, hi = part.split("..")
                if int(hi) < int(lo):
                    raise ValueError
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, lists a,b or ranges a..b, got {text!r}") from None
    return out


def condition(text: str) -> SampleCondition:
    try:
        return SampleCondition.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def seed_value(text: str) -> int:
    try:
        return int(text, 0) % 2**64
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None


def positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        v = 0
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def flag_list(text: str) -> tuple[str, ...]:
    flags = tuple(f.strip().replace("-", "_") for f in text.split(",") if f.strip())
    bad = [f for f in flags if f not in ALL_FLAGS]
    if bad or not flags:
        raise argparse.ArgumentTypeError(f"unknown flags {bad}; choose from {', '.join(ALL_FLAGS)}")
    return flags


def one_shape(players: list[int], actions: list[int]) -> GameShape:
    if len(players) != 1:
        raise UsageError("this subcommand takes a single --players value")
    n = players[0]
    if len(actions) == 1:
        return GameShape.uniform(n, actions[0])
    if len(actions) != n:
        raise UsageError(f"--actions lists {len(actions)} values for {n} players")
    return GameShape(tuple(actions))


def parse_cells(text: str) -> list[GameShape]:
    """``n:k`` items separated by spaces or semicolons; n and k accept lists and ranges."""
    cells = []
    for item in text.replace(";", " ").split():
        if ":" not in item:
            raise UsageError(f"cell {item!r} must look like n:k")
        ns, ks = item.split(":", 1)
        for n in int_list(ns):
            for k in int_list(ks):
                cells.append(GameShape.uniform(n, k))
    return cells


# --- config files ------------------------------------------------------------------------


def read_config(path: str) -> list[str]:
    """``key = value`` lines (``#`` comments) turned into long options."""
    tokens: list[str] = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        opt = "--" + key.replace("_", "-")
        if value.lower() in ("true", "yes", "on"):
            tokens.append(opt)
        elif value.lower() in ("false", "no", "off"):
            continue
        else:
            tokens += [opt, value]
    return tokens


def expand_config(argv: list[str]) -> list[str]:
    """Insert options from ``--config FILE`` right after the subcommand so that
    explicit command-line options take precedence."""
    for i, tok in enumerate(argv):
        path = None
        if tok == "--config" and i + 1 < len(argv):
            path, rest = argv[i + 1], argv[:i] + argv[i + 2 :]
        elif tok.startswith("--config="):
            path, rest = tok.split("=", 1)[1], argv[:i] + argv[i + 1 :]
        if path is not None:
            if not rest:
                raise UsageError("--config needs a subcommand")
            return rest[:1] + read_config(path) + rest[1:]
    return argv


# --- output helpers --------------------------------------------------------------------------


def write_text(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def resolve_game_path(name: str):
    if name in BUILTIN_GAMES:
        return resources.files("gameconn").joinpath("data", BUILTIN_GAMES[name])
    return Path(name)


# --- subcommands -------------------------------------------------------------------------------


def cmd_sample(args) -> str:
    shape = args.shape
    games = []
    for t in range(args.count):
        rng = derive_trial_rng(TrialSeed(args.seed, t))
        g, _ = sample(shape, rng, condition=args.condition, full=not args.winners_only,
                      max_rejections=args.max_rejections)
        games.append(game_to_dict(g))
    payload = games[0] if args.count == 1 else games
    return json.dumps(payload, indent=1) + "\n"


def cmd_classify(args) -> str:
    path = resolve_game_path(args.game)
    game = load_game(path)
    rec = classify(game, vertex_flags_=args.vertex_flags)
    if args.emit_dot:
        g = build_better_response_graph(game) if args.better else build_best_response_graph(game)
        if g.vertex_count > DOT_CAP:
            raise UsageError(f"DOT output is limited to {DOT_CAP} profiles")
        Path(args.emit_dot).write_text(to_dot(g), encoding="utf-8")
    return json.dumps(rec.to_dict(), indent=1) + "\n"


def figure2_config(args) -> ex.ExperimentConfig:
    if args.cells:
        cells = parse_cells(args.cells)
    else:
        cells = [GameShape.uniform(n, k) for k in args.actions for n in args.players]
    if not cells:
        raise UsageError("no cells selected")
    return ex.ExperimentConfig(
        cells=cells,
        trials=args.trials,
        condition=args.condition,
        master_seed=args.seed,
        workers=args.threads,
        flags=args.flags,
        out=args.out,
        fmt=args.format,
    )


def cmd_figure2(args) -> str:
    config = args.validated
    table = ex.estimate_class_proportions(config)
    return ex.emit_results(table, config.fmt)


def cmd_pne_dist(args) -> str:
    shape = args.shape
    dist = ex.pne_count_distribution(shape, args.trials, args.seed, args.threads)
    return json.dumps(dist.to_dict(), indent=1) + "\n" if args.format == "json" else dist.csv()


def cmd_reach_stats(args) -> str:
    shape = args.shape
    report = ex.reach_threshold_experiment(shape, args.trials, args.seed, workers=args.threads, budget=args.cap)
    return json.dumps(report.to_dict(), indent=1) + "\n" if args.format == "json" else report.csv()


def cmd_dynamics(args) -> str:
    shape = args.shape
    params = DynamicParams(DynamicKind(args.kind), args.p, args.steps)
    if args.fixture:
        if args.fixture == "sticky":
            game, starts = construct_sticky_game(shape), sticky_cycle_profiles(shape)
        else:
            game, starts = construct_dominant_game(shape), [shape.vertex_count - 1]
        runs = args.trials * args.starts
        stats = ex.absorption_runs(game, starts, params, runs, args.seed, workers=args.threads)
        replay = lambda: ex.fixed_game_trajectory(game, starts, params, args.seed)
    else:
        options = dict(starts=args.starts, start_mode=args.start_mode, condition=args.condition,
                       require_connected=args.require_connected)
        stats = ex.convergence_experiment(shape, args.trials, params, args.seed, workers=args.threads, **options)
        replay = lambda: ex.convergence_trajectory(shape, params, args.seed, **options)
    if args.trajectory:
        Path(args.trajectory).write_text("\n".join(map(str, replay())) + "\n", encoding="utf-8")
    return json.dumps(stats.to_dict(), indent=1) + "\n" if args.format == "json" else stats.csv()


def cmd_enumerate(args) -> str:
    shape = args.shape
    result = exact_class_proportions(shape, args.flags, cap=args.cap)
    return json.dumps(result.to_dict(), indent=1) + "\n"


# --- parser ----------------------------------------------------------------------------------


def _shape_args(p, players_help="number of players"):
    p.add_argument("--players", type=int_list, required=True, help=players_help)
    p.add_argument("--actions", type=int_list, default=[2],
                   help="actions per player: one value for every player, or one per player (a,b,c)")


def _common(p, trials=10_000, formats=("csv", "json")):
    p.add_argument("--trials", type=positive, default=trials, help=f"number of trials (default {trials})")
    p.add_argument("--seed", type=seed_value, default=None, help="master seed, u64 (default $GAMECONN_SEED or 0)")
    p.add_argument("--threads", type=positive, default=1, help="worker processes; output does not depend on it")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.add_argument("--format", choices=formats, default=formats[0])
    p.add_argument("--config", metavar="FILE", help="key = value file supplying defaults for these options")


def build_parser() -> Parser:
    parser = Parser(
        prog="gameconn",
        description="Connectivity of best-response graphs in random finite games.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="<command>")

    p = sub.add_parser("sample", help="draw uniform random games and print them as JSON",
                       description="Draw uniform random generic games (one strict ranking per line), "
                                   "optionally conditioned on the number of pure Nash equilibria.")
    _shape_args(p)
    p.add_argument("--count", type=positive, default=1)
    p.add_argument("--seed", type=seed_value, default=None)
    p.add_argument("--condition", type=condition, default=SampleCondition.parse("none"),
                   help="none, pne (at least one equilibrium) or pne=z (exactly z)")
    p.add_argument("--winners-only", action="store_true", help="emit winner tables instead of full rankings")
    p.add_argument("--max-rejections", type=positive, default=10**6)
    p.add_argument("--out", default=None)
    p.add_argument("--config", metavar="FILE")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("classify", help="classify a game file",
                       description="Read a game JSON file and report its equilibrium count and whether its "
                                   "best-response graph is acyclic, weakly acyclic, connected (every non-sink "
                                   "reaches every sink) and super-connected (every non-sink reaches every "
                                   "non-source). Global flags repeat the test on the better-response graph. "
                                   "Use @figure1 for the bundled three-player example.")
    p.add_argument("game", help="path to a game JSON file, or @figure1")
    p.add_argument("--emit-dot", metavar="PATH", help="also write the response graph in Graphviz format")
    p.add_argument("--better", action="store_true", help="with --emit-dot, draw the better-response graph")
    p.add_argument("--vertex-flags", action="store_true", help="include per-profile connectivity flags")
    p.add_argument("--out", default=None)
    p.add_argument("--config", metavar="FILE")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("figure2", help="estimate class proportions over a grid of shapes",
                       description="Monte Carlo estimate of the share of connected, acyclic and "
                                   "super-connected games among those with a pure Nash equilibrium, "
                                   "for each (players, actions) cell. Output: one CSV row per cell and flag.")
    p.add_argument("--players", type=int_list, default=list(range(2, 9)), help="players, e.g. 2..8 (default)")
    p.add_argument("--actions", type=int_list, default=[2], help="actions per player, e.g. 2,3")
    p.add_argument("--cells", default=None, help="explicit cells such as '2..8:2 3..6:3' (overrides --players/--actions)")
    p.add_argument("--flags", type=flag_list, default=("connected", "acyclic", "super_connected"),
                   help="comma-separated classes to estimate")
    p.add_argument("--condition", type=condition, default=SampleCondition.parse("pne"),
                   help="none, pne (at least one equilibrium) or pne=z (exactly z)")
    _common(p, formats=("csv", "json", "svg"))
    p.set_defaults(func=cmd_figure2, configure=figure2_config)

    p = sub.add_parser("pne-dist", help="distribution of the number of pure Nash equilibria",
                       description="Empirical distribution of the pure-equilibrium count of uniform random "
                                   "games, compared with Poisson(1).")
    _shape_args(p)
    _common(p)
    p.set_defaults(func=cmd_pne_dist)

    p = sub.add_parser("reach-stats", help="reached-from counts of random best-response graphs",
                       description="Histogram of how many profiles can reach each profile, with the number "
                                   "of profiles that are reached from more than log K / (log K - log(K-1)) "
                                   "profiles without being reached from every non-sink.")
    _shape_args(p)
    _common(p, trials=100)
    p.add_argument("--cap", type=positive, default=ex.REACH_BUDGET, help="largest number of profiles allowed")
    p.set_defaults(func=cmd_reach_stats)

    p = sub.add_parser("dynamics", help="simulate best-response dynamics with inertia",
                       description="Run adaptive dynamics on sampled games (or a fixture) and report, per "
                                   "run, whether a pure Nash equilibrium was reached and after how many steps.")
    _shape_args(p)
    _common(p, trials=100)
    p.add_argument("--kind", choices=[k.value for k in DynamicKind], default=DynamicKind.BEST_RESPONSE_INERTIA.value)
    p.add_argument("--p", type=float, default=0.5, help="probability that a player updates in a step")
    p.add_argument("--steps", type=positive, default=10**5, help="step cap per run")
    p.add_argument("--starts", type=positive, default=10, help="starting profiles per game")
    p.add_argument("--start-mode", choices=("random", "cycle"), default="random")
    p.add_argument("--condition", type=condition, default=SampleCondition.parse("pne"),
                   help="none, pne (at least one equilibrium) or pne=z (exactly z)")
    p.add_argument("--require-connected", action="store_true", help="only keep connected games")
    p.add_argument("--fixture", choices=("sticky", "dominant"), help="run on a fixed game instead of samples")
    p.add_argument("--trajectory", metavar="PATH",
                   help=f"write the first run's profiles, at most {MAX_RECORDED_STEPS}")
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("enumerate", help="exact class proportions by exhaustive enumeration",
                       description="Enumerate every winner table (or every game, when global flags are "
                                   "requested) of a small shape and report exact proportions as fractions.")
    _shape_args(p)
    p.add_argument("--flags", type=flag_list, default=FLAG_NAMES, help="comma-separated classes to count")
    p.add_argument("--cap", type=positive, default=ENUMERATION_CAP)
    p.add_argument("--out", default=None)
    p.add_argument("--config", metavar="FILE")
    p.set_defaults(func=cmd_enumerate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = expand_config(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"gameconn: error: {exc}", file=sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "seed", 0) is None:
        args.seed = seed_from_env(0)
    try:
        if hasattr(args, "configure"):
            args.validated = args.configure(args)
        elif hasattr(args, "players"):
            args.shape = one_shape(args.players, args.actions)
        if hasattr(args, "p"):
            DynamicParams(DynamicKind(args.kind), args.p, args.steps)
    except (UsageError, ValueError, argparse.ArgumentTypeError) as exc:
        parser.print_usage(sys.stderr)
        print(f"gameconn {args.command}: error: {exc}", file=sys.stderr)
        return 1
    try:
        text = args.func(args)
        write_text(text, args.out)
    except UsageError as exc:
        print(f"gameconn {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (GameconnError, OSError, ValueError) as exc:
        print(f"gameconn {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
