"""Connectivity of best-response graphs in random finite games."""

from .connectivity import ClassificationRecord, classify, condensation
from .dynamics import DynamicKind, DynamicParams, construct_dominant_game, construct_sticky_game, run, step
from .errors import (
    ConditioningTimeout,
    GameconnError,
    InvalidGame,
    InvalidLine,
    InvalidProfile,
    InvalidShape,
    ShapeTooLarge,
    UseImplicit,
)
from .game import GameShape, LineId, OrdinalGame, WinnerTable, figure_one_game, load_game, dump_game
from .graphs import Storage, build_best_response_graph, build_better_response_graph
from .sampling import SampleCondition, TrialSeed, derive_trial_rng, sample_conditioned, sample_generic_game, sample_winner_table

__version__ = "0.1.0"
