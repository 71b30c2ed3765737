"""Two-outcome partial-monitoring games: classification, AppleTree, regret experiments."""

from pmgames.games import (
    Chain,
    Game,
    GameClass,
    GameKind,
    analyze_actions,
    chain,
    classify,
    load_fixture,
    load_game,
    purify,
    separation_holds,
)

__version__ = "0.1.0"

__all__ = [
    "Chain",
    "Game",
    "GameClass",
    "GameKind",
    "analyze_actions",
    "chain",
    "classify",
    "load_fixture",
    "load_game",
    "purify",
    "separation_holds",
]
