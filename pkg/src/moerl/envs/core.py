"""Shared constants and the unified action table for the three grid games.

All games render onto a 10x10 board with one binary channel per entity kind.
Observations are zero-padded to the largest channel count so every task shares
one observation shape, and actions live in one unified discrete space sized by
the largest native action set; a unified action with no native counterpart
behaves as no-op.
"""

from __future__ import annotations

GRID = 10
MAX_CHANNELS = 6
OBS_DIM = GRID * GRID * MAX_CHANNELS
NUM_ACTIONS = 5

GAME_IDS = ("SI", "BO", "Ast")

# native action ids follow the classic order: 0 noop, 1 left, 2 up, 3 right,
# 4 down, 5 fire. Unified slots: 0 noop, 1 left, 2 right, 3 up-or-fire, 4 down.
UNIFIED_TO_NATIVE = {
    "SI": (0, 1, 3, 5, 0),
    "BO": (0, 1, 3, 0, 0),
    "Ast": (0, 1, 3, 2, 4),
}

NATIVE_ACTION_COUNTS = {"SI": 4, "BO": 3, "Ast": 5}
CHANNEL_COUNTS = {"SI": 6, "BO": 4, "Ast": 4}


def make_game(game_id: str, rng):
    if game_id == "BO":
        from .breakout import Breakout

        return Breakout(rng)
    if game_id == "SI":
        from .space_invaders import SpaceInvaders

        return SpaceInvaders(rng)
    if game_id == "Ast":
        from .asterix import Asterix

        return Asterix(rng)
    raise ValueError(f"unknown game id: {game_id}")
