from .asterix import Asterix
from .breakout import Breakout
from .core import (
    CHANNEL_COUNTS,
    GAME_IDS,
    GRID,
    MAX_CHANNELS,
    NUM_ACTIONS,
    OBS_DIM,
    UNIFIED_TO_NATIVE,
    make_game,
)
from .space_invaders import SpaceInvaders
from .vector import EpisodeRecord, VecTask

__all__ = [
    "Asterix",
    "Breakout",
    "CHANNEL_COUNTS",
    "EpisodeRecord",
    "GAME_IDS",
    "GRID",
    "MAX_CHANNELS",
    "NUM_ACTIONS",
    "OBS_DIM",
    "SpaceInvaders",
    "UNIFIED_TO_NATIVE",
    "VecTask",
    "make_game",
]
