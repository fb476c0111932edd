"""Dodge-and-collect game on a 10x10 board.

Entities stream across eight fixed rows, entering from either side at random
times: gold (one point on contact) or enemies (episode over on contact). The
player moves in four directions inside rows 1..8. Randomness drives spawn
timing, side, kind and row throughout the episode.

Channels: 0 player, 1 enemy, 2 trail, 3 gold.
"""

from __future__ import annotations

import numpy as np

SPAWN_INTERVAL = 10
MOVE_INTERVAL = 5
NUM_SLOTS = 8


class _Entity:
    __slots__ = ("x", "y", "moving_right", "is_gold")

    def __init__(self, x, y, moving_right, is_gold):
        self.x = x
        self.y = y
        self.moving_right = moving_right
        self.is_gold = is_gold


class Asterix:
    game_id = "Ast"
    num_channels = 4
    num_native_actions = 6

    def __init__(self, rng: np.random.Generator):
        self.reset(rng)

    def reset(self, rng: np.random.Generator) -> None:
        self._rng = rng
        self.player_x = 5
        self.player_y = 5
        self.entities: list[_Entity | None] = [None] * NUM_SLOTS
        self.spawn_timer = SPAWN_INTERVAL
        self.move_timer = MOVE_INTERVAL
        self.terminal = False

    def _spawn(self) -> None:
        free = [i for i in range(NUM_SLOTS) if self.entities[i] is None]
        if not free:
            return
        from_left = bool(self._rng.integers(2))
        is_gold = self._rng.random() < 1.0 / 3.0
        slot = free[int(self._rng.integers(len(free)))]
        self.entities[slot] = _Entity(0 if from_left else 9, slot + 1, from_left, is_gold)

    def _collide(self, i: int) -> float:
        e = self.entities[i]
        if e.x == self.player_x and e.y == self.player_y:
            if e.is_gold:
                self.entities[i] = None
                return 1.0
            self.terminal = True
        return 0.0

    def act(self, action: int) -> tuple[float, bool]:
        if self.terminal:
            return 0.0, True
        r = 0.0

        if self.spawn_timer == 0:
            self._spawn()
            self.spawn_timer = SPAWN_INTERVAL

        if action == 1:
            self.player_x = max(0, self.player_x - 1)
        elif action == 3:
            self.player_x = min(9, self.player_x + 1)
        elif action == 2:
            self.player_y = max(1, self.player_y - 1)
        elif action == 4:
            self.player_y = min(8, self.player_y + 1)

        for i in range(NUM_SLOTS):
            if self.entities[i] is not None:
                r += self._collide(i)

        if self.move_timer == 0:
            self.move_timer = MOVE_INTERVAL
            for i in range(NUM_SLOTS):
                e = self.entities[i]
                if e is None:
                    continue
                e.x += 1 if e.moving_right else -1
                if e.x < 0 or e.x > 9:
                    self.entities[i] = None
                    continue
                r += self._collide(i)

        if self.spawn_timer > 0:
            self.spawn_timer -= 1
        if self.move_timer > 0:
            self.move_timer -= 1
        # at most one point per step even if two golds land in the same frame
        return min(r, 1.0), self.terminal

    def render(self, out: np.ndarray) -> None:
        out[self.player_y, self.player_x, 0] = 1.0
        for e in self.entities:
            if e is None:
                continue
            out[e.y, e.x, 3 if e.is_gold else 1] = 1.0
            back_x = e.x - 1 if e.moving_right else e.x + 1
            if 0 <= back_x <= 9:
                out[e.y, back_x, 2] = 1.0
