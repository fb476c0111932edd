"""Fixed-cannon shooter on a 10x10 board.

A 4x6 block of aliens marches side to side, descending one row at each wall
and firing at the cannon column; the cannon fires upward with a cooldown.
Each alien destroyed pays one point; clearing the block respawns it. The
episode ends when an alien or an enemy bullet reaches the cannon. Fully
deterministic given the action sequence.

Channels: 0 cannon, 1 alien, 2 alien-moving-left, 3 alien-moving-right,
4 friendly bullet, 5 enemy bullet.
"""

from __future__ import annotations

import numpy as np

SHOT_COOL_DOWN = 5
ENEMY_MOVE_INTERVAL = 12
ENEMY_SHOT_INTERVAL = 10


class SpaceInvaders:
    game_id = "SI"
    num_channels = 6
    num_native_actions = 6

    def __init__(self, rng: np.random.Generator):
        self.reset(rng)

    def reset(self, rng: np.random.Generator) -> None:
        self._rng = rng
        self.pos = 5
        self.f_bullet_map = np.zeros((10, 10), dtype=np.int8)
        self.e_bullet_map = np.zeros((10, 10), dtype=np.int8)
        self.alien_map = np.zeros((10, 10), dtype=np.int8)
        self.alien_map[0:4, 2:8] = 1
        self.alien_dir = -1
        self.alien_move_timer = ENEMY_MOVE_INTERVAL
        self.alien_shot_timer = ENEMY_SHOT_INTERVAL
        self.shot_timer = 0
        self.terminal = False

    def act(self, action: int) -> tuple[float, bool]:
        if self.terminal:
            return 0.0, True
        r = 0.0

        if action == 5:
            if self.shot_timer == 0:
                self.f_bullet_map[9, self.pos] = 1
                self.shot_timer = SHOT_COOL_DOWN
        elif action == 1:
            self.pos = max(0, self.pos - 1)
        elif action == 3:
            self.pos = min(9, self.pos + 1)

        # bullets travel one cell per step; rows falling off the board vanish
        self.f_bullet_map = np.roll(self.f_bullet_map, -1, axis=0)
        self.f_bullet_map[9, :] = 0
        self.e_bullet_map = np.roll(self.e_bullet_map, 1, axis=0)
        self.e_bullet_map[0, :] = 0
        if self.e_bullet_map[9, self.pos]:
            self.terminal = True

        if self.alien_map[9, self.pos]:
            self.terminal = True
        if self.alien_move_timer == 0:
            # the block speeds up as it thins out
            self.alien_move_timer = min(int(self.alien_map.sum()), ENEMY_MOVE_INTERVAL)
            at_wall = (self.alien_map[:, 0].any() and self.alien_dir < 0) or (
                self.alien_map[:, 9].any() and self.alien_dir > 0
            )
            if at_wall:
                self.alien_dir = -self.alien_dir
                if self.alien_map[9, :].any():
                    self.terminal = True
                self.alien_map = np.roll(self.alien_map, 1, axis=0)
            else:
                self.alien_map = np.roll(self.alien_map, self.alien_dir, axis=1)
            if self.alien_map[9, self.pos]:
                self.terminal = True
        if self.alien_shot_timer == 0:
            self.alien_shot_timer = ENEMY_SHOT_INTERVAL
            y, x = self._nearest_alien()
            self.e_bullet_map[y, x] = 1

        kills = np.logical_and(self.alien_map, self.f_bullet_map)
        if kills.any():
            # clamp to one point per step even if two bullets land at once
            r = 1.0
            self.alien_map[kills] = 0
            self.f_bullet_map[kills] = 0

        if self.shot_timer > 0:
            self.shot_timer -= 1
        self.alien_move_timer -= 1
        self.alien_shot_timer -= 1

        if not self.alien_map.any():
            self.alien_map[0:4, 2:8] = 1
        return r, self.terminal

    def _nearest_alien(self) -> tuple[int, int]:
        """Lowest alien in the column closest to the cannon."""
        for col in sorted(range(10), key=lambda c: abs(c - self.pos)):
            rows = np.nonzero(self.alien_map[:, col])[0]
            if rows.size:
                return int(rows.max()), col
        raise RuntimeError("no aliens on the board")

    def render(self, out: np.ndarray) -> None:
        out[9, self.pos, 0] = 1.0
        out[:, :, 1] = self.alien_map
        out[:, :, 2 if self.alien_dir < 0 else 3] = self.alien_map
        out[:, :, 4] = self.f_bullet_map
        out[:, :, 5] = self.e_bullet_map
