"""Paddle-and-bricks game on a 10x10 board.

Three brick rows sit near the top, the paddle slides along the bottom row and
the ball travels diagonally, bouncing off walls, bricks and the paddle. Each
destroyed brick pays one point; clearing the wall respawns it. Losing the ball
past the paddle ends the episode. The only randomness is the ball's starting
side at reset.

Channels: 0 paddle, 1 ball, 2 trail, 3 brick.
"""

from __future__ import annotations

import numpy as np

# direction codes: 0 up-left, 1 up-right, 2 down-left, 3 down-right
_WALL_BOUNCE = (1, 0, 3, 2)
_FLIP_BOUNCE = (3, 2, 1, 0)
_CORNER_BOUNCE = (2, 3, 0, 1)
_DX = (-1, 1, -1, 1)
_DY = (-1, -1, 1, 1)


class Breakout:
    game_id = "BO"
    num_channels = 4
    num_native_actions = 6

    def __init__(self, rng: np.random.Generator):
        self.reset(rng)

    def reset(self, rng: np.random.Generator) -> None:
        self._rng = rng
        self.ball_y = 3
        side = int(rng.integers(2))
        self.ball_x, self.ball_dir = ((0, 2), (9, 3))[side]
        self.pos = 4
        self.brick_map = np.zeros((10, 10), dtype=np.int8)
        self.brick_map[1:4, :] = 1
        self.strike = False
        self.last_x = self.ball_x
        self.last_y = self.ball_y
        self.terminal = False

    def act(self, action: int) -> tuple[float, bool]:
        if self.terminal:
            return 0.0, True
        r = 0.0

        if action == 1:
            self.pos = max(0, self.pos - 1)
        elif action == 3:
            self.pos = min(9, self.pos + 1)

        self.last_x = self.ball_x
        self.last_y = self.ball_y
        new_x = self.ball_x + _DX[self.ball_dir]
        new_y = self.ball_y + _DY[self.ball_dir]

        strike_toggle = False
        if new_x < 0 or new_x > 9:
            new_x = 0 if new_x < 0 else 9
            self.ball_dir = _WALL_BOUNCE[self.ball_dir]
        if new_y < 0:
            new_y = 0
            self.ball_dir = _FLIP_BOUNCE[self.ball_dir]
        elif self.brick_map[new_y, new_x] == 1:
            strike_toggle = True
            # one point per strike; the flag stops repeat scoring while the
            # ball glides along a brick face
            if not self.strike:
                r = 1.0
                self.strike = True
                self.brick_map[new_y, new_x] = 0
                new_y = self.last_y
                self.ball_dir = _FLIP_BOUNCE[self.ball_dir]
        elif new_y == 9:
            if not self.brick_map.any():
                self.brick_map[1:4, :] = 1
            if self.ball_x == self.pos:
                self.ball_dir = _FLIP_BOUNCE[self.ball_dir]
                new_y = self.last_y
            elif new_x == self.pos:
                self.ball_dir = _CORNER_BOUNCE[self.ball_dir]
                new_y = self.last_y
            else:
                self.terminal = True

        if not strike_toggle:
            self.strike = False

        self.ball_x = new_x
        self.ball_y = new_y
        return r, self.terminal

    def render(self, out: np.ndarray) -> None:
        """Fill a zeroed (10, 10, >=4) float array with the current board."""
        out[9, self.pos, 0] = 1.0
        out[self.ball_y, self.ball_x, 1] = 1.0
        out[self.last_y, self.last_x, 2] = 1.0
        out[:, :, 3] = self.brick_map
