"""Batched game lanes with auto-reset and unified observation/action spaces."""

from __future__ import annotations

import numpy as np

from ..rng import STREAM_ENV, stream
from .core import GRID, MAX_CHANNELS, NUM_ACTIONS, OBS_DIM, UNIFIED_TO_NATIVE, make_game


class EpisodeRecord:
    __slots__ = ("ret", "length", "truncated")

    def __init__(self, ret: float, length: int, truncated: bool):
        self.ret = ret
        self.length = length
        self.truncated = truncated


class VecTask:
    """N independent lanes of one game.

    Each lane draws a fresh Philox stream per episode from
    (run seed, env tag, salt, lane, episode counter), so trajectories replay
    exactly and lanes never share randomness. A lane that finishes an episode
    is reset within the same step; the returned observation is the fresh one.

    Episodes are cut at episode_cap steps with the truncated flag raised.
    """

    def __init__(
        self,
        game_id: str,
        num_lanes: int,
        run_seed: int,
        stream_salt: int = 0,
        episode_cap: int = 1000,
    ):
        self.game_id = game_id
        self.num_lanes = num_lanes
        self.obs_dim = OBS_DIM
        self.num_actions = NUM_ACTIONS
        self._run_seed = run_seed
        self._salt = stream_salt
        self._cap = episode_cap
        self._act_table = UNIFIED_TO_NATIVE[game_id]
        self._episode = [0] * num_lanes
        self._games = [make_game(game_id, self._episode_rng(i)) for i in range(num_lanes)]
        self._ep_ret = np.zeros(num_lanes)
        self._ep_len = np.zeros(num_lanes, dtype=np.int64)
        self._completed: list[EpisodeRecord] = []
        self._grid = np.zeros((num_lanes, GRID, GRID, MAX_CHANNELS))
        self.observations = self._grid.reshape(num_lanes, OBS_DIM)
        self._render()

    def _episode_rng(self, lane: int) -> np.random.Generator:
        return stream(self._run_seed, STREAM_ENV, self._salt, lane, self._episode[lane])

    def _render(self) -> None:
        self._grid.fill(0.0)
        for i, game in enumerate(self._games):
            game.render(self._grid[i])

    def step(self, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Advance every lane one step; returns (rewards, dones, truncated)."""
        n = self.num_lanes
        rewards = np.zeros(n)
        dones = np.zeros(n, dtype=bool)
        truncated = np.zeros(n, dtype=bool)
        table = self._act_table
        for i, game in enumerate(self._games):
            r, term = game.act(table[int(actions[i])])
            self._ep_ret[i] += r
            self._ep_len[i] += 1
            trunc = not term and self._ep_len[i] >= self._cap
            if term or trunc:
                self._completed.append(
                    EpisodeRecord(float(self._ep_ret[i]), int(self._ep_len[i]), trunc)
                )
                self._episode[i] += 1
                game.reset(self._episode_rng(i))
                self._ep_ret[i] = 0.0
                self._ep_len[i] = 0
            rewards[i] = r
            dones[i] = term or trunc
            truncated[i] = trunc
        self._render()
        return rewards, dones, truncated

    def drain_completed(self) -> list[EpisodeRecord]:
        """Episodes finished since the last drain."""
        done, self._completed = self._completed, []
        return done
