"""Reward-free FrozenLake-style gridworld with a volatility schedule.

Tiles are frozen (F), hole (H), sub-goal (S) or goal (G).  Observations are
binary vectors with one channel per tile category plus one channel marking
the agent, flattened channel-major.  Stepping into a hole sends the agent
back to the layout's start tile; there is no terminal state and no reward.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

import numpy as np

FROZEN, HOLE, SUBGOAL, GOAL = 0, 1, 2, 3
N_TILE_TYPES = 4
N_CHANNELS = N_TILE_TYPES + 1
TILE_CHARS = "FHSG"
MAX_ATTEMPTS = 1000


class Action(enum.IntEnum):
    LEFT = 0
    DOWN = 1
    RIGHT = 2
    UP = 3


N_ACTIONS = len(Action)
_MOVES = {Action.LEFT: (0, -1), Action.DOWN: (1, 0), Action.RIGHT: (0, 1), Action.UP: (-1, 0)}


class LayoutGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridLayout:
    tiles: np.ndarray  # (height, width) int8 tile codes
    start: tuple[int, int] = (0, 0)
    seed: int = 0

    @property
    def height(self) -> int:
        return self.tiles.shape[0]

    @property
    def width(self) -> int:
        return self.tiles.shape[1]

    def __eq__(self, other):
        return (isinstance(other, GridLayout) and self.start == other.start
                and np.array_equal(self.tiles, other.tiles))

    def __hash__(self):
        return hash((self.tiles.tobytes(), self.start))

    def goal(self) -> tuple[int, int]:
        r, c = np.argwhere(self.tiles == GOAL)[0]
        return int(r), int(c)

    def frozen_cells(self) -> list[tuple[int, int]]:
        return [(int(r), int(c)) for r, c in np.argwhere(self.tiles == FROZEN)]

    def to_ascii(self, agent: tuple[int, int] | None = None) -> str:
        rows = []
        for r in range(self.height):
            row = [TILE_CHARS[t] for t in self.tiles[r]]
            if agent is not None and agent[0] == r:
                row[agent[1]] = "A"
            rows.append("".join(row))
        return "\n".join(rows)

    @classmethod
    def from_ascii(cls, text: str, start=(0, 0)) -> tuple["GridLayout", tuple[int, int] | None]:
        """Parse an ASCII grid.  An ``A`` cell is read as frozen with the agent on it."""
        rows = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if len({len(r) for r in rows}) != 1:
            raise ValueError("ragged ASCII grid")
        tiles = np.zeros((len(rows), len(rows[0])), dtype=np.int8)
        agent = None
        for r, row in enumerate(rows):
            for c, ch in enumerate(row):
                if ch == "A":
                    agent = (r, c)
                    ch = "F"
                if ch not in TILE_CHARS:
                    raise ValueError(f"unknown tile character {ch!r}")
                tiles[r, c] = TILE_CHARS.index(ch)
        return cls(tiles=tiles, start=tuple(start)), agent


def is_connected(tiles: np.ndarray, start: tuple[int, int], target: tuple[int, int]) -> bool:
    """BFS over non-hole tiles."""
    h, w = tiles.shape
    if tiles[start] == HOLE or tiles[target] == HOLE:
        return False
    seen = {start}
    queue = deque([start])
    while queue:
        r, c = queue.popleft()
        if (r, c) == target:
            return True
        for dr, dc in _MOVES.values():
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and (nr, nc) not in seen and tiles[nr, nc] != HOLE:
                seen.add((nr, nc))
                queue.append((nr, nc))
    return False


def regenerate_layout(rng: np.random.Generator, width: int = 8, height: int = 8,
                      hole_density: float = 0.25, n_subgoals: int = 2,
                      start: tuple[int, int] = (0, 0)) -> GridLayout:
    """Sample a layout by rejection until the goal is reachable from the start.

    The goal is placed uniformly on a non-start cell, then ``n_subgoals``
    sub-goals, then each remaining non-start cell becomes a hole with
    probability ``hole_density``.
    """
    n_cells = width * height
    if n_cells < 2 + n_subgoals:
        raise ValueError("grid too small for start, goal and sub-goals")
    start_idx = start[0] * width + start[1]
    for _ in range(MAX_ATTEMPTS):
        seed = int(rng.integers(0, 2**63 - 1))
        g = np.random.default_rng(seed)
        free = np.array([i for i in range(n_cells) if i != start_idx])
        special = g.choice(free, size=1 + n_subgoals, replace=False)
        tiles = np.full(n_cells, FROZEN, dtype=np.int8)
        tiles[special[0]] = GOAL
        tiles[special[1:]] = SUBGOAL
        plain = np.setdiff1d(free, special)
        tiles[plain[g.random(len(plain)) < hole_density]] = HOLE
        tiles = tiles.reshape(height, width)
        goal = divmod(int(special[0]), width)
        if is_connected(tiles, start, goal):
            return GridLayout(tiles=tiles, start=start, seed=seed)
    raise LayoutGenerationError(f"no connected layout after {MAX_ATTEMPTS} attempts")


@dataclass(frozen=True)
class VolatilitySchedule:
    """How often the map is regenerated and whether starts are randomised.

    ``reset_period`` is in environment steps (global counter); ``None`` means
    the map never changes.
    """

    reset_period: int | None = None
    randomize_start: bool = False

    def __post_init__(self):
        if self.reset_period is not None and self.reset_period < 1:
            raise ValueError("reset_period must be >= 1 or None")

    @classmethod
    def static(cls) -> "VolatilitySchedule":
        return cls(None, False)

    @classmethod
    def volatile(cls, period: int) -> "VolatilitySchedule":
        return cls(period, True)

    @property
    def is_static(self) -> bool:
        return self.reset_period is None and not self.randomize_start


def encode_observation(layout: GridLayout, position: tuple[int, int]) -> np.ndarray:
    h, w = layout.height, layout.width
    obs = np.zeros((N_CHANNELS, h, w), dtype=np.uint8)
    for k in range(N_TILE_TYPES):
        obs[k] = layout.tiles == k
    obs[N_TILE_TYPES, position[0], position[1]] = 1
    return obs.reshape(-1)


def decode_observation(obs: np.ndarray, width: int, height: int) -> tuple[np.ndarray, tuple[int, int]]:
    """Inverse of :func:`encode_observation`: returns (tiles, agent position)."""
    grid = np.asarray(obs).reshape(N_CHANNELS, height, width)
    if not np.array_equal(grid[:N_TILE_TYPES].sum(axis=0), np.ones((height, width))):
        raise ValueError("tile channels do not partition the grid")
    if grid[N_TILE_TYPES].sum() != 1:
        raise ValueError("agent channel must have exactly one active cell")
    tiles = grid[:N_TILE_TYPES].argmax(axis=0).astype(np.int8)
    r, c = np.argwhere(grid[N_TILE_TYPES] == 1)[0]
    return tiles, (int(r), int(c))


def observation_size(width: int, height: int) -> int:
    return N_CHANNELS * width * height


@dataclass
class StepEvent:
    hole_reset: bool = False
    layout_changed: bool = False


@dataclass
class FrozenLakeEnv:
    """Gridworld with no reward channel.

    ``reset`` and ``step`` return only the observation vector.  Bookkeeping
    for logs lives on the instance (``position``, ``layout``, ``last_event``,
    ``global_step``).
    """

    width: int = 8
    height: int = 8
    schedule: VolatilitySchedule = field(default_factory=VolatilitySchedule)
    seed: int = 0
    hole_density: float = 0.25
    n_subgoals: int = 2

    def __post_init__(self):
        self.rng = np.random.default_rng(self.seed)
        self.layout: GridLayout | None = None
        self.position: tuple[int, int] | None = None
        self.global_step = 0
        self.last_event = StepEvent()

    @property
    def obs_size(self) -> int:
        return observation_size(self.width, self.height)

    def _new_layout(self) -> GridLayout:
        return regenerate_layout(self.rng, self.width, self.height, self.hole_density,
                                 self.n_subgoals)

    def observe(self) -> np.ndarray:
        return encode_observation(self.layout, self.position)

    def reset(self) -> np.ndarray:
        """Start an episode; the map itself only changes on the step schedule."""
        if self.layout is None:
            self.layout = self._new_layout()
        self.reset_agent()
        self.last_event = StepEvent()
        return self.observe()

    def reset_agent(self) -> np.ndarray:
        if self.schedule.randomize_start:
            cells = self.layout.frozen_cells()
            self.position = cells[int(self.rng.integers(len(cells)))]
        else:
            self.position = self.layout.start
        return self.observe()

    def step(self, action) -> np.ndarray:
        if self.layout is None:
            raise RuntimeError("call reset() before step()")
        try:
            action = Action(int(action))
        except ValueError:
            raise ValueError(f"invalid action code {action!r}") from None
        dr, dc = _MOVES[action]
        r = min(max(self.position[0] + dr, 0), self.height - 1)
        c = min(max(self.position[1] + dc, 0), self.width - 1)
        event = StepEvent()
        self.position = (r, c)
        self.global_step += 1
        period = self.schedule.reset_period
        if period is not None and self.global_step % period == 0:
            self.layout = self._new_layout()
            event.layout_changed = True
        if self.layout.tiles[self.position] == HOLE:
            self.position = self.layout.start
            event.hole_reset = True
        self.last_event = event
        return self.observe()

