"""Trajectory logs, Hausdorff exploration scores and preference-entropy series."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .numerics import entropy_categorical


@dataclass
class TrajectoryStep:
    step: int
    row: int
    col: int
    action: int
    G: float
    hole_reset: bool = False


@dataclass
class TrajectoryLog:
    episode: int
    steps: list[TrajectoryStep] = field(default_factory=list)

    def append(self, step: TrajectoryStep, bounds: tuple[int, int] | None = None) -> None:
        if self.steps and step.step <= self.steps[-1].step:
            raise ValueError("trajectory steps must be strictly increasing")
        if bounds is not None and not (0 <= step.row < bounds[0] and 0 <= step.col < bounds[1]):
            raise ValueError(f"position {(step.row, step.col)} outside grid {bounds}")
        self.steps.append(step)

    def __len__(self) -> int:
        return len(self.steps)

    def points(self) -> np.ndarray:
        return np.array([(s.row, s.col) for s in self.steps], dtype=np.float64).reshape(-1, 2)


def _as_points(a) -> np.ndarray:
    pts = a.points() if isinstance(a, TrajectoryLog) else np.asarray(a, dtype=np.float64)
    pts = pts.reshape(len(pts), -1) if pts.size else pts.reshape(0, 2)
    if len(pts) == 0:
        raise ValueError("point set must be non-empty")
    return pts


def directed_hausdorff(a, b) -> float:
    """max over a in A of the distance to the nearest b in B (Euclidean)."""
    A, B = _as_points(a), _as_points(b)
    d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=-1)
    return float(np.sqrt(d2.min(axis=1).max()))


def hausdorff(a, b) -> float:
    return max(directed_hausdorff(a, b), directed_hausdorff(b, a))


def pairwise_exploration_scores(trajectories) -> list[float]:
    """Hausdorff distance between each consecutive pair of episodes."""
    if len(trajectories) < 2:
        raise ValueError("need at least two trajectories")
    return [hausdorff(x, y) for x, y in zip(trajectories[:-1], trajectories[1:])]


def allpairs_mean(trajectories) -> float:
    if len(trajectories) < 2:
        raise ValueError("need at least two trajectories")
    return float(np.mean([hausdorff(x, y) for x, y in combinations(trajectories, 2)]))


def entropy_series(snapshots) -> list[tuple[int, float]]:
    """(episode, entropy in nats) for each probability-vector snapshot."""
    return [(i, entropy_categorical(p)) for i, p in enumerate(snapshots)]
