"""Terrain grids, cost models, tasks and path accounting.

Coordinates are ``(x, y)`` = (column, row), 0-based.  Cost rasters are
indexed ``cost[y, x]``.  Impassable cells carry ``math.inf``.

Each move is charged the cost of the cell it enters, scaled by the step
length (1 for cardinal moves, sqrt(2) for diagonal ones).  The start cell
is never charged.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import raster

INF = math.inf
SQRT2 = raster.SQRT2

Coord = tuple[int, int]


class BoundsError(IndexError):
    """A coordinate lies outside the grid."""


class PathContractError(ValueError):
    """A point sequence violates the adjacency contract of ``path_cost``."""


@dataclass(frozen=True)
class TerrainClass:
    label: str
    color: tuple[int, int, int]
    cost: float


@dataclass(frozen=True)
class CostModel:
    """Ordered terrain classes: label, RGB color and traversal cost."""

    entries: tuple[TerrainClass, ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("cost model has no entries")
        colors = [e.color for e in self.entries]
        if len(set(colors)) != len(colors):
            raise ValueError("cost model colors must be pairwise distinct")
        labels = [e.label for e in self.entries]
        if len(set(labels)) != len(labels):
            raise ValueError("cost model labels must be unique")
        for e in self.entries:
            if not (e.cost > 0):
                raise ValueError(f"cost of {e.label!r} must be positive, got {e.cost}")
            if len(e.color) != 3 or any(not 0 <= c <= 255 for c in e.color):
                raise ValueError(f"bad color for {e.label!r}: {e.color}")
        finite = [e.cost for e in self.entries if math.isfinite(e.cost)]
        if not finite:
            raise ValueError("cost model needs at least one finite-cost class")
        if finite.count(min(finite)) != 1:
            raise ValueError("exactly one class may carry the minimum finite cost")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "CostModel":
        entries = []
        for label, spec in mapping.items():
            raw = spec["cost"]
            if isinstance(raw, str):
                if raw.lower() not in ("inf", "infinity"):
                    raise ValueError(f"unrecognised cost {raw!r} for {label!r}")
                cost = INF
            else:
                cost = float(raw)
            entries.append(TerrainClass(label, tuple(int(c) for c in spec["color"]), cost))
        return cls(tuple(entries))

    @classmethod
    def from_json(cls, path: str | Path) -> "CostModel":
        with open(path) as f:
            return cls.from_mapping(json.load(f))

    def to_mapping(self) -> dict:
        return {
            e.label: {"color": list(e.color), "cost": "inf" if math.isinf(e.cost) else e.cost}
            for e in self.entries
        }

    @property
    def costs(self) -> np.ndarray:
        return np.array([e.cost for e in self.entries], dtype=float)

    @property
    def palette(self) -> np.ndarray:
        return np.array([e.color for e in self.entries], dtype=np.uint8)

    @property
    def min_cost(self) -> float:
        return min(e.cost for e in self.entries if math.isfinite(e.cost))

    @property
    def free_index(self) -> int:
        return int(np.argmin(self.costs))

    @property
    def obstacle_index(self) -> int:
        for i, e in enumerate(self.entries):
            if math.isinf(e.cost):
                return i
        raise ValueError("cost model has no impassable class")

    def index_of_cost(self, cost: float) -> int:
        for i, e in enumerate(self.entries):
            if e.cost == cost:
                return i
        raise KeyError(f"cost {cost} not in model")

    def index_of_label(self, label: str) -> int:
        for i, e in enumerate(self.entries):
            if e.label == label:
                return i
        raise KeyError(label)


def _load_default(name: str) -> CostModel:
    text = resources.files("terrain_advisor").joinpath("data").joinpath(name).read_text()
    return CostModel.from_mapping(json.loads(text))


def multiterrain_model() -> CostModel:
    """Twelve difficulty levels for synthetic maps, white free space to black obstacles."""
    return _load_default("multiterrain.json")


def rugd_model() -> CostModel:
    """Semantic classes of the RUGD label rasters with their traversal costs."""
    return _load_default("rugd.json")


@dataclass(frozen=True, eq=False)
class TerrainGrid:
    """A raster of terrain-class indices into ``model``.

    Keeping class indices rather than costs makes rendering exact when two
    classes share a cost.
    """

    labels: np.ndarray
    model: CostModel
    cost: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int16, copy=True)
        if labels.ndim != 2 or labels.shape[0] == 0 or labels.shape[1] == 0:
            raise ValueError(f"labels must be a non-empty 2-D array, got shape {labels.shape}")
        if labels.min() < 0 or labels.max() >= len(self.model.entries):
            raise ValueError("label index outside the cost model")
        labels.flags.writeable = False
        cost = self.model.costs[labels]
        cost.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "cost", cost)

    @classmethod
    def from_costs(cls, costs, model: CostModel) -> "TerrainGrid":
        """Build from a cost raster; each cost maps to the first class carrying it."""
        costs = np.asarray(costs, dtype=float)
        labels = np.full(costs.shape, -1, dtype=np.int16)
        for i in reversed(range(len(model.entries))):
            labels[costs == model.entries[i].cost] = i
        if (labels < 0).any():
            bad = sorted({float(c) for c in costs[labels < 0]})
            raise ValueError(f"costs {bad} are not in the cost model")
        return cls(labels, model)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def in_bounds(self, c: Coord) -> bool:
        return 0 <= c[0] < self.width and 0 <= c[1] < self.height

    def is_free(self, c: Coord) -> bool:
        return self.in_bounds(c) and math.isfinite(self.cost[c[1], c[0]])

    def __eq__(self, other):
        if not isinstance(other, TerrainGrid):
            return NotImplemented
        return self.model == other.model and np.array_equal(self.labels, other.labels)

    __hash__ = None


@dataclass(frozen=True)
class PlanTask:
    map_id: int
    start: Coord
    goal: Coord

    def validate(self, grid: TerrainGrid) -> None:
        if self.start == self.goal:
            raise ValueError("start and goal coincide")
        for name, c in (("start", self.start), ("goal", self.goal)):
            if not grid.in_bounds(c):
                raise BoundsError(f"{name} {c} outside {grid.width}x{grid.height} grid")
            if not grid.is_free(c):
                raise ValueError(f"{name} {c} lies on an impassable cell")

    def to_json(self) -> dict:
        return {"map_id": self.map_id, "start": list(self.start), "goal": list(self.goal)}

    @classmethod
    def from_json(cls, data: dict) -> "PlanTask":
        return cls(int(data["map_id"]), tuple(data["start"]), tuple(data["goal"]))


@dataclass(frozen=True)
class PlannedPath:
    points: tuple[Coord, ...]
    step_costs: tuple[float, ...]
    total_cost: float

    def __len__(self):
        return len(self.points)

    @classmethod
    def from_points(cls, grid: TerrainGrid, points: Iterable[Coord]) -> "PlannedPath":
        pts = tuple((int(x), int(y)) for x, y in points)
        total, steps = path_cost(grid, pts)
        return cls(pts, tuple(steps), total)

    def to_json(self, status: str = "success") -> dict:
        return {
            "points": [list(p) for p in self.points],
            "total_cost": None if math.isinf(self.total_cost) else self.total_cost,
            "status": status,
        }


def cost_at(grid: TerrainGrid, c: Coord) -> float:
    if not grid.in_bounds(c):
        raise BoundsError(f"{c} outside {grid.width}x{grid.height} grid")
    return float(grid.cost[c[1], c[0]])


def step_length(a: Coord, b: Coord) -> float:
    dx, dy = abs(b[0] - a[0]), abs(b[1] - a[1])
    if max(dx, dy) != 1:
        raise PathContractError(f"{a} -> {b} is not a move between 8-neighbours")
    return SQRT2 if dx and dy else 1.0


def path_cost(grid: TerrainGrid, points: Sequence[Coord]) -> tuple[float, list[float]]:
    """Total and per-move costs of an 8-connected point sequence."""
    if len(points) == 0:
        raise PathContractError("empty path")
    for p in points:
        if not grid.in_bounds(p):
            raise BoundsError(f"{p} outside {grid.width}x{grid.height} grid")
    steps = []
    for a, b in zip(points, points[1:]):
        steps.append(float(grid.cost[b[1], b[0]]) * step_length(a, b))
    total = 0.0
    for s in steps:
        total += s
    return total, steps


def densify(points: Sequence[Coord], grid: TerrainGrid | None = None, supercover: bool = False) -> list[Coord]:
    """Connect consecutive waypoints by rasterized lines.

    Repeated consecutive waypoints collapse.  With ``supercover`` every cell
    touched by each segment is included (4-connected except at exact corner
    crossings); the default 8-connected line keeps diagonal segments at
    octile length.
    """
    if len(points) == 0:
        raise PathContractError("empty point sequence")
    pts = [(int(x), int(y)) for x, y in points]
    if grid is not None:
        for p in pts:
            if not grid.in_bounds(p):
                raise BoundsError(f"{p} outside {grid.width}x{grid.height} grid")
    rasterize = raster.supercover if supercover else raster.line
    out = [pts[0]]
    for a, b in zip(pts, pts[1:]):
        if a == b:
            continue
        out.extend(rasterize(a, b)[1:])
    return out


def octile(a: Coord, b: Coord) -> float:
    dx, dy = abs(a[0] - b[0]), abs(a[1] - b[1])
    return max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy)
