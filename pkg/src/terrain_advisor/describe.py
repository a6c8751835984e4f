"""Text renderings of terrain and paths used inside prompts.

Three grammars:

* terrain: one bounding-box sentence per costly terrain value, obstacles last
* detailed path: one sentence per point, then the total
* brief path: one sentence per run of equal terrain cost, then the total
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .terrain import INF, Coord, PlannedPath, TerrainGrid


class DescriptionParseError(ValueError):
    pass


def format_number(v: float) -> str:
    """Integers bare, otherwise at most two decimals with trailing zeros trimmed."""
    if math.isinf(v):
        return "infinite"
    text = f"{v:.2f}".rstrip("0").rstrip(".")
    return "0" if text == "-0" else text


def format_coord(c: Coord) -> str:
    return f"({c[0]}, {c[1]})"


@dataclass(frozen=True)
class RegionSummary:
    cost: float
    min_corner: Coord
    max_corner: Coord

    @property
    def is_obstacle(self) -> bool:
        return math.isinf(self.cost)

    def sentence(self) -> str:
        span = f"between grid coordinates {format_coord(self.min_corner)} and {format_coord(self.max_corner)}."
        if self.is_obstacle:
            return f"Obstacles are approximately located {span}"
        return f"High-cost area with cost {format_number(self.cost)} is approximately located {span}"


def terrain_regions(grid: TerrainGrid) -> list[RegionSummary]:
    """Bounding box per distinct non-free cost, sorted by (x, y) of the min corner, obstacles last."""
    free = grid.model.min_cost
    out = []
    for c in np.unique(grid.cost):
        if c == free:
            continue
        ys, xs = np.nonzero(grid.cost == c)
        out.append(RegionSummary(float(c), (int(xs.min()), int(ys.min())), (int(xs.max()), int(ys.max()))))
    return sorted(out, key=lambda r: (r.is_obstacle, r.min_corner, r.max_corner, r.cost))


def describe_terrain(grid: TerrainGrid) -> str:
    return " ".join(r.sentence() for r in terrain_regions(grid))


def _point_costs(grid: TerrainGrid, path: PlannedPath) -> list[float]:
    return [float(grid.cost[y, x]) for x, y in path.points]


def describe_path_detailed(grid: TerrainGrid, path: PlannedPath) -> str:
    parts = [
        f"Point {i} at {format_coord(p)} has a terrain cost of {format_number(c)}."
        for i, (p, c) in enumerate(zip(path.points, _point_costs(grid, path)), start=1)
    ]
    parts.append(f"The total cost of the path is {format_number(path.total_cost)}.")
    return " ".join(parts)


def cost_runs(grid: TerrainGrid, path: PlannedPath) -> list[tuple[Coord, Coord, float]]:
    """Maximal runs of consecutive points sharing a terrain cost."""
    runs = []
    costs = _point_costs(grid, path)
    start = 0
    for i in range(1, len(costs) + 1):
        if i == len(costs) or costs[i] != costs[start]:
            runs.append((path.points[start], path.points[i - 1], costs[start]))
            start = i
    return runs


def describe_path_brief(grid: TerrainGrid, path: PlannedPath) -> str:
    parts = [
        f"From {format_coord(a)} to {format_coord(b)} the terrain cost is {format_number(c)}."
        for a, b, c in cost_runs(grid, path)
    ]
    parts.append(f"The total cost of the path is {format_number(path.total_cost)}.")
    return " ".join(parts)


_NUM = r"-?\d+(?:\.\d+)?|infinite"
_RUN = re.compile(
    r"From \((-?\d+), (-?\d+)\) to \((-?\d+), (-?\d+)\) the terrain cost is (" + _NUM + r")\."
)
_TOTAL = re.compile(r"The total cost of the path is (" + _NUM + r")\.")


def _parse_num(s: str) -> float:
    return INF if s == "infinite" else float(s)


def parse_path_brief(text: str) -> list[tuple[Coord, Coord, float]]:
    """Recover the (start, end, cost) runs of a brief path description."""
    pos = 0
    runs = []
    text = text.strip()
    while pos < len(text):
        m = _RUN.match(text, pos)
        if m is None:
            t = _TOTAL.match(text, pos)
            if t is not None and t.end() == len(text) and runs:
                break
            raise DescriptionParseError(f"unexpected text at offset {pos}: {text[pos:pos + 40]!r}")
        x1, y1, x2, y2 = (int(m.group(i)) for i in range(1, 5))
        runs.append(((x1, y1), (x2, y2), _parse_num(m.group(5))))
        pos = m.end()
        while pos < len(text) and text[pos] == " ":
            pos += 1
    if not runs:
        raise DescriptionParseError("no cost runs found")
    return runs
