"""Grid planners: A*, a Dijkstra reference, RRT* and waypoint-chained A*.

All planners share the destination-charged cost rule of ``terrain``.  A
successful outcome carries a ``PlannedPath`` whose total is recomputed with
``path_cost`` so every planner reports costs on the same footing.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from . import raster
from .terrain import INF, SQRT2, Coord, PlannedPath, PlanTask, TerrainGrid, densify

NEIGHBOURS = (
    (1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
    (1, 1, SQRT2), (1, -1, SQRT2), (-1, 1, SQRT2), (-1, -1, SQRT2),
)

UNREACHABLE = "unreachable"
BUDGET_EXHAUSTED = "budget exhausted"
WAYPOINT_IN_OBSTACLE = "waypoint in obstacle"
SEGMENT_UNREACHABLE = "segment unreachable"


@dataclass
class PlanOutcome:
    path: PlannedPath | None
    reason: str | None = None
    expansions: int = 0
    wall_time: float = 0.0
    cost_history: list[float] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.path is not None

    @property
    def status(self) -> str:
        return "success" if self.success else f"failure: {self.reason}"

    def to_json(self) -> dict:
        if self.path is None:
            return {"points": [], "total_cost": None, "status": self.status}
        return self.path.to_json(self.status)


@dataclass(frozen=True)
class RrtParams:
    max_iterations: int = 3000
    step_size: float = 20.0
    neighbor_radius_gamma: float = 1500.0
    goal_bias: float = 0.05
    goal_tolerance: float = 10.0
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.goal_bias <= 1.0:
            raise ValueError("goal_bias must lie in [0, 1]")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")


def octile_heuristic(grid: TerrainGrid, goal: Coord):
    """Admissible, consistent estimate: octile distance times the cheapest finite cost."""
    gx, gy = goal
    cmin = grid.model.min_cost
    diag = SQRT2 - 1.0

    def h(x: int, y: int) -> float:
        dx, dy = abs(x - gx), abs(y - gy)
        return (max(dx, dy) + diag * min(dx, dy)) * cmin

    return h


def _astar_search(grid: TerrainGrid, start: Coord, goal: Coord):
    """Returns (points or None, expansions)."""
    if start == goal:
        return [start], 0
    w, hgt = grid.width, grid.height
    cost = grid.cost.ravel().tolist()
    h = octile_heuristic(grid, goal)
    si = start[1] * w + start[0]
    gi = goal[1] * w + goal[0]
    g = {si: 0.0}
    parent = {si: -1}
    closed = set()
    # ties on f prefer larger g, then the lower row-major index
    heap = [(h(*start), -0.0, si)]
    expansions = 0
    while heap:
        _, neg_g, u = heapq.heappop(heap)
        if u in closed:
            continue
        closed.add(u)
        expansions += 1
        if u == gi:
            break
        gu = -neg_g
        uy, ux = divmod(u, w)
        for dx, dy, ln in NEIGHBOURS:
            vx, vy = ux + dx, uy + dy
            if vx < 0 or vy < 0 or vx >= w or vy >= hgt:
                continue
            v = vy * w + vx
            c = cost[v]
            if c == INF or v in closed:
                continue
            ng = gu + c * ln
            if ng < g.get(v, INF):
                g[v] = ng
                parent[v] = u
                heapq.heappush(heap, (ng + h(vx, vy), -ng, v))
    else:
        return None, expansions
    pts = []
    u = gi
    while u != -1:
        pts.append((u % w, u // w))
        u = parent[u]
    pts.reverse()
    return pts, expansions


def astar(grid: TerrainGrid, task: PlanTask) -> PlanOutcome:
    task.validate(grid)
    t0 = time.perf_counter()
    pts, n = _astar_search(grid, task.start, task.goal)
    if pts is None:
        return PlanOutcome(None, UNREACHABLE, n, time.perf_counter() - t0)
    return PlanOutcome(PlannedPath.from_points(grid, pts), None, n, time.perf_counter() - t0)


def _cell_graph(grid: TerrainGrid):
    h, w = grid.height, grid.width
    cost = grid.cost
    idx = np.arange(h * w).reshape(h, w)
    rows, cols, data = [], [], []
    for dx, dy, ln in NEIGHBOURS:
        ys = slice(max(0, -dy), h - max(0, dy))
        xs = slice(max(0, -dx), w - max(0, dx))
        yd = slice(max(0, dy), h - max(0, -dy))
        xd = slice(max(0, dx), w - max(0, -dx))
        src_c, dst_c = cost[ys, xs], cost[yd, xd]
        ok = np.isfinite(src_c) & np.isfinite(dst_c)
        rows.append(idx[ys, xs][ok])
        cols.append(idx[yd, xd][ok])
        data.append(dst_c[ok] * ln)
    rows, cols, data = (np.concatenate(a) for a in (rows, cols, data))
    return coo_matrix((data, (rows, cols)), shape=(h * w, h * w)).tocsr()


def dijkstra_oracle(grid: TerrainGrid, task: PlanTask) -> PlanOutcome:
    """Uniform-cost search over the explicit 8-neighbour cell graph; no heuristic."""
    task.validate(grid)
    t0 = time.perf_counter()
    w = grid.width
    si = task.start[1] * w + task.start[0]
    gi = task.goal[1] * w + task.goal[0]
    dist, pred = dijkstra(_cell_graph(grid), directed=True, indices=si, return_predecessors=True)
    settled = int(np.isfinite(dist).sum())
    if not np.isfinite(dist[gi]):
        return PlanOutcome(None, UNREACHABLE, settled, time.perf_counter() - t0)
    pts = []
    u = gi
    while u >= 0:
        pts.append((int(u % w), int(u // w)))
        u = pred[u]
    pts.reverse()
    return PlanOutcome(PlannedPath.from_points(grid, pts), None, settled, time.perf_counter() - t0)


def llm_astar(grid: TerrainGrid, task: PlanTask, waypoints: Sequence[Coord]) -> PlanOutcome:
    """Chain A* through ``waypoints`` in order; any unusable waypoint fails the plan."""
    task.validate(grid)
    t0 = time.perf_counter()
    wps = [(int(x), int(y)) for x, y in waypoints]
    for p in wps:
        if not grid.is_free(p):
            return PlanOutcome(None, WAYPOINT_IN_OBSTACLE, 0, time.perf_counter() - t0)
    targets = [task.start, *wps, task.goal]
    pts = [task.start]
    total_exp = 0
    for a, b in zip(targets, targets[1:]):
        seg, n = _astar_search(grid, a, b)
        total_exp += n
        if seg is None:
            reason = UNREACHABLE if len(targets) == 2 else SEGMENT_UNREACHABLE
            return PlanOutcome(None, reason, total_exp, time.perf_counter() - t0)
        pts.extend(seg[1:])
    return PlanOutcome(PlannedPath.from_points(grid, pts), None, total_exp, time.perf_counter() - t0)


class _Tree:
    def __init__(self, capacity: int, root: Coord):
        self.xy = np.zeros((capacity, 2), dtype=np.int64)
        self.cost = np.full(capacity, INF)
        self.parent = np.full(capacity, -1, dtype=np.int64)
        self.children: list[set[int]] = []
        self.n = 0
        self.add(root, -1, 0.0)

    def add(self, xy, parent: int, cost: float) -> int:
        i = self.n
        self.xy[i] = xy
        self.parent[i] = parent
        self.cost[i] = cost
        self.children.append(set())
        if parent >= 0:
            self.children[parent].add(i)
        self.n += 1
        return i

    def reparent(self, i: int, new_parent: int, new_cost: float) -> None:
        self.children[self.parent[i]].discard(i)
        self.parent[i] = new_parent
        self.children[new_parent].add(i)
        delta = self.cost[i] - new_cost
        stack = [i]
        self.cost[i] = new_cost
        while stack:
            for c in self.children[stack.pop()]:
                self.cost[c] -= delta
                stack.append(c)

    def branch(self, i: int) -> list[Coord]:
        out = []
        while i >= 0:
            out.append((int(self.xy[i, 0]), int(self.xy[i, 1])))
            i = int(self.parent[i])
        out.reverse()
        return out


def rrt_star(grid: TerrainGrid, task: PlanTask, params: RrtParams = RrtParams()) -> PlanOutcome:
    """RRT* on integer cells with terrain-integrated edge costs.

    Edges are rasterized lines charged like any path; edges entering an
    obstacle are rejected.  ``cost_history`` holds the best start-to-goal
    cost after every 100 iterations (``inf`` before the first connection).
    """
    task.validate(grid)
    t0 = time.perf_counter()
    rng = np.random.default_rng(params.rng_seed)
    cost = grid.cost
    w = grid.width
    free = np.flatnonzero(np.isfinite(cost).ravel())
    goal = np.array(task.goal, dtype=np.int64)
    tree = _Tree(params.max_iterations + 1, task.start)
    occupied = {task.start}
    goal_nodes: list[int] = []
    goal_edge: list[float] = []
    tol2 = params.goal_tolerance ** 2
    best = INF
    best_node = -1
    history = []

    def try_goal(i: int) -> None:
        d = tree.xy[i] - goal
        if float(d @ d) > tol2:
            return
        edge = float(raster.batch_line_costs(cost, tree.xy[i:i + 1], goal[None, :])[0])
        if math.isfinite(edge):
            goal_nodes.append(i)
            goal_edge.append(edge)

    def refresh_best() -> None:
        nonlocal best, best_node
        if not goal_nodes:
            return
        totals = tree.cost[goal_nodes] + np.asarray(goal_edge)
        k = int(np.argmin(totals))
        if totals[k] < best:
            best, best_node = float(totals[k]), goal_nodes[k]

    try_goal(0)
    refresh_best()
    for it in range(1, params.max_iterations + 1):
        if rng.random() < params.goal_bias:
            sample = goal
        else:
            sy, sx = divmod(int(free[rng.integers(len(free))]), w)
            sample = np.array((sx, sy), dtype=np.int64)
        n = tree.n
        pos = tree.xy[:n]
        d2 = ((pos - sample) ** 2).sum(axis=1)
        near_i = int(np.argmin(d2))
        dist = math.sqrt(float(d2[near_i]))
        if dist > params.step_size:
            frac = params.step_size / dist
            new = pos[near_i] + np.rint((sample - pos[near_i]) * frac).astype(np.int64)
        else:
            new = sample.copy()
        key = (int(new[0]), int(new[1]))
        if key not in occupied and math.isfinite(cost[key[1], key[0]]):
            radius = params.step_size * 2
            if n > 1:
                radius = min(radius, params.neighbor_radius_gamma * math.sqrt(math.log(n) / n))
            nd2 = ((pos - new) ** 2).sum(axis=1)
            near = np.flatnonzero(nd2 <= radius * radius)
            if near_i not in near:
                near = np.append(near, near_i)
            into = raster.batch_line_costs(cost, pos[near], np.repeat(new[None, :], len(near), axis=0))
            cand = tree.cost[near] + into
            k = int(np.argmin(cand))
            if math.isfinite(cand[k]):
                occupied.add(key)
                j = tree.add(new, int(near[k]), float(cand[k]))
                # rewire: does routing through the new node cheapen a neighbour?
                out = raster.batch_line_costs(cost, np.repeat(new[None, :], len(near), axis=0), pos[near])
                via = tree.cost[j] + out
                for m in np.flatnonzero(via < tree.cost[near] - 1e-12):
                    nb = int(near[m])
                    # earlier rewires may already have lowered this subtree
                    if via[m] < tree.cost[nb] - 1e-12:
                        tree.reparent(nb, j, float(via[m]))
                try_goal(j)
                refresh_best()
        if it % 100 == 0:
            history.append(best)
    elapsed = time.perf_counter() - t0
    if best_node < 0:
        return PlanOutcome(None, BUDGET_EXHAUSTED, params.max_iterations, elapsed, history)
    waypoints = tree.branch(best_node) + [task.goal]
    path = PlannedPath.from_points(grid, densify(waypoints))
    return PlanOutcome(path, None, params.max_iterations, elapsed, history)
