"""Synthetic multi-terrain maps: rectangles of costly terrain plus obstacles.

Maps are rendered to exact-palette PNGs with a JSON sidecar holding the
start/goal pair, and read back by palette lookup.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .terrain import CostModel, PlannedPath, PlanTask, TerrainGrid, multiterrain_model

OVERLAY_COLOR = (37, 99, 235)

_START_GOAL_ATTEMPTS = 100
_OBSTACLE_ATTEMPTS = 50


class GenerationError(RuntimeError):
    pass


class IngestionError(ValueError):
    pass


@dataclass(frozen=True)
class MapSpec:
    width: int = 500
    height: int = 500
    n_cost_regions: tuple[int, int] = (4, 7)
    n_obstacles: tuple[int, int] = (1, 2)
    region_size: tuple[int, int] = (40, 350)
    obstacle_size: tuple[int, int] = (30, 150)
    min_separation: float = 0.25
    rng_seed: int = 0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("grid dimensions must be positive")
        lo, hi = self.n_obstacles
        if not (1 <= lo <= hi <= 2):
            raise ValueError("obstacle count must lie in {1, 2}")
        lo, hi = self.n_cost_regions
        if not (0 <= lo <= hi):
            raise ValueError("bad cost-region count range")
        for name in ("region_size", "obstacle_size"):
            lo, hi = getattr(self, name)
            if not (1 <= lo <= hi):
                raise ValueError(f"bad {name} range {lo}..{hi}")
            if lo > min(self.width, self.height):
                raise ValueError(f"{name} minimum {lo} does not fit a {self.width}x{self.height} grid")


def _rect(rng: np.random.Generator, spec: MapSpec, size_range):
    lo, hi = size_range
    w = int(rng.integers(lo, min(hi, spec.width) + 1))
    h = int(rng.integers(lo, min(hi, spec.height) + 1))
    x0 = int(rng.integers(0, spec.width - w + 1))
    y0 = int(rng.integers(0, spec.height - h + 1))
    return x0, y0, w, h


def _sample_task(rng, finite: np.ndarray, spec: MapSpec, map_id: int):
    """Start/goal on one connected free component, or None after the retry budget."""
    free = np.flatnonzero(finite.ravel())
    if len(free) < 2:
        return None
    components, _ = ndimage.label(finite, structure=np.ones((3, 3), dtype=int))
    flat_comp = components.ravel()
    min_sep = spec.min_separation * math.hypot(spec.width, spec.height)
    for _ in range(_START_GOAL_ATTEMPTS):
        a, b = rng.choice(free, size=2, replace=False)
        if flat_comp[a] != flat_comp[b]:
            continue
        ay, ax = divmod(int(a), spec.width)
        by, bx = divmod(int(b), spec.width)
        if math.hypot(ax - bx, ay - by) < min_sep:
            continue
        return PlanTask(map_id, (ax, ay), (bx, by))
    return None


def generate_map(spec: MapSpec, model: CostModel | None = None, map_id: int = 0) -> tuple[TerrainGrid, PlanTask]:
    """Generate one grid and a solvable start/goal pair, deterministic in ``spec.rng_seed``."""
    model = model or multiterrain_model()
    rng = np.random.default_rng(spec.rng_seed)
    costly = [i for i, e in enumerate(model.entries) if math.isfinite(e.cost) and e.cost > model.min_cost]
    obstacle = model.obstacle_index

    base = np.full((spec.height, spec.width), model.free_index, dtype=np.int16)
    if costly:
        for _ in range(int(rng.integers(spec.n_cost_regions[0], spec.n_cost_regions[1] + 1))):
            x0, y0, w, h = _rect(rng, spec, spec.region_size)
            base[y0:y0 + h, x0:x0 + w] = costly[int(rng.integers(len(costly)))]

    for _ in range(_OBSTACLE_ATTEMPTS):
        labels = base.copy()
        for _ in range(int(rng.integers(spec.n_obstacles[0], spec.n_obstacles[1] + 1))):
            x0, y0, w, h = _rect(rng, spec, spec.obstacle_size)
            labels[y0:y0 + h, x0:x0 + w] = obstacle
        finite = np.isfinite(model.costs[labels])
        task = _sample_task(rng, finite, spec, map_id)
        if task is not None:
            return TerrainGrid(labels, model), task
    raise GenerationError(
        f"could not place a connected start/goal pair on a {spec.width}x{spec.height} map (seed {spec.rng_seed})"
    )


def render_array(grid: TerrainGrid, path: PlannedPath | None = None, overlay=OVERLAY_COLOR) -> np.ndarray:
    """RGB array (height, width, 3) of the grid, path drawn in ``overlay``."""
    palette = grid.model.palette
    if path is not None and tuple(overlay) in {tuple(c) for c in palette.tolist()}:
        raise ValueError(f"overlay color {overlay} collides with the cost-model palette")
    rgb = palette[grid.labels]
    if path is not None:
        for x, y in path.points:
            rgb[y, x] = overlay
    return rgb


def render_map(grid: TerrainGrid, path: PlannedPath | None = None, overlay=OVERLAY_COLOR) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(render_array(grid, path, overlay)).save(buf, format="PNG")
    return buf.getvalue()


def load_array(rgb: np.ndarray, model: CostModel) -> TerrainGrid:
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] < 3:
        raise IngestionError(f"expected an RGB raster, got shape {rgb.shape}")
    rgb = rgb[:, :, :3].astype(np.int64)
    keys = (rgb[:, :, 0] << 16) | (rgb[:, :, 1] << 8) | rgb[:, :, 2]
    pal = model.palette.astype(np.int64)
    pal_keys = (pal[:, 0] << 16) | (pal[:, 1] << 8) | pal[:, 2]
    order = np.argsort(pal_keys)
    pos = np.searchsorted(pal_keys[order], keys)
    pos = np.clip(pos, 0, len(order) - 1)
    hit = pal_keys[order][pos] == keys
    if not hit.all():
        y, x = (int(v) for v in np.argwhere(~hit)[0])
        raise IngestionError(f"pixel ({x}, {y}) has color {tuple(int(c) for c in rgb[y, x])} not in the cost model")
    return TerrainGrid(order[pos], model)


def load_map(data: bytes, model: CostModel) -> TerrainGrid:
    """Decode PNG (or any Pillow-readable) bytes into a grid by exact palette lookup."""
    with Image.open(io.BytesIO(data)) as im:
        rgb = np.asarray(im.convert("RGB"))
    return load_array(rgb, model)


def map_filename(map_id: int) -> str:
    return f"map_{map_id:04d}.png"


def sidecar_filename(map_id: int) -> str:
    return f"map_{map_id:04d}.json"


def write_map(out_dir: str | Path, grid: TerrainGrid, task: PlanTask) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    png = out_dir / map_filename(task.map_id)
    side = out_dir / sidecar_filename(task.map_id)
    png.write_bytes(render_map(grid))
    side.write_text(json.dumps(task.to_json()) + "\n")
    return png, side


def read_task(path: str | Path) -> PlanTask:
    return PlanTask.from_json(json.loads(Path(path).read_text()))


def generate_dataset(out_dir, count: int, seed: int, width: int = 500, height: int = 500,
                     model: CostModel | None = None, **spec_kwargs) -> list[PlanTask]:
    """Write ``count`` maps and sidecars; map ``i`` uses a seed derived from (seed, i)."""
    tasks = []
    for i in range(count):
        map_seed = int(np.random.SeedSequence([seed, i]).generate_state(1, dtype=np.uint64)[0])
        spec = MapSpec(width=width, height=height, rng_seed=map_seed, **spec_kwargs)
        grid, task = generate_map(spec, model, map_id=i)
        write_map(out_dir, grid, task)
        tasks.append(task)
    return tasks
