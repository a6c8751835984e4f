"""Batch evaluation: plan every dataset task, ask the advisor, tally outcomes.

Counting conventions
--------------------
* A failed plan lowers ``n_successful`` and is tallied as deteriorated.
* "Yes" and unparseable replies leave the path unchanged and count as equal.
* A parsed suggestion counts towards ``n_suggested`` and then as improved,
  equal or deteriorated; invalid suggestions (wrong endpoints, off-grid,
  through obstacles) count as deteriorated.

So ``n_improved + n_equal + n_deteriorated == n_path`` always.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from . import advisor as adv
from .llm import RemoteBackend
from .mapgen import load_map
from .planners import PlanOutcome, RrtParams, astar, llm_astar, rrt_star
from .seeding import derive_seed
from .terrain import CostModel, PlanTask, multiterrain_model, rugd_model

PLANNERS = ("astar", "rrt-star", "llm-astar")


@dataclass
class EvalCounts:
    n_images: int = 0
    n_path: int = 0
    n_successful: int = 0
    n_suggested: int = 0
    n_improved: int = 0
    n_equal: int = 0
    n_deteriorated: int = 0

    def __post_init__(self):
        if not self.n_improved <= self.n_suggested <= self.n_path:
            raise ValueError("counts must satisfy n_improved <= n_suggested <= n_path")


def relative_precision(counts: EvalCounts) -> float | None:
    """Percentage of suggestions that lowered the cost; None when nothing was suggested."""
    if counts.n_suggested == 0:
        return None
    return 100.0 * counts.n_improved / counts.n_suggested


def improvement_ratio(counts: EvalCounts) -> float:
    """Percentage of tasks whose final path is no worse than the planner's."""
    if counts.n_path <= 0:
        raise ValueError("improvement ratio needs at least one path")
    return 100.0 * (counts.n_improved + counts.n_equal) / counts.n_path


def measure_fps(timings: Sequence[tuple[float, bool]]) -> float:
    """Successfully processed paths per second of summed planning + advising time.

    ``timings`` holds one ``(wall_time, success)`` pair per task.
    """
    if len(timings) == 0:
        raise ValueError("no timed tasks")
    total = sum(t for t, _ in timings)
    done = sum(1 for _, ok in timings if ok)
    if done == 0:
        return 0.0
    if total <= 0:
        raise ValueError("non-positive total wall time")
    return done / total


@dataclass(frozen=True)
class PlannerConfig:
    algo: str = "astar"
    rrt: RrtParams = RrtParams()
    seed: int = 0

    def __post_init__(self):
        if self.algo not in PLANNERS:
            raise ValueError(f"unknown planner {self.algo!r}; expected one of {PLANNERS}")


@dataclass(frozen=True)
class AdvisorConfig:
    prompt: adv.PromptConfig = adv.PromptConfig()
    rag_store: str | None = None
    dataset_kind: str = "multiterrapath"
    model: str = "gpt-4o"
    seed: int = 0


@dataclass
class TaskRecord:
    map_id: int
    planner_status: str
    original_cost: float | None = None
    verdict: str | None = None
    judgment: str | None = None
    judgment_reason: str | None = None
    suggested_cost: float | None = None
    category: str = "deteriorated"
    plan_time: float = 0.0
    advise_time: float = 0.0

    @property
    def wall_time(self) -> float:
        return self.plan_time + self.advise_time

    @property
    def success(self) -> bool:
        return self.planner_status == "success"

    def to_json(self) -> dict:
        d = asdict(self)
        for k in ("original_cost", "suggested_cost"):
            if d[k] is not None and math.isinf(d[k]):
                d[k] = "inf"
        d["wall_time"] = self.wall_time
        return d


def tally(records: Sequence[TaskRecord]) -> EvalCounts:
    c = EvalCounts(n_images=len(records), n_path=len(records))
    for r in records:
        c.n_successful += r.success
        c.n_suggested += r.verdict == adv.VerdictKind.SUGGESTION.value
        c.n_improved += r.category == "improved"
        c.n_equal += r.category == "equal"
        c.n_deteriorated += r.category == "deteriorated"
    return c


@dataclass
class EvalReport:
    method: str
    counts: EvalCounts
    rp: float | None
    ir: float
    fps: float
    per_task: list[TaskRecord] = field(default_factory=list)
    prompt: adv.PromptConfig = adv.PromptConfig()

    @classmethod
    def from_records(cls, method: str, records: Sequence[TaskRecord], prompt=adv.PromptConfig()) -> "EvalReport":
        counts = tally(records)
        return cls(
            method=method,
            counts=counts,
            rp=relative_precision(counts),
            ir=improvement_ratio(counts),
            fps=measure_fps([(r.wall_time, r.success) for r in records]),
            per_task=list(records),
            prompt=prompt,
        )

    def summary(self) -> dict:
        """Everything except timings; identical across worker counts."""
        return {
            "method": self.method,
            "counts": asdict(self.counts),
            "rp": self.rp,
            "ir": self.ir,
            "per_task": [
                {k: v for k, v in r.to_json().items() if k not in ("plan_time", "advise_time", "wall_time")}
                for r in self.per_task
            ],
        }

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "prompt": {
                "use_rag": self.prompt.use_rag,
                "use_descpath": self.prompt.use_descpath,
                "path_style": adv.PathStyle(self.prompt.path_style).value,
            },
            "counts": asdict(self.counts),
            "rp": self.rp,
            "ir": self.ir,
            "fps": self.fps,
            "per_task": [r.to_json() for r in self.per_task],
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["method", "terrain_description", "path_style", "n_images", "n_path",
                        "n_suggested", "n_improved", "rp"])
            w.writerow([
                self.method, "yes", adv.PathStyle(self.prompt.path_style).value,
                self.counts.n_images, self.counts.n_path, self.counts.n_suggested,
                self.counts.n_improved, "" if self.rp is None else f"{self.rp:.2f}",
            ])


def model_for(kind: str) -> CostModel:
    if kind == "multiterrapath":
        return multiterrain_model()
    if kind == "rugd_v2":
        return rugd_model()
    raise ValueError(f"unknown dataset kind {kind!r}")


def dataset_tasks(dataset_dir) -> list[tuple[Path, dict]]:
    """(map image, sidecar dict) pairs sorted by map id."""
    root = Path(dataset_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory {root} not found")
    out = []
    for side in sorted(root.glob("map_*.json")):
        png = side.with_suffix(".png")
        if not png.exists():
            raise FileNotFoundError(f"{side.name} has no matching image {png.name}")
        out.append((png, json.loads(side.read_text())))
    out.sort(key=lambda t: int(t[1]["map_id"]))
    return out


def plan(grid, task: PlanTask, planner: PlannerConfig, backend=None, model: str = "gpt-4o"):
    """Run the configured planner; waypoint-chained A* asks ``backend`` for waypoints."""
    if planner.algo == "astar":
        return astar(grid, task)
    if planner.algo == "rrt-star":
        params = RrtParams(**{**asdict(planner.rrt), "rng_seed": derive_seed(planner.seed, "rrt", task.map_id)})
        return rrt_star(grid, task, params)
    t0 = time.perf_counter()
    waypoints, _ = adv.request_waypoints(grid, task, backend, model)
    if waypoints is None:
        return PlanOutcome(None, "waypoint parse failure", 0, time.perf_counter() - t0)
    out = llm_astar(grid, task, waypoints)
    out.wall_time = time.perf_counter() - t0
    return out


def evaluate_task(png: Path, sidecar: dict, model: CostModel, planner: PlannerConfig,
                  advice: AdvisorConfig, backend, store) -> TaskRecord:
    grid = load_map(png.read_bytes(), model)
    task = PlanTask.from_json(sidecar)

    t0 = time.perf_counter()
    outcome = plan(grid, task, planner, backend, advice.model)
    plan_time = time.perf_counter() - t0
    rec = TaskRecord(task.map_id, "success" if outcome.success else outcome.status, plan_time=plan_time)
    if not outcome.success:
        return rec

    path = outcome.path
    rec.original_cost = path.total_cost
    t1 = time.perf_counter()
    rag = None
    if advice.prompt.use_rag:
        rag = adv.retrieve_example(store, advice.dataset_kind, sidecar.get("scene"),
                                   derive_seed(advice.seed, "rag", task.map_id), exclude_map_id=task.map_id)
    result = adv.advise(grid, task, path, backend, advice.prompt, rag, advice.model)
    rec.advise_time = time.perf_counter() - t1

    rec.verdict = result.verdict.kind.value
    if result.judgment is None:
        rec.category = "equal"
    else:
        j = result.judgment
        rec.judgment = j.outcome.value
        rec.judgment_reason = j.reason
        rec.suggested_cost = j.suggested_cost
        rec.category = "deteriorated" if j.outcome is adv.Outcome.INVALID else j.outcome.value
    return rec


def method_name(planner: PlannerConfig) -> str:
    return f"advisor+{planner.algo}"


def run_evaluation(dataset_dir, planner: PlannerConfig = PlannerConfig(), advice: AdvisorConfig = AdvisorConfig(),
                   backend=None, jobs: int = 1, audit_path=None) -> EvalReport:
    """Evaluate every task of ``dataset_dir``; per-task failures never abort the batch."""
    if backend is None:
        backend = adv.OracleBackend()
    model = model_for(advice.dataset_kind)
    store = adv.load_rag_store(advice.rag_store) if advice.prompt.use_rag else None
    if advice.prompt.use_rag and not store:
        raise ValueError("retrieval is enabled but the example store is empty or missing")
    work = [(png, side, model, planner, advice, backend, store) for png, side in dataset_tasks(dataset_dir)]
    if not work:
        raise ValueError(f"no tasks found in {dataset_dir}")

    if jobs <= 1:
        records = [_safe(w) for w in work]
    else:
        # remote calls are I/O bound and share one rate-limited client
        pool_cls = ThreadPoolExecutor if isinstance(backend, RemoteBackend) else ProcessPoolExecutor
        with pool_cls(max_workers=jobs) as pool:
            records = list(pool.map(_safe, work))

    report = EvalReport.from_records(method_name(planner), records, advice.prompt)
    if audit_path is not None:
        with open(audit_path, "w") as f:
            for r in records:
                f.write(json.dumps(r.to_json()) + "\n")
    return report


def _safe(args) -> TaskRecord:
    t0 = time.perf_counter()
    try:
        return evaluate_task(*args)
    except Exception as e:  # noqa: BLE001 - record and continue
        return TaskRecord(int(args[1].get("map_id", -1)), f"error: {type(e).__name__}: {e}",
                          plan_time=time.perf_counter() - t0)
