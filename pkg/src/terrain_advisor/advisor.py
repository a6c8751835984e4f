"""Post-hoc path advice from a language model.

A planned path is described in text alongside the terrain, the model
answers "Yes" (already optimal) or "No" plus a replacement path, and the
replacement is validated and scored against the original.  Two optional
prompt variants reduce malformed answers: a retrieved worked example from
earlier tasks, and a narrated ("from ... it goes to ...") output format.

``OracleBackend`` answers offline by greedy string pulling so the whole
pipeline can run without a remote model.
"""

from __future__ import annotations

import enum
import json
import math
import random
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import raster
from .describe import (
    describe_path_brief,
    describe_path_detailed,
    describe_terrain,
    format_coord,
)
from .llm import BackendError, ChatRequest, ChatResponse
from .planners import astar
from .terrain import INF, Coord, PlannedPath, PlanTask, TerrainGrid, densify, path_cost

EQUAL_TOLERANCE = 1e-9

ADVISOR_TEMPLATE = """\
You are provided with a terrain cost grid description:
{terrain_description}
You are also provided with the real coordinates of start and goal points, and a description of path list computed by A*. Below is the data for each pair:

**Start-End Pair **:
- Start: {start}
- End: {end}
- A* path: {path_description}

Analyzing the A* paths, evaluate whether the most cost-efficient path has already been found for each pair.

IMPORTANT: **If not, you must suggest a path list, ensure the first point is the exact start coordinates and the last point is the exact end coordinates as provided, display every single coordinate pair**.

IMPORTANT: **Make your reply strictly in the following format**:

{output_format}"""

LIST_OUTPUT_FORMAT = """\
Requirements:
If a path is optimal, the answer should be Yes.
If a path is not optimal, the answer should be No, the suggested path coordinates (P).
The list of coordinates (P) must start at the corresponding start coordinate and end at the corresponding end coordinate.
The output format must strictly follow the format below, without any additional information.
Output Format:
Yes or No, No or [P]
IMPORTANT: Only output the real list of coordinates for P. Do not include any extra explanations or text."""

DESCRIPTIVE_OUTPUT_FORMAT = """\
Requirements:
If the path is optimal, respond with "Yes."
If the path is not optimal, respond with "No," followed by a descriptive sentence indicating that the suggested path is not feasible, and then provide an alternative path.
The description should clearly outline the movement from the start coordinate to the end coordinate, step by step.
The output must strictly follow the format below, without any additional information.
Output Format:
Yes or No, No or from (start_x, start_y) it goes to (x_1, y_1), then (x_2, y_2), ..., finally, it arrives at (end_x, end_y)."""

RETRIEVAL_TEMPLATE = """\
You are provided with a terrain cost grid description based on historical tasks:
{retrieved_terrain_description}
Additionally, you have the start and goal coordinates along with computed A-star paths retrieved from similar tasks:
{retrieved_path_description}"""

WAYPOINT_TEMPLATE = """\
You are provided with a terrain cost grid description:
{terrain_description}

You are also provided with the real coordinates of start and goal points,

**Start-End Pair**:
- Start: {start}
- End: {end}

Suggest a list of intermediate target states, P, to help an A* algorithm plan the most cost-efficient path.
The output format must strictly follow the format below, without any additional information.
Output Format:
[P]
IMPORTANT: Only output the real list of coordinates for P. Do not include any extra explanations or text."""


class PathStyle(str, enum.Enum):
    DETAILED = "detailed"
    BRIEF = "brief"


@dataclass(frozen=True)
class PromptConfig:
    use_rag: bool = False
    use_descpath: bool = False
    path_style: PathStyle = PathStyle.DETAILED


@dataclass(frozen=True)
class RagExample:
    terrain_description: str
    start: Coord
    end: Coord
    path_description: str
    scene: str | None = None
    map_id: int | None = None

    def __post_init__(self):
        if not self.terrain_description or not self.path_description:
            raise ValueError("retrieval example needs both descriptions")

    def to_json(self) -> dict:
        return {
            "scene": self.scene,
            "map_id": self.map_id,
            "terrain_description": self.terrain_description,
            "start": list(self.start),
            "end": list(self.end),
            "path_description": self.path_description,
        }

    @classmethod
    def from_json(cls, d: dict) -> "RagExample":
        return cls(
            terrain_description=d["terrain_description"],
            start=tuple(d["start"]),
            end=tuple(d["end"]),
            path_description=d["path_description"],
            scene=d.get("scene"),
            map_id=d.get("map_id"),
        )


class VerdictKind(str, enum.Enum):
    OPTIMAL = "optimal"
    SUGGESTION = "suggestion"
    PARSE_FAILURE = "parse_failure"


@dataclass(frozen=True)
class AdvisorVerdict:
    kind: VerdictKind
    points: tuple[Coord, ...] = ()
    raw: str = ""

    @classmethod
    def optimal(cls, raw: str = "") -> "AdvisorVerdict":
        return cls(VerdictKind.OPTIMAL, (), raw)

    @classmethod
    def suggestion(cls, points: Sequence[Coord], raw: str = "") -> "AdvisorVerdict":
        if not points:
            raise ValueError("a suggestion needs at least one point")
        return cls(VerdictKind.SUGGESTION, tuple(points), raw)

    @classmethod
    def parse_failure(cls, raw: str) -> "AdvisorVerdict":
        return cls(VerdictKind.PARSE_FAILURE, (), raw)


class Outcome(str, enum.Enum):
    IMPROVED = "improved"
    EQUAL = "equal"
    DETERIORATED = "deteriorated"
    INVALID = "invalid"


@dataclass(frozen=True)
class SuggestionJudgment:
    outcome: Outcome
    original_cost: float
    suggested_cost: float
    reason: str | None = None


def _path_text(grid: TerrainGrid, path: PlannedPath, style: PathStyle) -> str:
    if PathStyle(style) is PathStyle.BRIEF:
        return describe_path_brief(grid, path)
    return describe_path_detailed(grid, path)


def retrieval_block(example: RagExample) -> str:
    path_text = (
        f"- Start: {format_coord(example.start)}\n"
        f"- End: {format_coord(example.end)}\n"
        f"- A* path: {example.path_description}"
    )
    return RETRIEVAL_TEMPLATE.format(
        retrieved_terrain_description=example.terrain_description,
        retrieved_path_description=path_text,
    )


def build_advisor_prompt(grid: TerrainGrid, task: PlanTask, path: PlannedPath,
                         cfg: PromptConfig = PromptConfig(), rag: RagExample | None = None) -> str:
    body = ADVISOR_TEMPLATE.format(
        terrain_description=describe_terrain(grid),
        start=format_coord(task.start),
        end=format_coord(task.goal),
        path_description=_path_text(grid, path, cfg.path_style),
        output_format=DESCRIPTIVE_OUTPUT_FORMAT if cfg.use_descpath else LIST_OUTPUT_FORMAT,
    )
    if cfg.use_rag:
        if rag is None:
            raise ValueError("use_rag is set but no retrieval example was supplied")
        return retrieval_block(rag) + "\n\n" + body
    return body


def build_llm_astar_prompt(grid: TerrainGrid, task: PlanTask) -> str:
    return WAYPOINT_TEMPLATE.format(
        terrain_description=describe_terrain(grid),
        start=format_coord(task.start),
        end=format_coord(task.goal),
    )


# --- parsing -----------------------------------------------------------------

_LEADING_JUNK = re.compile(r"^[\W_]*", re.UNICODE)
_ANSWER = re.compile(r"(yes|no)(?![a-z])", re.IGNORECASE)
_GROUP = re.compile(r"[(\[]([^()\[\]]*)[)\]]")
_PAIR = re.compile(r"^\s*(-?\d+)\s*,\s*(-?\d+)\s*$")
_COORD = r"\(\s*-?\d+\s*,\s*-?\d+\s*\)"
_NARRATED = re.compile(
    r"from\s*(?P<start>" + _COORD + r")\s*,?\s*it\s+goes\s+to\s*(?P<middle>.*?)"
    r"(?:,?\s*(?:and\s+)?finally\s*,?\s*it\s+arrives\s+at\s*(?P<end>" + _COORD + r")|\.?\s*$)",
    re.IGNORECASE | re.DOTALL,
)


def _coords_in(text: str) -> list[Coord] | None:
    """Coordinate pairs of ``text``; None if any bracketed group is not an integer pair."""
    out = []
    for g in _GROUP.findall(text):
        m = _PAIR.match(g)
        if m is None:
            return None
        out.append((int(m.group(1)), int(m.group(2))))
    return out


def parse_coordinate_list(text: str) -> list[Coord] | None:
    """Parse the first ``[...]`` list of ``(x, y)`` (or ``[x, y]``) pairs; None when absent or malformed."""
    lo = text.find("[")
    hi = text.rfind("]")
    if lo < 0 or hi <= lo:
        return None
    inner = text[lo + 1:hi]
    if not _GROUP.search(inner):
        # a flat "[]" or "[P]" carries no pairs
        return [] if inner.strip() == "" else None
    return _coords_in(inner)


def _parse_narrated(text: str) -> list[Coord] | None:
    m = _NARRATED.search(text)
    if m is None:
        return None
    start = _coords_in(m.group("start"))
    middle = _coords_in(m.group("middle"))
    if not start or middle is None:
        return None
    end = _coords_in(m.group("end")) if m.group("end") else []
    pts = start + middle + (end or [])
    return pts if len(pts) >= 2 else None


def parse_verdict(raw: str, cfg: PromptConfig = PromptConfig()) -> AdvisorVerdict:
    """Classify a model reply; never raises."""
    try:
        text = raw if isinstance(raw, str) else str(raw)
        rest = _LEADING_JUNK.sub("", text, count=1)
        m = _ANSWER.match(rest)
        if m is None:
            return AdvisorVerdict.parse_failure(text)
        if m.group(1).lower() == "yes":
            return AdvisorVerdict.optimal(text)
        tail = rest[m.end():]
        pts = _parse_narrated(tail) if cfg.use_descpath else parse_coordinate_list(tail)
        if pts:
            return AdvisorVerdict.suggestion(pts, text)
        return AdvisorVerdict.parse_failure(text)
    except Exception:  # noqa: BLE001 - the contract is total
        return AdvisorVerdict.parse_failure(raw if isinstance(raw, str) else repr(raw))


def render_verdict(verdict: AdvisorVerdict, cfg: PromptConfig = PromptConfig()) -> str:
    """Reply text in the format the prompt asks for."""
    if verdict.kind is VerdictKind.OPTIMAL:
        return "Yes"
    if verdict.kind is VerdictKind.PARSE_FAILURE:
        return verdict.raw
    pts = [format_coord(p) for p in verdict.points]
    if not cfg.use_descpath:
        return "No, [" + ", ".join(pts) + "]"
    if len(pts) == 2:
        return f"No, from {pts[0]} it goes to {pts[1]}."
    return f"No, from {pts[0]} it goes to " + ", then ".join(pts[1:-1]) + f", finally, it arrives at {pts[-1]}."


# --- judging -----------------------------------------------------------------

def judge_suggestion(grid: TerrainGrid, task: PlanTask, original: PlannedPath,
                     suggestion: Sequence[Coord]) -> SuggestionJudgment:
    orig = original.total_cost

    def invalid(reason: str) -> SuggestionJudgment:
        return SuggestionJudgment(Outcome.INVALID, orig, INF, reason)

    pts = [tuple(p) for p in suggestion]
    if not pts:
        return invalid("empty suggestion")
    if pts[0] != tuple(task.start):
        return invalid("start mismatch")
    if pts[-1] != tuple(task.goal):
        return invalid("goal mismatch")
    if any(not grid.in_bounds(p) for p in pts):
        return invalid("out of bounds")
    dense = densify(pts)
    if len(dense) < 2:
        return invalid("degenerate path")
    cost, _ = path_cost(grid, dense)
    if math.isinf(cost):
        return invalid("crosses obstacle")
    if abs(cost - orig) <= EQUAL_TOLERANCE:
        outcome = Outcome.EQUAL
    elif cost < orig:
        outcome = Outcome.IMPROVED
    else:
        outcome = Outcome.DETERIORATED
    return SuggestionJudgment(outcome, orig, cost)


# --- offline oracle ------------------------------------------------------------

def _prefix_costs(grid: TerrainGrid, pts: Sequence[Coord]) -> np.ndarray:
    _, steps = path_cost(grid, pts)
    return np.concatenate([[0.0], np.cumsum(steps)])


def best_splice(grid: TerrainGrid, pts: Sequence[Coord]) -> tuple[int, int] | None:
    """Widest (i, j) whose straight segment beats the sub-path by more than the tolerance.

    Among equally wide candidates the smallest ``i`` wins.
    """
    n = len(pts)
    if n < 3:
        return None
    arr = np.asarray(pts, dtype=np.int64)
    prefix = _prefix_costs(grid, pts)
    for span in range(n - 1, 1, -1):
        i = np.arange(n - span)
        seg = raster.batch_line_costs(grid.cost, arr[i], arr[i + span])
        sub = prefix[i + span] - prefix[i]
        hit = np.flatnonzero(seg < sub - EQUAL_TOLERANCE)
        if len(hit):
            k = int(hit[0])
            return k, k + span
    return None


def string_pull(grid: TerrainGrid, points: Sequence[Coord], max_rounds: int = 10_000) -> list[Coord]:
    pts = [tuple(p) for p in points]
    for _ in range(max_rounds):
        pair = best_splice(grid, pts)
        if pair is None:
            break
        i, j = pair
        pts = pts[:i] + raster.line(pts[i], pts[j]) + pts[j + 1:]
    return pts


def turning_points(points: Sequence[Coord]) -> list[Coord]:
    """Endpoints plus every point where the step direction changes."""
    pts = list(points)
    if len(pts) <= 2:
        return pts
    out = [pts[0]]
    for a, b, c in zip(pts, pts[1:], pts[2:]):
        if (b[0] - a[0], b[1] - a[1]) != (c[0] - b[0], c[1] - b[1]):
            out.append(b)
    out.append(pts[-1])
    return out


def shortcut_oracle(grid: TerrainGrid, task: PlanTask, path: PlannedPath) -> AdvisorVerdict:
    pulled = string_pull(grid, path.points)
    new_cost, _ = path_cost(grid, pulled)
    if not new_cost < path.total_cost - EQUAL_TOLERANCE:
        return AdvisorVerdict.optimal("Yes")
    waypoints = turning_points(pulled)
    if densify(waypoints) != pulled:
        waypoints = pulled
    return AdvisorVerdict.suggestion(waypoints)


def waypoint_oracle(grid: TerrainGrid, task: PlanTask, count: int = 4) -> list[Coord]:
    """Evenly spaced interior points of the optimal path, for waypoint-chained A*."""
    out = astar(grid, task)
    if not out.success:
        return []
    pts = out.path.points
    if len(pts) <= 2:
        return []
    idx = np.linspace(0, len(pts) - 1, count + 2).round().astype(int)[1:-1]
    return [pts[i] for i in sorted(set(idx.tolist())) if 0 < i < len(pts) - 1]


class OracleBackend:
    """Offline stand-in for the model, answering from the planning context of the request."""

    name = "oracle"

    def complete(self, req: ChatRequest) -> ChatResponse:
        t0 = time.perf_counter()
        ctx = req.context
        kind = ctx.get("kind")
        if kind == "advise":
            cfg = ctx.get("config", PromptConfig())
            verdict = shortcut_oracle(ctx["grid"], ctx["task"], ctx["path"])
            text = render_verdict(verdict, cfg)
        elif kind == "waypoints":
            wps = waypoint_oracle(ctx["grid"], ctx["task"])
            text = "[" + ", ".join(format_coord(p) for p in wps) + "]"
        else:
            raise BackendError("the oracle backend needs planning context on the request")
        return ChatResponse(text, time.perf_counter() - t0, self.name)


# --- retrieval -----------------------------------------------------------------

class RetrievalError(LookupError):
    pass


def load_rag_store(path: str | Path) -> list[RagExample]:
    out = []
    with open(path) as f:
        for line in f:
            if line.strip():
                out.append(RagExample.from_json(json.loads(line)))
    return out


def write_rag_store(path: str | Path, examples: Sequence[RagExample]) -> None:
    with open(path, "w") as f:
        for e in examples:
            f.write(json.dumps(e.to_json()) + "\n")


def make_rag_example(grid: TerrainGrid, task: PlanTask, path: PlannedPath, scene: str | None = None,
                     style: PathStyle = PathStyle.DETAILED) -> RagExample:
    return RagExample(
        terrain_description=describe_terrain(grid) or "No high-cost areas or obstacles.",
        start=task.start,
        end=task.goal,
        path_description=_path_text(grid, path, style),
        scene=scene,
        map_id=task.map_id,
    )


def retrieve_example(store: Sequence[RagExample], dataset_kind: str = "multiterrapath",
                     scene: str | None = None, rng_seed: int = 0,
                     exclude_map_id: int | None = None) -> RagExample:
    """Uniform random example; RUGD-style datasets restrict to the query's scene."""
    candidates = [e for e in store if exclude_map_id is None or e.map_id != exclude_map_id]
    if dataset_kind == "rugd_v2":
        if scene is None:
            raise RetrievalError("scene-restricted retrieval needs a scene")
        candidates = [e for e in candidates if e.scene == scene]
    if not candidates:
        raise RetrievalError(f"no retrieval candidates (kind={dataset_kind}, scene={scene})")
    return random.Random(rng_seed).choice(candidates)


# --- one advisory round ---------------------------------------------------------

@dataclass
class Advice:
    prompt: str
    response: ChatResponse
    verdict: AdvisorVerdict
    judgment: SuggestionJudgment | None = None


def advise(grid: TerrainGrid, task: PlanTask, path: PlannedPath, backend, cfg: PromptConfig = PromptConfig(),
           rag: RagExample | None = None, model: str = "gpt-4o") -> Advice:
    prompt = build_advisor_prompt(grid, task, path, cfg, rag)
    req = ChatRequest(user=prompt, model=model,
                      context={"kind": "advise", "grid": grid, "task": task, "path": path, "config": cfg})
    resp = backend.complete(req)
    verdict = parse_verdict(resp.text, cfg)
    judgment = None
    if verdict.kind is VerdictKind.SUGGESTION:
        judgment = judge_suggestion(grid, task, path, verdict.points)
    return Advice(prompt, resp, verdict, judgment)


def request_waypoints(grid: TerrainGrid, task: PlanTask, backend, model: str = "gpt-4o") -> tuple[list[Coord] | None, ChatResponse]:
    prompt = build_llm_astar_prompt(grid, task)
    req = ChatRequest(user=prompt, model=model, context={"kind": "waypoints", "grid": grid, "task": task})
    resp = backend.complete(req)
    return parse_coordinate_list(resp.text), resp
