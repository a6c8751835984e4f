"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL (or SKIP) line; the lines are echoed as they
happen (visible with ``-s``) and repeated in the terminal summary.
"""

import json
import math
import os
import random
import string
import time

import numpy as np
import pytest

from terrain_advisor import advisor as adv
from terrain_advisor.advisor import PromptConfig, VerdictKind
from terrain_advisor.cli import main
from terrain_advisor.describe import cost_runs, describe_path_brief, describe_terrain, parse_path_brief
from terrain_advisor.evaluation import (
    EvalCounts,
    PlannerConfig,
    improvement_ratio,
    relative_precision,
    run_evaluation,
)
from terrain_advisor.llm import RemoteBackend
from terrain_advisor.mapgen import MapSpec, generate_map
from terrain_advisor.planners import (
    NEIGHBOURS,
    WAYPOINT_IN_OBSTACLE,
    RrtParams,
    astar,
    dijkstra_oracle,
    llm_astar,
    octile_heuristic,
    rrt_star,
)
from terrain_advisor.terrain import PlanTask

from conftest import REGION_SENTENCES, region_grid, free_cell, random_grid, uniform_grid

RESULTS: list[str] = []
GOLDEN = os.path.join(os.path.dirname(__file__), "golden")


def verdict(n: int, title: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {title}" + (f" ({detail})" if detail else "")
    RESULTS.append(line)
    print(line)


def skip_line(n: int, title: str, why: str) -> None:
    line = f"[SKIP] criterion {n:>2}: {title} ({why})"
    RESULTS.append(line)
    print(line)


def test_criterion_01_metric_arithmetic():
    t0 = time.perf_counter()
    rp_cases = [((612, 432), 70.59), ((737, 512), 69.47), ((770, 606), 78.70)]
    ir_cases = [((432, 393), 82.50), ((152, 538), 69.00), ((208, 0), 20.80)]
    rp_ok = all(
        abs(relative_precision(EvalCounts(n_path=1000, n_suggested=s, n_improved=i)) - want) <= 0.005
        for (s, i), want in rp_cases
    )
    ir_vals = [improvement_ratio(EvalCounts(n_path=1000, n_suggested=i, n_improved=i, n_equal=e))
               for (i, e), _ in ir_cases]
    ir_ok = ir_vals == [want for _, want in ir_cases]
    elapsed = time.perf_counter() - t0
    ok = rp_ok and ir_ok and elapsed < 1.0
    verdict(1, "RP/IR reproduce the reference counts", ok, f"IR={ir_vals}, {elapsed * 1000:.1f} ms")
    assert ok


def test_criterion_02_astar_optimality(model):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240202)
    worst, solved, cases = 0.0, 0, 0
    mismatches = 0
    while cases < 200:
        g = random_grid(model, rng, 30, 30)
        task = PlanTask(cases, free_cell(g, rng), free_cell(g, rng))
        if task.start == task.goal:
            continue
        cases += 1
        a, d = astar(g, task), dijkstra_oracle(g, task)
        if a.success != d.success:
            mismatches += 1
            continue
        if a.success:
            solved += 1
            diff = abs(a.path.total_cost - d.path.total_cost)
            worst = max(worst, diff)
            mismatches += diff > 1e-9
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 10.0
    verdict(2, "A* matches the Dijkstra oracle on 200 random 30x30 grids", ok,
            f"{solved} solvable, max |diff|={worst:.2e}, {elapsed:.2f} s")
    assert ok


def test_criterion_03_heuristic_consistency(model):
    rng = np.random.default_rng(303)
    violations = checked = 0
    for _ in range(20):
        g = random_grid(model, rng, 30, 30)
        h = octile_heuristic(g, free_cell(g, rng))
        n = 0
        while n < 50:
            x, y = (int(v) for v in rng.integers(0, 30, 2))
            dx, dy, length = NEIGHBOURS[int(rng.integers(8))]
            v = (x + dx, y + dy)
            if not g.in_bounds(v):
                continue
            n += 1
            step = float(g.cost[v[1], v[0]]) * length
            # 1e-9 absorbs float rounding of sqrt(2) terms; h is exactly consistent in reals
            violations += h(x, y) > step + h(*v) + 1e-9
        checked += n
    ok = checked == 1000 and violations == 0
    verdict(3, "octile heuristic is consistent", ok, f"{violations} violations in {checked} pairs")
    assert ok


# seeds pinned after calibration: worst ratio 1.082 over these 20 maps
RRT_CAL = dict(map_seed_base=1000, gamma=300.0)


def test_criterion_04_rrt_anytime(model):
    t0 = time.perf_counter()
    g = uniform_grid(model, 200, 200)
    worst, monotone = 0.0, True
    failures = 0
    for i in range(20):
        rng = np.random.default_rng(RRT_CAL["map_seed_base"] + i)
        while True:
            s = tuple(int(v) for v in rng.integers(0, 200, 2))
            e = tuple(int(v) for v in rng.integers(0, 200, 2))
            if math.dist(s, e) >= 0.25 * 200 * math.sqrt(2):
                break
        params = RrtParams(max_iterations=10_000, neighbor_radius_gamma=RRT_CAL["gamma"], rng_seed=i)
        out = rrt_star(g, PlanTask(i, s, e), params)
        if not out.success:
            failures += 1
            continue
        hist = out.cost_history
        monotone &= len(hist) == 100 and all(b <= a for a, b in zip(hist, hist[1:]))
        worst = max(worst, out.path.total_cost / math.dist(s, e))
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and monotone and worst <= 1.10 and elapsed < 60.0
    verdict(4, "RRT* best cost is non-increasing and within 1.10x Euclidean", ok,
            f"worst ratio {worst:.4f}, {elapsed:.1f} s")
    assert ok


def test_criterion_05_llm_astar_failure_mode(model):
    rng = np.random.default_rng(505)
    blocked = identical = built = 0
    while built < 50:
        g = random_grid(model, rng, 40, 40)
        task = PlanTask(built, free_cell(g, rng), free_cell(g, rng))
        if task.start == task.goal:
            continue
        built += 1
        obstacles = np.argwhere(~np.isfinite(g.cost))
        oy, ox = obstacles[int(rng.integers(len(obstacles)))]
        wps = [free_cell(g, rng) for _ in range(int(rng.integers(0, 4)))]
        wps.insert(int(rng.integers(len(wps) + 1)), (int(ox), int(oy)))
        out = llm_astar(g, task, wps)
        blocked += (not out.success) and out.reason == WAYPOINT_IN_OBSTACLE
        base, chained = astar(g, task), llm_astar(g, task, [])
        identical += base.path == chained.path and base.to_json() == chained.to_json()
    ok = blocked == 50 and identical == 50
    verdict(5, "obstacle waypoints fail LLM-A*; empty list reproduces A*", ok,
            f"{blocked}/50 failed as expected, {identical}/50 identical")
    assert ok


def test_criterion_06_description_grammars(model):
    terrain_ok = describe_terrain(region_grid(model)) == REGION_SENTENCES
    mismatches = n = 0
    seed = 0
    while n < 100:
        g, task = generate_map(MapSpec(width=120, height=120, region_size=(15, 80), obstacle_size=(10, 40),
                                       rng_seed=6000 + seed), model)
        seed += 1
        out = astar(g, task)
        if not out.success:
            continue
        n += 1
        mismatches += parse_path_brief(describe_path_brief(g, out.path)) != cost_runs(g, out.path)
    ok = terrain_ok and mismatches == 0
    verdict(6, "terrain sentences verbatim; brief grammar round-trips", ok,
            f"terrain verbatim={terrain_ok}, {mismatches} mismatches over {n} paths")
    assert ok


def _golden_scene(model):
    g, task = generate_map(MapSpec(width=48, height=40, region_size=(8, 24), obstacle_size=(5, 12), rng_seed=77),
                           model, map_id=7)
    return g, task, astar(g, task).path


def test_criterion_07_prompt_fidelity(model):
    g, task, path = _golden_scene(model)
    rag = adv.RagExample("High-cost area with cost 3 is approximately located between grid coordinates (1, 2) and (3, 4).",
                         (0, 0), (5, 5), "Point 1 at (0, 0) has a terrain cost of 1.", map_id=1)
    prompts = {
        "advisor_default.txt": adv.build_advisor_prompt(g, task, path),
        "advisor_rag_descpath.txt": adv.build_advisor_prompt(g, task, path, PromptConfig(True, True), rag),
        "waypoints.txt": adv.build_llm_astar_prompt(g, task),
    }
    anchors = {
        "advisor_default.txt": ["evaluate whether the most cost-efficient path has already been found"],
        "advisor_rag_descpath.txt": ["based on historical tasks", "finally, it arrives at"],
        "waypoints.txt": ["Suggest a list of intermediate target states"],
    }
    problems = []
    for name, text in prompts.items():
        with open(os.path.join(GOLDEN, name)) as f:
            if f.read() != text:
                problems.append(f"{name} differs from golden")
        for a in anchors[name]:
            if a not in text:
                problems.append(f"{name} lacks {a!r}")
        if "{" in text or "}" in text:
            problems.append(f"{name} has an unfilled placeholder")
        if f"({task.start[0]}, {task.start[1]})" not in text or f"({task.goal[0]}, {task.goal[1]})" not in text:
            problems.append(f"{name} lacks task coordinates")
    ok = not problems
    verdict(7, "prompt templates verbatim against golden files", ok, "; ".join(problems) or "3 goldens")
    assert ok


def _fuzz_inputs(n: int):
    rnd = random.Random(8)
    tokens = ["Yes", "yes", "No", "NO", "no,", "[", "]", "(", ")", ",", " ", "\n", "from", "it goes to", "then",
              "finally, it arrives at", "-", ".", "**", "\"", "P", "None", "∞", "é", "\x00", "[[", "]]"]
    for i in range(n):
        kind = i % 5
        if kind == 4:
            # near-valid replies, perturbed so some still parse as suggestions
            pts = [f"({rnd.randint(-5, 600)}, {rnd.randint(-5, 600)})" for _ in range(rnd.randint(0, 6))]
            body = rnd.choice(["[" + ", ".join(pts) + "]", "from " + ", it goes to ".join(pts) + "."])
            text = rnd.choice(["No, ", "no ", "**No**, ", "Yes. ", ""]) + body
            cut = rnd.randint(0, len(text))
            yield text if rnd.random() < 0.6 else text[:cut] + rnd.choice(tokens) + text[cut:]
        elif kind == 0:
            yield "".join(rnd.choice(tokens) for _ in range(rnd.randint(0, 30)))
        elif kind == 1:
            yield "".join(rnd.choice(tokens + [str(rnd.randint(-999, 9999))]) for _ in range(rnd.randint(0, 40)))
        elif kind == 2:
            yield "".join(chr(rnd.randint(0, 0x2FFF)) for _ in range(rnd.randint(0, 60)))
        else:
            yield "".join(rnd.choice(string.printable) for _ in range(rnd.randint(0, 80)))


def test_criterion_08_parser_robustness():
    kinds = {k: 0 for k in VerdictKind}
    aborted = 0
    cfgs = [PromptConfig(), PromptConfig(use_descpath=True)]
    for i, raw in enumerate(_fuzz_inputs(10_000)):
        try:
            v = adv.parse_verdict(raw, cfgs[i % 2])
        except Exception:  # noqa: BLE001 - counting is the point
            aborted += 1
            continue
        kinds[v.kind] += 1
    examples_ok = (
        adv.parse_verdict("Yes").kind is VerdictKind.OPTIMAL
        and adv.parse_verdict("No, [(0, 0), (5, 5), (9, 9)]").points == ((0, 0), (5, 5), (9, 9))
        and adv.parse_verdict("No, from (0, 0) it goes to (5, 5), then (7, 7), finally, it arrives at (9, 9).",
                              cfgs[1]).points == ((0, 0), (5, 5), (7, 7), (9, 9))
    )
    ok = aborted == 0 and sum(kinds.values()) == 10_000 and examples_ok
    verdict(8, "parse_verdict is total over 10,000 fuzzed inputs", ok,
            ", ".join(f"{k.value}={c}" for k, c in kinds.items()))
    assert ok


@pytest.fixture(scope="module")
def desk_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("desk")
    t0 = time.perf_counter()
    assert main(["gen-maps", "--count", "100", "--seed", "2024", "--out", str(root / "ds"), "--size", "200x200"]) == 0
    runs = {}
    for jobs in (1, 8):
        rep, audit = root / f"report{jobs}.json", root / f"audit{jobs}.jsonl"
        code = main(["evaluate", "--dataset", str(root / "ds"), "--planner", "astar", "--backend", "oracle",
                     "--jobs", str(jobs), "--report", str(rep), "--audit", str(audit), "--seed", "2024"])
        assert code == 0
        runs[jobs] = (json.loads(rep.read_text()), [json.loads(line) for line in audit.read_text().splitlines()])
    return root, runs, time.perf_counter() - t0


def _strip(report):
    return {
        **{k: v for k, v in report.items() if k not in ("fps", "per_task")},
        "per_task": [{k: v for k, v in r.items() if k not in ("plan_time", "advise_time", "wall_time")}
                     for r in report["per_task"]],
    }


def test_criterion_09_desk_scale_run(desk_run):
    root, runs, elapsed = desk_run
    report, audit = runs[1]
    problems = []
    if len(audit) != 100 or report["counts"]["n_path"] != 100:
        problems.append("expected 100 tasks")
    bad = [r["map_id"] for r in audit if r["verdict"] == "suggestion" and r["judgment"] != "improved"]
    if bad:
        problems.append(f"non-improving suggestions on maps {bad}")
    n = len(audit)
    sugg = sum(r["verdict"] == "suggestion" for r in audit)
    imp = sum(r["category"] == "improved" for r in audit)
    eq = sum(r["category"] == "equal" for r in audit)
    rp = None if sugg == 0 else 100.0 * imp / sugg
    ir = 100.0 * (imp + eq) / n
    if rp != report["rp"] or ir != report["ir"]:
        problems.append(f"audit recount rp={rp} ir={ir} vs report rp={report['rp']} ir={report['ir']}")
    if _strip(runs[1][0]) != _strip(runs[8][0]):
        problems.append("--jobs 1 and --jobs 8 reports differ")

    # A* paths are already optimal, so the oracle never suggests on them; run RRT*
    # through the same pipeline so the "every suggestion improves" check bites
    t1 = time.perf_counter()
    rrt = run_evaluation(root / "ds", PlannerConfig("rrt-star", RrtParams(max_iterations=1500), seed=2024))
    rrt_tasks = [r for r in rrt.per_task if r.verdict == "suggestion"]
    if not rrt_tasks:
        problems.append("RRT* run produced no suggestions")
    if any(r.judgment != "improved" for r in rrt_tasks):
        problems.append("an RRT* suggestion did not improve")
    total = elapsed + time.perf_counter() - t1
    if total >= 120:
        problems.append(f"took {total:.0f} s")
    ok = not problems
    verdict(9, "100-map run: suggestions improve, audit recomputes, jobs-invariant", ok,
            "; ".join(problems) or f"A*: {sugg} suggestions, IR {ir:.1f}%; RRT*: {len(rrt_tasks)} suggestions "
            f"all improved; {total:.0f} s")
    assert ok


@pytest.mark.live
def test_criterion_10_live_endpoint(model):
    title = "live endpoint smoke test (>= 95% of replies parse)"
    base, key = os.environ.get("LLM_BASE_URL"), os.environ.get("LLM_API_KEY")
    if not (base and key):
        skip_line(10, title, "LLM_BASE_URL/LLM_API_KEY not set")
        pytest.skip("no live endpoint configured")
    backend = RemoteBackend(base, key, model=os.environ.get("LLM_MODEL", "gpt-4o"))
    parsed = 0
    for i in range(20):
        g, task = generate_map(MapSpec(width=100, height=100, rng_seed=i), model, map_id=i)
        result = adv.advise(g, task, astar(g, task).path, backend)
        parsed += result.verdict.kind is not VerdictKind.PARSE_FAILURE
    ok = parsed >= 19
    verdict(10, title, ok, f"{parsed}/20 parsed")
    assert ok


def test_criterion_11_fps(desk_run):
    _, runs, _ = desk_run
    report, audit = runs[1]
    ok_paths = sum(r["planner_status"] == "success" for r in audit)
    recomputed = ok_paths / sum(r["wall_time"] for r in audit)
    rel = abs(recomputed - report["fps"]) / report["fps"]
    ok = report["fps"] > 1 and rel <= 0.01
    verdict(11, "FPS above 1 and recomputable from per-task timings", ok,
            f"FPS {report['fps']:.2f}, recomputed {recomputed:.2f}; hardware-dependent")
    assert ok
