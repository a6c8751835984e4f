"""Command-line entry point.

Exit codes: 0 success, 1 domain failure (unreachable goal, unparseable
advice, generation failure), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import advisor as adv
from .describe import describe_path_brief, describe_path_detailed, describe_terrain
from .evaluation import AdvisorConfig, PlannerConfig, dataset_tasks, model_for, plan, run_evaluation
from .llm import BackendError, FixtureError, RemoteBackend, ScriptedBackend
from .mapgen import GenerationError, IngestionError, generate_dataset, load_map, read_task, render_map
from .planners import RrtParams, astar, rrt_star
from .seeding import derive_seed
from .terrain import CostModel, PlannedPath, PlanTask

log = logging.getLogger("terrain_advisor")


class ConfigError(Exception):
    pass


@dataclass
class AppConfig:
    cost_model: str | None = None
    dataset_kind: str = "multiterrapath"
    llm: dict = field(default_factory=lambda: {"base_url": None, "model": "gpt-4o", "max_concurrency": 4})
    rrt: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | None) -> "AppConfig":
        if path is None:
            return cls()
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} not found")
        try:
            raw = json.loads(p.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {p}: {e}") from e
        unknown = set(raw) - {"cost_model", "dataset_kind", "llm", "rrt"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls()
        cfg.cost_model = raw.get("cost_model")
        cfg.dataset_kind = raw.get("dataset_kind", cfg.dataset_kind)
        cfg.llm = {**cfg.llm, **raw.get("llm", {})}
        cfg.rrt = dict(raw.get("rrt", {}))
        if cfg.cost_model is not None:
            cm = Path(cfg.cost_model)
            if not cm.is_absolute():
                cm = p.parent / cm
            if not cm.exists():
                raise ConfigError(f"cost model {cm} not found")
            cfg.cost_model = str(cm)
        if cfg.dataset_kind not in ("multiterrapath", "rugd_v2"):
            raise ConfigError(f"unknown dataset_kind {cfg.dataset_kind!r}")
        try:
            RrtParams(**cfg.rrt)
        except TypeError as e:
            raise ConfigError(f"bad rrt settings: {e}") from e
        return cfg

    def model(self) -> CostModel:
        if self.cost_model:
            return CostModel.from_json(self.cost_model)
        return model_for(self.dataset_kind)


def _backend(name: str, args, cfg: AppConfig):
    if name == "oracle":
        return adv.OracleBackend()
    if name == "scripted":
        if not args.fixture:
            raise ConfigError("--backend scripted needs --fixture FILE")
        return ScriptedBackend.from_fixture(args.fixture)
    base = cfg.llm.get("base_url") or os.environ.get("LLM_BASE_URL")
    if not base:
        raise ConfigError("remote backend needs llm.base_url in the config or LLM_BASE_URL")
    return RemoteBackend(base, model=cfg.llm.get("model"), max_concurrency=int(cfg.llm.get("max_concurrency", 4)))


def _prompt_config(args) -> adv.PromptConfig:
    return adv.PromptConfig(
        use_rag=bool(getattr(args, "rag", None)),
        use_descpath=bool(getattr(args, "descpath", False)),
        path_style=adv.PathStyle.BRIEF if getattr(args, "brief", False) else adv.PathStyle.DETAILED,
    )


def _load_path(grid, path_file) -> PlannedPath:
    data = json.loads(Path(path_file).read_text())
    if not data.get("points"):
        raise ConfigError(f"{path_file} holds no path points")
    return PlannedPath.from_points(grid, [tuple(p) for p in data["points"]])


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_gen_maps(args, cfg: AppConfig) -> int:
    try:
        w, h = (int(v) for v in args.size.lower().split("x"))
    except ValueError:
        raise ConfigError(f"--size must look like WxH, got {args.size!r}")
    generate_dataset(args.out, args.count, derive_seed(args.seed, "mapgen"), w, h, cfg.model())
    log.info("wrote %d maps to %s", args.count, args.out)
    return 0


def cmd_plan(args, cfg: AppConfig) -> int:
    grid = load_map(Path(args.map).read_bytes(), cfg.model())
    task = read_task(args.task)
    rrt = RrtParams(**cfg.rrt)
    if args.algo == "rrt-star" and args.rrt_seed is not None:
        outcome = rrt_star(grid, task, RrtParams(**{**asdict(rrt), "rng_seed": args.rrt_seed}))
    else:
        backend = _backend(args.backend, args, cfg) if args.algo == "llm-astar" else None
        outcome = plan(grid, task, PlannerConfig(args.algo, rrt, args.seed), backend, cfg.llm.get("model", "gpt-4o"))
    _emit(json.dumps(outcome.to_json()) + "\n", args.out)
    return 0 if outcome.success else 1


def cmd_describe(args, cfg: AppConfig) -> int:
    grid = load_map(Path(args.map).read_bytes(), cfg.model())
    if args.style == "terrain":
        text = describe_terrain(grid)
    else:
        if not args.path:
            raise ConfigError(f"--style {args.style} needs --path FILE")
        path = _load_path(grid, args.path)
        text = describe_path_detailed(grid, path) if args.style == "detailed" else describe_path_brief(grid, path)
    _emit(text + "\n", args.out)
    return 0


def cmd_render(args, cfg: AppConfig) -> int:
    grid = load_map(Path(args.map).read_bytes(), cfg.model())
    path = _load_path(grid, args.path) if args.path else None
    Path(args.out).write_bytes(render_map(grid, path))
    return 0


def cmd_advise(args, cfg: AppConfig) -> int:
    grid = load_map(Path(args.map).read_bytes(), cfg.model())
    task = read_task(args.task)
    path = _load_path(grid, args.path)
    pcfg = _prompt_config(args)
    rag = None
    if args.rag:
        store = adv.load_rag_store(args.rag)
        rag = adv.retrieve_example(store, cfg.dataset_kind, args.scene,
                                   derive_seed(args.seed, "rag", task.map_id), exclude_map_id=task.map_id)
    result = adv.advise(grid, task, path, _backend(args.backend, args, cfg), pcfg, rag, cfg.llm.get("model", "gpt-4o"))
    out = {
        "verdict": result.verdict.kind.value,
        "points": [list(p) for p in result.verdict.points],
        "raw": result.response.text,
        "original_cost": path.total_cost,
    }
    if result.judgment is not None:
        j = result.judgment
        out["judgment"] = j.outcome.value
        out["reason"] = j.reason
        out["suggested_cost"] = None if j.suggested_cost == float("inf") else j.suggested_cost
    _emit(json.dumps(out) + "\n", args.out)
    return 1 if result.verdict.kind is adv.VerdictKind.PARSE_FAILURE else 0


def cmd_evaluate(args, cfg: AppConfig) -> int:
    pc = PlannerConfig(args.planner, RrtParams(**cfg.rrt), args.seed)
    ac = AdvisorConfig(_prompt_config(args), args.rag, cfg.dataset_kind, cfg.llm.get("model", "gpt-4o"), args.seed)
    report = run_evaluation(args.dataset, pc, ac, _backend(args.backend, args, cfg), args.jobs, args.audit)
    report.write_json(args.report)
    if args.csv:
        report.write_csv(args.csv)
    c = report.counts
    rp = "undefined" if report.rp is None else f"{report.rp:.2f}%"
    log.info("paths=%d suggested=%d improved=%d equal=%d deteriorated=%d RP=%s IR=%.2f%% FPS=%.2f",
             c.n_path, c.n_suggested, c.n_improved, c.n_equal, c.n_deteriorated, rp, report.ir, report.fps)
    return 0


def cmd_rag_store(args, cfg: AppConfig) -> int:
    model = cfg.model()
    examples = []
    for png, side in dataset_tasks(args.dataset):
        grid = load_map(png.read_bytes(), model)
        task = PlanTask.from_json(side)
        out = astar(grid, task)
        if out.success:
            examples.append(adv.make_rag_example(grid, task, out.path, side.get("scene")))
    adv.write_rag_store(args.out, examples)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON application config")
    common.add_argument("--seed", type=int, default=0, help="global seed; component seeds derive from it")

    p = argparse.ArgumentParser(prog="terrain-advisor", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("gen-maps", parents=[common], help="generate a synthetic map dataset")
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--size", default="500x500")
    s.set_defaults(func=cmd_gen_maps)

    s = sub.add_parser("plan", parents=[common], help="plan one task")
    s.add_argument("--algo", choices=["astar", "rrt-star", "llm-astar"], required=True)
    s.add_argument("--map", required=True)
    s.add_argument("--task", required=True)
    s.add_argument("--rrt-seed", type=int)
    s.add_argument("--backend", choices=["remote", "scripted", "oracle"], default="oracle",
                   help="waypoint source for llm-astar")
    s.add_argument("--fixture")
    s.add_argument("--out")
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("describe", parents=[common], help="describe terrain or a path in text")
    s.add_argument("--map", required=True)
    s.add_argument("--path")
    s.add_argument("--style", choices=["terrain", "detailed", "brief"], required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_describe)

    s = sub.add_parser("advise", parents=[common], help="ask the advisor about one planned path")
    s.add_argument("--map", required=True)
    s.add_argument("--task", required=True)
    s.add_argument("--path", required=True)
    s.add_argument("--backend", choices=["remote", "scripted", "oracle"], required=True)
    s.add_argument("--fixture")
    s.add_argument("--rag", metavar="STORE")
    s.add_argument("--scene")
    s.add_argument("--descpath", action="store_true")
    s.add_argument("--brief", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_advise)

    s = sub.add_parser("evaluate", parents=[common], help="batch-evaluate a dataset")
    s.add_argument("--dataset", required=True)
    s.add_argument("--planner", choices=["astar", "rrt-star", "llm-astar"], default="astar")
    s.add_argument("--backend", choices=["remote", "scripted", "oracle"], required=True)
    s.add_argument("--fixture")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--rag", metavar="STORE")
    s.add_argument("--descpath", action="store_true")
    s.add_argument("--brief", action="store_true")
    s.add_argument("--report", required=True)
    s.add_argument("--csv")
    s.add_argument("--audit", help="per-task JSON-lines audit log")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("render", parents=[common], help="render a map, optionally with a path")
    s.add_argument("--map", required=True)
    s.add_argument("--path")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_render)

    s = sub.add_parser("rag-store", parents=[common], help="build a retrieval store from A* runs")
    s.add_argument("--dataset", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_rag_store)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = AppConfig.load(args.config)
        return args.func(args, cfg)
    except (GenerationError, IngestionError, BackendError, FixtureError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ConfigError, FileNotFoundError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
