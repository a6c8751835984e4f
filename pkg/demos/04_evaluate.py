"""A small batch evaluation: dataset on disk, oracle advisor, JSON and CSV reports."""
# %%
import tempfile
from pathlib import Path

from terrain_advisor.evaluation import PlannerConfig, run_evaluation
from terrain_advisor.mapgen import generate_dataset
from terrain_advisor.planners import RrtParams

work = Path(tempfile.mkdtemp())
generate_dataset(work / "maps", 12, seed=2024, width=100, height=100, region_size=(10, 70), obstacle_size=(8, 30))
print(sorted(p.name for p in (work / "maps").iterdir())[:4], "...")

# %% A* plus the oracle: nothing to improve, every task counts as equal
report = run_evaluation(work / "maps", jobs=2)
print(report.method, report.counts, "RP", report.rp, "IR", report.ir, f"FPS {report.fps:.1f}")

# %% RRT* plus the oracle: most suggestions cut cost
report = run_evaluation(work / "maps", PlannerConfig("rrt-star", RrtParams(max_iterations=1000), seed=7),
                        audit_path=work / "audit.jsonl")
print(report.method, report.counts, f"RP {report.rp:.1f}", f"IR {report.ir:.1f}")
report.write_json(work / "report.json")
report.write_csv(work / "report.csv")
print((work / "report.csv").read_text())
