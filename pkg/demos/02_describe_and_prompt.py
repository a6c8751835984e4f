"""Turn a map and a path into text, then into the advisor prompt."""
# %%
from terrain_advisor import advisor as adv
from terrain_advisor.describe import (
    describe_path_brief,
    describe_path_detailed,
    describe_terrain,
    parse_path_brief,
)
from terrain_advisor.mapgen import MapSpec, generate_map
from terrain_advisor.planners import astar
from terrain_advisor.terrain import multiterrain_model

grid, task = generate_map(MapSpec(width=60, height=60, region_size=(8, 40), obstacle_size=(6, 20), rng_seed=5),
                          multiterrain_model())
path = astar(grid, task).path

# %% one sentence per high-cost region, bounding boxes only
print(describe_terrain(grid))

# %% two path styles: every point, or runs of equal cost
print(describe_path_detailed(grid, path)[:300], "...")
brief = describe_path_brief(grid, path)
print(brief)

# %% the brief style parses back to its runs
for (a, b, c) in parse_path_brief(brief):
    print(f"{a} -> {b} at cost {c:g}")

# %% the prompt, plain and with a narrated reply format
print(adv.build_advisor_prompt(grid, task, path))
print(adv.build_advisor_prompt(grid, task, path, adv.PromptConfig(use_descpath=True, path_style="brief"))[-400:])
