"""Advise on a path without a model: the shortcut oracle and the judge."""
# %%
from terrain_advisor import advisor as adv
from terrain_advisor.mapgen import MapSpec, generate_map
from terrain_advisor.planners import RrtParams, astar, rrt_star
from terrain_advisor.terrain import multiterrain_model

grid, task = generate_map(MapSpec(width=120, height=120, region_size=(15, 80), obstacle_size=(10, 40), rng_seed=9),
                          multiterrain_model())
oracle = adv.OracleBackend()

# %% an A* path is already optimal, so the oracle answers Yes
a = astar(grid, task).path
print(adv.advise(grid, task, a, oracle).verdict)

# %% a short RRT* run usually leaves slack for string pulling
for seed in range(10):
    r = rrt_star(grid, task, RrtParams(max_iterations=800, rng_seed=seed)).path
    advice = adv.advise(grid, task, r, oracle)
    if advice.judgment is not None:
        break
print(advice.response.text[:120], "...")
j = advice.judgment
print(f"rrt seed {seed} judged {j.outcome.value}: {j.original_cost:.1f} -> {j.suggested_cost:.1f}")

# %% replies are parsed leniently and judged strictly
for reply in ["Yes", "No, [(0, 0), (1, 1)]", "Let me think..."]:
    v = adv.parse_verdict(reply)
    j = adv.judge_suggestion(grid, task, a, v.points) if v.points else None
    print(repr(reply), "->", v.kind.value, j and (j.outcome.value, j.reason))
