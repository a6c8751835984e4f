"""Generate a terrain map, then compare A*, RRT* and waypoint-chained A* on it."""
# %%
import numpy as np

from terrain_advisor.mapgen import MapSpec, generate_map, render_map
from terrain_advisor.planners import RrtParams, astar, llm_astar, rrt_star
from terrain_advisor.terrain import multiterrain_model

model = multiterrain_model()
for entry in model.entries:
    print(f"{entry.label:>12}  cost {entry.cost}")

# %% a 200x200 map with 4-7 cost regions and 1-2 obstacles
grid, task = generate_map(MapSpec(width=200, height=200, region_size=(20, 140), obstacle_size=(15, 60), rng_seed=3),
                          model)
print(grid.width, grid.height, "start", task.start, "goal", task.goal)
print("cells per cost:", dict(zip(*np.unique(grid.cost, return_counts=True))))

# %% A* is optimal on the 8-connected grid
a = astar(grid, task)
print("A*   ", a.status, round(a.path.total_cost, 2), f"{len(a.path)} cells, {a.expansions} expansions")

# %% RRT* is anytime: its best cost only goes down
r = rrt_star(grid, task, RrtParams(max_iterations=3000, rng_seed=0))
print("RRT* ", r.status, r.path and round(r.path.total_cost, 2))
print("history (every 100 iterations):", [round(c, 1) for c in r.cost_history[::5]])

# %% chaining A* through waypoints never beats plain A*
mid = a.path.points[len(a.path) // 2]
w = llm_astar(grid, task, [mid])
print("A* via", mid, w.status, round(w.path.total_cost, 2))

# %% the map renders to an RGB PNG, optionally with a path overlay
png = render_map(grid, a.path)
print(f"{len(png)} bytes of PNG")
