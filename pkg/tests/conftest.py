import sys

import numpy as np
import pytest

from terrain_advisor.terrain import TerrainGrid, multiterrain_model

REGION_BOXES = [
    (5, (42, 110), (354, 454)),
    (4, (53, 268), (131, 407)),
    (6, (98, 113), (350, 224)),
    (3, (148, 38), (264, 430)),
    (8, (200, 346), (271, 383)),
    (7, (349, 102), (413, 183)),
    (float("inf"), (268, 270), (312, 395)),
]

REGION_SENTENCES = (
    "High-cost area with cost 5 is approximately located between grid coordinates (42, 110) and (354, 454). "
    "High-cost area with cost 4 is approximately located between grid coordinates (53, 268) and (131, 407). "
    "High-cost area with cost 6 is approximately located between grid coordinates (98, 113) and (350, 224). "
    "High-cost area with cost 3 is approximately located between grid coordinates (148, 38) and (264, 430). "
    "High-cost area with cost 8 is approximately located between grid coordinates (200, 346) and (271, 383). "
    "High-cost area with cost 7 is approximately located between grid coordinates (349, 102) and (413, 183). "
    "Obstacles are approximately located between grid coordinates (268, 270) and (312, 395)."
)


@pytest.fixture(scope="session")
def model():
    return multiterrain_model()


def uniform_grid(model, width, height):
    return TerrainGrid(np.full((height, width), model.free_index), model)


def paint(model, width, height, boxes):
    """Grid with inclusive (cost, (x1, y1), (x2, y2)) boxes painted in order."""
    costs = np.ones((height, width))
    for c, (x1, y1), (x2, y2) in boxes:
        costs[y1:y2 + 1, x1:x2 + 1] = c
    return TerrainGrid.from_costs(costs, model)


def random_grid(model, rng, width, height, n_obstacles=(1, 2)):
    """Mixed-cost grid: random per-cell costs plus 1-2 obstacle rectangles."""
    finite = [i for i, e in enumerate(model.entries) if np.isfinite(e.cost)]
    labels = rng.choice(finite, size=(height, width))
    for _ in range(int(rng.integers(n_obstacles[0], n_obstacles[1] + 1))):
        w, h = rng.integers(2, max(3, width // 3), 2)
        x0 = int(rng.integers(0, width - w + 1))
        y0 = int(rng.integers(0, height - h + 1))
        labels[y0:y0 + h, x0:x0 + w] = model.obstacle_index
    return TerrainGrid(labels, model)


def free_cell(grid, rng):
    free = np.argwhere(np.isfinite(grid.cost))
    y, x = free[int(rng.integers(len(free)))]
    return int(x), int(y)


def region_grid(model):
    # the cost-8 box reaches under the obstacle and the cost-5 box covers it
    # entirely, so the obstacle goes down second for every box to survive intact
    order = [REGION_BOXES[0], REGION_BOXES[6], *REGION_BOXES[1:6]]
    return paint(model, 500, 500, order)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
