"""Integer line rasterization on the cell grid.

``line`` is the symmetric-rounding Bresenham line: it takes exactly
``max(|dx|, |dy|)`` steps, ``min(|dx|, |dy|)`` of them diagonal, so on
uniform terrain a segment costs its octile length.  ``supercover`` visits
every cell the continuous segment passes through and only steps diagonally
when the segment crosses a cell corner exactly.
"""

from __future__ import annotations

import math

import numpy as np

SQRT2 = math.sqrt(2.0)


def _round_div(num: int, den: int) -> int:
    # round(num / den) with halves toward +inf, exact in integers; den > 0
    return (2 * num + den) // (2 * den)


def line(a: tuple[int, int], b: tuple[int, int]) -> list[tuple[int, int]]:
    """Cells of the 8-connected line from ``a`` to ``b``, endpoints included."""
    x0, y0 = a
    dx, dy = b[0] - x0, b[1] - y0
    m = max(abs(dx), abs(dy))
    if m == 0:
        return [(x0, y0)]
    return [(x0 + _round_div(dx * t, m), y0 + _round_div(dy * t, m)) for t in range(m + 1)]


def supercover(a: tuple[int, int], b: tuple[int, int]) -> list[tuple[int, int]]:
    """Every cell touched by the segment between the centres of ``a`` and ``b``.

    Consecutive cells share an edge, except at exact corner crossings where
    the step is diagonal.
    """
    x, y = a
    dx, dy = b[0] - x, b[1] - y
    nx, ny = abs(dx), abs(dy)
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    cells = [(x, y)]
    ix = iy = 0
    while ix < nx or iy < ny:
        # compare (0.5 + ix) / nx with (0.5 + iy) / ny without division
        decision = (1 + 2 * ix) * ny - (1 + 2 * iy) * nx
        if decision == 0:
            x += sx
            y += sy
            ix += 1
            iy += 1
        elif decision < 0:
            x += sx
            ix += 1
        else:
            y += sy
            iy += 1
        cells.append((x, y))
    return cells


def batch_line_costs(cost: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Destination-charged cost of ``line(s, e)`` for many segments at once.

    ``cost`` is the (height, width) cost raster, ``starts``/``ends`` are
    integer arrays of shape (K, 2) holding (x, y).  Equals ``path_cost`` of
    each rasterized segment up to summation order.
    """
    starts = np.asarray(starts, dtype=np.int64).reshape(-1, 2)
    ends = np.asarray(ends, dtype=np.int64).reshape(-1, 2)
    if len(starts) == 0:
        return np.zeros(0)
    dx = ends[:, 0] - starts[:, 0]
    dy = ends[:, 1] - starts[:, 1]
    m = np.maximum(np.abs(dx), np.abs(dy))
    top = int(m.max())
    if top == 0:
        return np.zeros(len(starts))
    t = np.minimum(np.arange(top + 1)[None, :], m[:, None])
    # floor(v + 0.5) is exact: a non-half quotient p/m sits >= 1/(2m) from any half-integer
    frac = t / np.maximum(m, 1)[:, None]
    xs = starts[:, 0:1] + np.floor(dx[:, None] * frac + 0.5).astype(np.int64)
    ys = starts[:, 1:2] + np.floor(dy[:, None] * frac + 0.5).astype(np.int64)
    mx = xs[:, 1:] != xs[:, :-1]
    my = ys[:, 1:] != ys[:, :-1]
    moved = mx | my
    cell = np.where(moved, cost[ys[:, 1:], xs[:, 1:]], 0.0)
    return (cell * np.where(mx & my, SQRT2, 1.0)).sum(axis=1)
