"""Marching-squares contour lines on a rectilinear grid."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

# corner k of a cell touches these two edges (edge ids 0..3, counter-clockwise
# from the bottom edge)
_CORNER_EDGES = ((0, 3), (0, 1), (1, 2), (2, 3))


@dataclass(frozen=True)
class Isopleth:
    level: float
    points: np.ndarray  # (k, 2) vertices in (x, y) data coordinates

    @property
    def closed(self) -> bool:
        return len(self.points) > 2 and bool(np.all(self.points[0] == self.points[-1]))


def _edge_key(i: int, j: int, e: int) -> tuple[str, int, int]:
    # 'x' edges run along the first axis from (i, j) to (i+1, j); 'y' edges
    # along the second from (i, j) to (i, j+1)
    return (("x", i, j), ("y", i + 1, j), ("x", i, j + 1), ("y", i, j))[e]


def _edge_point(key, z, xs, ys, level) -> tuple[float, float]:
    kind, i, j = key
    i2, j2 = (i + 1, j) if kind == "x" else (i, j + 1)
    va, vb = z[i, j], z[i2, j2]
    t = (level - va) / (vb - va)
    return (xs[i] * (1.0 - t) + xs[i2] * t, ys[j] * (1.0 - t) + ys[j2] * t)


def contour_lines(z: np.ndarray, xs: Sequence[float], ys: Sequence[float],
                  level: float) -> list[np.ndarray]:
    """Polylines where ``z`` (indexed [x][y]) crosses ``level``.

    A corner counts as high when its value is >= level.  Crossings are placed
    by linear interpolation along cell edges.  In saddle cells the average of
    the four corners decides: a high centre joins the two high corners.
    Open lines start and end on the grid boundary; closed loops repeat their
    first vertex at the end.
    """
    z = np.asarray(z, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    nx, ny = z.shape
    if (len(xs), len(ys)) != (nx, ny):
        raise ValueError("grid coordinates do not match surface shape")
    high = z >= level

    links: dict[tuple, list[tuple]] = defaultdict(list)
    for i in range(nx - 1):
        for j in range(ny - 1):
            corners = (high[i, j], high[i + 1, j], high[i + 1, j + 1], high[i, j + 1])
            if all(corners) or not any(corners):
                continue
            crossing = [e for e in range(4) if corners[e] != corners[(e + 1) % 4]]
            if len(crossing) == 2:
                pairs = [tuple(crossing)]
            else:
                centre = (z[i, j] + z[i + 1, j] + z[i + 1, j + 1] + z[i, j + 1]) / 4.0
                centre_high = centre >= level
                # cut off the corners whose class differs from the centre's
                pairs = [_CORNER_EDGES[k] for k in range(4) if corners[k] != centre_high]
            for a, b in pairs:
                ka, kb = _edge_key(i, j, a), _edge_key(i, j, b)
                links[ka].append(kb)
                links[kb].append(ka)

    lines = []
    used: set[frozenset] = set()

    def walk(start):
        path = [start]
        cur = start
        while True:
            nxt = [k for k in links[cur] if frozenset((cur, k)) not in used]
            if not nxt:
                break
            k = nxt[0]
            used.add(frozenset((cur, k)))
            path.append(k)
            cur = k
            if cur == start:
                break
        return path

    for key in sorted(k for k, v in links.items() if len(v) == 1):
        if any(frozenset((key, k)) not in used for k in links[key]):
            lines.append(walk(key))
    for key in sorted(links):
        if any(frozenset((key, k)) not in used for k in links[key]):
            lines.append(walk(key))
    return [np.array([_edge_point(k, z, xs, ys, level) for k in path]) for path in lines]


def extract_contours(z, xs, ys, levels: Sequence[float]) -> list[Isopleth]:
    z = np.asarray(z, dtype=np.float64)
    lo, hi = float(z.min()), float(z.max())
    out = []
    for level in levels:
        if not lo <= level <= hi or lo == hi:
            log.warning("isopleth level %g outside surface range [%g, %g]; skipped", level, lo, hi)
            continue
        out.extend(Isopleth(float(level), pts) for pts in contour_lines(z, xs, ys, level))
    return out


def default_levels(z: np.ndarray, count: int = 8) -> list[float]:
    """``count`` levels evenly spaced strictly inside the surface range."""
    lo, hi = float(np.min(z)), float(np.max(z))
    if lo == hi:
        return []
    return [float(v) for v in np.linspace(lo, hi, count + 2)[1:-1]]
