"""Grid path planning: obstacle inflation, 8-connected A*, replan checks."""

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .mapping import OccupancyGrid, map_update
from .sensors import LidarScan

SQRT2 = math.sqrt(2.0)
_NEIGHBORS = (
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, SQRT2),
    (1, -1, SQRT2),
    (-1, 1, SQRT2),
    (-1, -1, SQRT2),
)


class PlanningError(RuntimeError):
    pass


class InvalidEndpointError(PlanningError):
    pass


class UnreachableGoalError(PlanningError):
    pass


@dataclass(frozen=True)
class PlannedPath:
    waypoints: tuple  # ((x, y), ...) world coordinates, cell centers
    cells: tuple  # ((ix, iy), ...)
    cost: float  # sum of Euclidean cell steps, meters
    goal_pose: tuple[float, float, float]


def inflate_obstacles(
    grid: OccupancyGrid, inflation_radius: float, p_threshold: float = 0.65
) -> np.ndarray:
    """Boolean blocked-mask: occupied cells dilated by a disk."""
    occ = grid.occupied_mask(p_threshold)
    r = int(math.ceil(inflation_radius / grid.resolution))
    if r <= 0 or not occ.any():
        return occ
    yy, xx = np.ogrid[-r : r + 1, -r : r + 1]
    disk = xx * xx + yy * yy <= r * r
    return ndimage.binary_dilation(occ, structure=disk)


def astar_on_mask(
    blocked: np.ndarray, start: tuple[int, int], goal: tuple[int, int]
) -> tuple[list, float]:
    """8-connected A* with a Euclidean heuristic; cost in cell units."""
    h, w = blocked.shape
    sx, sy = start
    gx, gy = goal

    def heuristic(ix, iy):
        return math.hypot(ix - gx, iy - gy)

    g_score = {start: 0.0}
    came = {}
    open_heap = [(heuristic(sx, sy), 0.0, start)]
    closed = set()
    while open_heap:
        _, g, cur = heapq.heappop(open_heap)
        if cur in closed:
            continue
        if cur == goal:
            path = [cur]
            while cur in came:
                cur = came[cur]
                path.append(cur)
            return path[::-1], g
        closed.add(cur)
        cx, cy = cur
        for dx, dy, cost in _NEIGHBORS:
            nx, ny = cx + dx, cy + dy
            if not (0 <= nx < w and 0 <= ny < h) or blocked[ny, nx]:
                continue
            ng = g + cost
            nb = (nx, ny)
            if ng < g_score.get(nb, math.inf):
                g_score[nb] = ng
                came[nb] = cur
                heapq.heappush(open_heap, (ng + heuristic(nx, ny), ng, nb))
    raise UnreachableGoalError(f"no path from {start} to {goal}")


def astar_plan(
    grid: OccupancyGrid,
    start_cell: tuple[int, int],
    goal_cell: tuple[int, int],
    inflation_radius: float,
    goal_yaw: float = 0.0,
    p_threshold: float = 0.65,
) -> PlannedPath:
    """Plan on the inflated grid; waypoints are cell centers in meters."""
    blocked = inflate_obstacles(grid, inflation_radius, p_threshold)
    for name, (ix, iy) in (("start", start_cell), ("goal", goal_cell)):
        if not grid.in_bounds(ix, iy):
            raise InvalidEndpointError(f"{name} cell {ix, iy} outside the grid")
        if blocked[iy, ix]:
            raise InvalidEndpointError(f"{name} cell {ix, iy} inside an inflated obstacle")
    cells, cost = astar_on_mask(blocked, tuple(start_cell), tuple(goal_cell))
    waypoints = tuple(grid.cell_to_world(ix, iy) for ix, iy in cells)
    gx, gy = grid.cell_to_world(*goal_cell)
    return PlannedPath(
        waypoints=waypoints,
        cells=tuple(cells),
        cost=cost * grid.resolution,
        goal_pose=(gx, gy, goal_yaw),
    )


def replan_check(
    grid_live: OccupancyGrid,
    path: PlannedPath,
    scan: LidarScan,
    pose: tuple[float, float, float],
    lookahead: float = 0.5,
    p_threshold: float = 0.65,
) -> bool:
    """Project the scan into the live grid; True means replan.

    Only path cells within the lookahead distance ahead of the nearest
    path point are checked against the occupancy threshold.
    """
    map_update(grid_live, pose, scan)
    if not path.waypoints:
        return False
    pts = np.asarray(path.waypoints)
    d2 = (pts[:, 0] - pose[0]) ** 2 + (pts[:, 1] - pose[1]) ** 2
    start = int(np.argmin(d2))
    probs = grid_live.probabilities
    travelled = 0.0
    prev = pts[start]
    for k in range(start, len(pts)):
        travelled += math.hypot(pts[k][0] - prev[0], pts[k][1] - prev[1])
        prev = pts[k]
        if travelled > lookahead:
            break
        ix, iy = path.cells[k]
        if probs[iy, ix] > p_threshold:
            return True
    return False


def dijkstra_cost(
    blocked: np.ndarray, start: tuple[int, int], goal: tuple[int, int]
) -> float:
    """Reference shortest-path cost without a heuristic (oracle)."""
    h, w = blocked.shape
    dist = {start: 0.0}
    heap = [(0.0, start)]
    done = set()
    while heap:
        g, cur = heapq.heappop(heap)
        if cur in done:
            continue
        if cur == goal:
            return g
        done.add(cur)
        cx, cy = cur
        for dx, dy, cost in _NEIGHBORS:
            nx, ny = cx + dx, cy + dy
            if not (0 <= nx < w and 0 <= ny < h) or blocked[ny, nx]:
                continue
            ng = g + cost
            if ng < dist.get((nx, ny), math.inf):
                dist[(nx, ny)] = ng
                heapq.heappush(heap, (ng, (nx, ny)))
    raise UnreachableGoalError(f"no path from {start} to {goal}")
