"""Log-odds occupancy grid built from known-pose lidar scans."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .sensors import LidarScan
from .world import Scene

LOG_ODDS_CLAMP = 10.0
L_FREE = 0.4  # decrement for cells a beam passed through
L_OCC = 0.85  # increment for the beam endpoint cell


class MappingError(ValueError):
    pass


def prob_to_log_odds(p: float) -> float:
    return math.log(p / (1.0 - p))


def log_odds_to_prob(l):
    return 1.0 - 1.0 / (1.0 + np.exp(l))


@dataclass
class OccupancyGrid:
    resolution: float  # m per cell
    origin: tuple[float, float]  # world coords of cell (0, 0) corner
    width: int  # cells
    height: int
    cells: np.ndarray = field(default=None)  # (height, width) log-odds

    def __post_init__(self):
        if self.cells is None:
            self.cells = np.zeros((self.height, self.width), dtype=np.float64)
        assert self.cells.shape == (self.height, self.width)

    @classmethod
    def for_scene(
        cls, scene: Scene, resolution: float = 0.02, pad: float = 0.12
    ) -> "OccupancyGrid":
        """Unknown (zero log-odds) grid covering the scene bounds.

        The grid extends `pad` meters beyond the bounds on every side so
        that distance fields stay symmetric across boundary walls; an
        endpoint pushed just past a wall by noise must score like one
        pulled just short of it.
        """
        x0, y0, x1, y1 = scene.bounds
        w = int(math.ceil((x1 - x0 + 2 * pad) / resolution))
        h = int(math.ceil((y1 - y0 + 2 * pad) / resolution))
        return cls(resolution=resolution, origin=(x0 - pad, y0 - pad), width=w, height=h)

    @classmethod
    def from_scene(
        cls, scene: Scene, resolution: float = 0.02, static_only: bool = True
    ) -> "OccupancyGrid":
        """Ground-truth rasterization: scene geometry occupied, the
        interior free, the padding ring unknown.  Used for oracle maps."""
        grid = cls.for_scene(scene, resolution)
        x0, y0, x1, y1 = scene.bounds
        ix0, iy0 = grid.world_to_cell(x0, y0)
        ix1, iy1 = grid.world_to_cell(x1 - 1e-9, y1 - 1e-9)
        grid.cells[iy0 : iy1 + 1, ix0 : ix1 + 1] = -LOG_ODDS_CLAMP
        segs = scene.static_geometry() if static_only else scene.segments()
        for (x1, y1, x2, y2), _ in segs:
            n = max(2, int(math.hypot(x2 - x1, y2 - y1) / (resolution / 2)) + 1)
            xs = np.linspace(x1, x2, n)
            ys = np.linspace(y1, y2, n)
            ix, iy = grid.world_to_cell_arrays(xs, ys)
            ok = grid.in_bounds_arrays(ix, iy)
            grid.cells[iy[ok], ix[ok]] = LOG_ODDS_CLAMP
        return grid

    # -- indexing -----------------------------------------------------------

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        return (
            int(math.floor((x - self.origin[0]) / self.resolution)),
            int(math.floor((y - self.origin[1]) / self.resolution)),
        )

    def world_to_cell_arrays(self, xs, ys):
        ix = np.floor((np.asarray(xs) - self.origin[0]) / self.resolution).astype(int)
        iy = np.floor((np.asarray(ys) - self.origin[1]) / self.resolution).astype(int)
        return ix, iy

    def cell_to_world(self, ix: int, iy: int) -> tuple[float, float]:
        return (
            self.origin[0] + (ix + 0.5) * self.resolution,
            self.origin[1] + (iy + 0.5) * self.resolution,
        )

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def in_bounds_arrays(self, ix, iy):
        return (ix >= 0) & (ix < self.width) & (iy >= 0) & (iy < self.height)

    # -- views --------------------------------------------------------------

    @property
    def probabilities(self) -> np.ndarray:
        return log_odds_to_prob(self.cells)

    def occupied_mask(self, p_threshold: float = 0.65) -> np.ndarray:
        return self.probabilities > p_threshold

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(
            self.resolution, self.origin, self.width, self.height, self.cells.copy()
        )

    # -- io -----------------------------------------------------------------

    def to_pgm(self, path: str):
        """Portable graymap (P5): occupied dark, free light; JSON sidecar
        carries resolution and origin."""
        gray = np.clip((1.0 - self.probabilities) * 255.0, 0, 255).astype(np.uint8)
        with open(path, "wb") as f:
            f.write(f"P5\n{self.width} {self.height}\n255\n".encode())
            f.write(gray[::-1].tobytes())  # top row first
        meta = {
            "resolution": self.resolution,
            "origin": list(self.origin),
            "width": self.width,
            "height": self.height,
        }
        with open(path + ".json", "w") as f:
            json.dump(meta, f, indent=1)
            f.write("\n")


def _ray_cells(ix0: int, iy0: int, ix1: int, iy1: int):
    """Integer line traversal from (ix0, iy0) to (ix1, iy1) inclusive."""
    n = max(abs(ix1 - ix0), abs(iy1 - iy0))
    if n == 0:
        return np.array([ix0]), np.array([iy0])
    t = np.linspace(0.0, 1.0, n + 1)
    xs = np.rint(ix0 + t * (ix1 - ix0)).astype(int)
    ys = np.rint(iy0 + t * (iy1 - iy0)).astype(int)
    return xs, ys


def map_update(grid: OccupancyGrid, pose, scan: LidarScan) -> OccupancyGrid:
    """Insert one known-pose scan into the grid (in place, returns grid).

    Cells along each returning beam lose L_FREE; the endpoint cell gains
    L_OCC.  No-return beams are skipped: they are ambiguous between
    blind-zone hits and genuinely empty space, so they carry no evidence.
    """
    x, y, yaw = pose
    ix0, iy0 = grid.world_to_cell(x, y)
    if not grid.in_bounds(ix0, iy0):
        raise MappingError(f"pose ({x:.3f}, {y:.3f}) outside the grid")
    ranges = scan.ranges
    angles = yaw + scan.angle_min + np.arange(len(ranges)) * scan.angle_increment
    hit = np.isfinite(ranges)
    ex = x + np.where(hit, ranges, 0.0) * np.cos(angles)
    ey = y + np.where(hit, ranges, 0.0) * np.sin(angles)
    exi, eyi = grid.world_to_cell_arrays(ex, ey)
    cells = grid.cells
    for b in np.nonzero(hit)[0]:
        xs, ys = _ray_cells(ix0, iy0, int(exi[b]), int(eyi[b]))
        ok = grid.in_bounds_arrays(xs, ys)
        xs, ys = xs[ok], ys[ok]
        if len(xs) == 0:
            continue
        # free cells: all but the endpoint (dedupe to one update per cell)
        if len(xs) > 1:
            flat = ys[:-1] * grid.width + xs[:-1]
            free = np.unique(flat)
            np.subtract.at(cells.ravel(), free, L_FREE)
        if grid.in_bounds(int(exi[b]), int(eyi[b])):
            cells[eyi[b], exi[b]] += L_OCC
    np.clip(cells, -LOG_ODDS_CLAMP, LOG_ODDS_CLAMP, out=cells)
    return grid


def free_cells(grid: OccupancyGrid, p_free: float = 0.2) -> np.ndarray:
    """(ix, iy) array of confidently-free cells."""
    mask = grid.probabilities < p_free
    iy, ix = np.nonzero(mask)
    return np.stack([ix, iy], axis=1)
