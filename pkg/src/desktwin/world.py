"""Scenes, collision checks, and scene variability.

A scene is static 2D geometry: boundary/wall segments and oriented
rectangular obstacles inside a bounding rectangle.  All free space is
drivable.  Geometry is immutable after load; perturbation and obstacle
spawning return new scenes.
"""

import json
import logging
import math
from dataclasses import dataclass, field, replace
from importlib import resources

from .rng import NoiseStream
from .util import clamp

log = logging.getLogger(__name__)


class SceneError(ValueError):
    """Malformed or invalid scene document."""


@dataclass(frozen=True)
class Obstacle:
    center: tuple[float, float]  # m
    extents: tuple[float, float]  # m, full side lengths
    yaw: float = 0.0  # rad
    unmapped: bool = False  # excluded from the static map export

    def corners(self) -> list[tuple[float, float]]:
        hx, hy = self.extents[0] / 2.0, self.extents[1] / 2.0
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        cx, cy = self.center
        return [
            (cx + c * dx - s * dy, cy + s * dx + c * dy)
            for dx, dy in ((hx, hy), (-hx, hy), (-hx, -hy), (hx, -hy))
        ]


@dataclass(frozen=True)
class Scene:
    name: str
    bounds: tuple[float, float, float, float]  # x_min, y_min, x_max, y_max
    walls: tuple = ()  # ((x1, y1, x2, y2), ...)
    obstacles: tuple = ()  # (Obstacle, ...)
    centerline: tuple = ()  # optional closed polyline ((x, y), ...)
    spawn: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def segments(self, include_unmapped: bool = True) -> list[tuple]:
        """All geometry as ((x1,y1,x2,y2), label) pairs for ray casting."""
        segs = [(w, f"wall {i}") for i, w in enumerate(self.walls)]
        for i, ob in enumerate(self.obstacles):
            if ob.unmapped and not include_unmapped:
                continue
            cs = ob.corners()
            for k in range(4):
                a, b = cs[k], cs[(k + 1) % 4]
                segs.append(((a[0], a[1], b[0], b[1]), f"obstacle {i}"))
        return segs

    def static_geometry(self) -> list[tuple]:
        """Geometry visible to the autonomy static map (unmapped excluded)."""
        return self.segments(include_unmapped=False)

    def with_obstacle(self, obstacle: Obstacle) -> "Scene":
        return replace(self, obstacles=self.obstacles + (obstacle,))

    def without_obstacle(self, index: int) -> "Scene":
        obs = self.obstacles[:index] + self.obstacles[index + 1 :]
        return replace(self, obstacles=obs)

    def to_dict(self) -> dict:
        doc = {
            "name": self.name,
            "bounds": list(self.bounds),
            "walls": [list(w) for w in self.walls],
            "obstacles": [
                {
                    "center": list(o.center),
                    "extents": list(o.extents),
                    "yaw": o.yaw,
                    **({"unmapped": True} if o.unmapped else {}),
                }
                for o in self.obstacles
            ],
            "spawn": list(self.spawn),
        }
        if self.centerline:
            doc["centerline"] = [list(p) for p in self.centerline]
        return doc


def _inside(bounds, x, y, slack=1e-9) -> bool:
    return (
        bounds[0] - slack <= x <= bounds[2] + slack
        and bounds[1] - slack <= y <= bounds[3] + slack
    )


def scene_from_dict(doc: dict) -> Scene:
    if not isinstance(doc, dict):
        raise SceneError("scene: top level must be an object")
    for key in ("name", "bounds"):
        if key not in doc:
            raise SceneError(f"scene.{key}: missing required key")
    bounds = doc["bounds"]
    if len(bounds) != 4 or bounds[0] >= bounds[2] or bounds[1] >= bounds[3]:
        raise SceneError(f"scene.bounds: expected [x_min, y_min, x_max, y_max], got {bounds}")
    bounds = tuple(float(b) for b in bounds)

    walls = []
    for i, w in enumerate(doc.get("walls", [])):
        if len(w) != 4:
            raise SceneError(f"scene.walls[{i}]: expected 4 numbers, got {w}")
        w = tuple(float(v) for v in w)
        for x, y in ((w[0], w[1]), (w[2], w[3])):
            if not _inside(bounds, x, y):
                raise SceneError(f"scene.walls[{i}]: endpoint ({x}, {y}) outside bounds")
        walls.append(w)

    obstacles = []
    for i, o in enumerate(doc.get("obstacles", [])):
        for key in ("center", "extents"):
            if key not in o:
                raise SceneError(f"scene.obstacles[{i}].{key}: missing required key")
        ext = tuple(float(v) for v in o["extents"])
        if len(ext) != 2 or ext[0] <= 0 or ext[1] <= 0:
            raise SceneError(f"scene.obstacles[{i}].extents: must be two positive numbers")
        ob = Obstacle(
            center=tuple(float(v) for v in o["center"]),
            extents=ext,
            yaw=float(o.get("yaw", 0.0)),
            unmapped=bool(o.get("unmapped", False)),
        )
        for x, y in ob.corners():
            if not _inside(bounds, x, y):
                raise SceneError(f"scene.obstacles[{i}]: corner ({x:.3f}, {y:.3f}) outside bounds")
        obstacles.append(ob)

    centerline = tuple(tuple(float(v) for v in p) for p in doc.get("centerline", []))
    spawn = doc.get("spawn", [0.5 * (bounds[0] + bounds[2]), 0.5 * (bounds[1] + bounds[3]), 0.0])
    if len(spawn) != 3:
        raise SceneError("scene.spawn: expected [x, y, yaw]")
    return Scene(
        name=str(doc["name"]),
        bounds=bounds,
        walls=tuple(walls),
        obstacles=tuple(obstacles),
        centerline=centerline,
        spawn=tuple(float(v) for v in spawn),
    )


def load_scene(path_or_name: str) -> Scene:
    """Load a scene JSON file; bare names resolve to the shipped presets."""
    text = None
    source = path_or_name
    if "/" not in path_or_name and not path_or_name.endswith(".json"):
        source = f"{path_or_name}.json"
        text = (resources.files("desktwin") / "scenes" / source).read_text()
    else:
        try:
            with open(path_or_name) as f:
                text = f.read()
        except FileNotFoundError:
            base = path_or_name.rsplit("/", 1)[-1]
            res = resources.files("desktwin") / "scenes" / base
            if res.is_file():
                text = res.read_text()
            else:
                raise
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneError(f"{source}: invalid JSON at line {e.lineno}: {e.msg}") from e
    return scene_from_dict(doc)


# ---------------------------------------------------------------------------
# collision


@dataclass(frozen=True)
class FootprintPolygon:
    length: float  # m
    width: float  # m
    pose: tuple[float, float, float]

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0:
            raise ValueError("footprint dimensions must be positive")

    def corners(self) -> list[tuple[float, float]]:
        hx, hy = self.length / 2.0, self.width / 2.0
        x, y, yaw = self.pose
        c, s = math.cos(yaw), math.sin(yaw)
        return [
            (x + c * dx - s * dy, y + s * dx + c * dy)
            for dx, dy in ((hx, hy), (-hx, hy), (-hx, -hy), (hx, -hy))
        ]


@dataclass(frozen=True)
class ContactReport:
    contact: bool
    feature: str = ""

    def __bool__(self) -> bool:
        return self.contact


def _project(points, ax, ay):
    dots = [p[0] * ax + p[1] * ay for p in points]
    return min(dots), max(dots)


def _convex_overlap(poly_a, poly_b) -> bool:
    """Separating-axis test, closed sets: touching counts as overlap."""
    for poly in (poly_a, poly_b):
        n = len(poly)
        for i in range(n):
            x1, y1 = poly[i]
            x2, y2 = poly[(i + 1) % n]
            ax, ay = y1 - y2, x2 - x1  # edge normal
            if ax == 0.0 and ay == 0.0:
                continue
            mina, maxa = _project(poly_a, ax, ay)
            minb, maxb = _project(poly_b, ax, ay)
            if maxa < minb or maxb < mina:
                return False
    return True


def _segment_overlaps_polygon(seg, poly) -> bool:
    # a segment is a degenerate convex polygon; add its direction axis too
    p1 = (seg[0], seg[1])
    p2 = (seg[2], seg[3])
    if not _convex_overlap([p1, p2], poly):
        return False
    # SAT over polygon normals done; check the segment's own axes
    dx, dy = p2[0] - p1[0], p2[1] - p1[1]
    for ax, ay in ((-dy, dx), (dx, dy)):
        if ax == 0.0 and ay == 0.0:
            continue
        mina, maxa = _project([p1, p2], ax, ay)
        minb, maxb = _project(poly, ax, ay)
        if maxa < minb or maxb < mina:
            return False
    return True


def collide(footprint: FootprintPolygon, scene: Scene) -> ContactReport:
    """First contact between the footprint and any scene feature."""
    poly = footprint.corners()
    for i, w in enumerate(scene.walls):
        if _segment_overlaps_polygon(w, poly):
            return ContactReport(True, f"wall {i}")
    for i, ob in enumerate(scene.obstacles):
        if _convex_overlap(ob.corners(), poly):
            return ContactReport(True, f"obstacle {i}")
    return ContactReport(False)


# ---------------------------------------------------------------------------
# variability


def perturb_scene(
    scene: Scene,
    sigma_xy: float = 0.01,
    sigma_yaw: float = 0.087,
    seed: int = 0,
    stream: NoiseStream | None = None,
) -> Scene:
    """Perturb every wall and obstacle pose with seeded Gaussian draws.

    Each wall is translated and rotated about its midpoint; each obstacle
    has its center and yaw perturbed.  Geometry pushed outside the bounds
    is clamped back in and a warning is logged.
    """
    rng = stream if stream is not None else NoiseStream(seed, "scene-perturb")
    bx0, by0, bx1, by1 = scene.bounds
    walls = []
    for i, w in enumerate(scene.walls):
        dx, dy, dth = rng.gauss(sigma_xy), rng.gauss(sigma_xy), rng.gauss(sigma_yaw)
        mx, my = (w[0] + w[2]) / 2.0 + dx, (w[1] + w[3]) / 2.0 + dy
        c, s = math.cos(dth), math.sin(dth)
        pts = []
        clamped = False
        for px, py in ((w[0], w[1]), (w[2], w[3])):
            rx, ry = px - (w[0] + w[2]) / 2.0, py - (w[1] + w[3]) / 2.0
            nx = mx + c * rx - s * ry
            ny = my + s * rx + c * ry
            cx, cy_ = clamp(nx, bx0, bx1), clamp(ny, by0, by1)
            clamped = clamped or (cx != nx or cy_ != ny)
            pts.append((cx, cy_))
        if clamped:
            log.warning("perturb_scene: wall %d clamped to bounds", i)
        walls.append((pts[0][0], pts[0][1], pts[1][0], pts[1][1]))

    obstacles = []
    for i, ob in enumerate(scene.obstacles):
        dx, dy, dth = rng.gauss(sigma_xy), rng.gauss(sigma_xy), rng.gauss(sigma_yaw)
        nx, ny = ob.center[0] + dx, ob.center[1] + dy
        cx, cy_ = clamp(nx, bx0, bx1), clamp(ny, by0, by1)
        if cx != nx or cy_ != ny:
            log.warning("perturb_scene: obstacle %d clamped to bounds", i)
        cand = replace(ob, center=(cx, cy_), yaw=ob.yaw + dth)
        # re-validate corners; nudge toward the scene center if still out
        for px, py in cand.corners():
            if not _inside(scene.bounds, px, py):
                log.warning("perturb_scene: obstacle %d corner clamped to bounds", i)
                shift_x = clamp(px, bx0, bx1) - px
                shift_y = clamp(py, by0, by1) - py
                cand = replace(cand, center=(cand.center[0] + shift_x, cand.center[1] + shift_y))
        obstacles.append(cand)
    return replace(scene, walls=tuple(walls), obstacles=tuple(obstacles))


def spawn_unmapped_obstacle(scene: Scene, pose, extents) -> Scene:
    """Add a live obstacle that the autonomy static map will not contain."""
    ob = Obstacle(center=(pose[0], pose[1]), extents=tuple(extents), yaw=pose[2], unmapped=True)
    for x, y in ob.corners():
        if not _inside(scene.bounds, x, y):
            raise SceneError(f"unmapped obstacle corner ({x:.3f}, {y:.3f}) outside bounds")
    return scene.with_obstacle(ob)
