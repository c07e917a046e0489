"""Autonomous parking: a five-stage pipeline over the simulator.

MAPPING drives a scripted loop under ground-truth pose and inserts scans
into a fresh occupancy grid (the simulator owns the truth, so known-pose
mapping stands in for full scan-matching SLAM).  LOCALIZING hands off to
the particle filter seeded around the last mapping pose and wiggles until
the cloud tightens.  PLANNING runs A* on the inflated static map,
TRACKING follows the path with a proportional controller, re-planning
when fresh scans mark upcoming path cells occupied, and PARKED latches
once the pose estimate sits inside the goal gates with the vehicle
stopped.
"""

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .localization import (
    LikelihoodField,
    MclConfig,
    ParticleSet,
    mcl_update,
    odometry_update,
)
from .mapping import OccupancyGrid, map_update
from .planning import PlanningError, astar_plan, replan_check
from .rng import NoiseStream
from .sensors import SensorFrame
from .simulation import LapCounter, Simulator
from .util import clamp, wrap_angle
from .world import spawn_unmapped_obstacle


class Stage(str, Enum):
    MAPPING = "MAPPING"
    LOCALIZING = "LOCALIZING"
    PLANNING = "PLANNING"
    TRACKING = "TRACKING"
    PARKED = "PARKED"


@dataclass
class TrackerConfig:
    v_ref: float = 0.15  # m/s cruise
    kp_heading: float = 2.0
    kp_speed: float = 4.0
    lookahead: float = 0.2  # m
    goal_blend_radius: float = 0.15  # m, heading blends to goal yaw inside
    slow_radius: float = 0.35  # m, speed tapers toward the goal
    min_speed_frac: float = 0.22


def track_path(
    pose,
    v_x: float,
    waypoints,
    goal_pose,
    cfg: TrackerConfig = TrackerConfig(),
) -> tuple[float, float]:
    """Proportional path tracking; returns (throttle, steering)."""
    if not waypoints:
        raise ValueError("cannot track an empty path")
    x, y, yaw = pose
    pts = np.asarray(waypoints)
    d2 = (pts[:, 0] - x) ** 2 + (pts[:, 1] - y) ** 2
    nearest = int(np.argmin(d2))
    target = pts[-1]
    for k in range(nearest, len(pts)):
        if math.hypot(pts[k][0] - x, pts[k][1] - y) >= cfg.lookahead:
            target = pts[k]
            break
    err = wrap_angle(math.atan2(target[1] - y, target[0] - x) - yaw)

    dist_goal = math.hypot(goal_pose[0] - x, goal_pose[1] - y)
    if dist_goal < cfg.goal_blend_radius:
        lam = 1.0 - dist_goal / cfg.goal_blend_radius
        err = (1.0 - lam) * err + lam * wrap_angle(goal_pose[2] - yaw)

    v_target = cfg.v_ref * clamp(dist_goal / cfg.slow_radius, cfg.min_speed_frac, 1.0)
    throttle = clamp(cfg.kp_speed * (v_target - v_x), -1.0, 1.0)
    steering = clamp(cfg.kp_heading * err, -1.0, 1.0)
    return (throttle, steering)


@dataclass
class ParkingConfig:
    goal: tuple[float, float, float] = (2.4, 1.5, math.pi / 2)
    pos_tolerance: float = 0.05  # m, mission success gate
    yaw_tolerance: float = 0.1  # rad
    inner_pos_gate: float = 0.03  # m, estimate gate that latches PARKED
    inner_yaw_gate: float = 0.08  # rad
    stop_speed: float = 0.02  # m/s
    resolution: float = 0.02  # m/cell
    occupied_threshold: float = 0.65
    inflation_margin: float = 0.02  # m beyond half the footprint diagonal
    replan_lookahead: float = 0.5  # m
    stage_timeout: float = 120.0  # s per stage
    mapping_loop: tuple = ((0.8, 0.8), (2.0, 0.8), (2.0, 2.0), (0.8, 2.0))
    mapping_laps: float = 1.05
    mapping_v_ref: float = 0.2
    localize_std_gate: float = 0.05  # m
    localize_min_updates: int = 6
    localize_init_sigma: tuple = (0.08, 0.12)  # m, rad about mapping end pose
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    mcl: MclConfig = field(default_factory=MclConfig)
    # optional unmapped obstacle dropped on the planned path when
    # TRACKING starts: (fraction along path, (size_x, size_y))
    obstacle_on_path: tuple | None = None


@dataclass
class MissionLog:
    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def save(self, path: str):
        with open(path, "w") as f:
            for rec in self.records:
                f.write(json.dumps(rec) + "\n")
            f.write(json.dumps({"type": "summary", **self.summary}) + "\n")


def _densify(points, step=0.05):
    out = []
    pts = [tuple(p) for p in points]
    for a, b in zip(pts, pts[1:] + pts[:1]):
        n = max(1, int(math.hypot(b[0] - a[0], b[1] - a[1]) / step))
        for k in range(n):
            t = k / n
            out.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
    return out


class ParkingMission:
    """Per-tick mission controller; owns the map, filter, and plan."""

    def __init__(self, sim: Simulator, cfg: ParkingConfig):
        self.sim = sim
        self.cfg = cfg
        self.stage = Stage.MAPPING
        self.grid = OccupancyGrid.for_scene(sim.scene, cfg.resolution)
        self.live_grid = None
        self.field = None
        self.particles = None
        self.path = None
        self.estimate = None
        self.replan_count = 0
        self.events = []
        self.stage_started = 0.0
        self.stage_times = {}
        self.mcl_updates = 0
        self._mcl_stream = NoiseStream(sim.seed, "mcl")
        self._map_pts = _densify(cfg.mapping_loop)
        self._map_laps = LapCounter(self._map_pts)
        self._wiggle_phase = 0
        self._last_scan_frame = None
        self._prev_frame = None
        self._failure = None
        half_diag = 0.5 * math.hypot(sim.cfg.body.length, sim.cfg.body.width)
        self.inflation = half_diag + cfg.inflation_margin

    # -- helpers --------------------------------------------------------------

    def _enter(self, stage: Stage, now: float):
        self.stage_times[self.stage.value] = now - self.stage_started
        self.stage = stage
        self.stage_started = now

    def _fail(self, reason: str, now: float):
        self._failure = f"{self.stage.value}: {reason}"
        self.events.append({"t": now, "event": "failure", "detail": self._failure})

    def _advance_estimate(self, frame: SensorFrame):
        """Dead-reckon the pose estimate between filter corrections."""
        if self.estimate is None or self._prev_frame is None:
            return
        dx, dy, dyaw = odometry_update(
            self._prev_frame, frame, self.sim.cfg.wheel_radius, self.sim.cfg.encoder_cpr
        )
        x, y, yaw = self.estimate
        c, s = math.cos(yaw), math.sin(yaw)
        self.estimate = (x + c * dx - s * dy, y + s * dx + c * dy, wrap_angle(yaw + dyaw))

    def _mcl_correct(self, frame: SensorFrame):
        if frame.lidar is None or self._last_scan_frame is None:
            return
        odom = odometry_update(
            self._last_scan_frame, frame, self.sim.cfg.wheel_radius, self.sim.cfg.encoder_cpr
        )
        self.particles, result = mcl_update(
            self.particles, odom, frame.lidar, self.field, self.cfg.mcl, self._mcl_stream
        )
        self.estimate = result.estimate
        self.mcl_updates += 1
        if result.recovered:
            self.events.append({"t": frame.sim_time, "event": "mcl_recovery"})

    # -- per-tick controller ---------------------------------------------------

    def command(self, frame: SensorFrame) -> tuple[float, float]:
        """Consume the latest sensor frame, return the next command."""
        cfg = self.cfg
        sim = self.sim
        now = frame.sim_time
        if self._failure is not None:
            return (0.0, 0.0)
        if now - self.stage_started > cfg.stage_timeout:
            self._fail("stage timeout", now)
            return (0.0, 0.0)

        cmd = (0.0, 0.0)
        if self.stage is Stage.MAPPING:
            truth = sim.state.pose
            if frame.lidar is not None:
                map_update(self.grid, truth, frame.lidar)
            self._map_laps.update(truth[0], truth[1])
            if self._map_laps.progress >= cfg.mapping_laps * self._map_laps.total:
                self.estimate = truth  # handoff pose from the mapping stage
                self.field = LikelihoodField(self.grid, cfg.mcl)
                sx, syaw = cfg.localize_init_sigma
                n = cfg.mcl.max_particles
                jitter = self._mcl_stream.normal(3 * n).reshape(n, 3)
                poses = np.tile(truth, (n, 1))
                poses[:, 0] += jitter[:, 0] * sx
                poses[:, 1] += jitter[:, 1] * sx
                poses[:, 2] += jitter[:, 2] * syaw
                self.particles = ParticleSet(poses, np.full(n, 1.0 / n))
                self._enter(Stage.LOCALIZING, now)
            else:
                cmd = track_path(
                    truth,
                    sim.state.v_x,
                    self._map_pts,
                    (*self._map_pts[0], 0.0),
                    TrackerConfig(v_ref=cfg.mapping_v_ref, slow_radius=1e-6, min_speed_frac=1.0),
                )

        elif self.stage is Stage.LOCALIZING:
            self._advance_estimate(frame)
            self._mcl_correct(frame)
            local_updates = self.mcl_updates
            if (
                local_updates >= cfg.localize_min_updates
                and self.particles.position_std() < cfg.localize_std_gate
            ):
                self._enter(Stage.PLANNING, now)
            else:
                # gentle forward/reverse wiggle to feed the filter
                phase = int(now / 1.2) % 2
                cmd = (0.3, 0.45) if phase == 0 else (-0.3, -0.45)

        elif self.stage is Stage.PLANNING:
            try:
                start = self.grid.world_to_cell(self.estimate[0], self.estimate[1])
                goal = self.grid.world_to_cell(cfg.goal[0], cfg.goal[1])
                self.path = astar_plan(
                    self.grid,
                    start,
                    goal,
                    self.inflation,
                    goal_yaw=cfg.goal[2],
                    p_threshold=cfg.occupied_threshold,
                )
            except PlanningError as e:
                self._fail(str(e), now)
                return (0.0, 0.0)
            if self.live_grid is None:
                self.live_grid = self.grid.copy()
                if cfg.obstacle_on_path is not None:
                    frac, extents = cfg.obstacle_on_path
                    wp = self.path.waypoints
                    pos = wp[min(int(frac * len(wp)), len(wp) - 1)]
                    sim.set_scene(
                        spawn_unmapped_obstacle(sim.scene, (pos[0], pos[1], 0.0), extents)
                    )
                    self.events.append(
                        {"t": now, "event": "unmapped_obstacle", "at": [pos[0], pos[1]]}
                    )
            self._enter(Stage.TRACKING, now)

        elif self.stage is Stage.TRACKING:
            self._advance_estimate(frame)
            self._mcl_correct(frame)
            if frame.lidar is not None and replan_check(
                self.live_grid,
                self.path,
                frame.lidar,
                self.estimate,
                cfg.replan_lookahead,
                cfg.occupied_threshold,
            ):
                try:
                    start = self.live_grid.world_to_cell(self.estimate[0], self.estimate[1])
                    goal = self.live_grid.world_to_cell(cfg.goal[0], cfg.goal[1])
                    self.path = astar_plan(
                        self.live_grid,
                        start,
                        goal,
                        self.inflation,
                        goal_yaw=cfg.goal[2],
                        p_threshold=cfg.occupied_threshold,
                    )
                    self.replan_count += 1
                    self.events.append({"t": now, "event": "replan"})
                except PlanningError as e:
                    self._fail(f"replan failed: {e}", now)
                    return (0.0, 0.0)
            x, y, yaw = self.estimate
            dist = math.hypot(cfg.goal[0] - x, cfg.goal[1] - y)
            yaw_err = abs(wrap_angle(cfg.goal[2] - yaw))
            if (
                dist < cfg.inner_pos_gate
                and yaw_err < cfg.inner_yaw_gate
                and abs(sim.state.v_x) < cfg.stop_speed
            ):
                self._enter(Stage.PARKED, now)
                self.events.append({"t": now, "event": "parked"})
            else:
                cmd = track_path(
                    self.estimate, sim.state.v_x, self.path.waypoints, cfg.goal, cfg.tracker
                )

        self._prev_frame = frame
        if frame.lidar is not None:
            self._last_scan_frame = frame
        return cmd

    @property
    def failed(self) -> bool:
        return self._failure is not None

    @property
    def done(self) -> bool:
        return self.stage is Stage.PARKED or self.failed


def run_parking_mission(
    sim: Simulator, cfg: ParkingConfig | None = None, settle_ticks: int = 150
) -> MissionLog:
    """Run the mission to completion; returns the structured log."""
    cfg = cfg if cfg is not None else ParkingConfig()
    mission = ParkingMission(sim, cfg)
    log = MissionLog()
    cmd = (0.0, 0.0)
    parked_ticks = 0
    while not mission.failed:
        frame = sim.tick(cmd)
        cmd = mission.command(frame)
        rec = {
            "t": frame.sim_time,
            "stage": mission.stage.value,
            "est": list(mission.estimate) if mission.estimate else None,
            "truth": [sim.state.x, sim.state.y, sim.state.yaw],
            "cmd": list(cmd),
            "replans": mission.replan_count,
            "collision": sim.contact.contact,
        }
        log.records.append(rec)
        if mission.stage is Stage.PARKED:
            parked_ticks += 1
            if parked_ticks >= settle_ticks:
                break

    truth = sim.state
    goal = cfg.goal
    final_pos_err = math.hypot(goal[0] - truth.x, goal[1] - truth.y)
    final_yaw_err = abs(wrap_angle(goal[2] - truth.yaw))
    parked = mission.stage is Stage.PARKED
    success = (
        parked
        and not mission.failed
        and sim.collision_count == 0
        and final_pos_err <= cfg.pos_tolerance
        and final_yaw_err <= cfg.yaw_tolerance
    )
    log.summary = {
        "verdict": "success" if success else "failure",
        "parked": parked,
        "failure": mission._failure,
        "final_pos_err": final_pos_err,
        "final_yaw_err": final_yaw_err,
        "replan_count": mission.replan_count,
        "collision_count": sim.collision_count,
        "stage_times": mission.stage_times,
        "mcl_updates": mission.mcl_updates,
        "events": mission.events,
        "sim_time": sim.state.sim_time,
        "seed": sim.seed,
    }
    return log
