"""Simulation session: fixed-step loop wiring dynamics, sensors, world.

Tick order is fixed: apply the latest command (with actuator noise),
advance dynamics, build the sensor frame (lidar on its own cadence),
check collision, then hand the frame to whatever drives the next command
(teleop mailbox, parking mission, or a trained policy).  Given the same
seed, config, and command sequence the telemetry stream is bit-identical
across runs and across headless/served modes.
"""

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .config import VehicleConfig, default_config
from .dynamics import IntegrationFault, VehicleState, initial_state, step
from .imitation import DATASET_FORMAT_VERSION, record_row, row_to_json
from .rng import NoiseStream
from .sensors import LidarSpec, NoiseConfig, SensorFrame, SensorRig, actuate_noisy
from .world import ContactReport, FootprintPolygon, Scene, collide, load_scene

MODES = ("manual", "parking", "bc_drive")


@dataclass
class SessionConfig:
    scene: str = "parking_school"
    vehicle_path: str | None = None
    mode: str = "manual"
    dt: float = 0.002
    realtime_factor: float = 0.0  # 0 = as fast as possible
    seed: int = 0
    noise: NoiseConfig | None = None
    record: str | None = None

    def __post_init__(self):
        if not (0.0 < self.dt <= 0.01):
            raise ValueError(f"session dt must be in (0, 0.01], got {self.dt}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.realtime_factor < 0:
            raise ValueError("realtime_factor must be >= 0")
        if self.noise is None:
            self.noise = NoiseConfig(seed=self.seed)


class LapCounter:
    """Progress along a closed centerline, unwrapped into lap counts."""

    def __init__(self, centerline):
        pts = np.asarray(centerline, dtype=float)
        self.points = pts
        d = np.hypot(*(np.roll(pts, -1, axis=0) - pts).T)
        self.seg_len = d
        self.cum = np.concatenate([[0.0], np.cumsum(d)])
        self.total = float(self.cum[-1])
        self._last_s = None
        self.progress = 0.0

    def arc_position(self, x: float, y: float) -> float:
        """Arc length of the nearest point on the closed polyline."""
        p = np.array([x, y])
        a = self.points
        b = np.roll(a, -1, axis=0)
        ab = b - a
        ap = p[None, :] - a
        denom = np.maximum((ab * ab).sum(axis=1), 1e-12)
        t = np.clip((ap * ab).sum(axis=1) / denom, 0.0, 1.0)
        closest = a + t[:, None] * ab
        d2 = ((closest - p[None, :]) ** 2).sum(axis=1)
        k = int(np.argmin(d2))
        return float(self.cum[k] + t[k] * self.seg_len[k])

    def update(self, x: float, y: float) -> int:
        s = self.arc_position(x, y)
        if self._last_s is not None:
            ds = s - self._last_s
            if ds > self.total / 2:
                ds -= self.total
            elif ds < -self.total / 2:
                ds += self.total
            self.progress += ds
        self._last_s = s
        return self.laps

    @property
    def laps(self) -> int:
        return int(math.floor(self.progress / self.total)) if self.total > 0 else 0


class Recorder:
    """JSONL writers for raw telemetry (every tick) and dataset rows
    (every scan tick).  Each file ends with a summary record."""

    def __init__(self, base_path: str, scene: Scene, meta: dict | None = None):
        self.base = base_path
        self.telemetry_path = base_path + "_telemetry.jsonl"
        self.dataset_path = base_path + "_dataset.jsonl"
        self._tele = open(self.telemetry_path, "w")
        self._data = open(self.dataset_path, "w")
        header = {"type": "header", "format_version": DATASET_FORMAT_VERSION}
        header.update(meta or {})
        self._data.write(json.dumps(header) + "\n")
        self.rows = 0
        self.records = 0
        self.t0 = None
        self.tformat = None
        self.laps = LapCounter(scene.centerline) if scene.centerline else None
        self.closed = False

    def write(self, record: dict, frame: SensorFrame, cmd, truth):
        if self.closed:
            return
        if self.t0 is None:
            self.t0 = record["t"]
        self._tele.write(json.dumps(record) + "\n")
        self.records += 1
        if self.laps is not None:
            self.laps.update(truth[0], truth[1])
        row = record_row(frame, cmd)
        if row is not None:
            self._data.write(json.dumps(row_to_json(row)) + "\n")
            self.rows += 1
        self.t_last = record["t"]

    def close(self):
        if self.closed:
            return
        summary = {
            "type": "summary",
            "rows": self.rows,
            "records": self.records,
            "duration": (self.t_last - self.t0) if self.records else 0.0,
        }
        if self.laps is not None:
            summary["laps"] = self.laps.laps
        self._data.write(json.dumps(summary) + "\n")
        self._tele.write(json.dumps(summary) + "\n")
        self._tele.close()
        self._data.close()
        self.closed = True


class Simulator:
    """Owns the vehicle state and advances it tick by tick."""

    def __init__(
        self,
        scene: Scene | str,
        vehicle: VehicleConfig | None = None,
        noise: NoiseConfig | None = None,
        dt: float = 0.002,
        seed: int = 0,
        lidar_spec: LidarSpec = LidarSpec(),
    ):
        self.scene = load_scene(scene) if isinstance(scene, str) else scene
        self.cfg = vehicle if vehicle is not None else default_config()
        self.noise = noise if noise is not None else NoiseConfig(seed=seed)
        self.dt = dt
        self.seed = seed
        root = NoiseStream(self.noise.seed)
        self.drive_stream = root.spawn("drive")
        self.steer_stream = root.spawn("steer")
        self.rig = SensorRig(self.scene, self.noise, lidar_spec, cpr=self.cfg.encoder_cpr)
        self.state = initial_state(self.cfg, self.scene.spawn)
        self.contact = ContactReport(False)
        self.collision_onset = False
        self.collision_count = 0
        self.tick_count = 0
        self.frozen = False

    # -- lifecycle -----------------------------------------------------------

    def reset(self, pose=None):
        self.state = initial_state(self.cfg, pose if pose is not None else self.scene.spawn)
        self.contact = ContactReport(False)
        self.collision_onset = False
        self.collision_count = 0
        self.tick_count = 0
        self.frozen = False
        self.rig = SensorRig(self.scene, self.noise, self.rig.spec, cpr=self.cfg.encoder_cpr)

    def set_scene(self, scene: Scene, reset_pose: bool = False):
        self.scene = scene
        self.rig.set_scene(scene)
        if reset_pose:
            self.reset()

    def footprint(self, pose=None) -> FootprintPolygon:
        p = pose if pose is not None else self.state.pose
        return FootprintPolygon(self.cfg.body.length, self.cfg.body.width, tuple(p))

    # -- stepping ------------------------------------------------------------

    def tick(self, cmd: tuple[float, float]) -> SensorFrame:
        """One pipeline tick; raises IntegrationFault on numeric failure."""
        if self.frozen:
            raise IntegrationFault("simulation frozen after a fault; reset required")
        applied = actuate_noisy(
            cmd, self.noise, self.cfg.actuator, self.drive_stream, self.steer_stream
        )
        prev = self.state
        try:
            self.state = step(prev, applied, self.dt, self.cfg)
        except IntegrationFault:
            self.frozen = True
            raise
        frame = self.rig.frame(prev, self.state, cmd, self.dt)
        frame.extra["v_x"] = self.state.v_x
        contact = collide(self.footprint(), self.scene)
        self.collision_onset = contact.contact and not self.contact.contact
        if self.collision_onset:
            self.collision_count += 1
        self.contact = contact
        self.tick_count += 1
        return frame

    def telemetry_record(self, frame: SensorFrame, cmd, extra: dict | None = None) -> dict:
        rec = {
            "t": frame.sim_time,
            "truth": [self.state.x, self.state.y, self.state.yaw],
            "cmd": [cmd[0], cmd[1]],
            "collision": self.contact.contact,
            "frame": frame.to_wire(),
        }
        if self.contact.contact:
            rec["contact_feature"] = self.contact.feature
        if extra:
            rec.update(extra)
        return rec
