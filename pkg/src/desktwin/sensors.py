"""Sensor simulation: feedbacks, encoders, IPS, IMU, planar lidar.

Lidar is exact ray/segment intersection over the scene geometry, 360
beams at one-degree spacing, with optional per-beam Gaussian noise.
No-return beams are +inf internally and null on the wire.  All noise is
drawn from named per-channel streams so sequences are reproducible; for
a lidar scan a full block of 360 draws is consumed whether or not every
beam hit, which keeps the stream aligned regardless of geometry.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import RL, RR, VehicleState
from .rng import NoiseStream
from .util import clamp, wrap_angle
from .world import Scene

NO_RETURN = float("inf")


@dataclass(frozen=True)
class LidarSpec:
    beams: int = 360
    angular_resolution: float = math.tau / 360.0  # rad
    range_min: float = 0.15  # m
    range_max: float = 12.0  # m
    rate: float = 7.0  # Hz
    noise_sigma: float = 0.025  # m

    def __post_init__(self):
        if abs(self.beams * self.angular_resolution - math.tau) > 1e-9:
            raise ValueError("lidar beams * resolution must cover a full turn")
        if not (0 <= self.range_min < self.range_max):
            raise ValueError("lidar range_min must be in [0, range_max)")


@dataclass(frozen=True)
class LidarScan:
    timestamp: float  # s
    angle_min: float  # rad, bearing of beam 0 in the body frame
    angle_increment: float  # rad
    ranges: np.ndarray  # 360 floats, +inf = no return

    def to_wire(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "angle_min": self.angle_min,
            "angle_increment": self.angle_increment,
            "ranges": [None if not math.isfinite(r) else r for r in self.ranges],
        }


@dataclass(frozen=True)
class NoiseConfig:
    lidar_sigma: float = 0.0  # m
    drive_sigma: float = 0.0  # m/s on the drive velocity target
    steer_sigma: float = 0.0  # rad/s on the steering rate channel
    ips_sigma: float = 0.0  # m
    seed: int = 0

    def __post_init__(self):
        for key in ("lidar_sigma", "drive_sigma", "steer_sigma", "ips_sigma"):
            if getattr(self, key) < 0:
                raise ValueError(f"noise.{key} must be >= 0")

    @classmethod
    def paper_levels(cls, seed: int = 0) -> "NoiseConfig":
        """The standard variability-test levels used by the parking study."""
        return cls(lidar_sigma=0.025, drive_sigma=0.013, steer_sigma=0.018, seed=seed)

    @classmethod
    def off(cls, seed: int = 0) -> "NoiseConfig":
        return cls(seed=seed)


@dataclass(frozen=True)
class SensorFrame:
    throttle_fb: float
    steering_fb: float
    encoder_ticks: tuple[int, int]  # (left rear, right rear)
    ips_pose: tuple[float, float, float]
    imu_yaw: float
    imu_yaw_rate: float
    imu_accel: tuple[float, float]
    lidar: LidarScan | None
    sim_time: float
    extra: dict = field(default_factory=dict)  # reserved for future channels

    def to_wire(self) -> dict:
        doc = {
            "throttle_fb": self.throttle_fb,
            "steering_fb": self.steering_fb,
            "encoders": list(self.encoder_ticks),
            "ips": list(self.ips_pose),
            "imu": {
                "yaw": self.imu_yaw,
                "yaw_rate": self.imu_yaw_rate,
                "accel": list(self.imu_accel),
            },
            "lidar": self.lidar.to_wire() if self.lidar is not None else None,
            "t": self.sim_time,
        }
        if self.extra:
            doc["extra"] = self.extra
        return doc


def encoder_read(cumulative_angle: float, cpr: int = 1920) -> int:
    """Signed tick count for a cumulative wheel angle (floor quantization)."""
    if cpr <= 0:
        raise ValueError(f"cpr must be positive, got {cpr}")
    return math.floor(cumulative_angle / math.tau * cpr)


def ips_read(
    state: VehicleState, sigma: float = 0.0, stream: NoiseStream | None = None
) -> tuple[float, float, float]:
    """Planar pose with optional Gaussian position noise (right-handed)."""
    x, y, yaw = state.x, state.y, state.yaw
    if sigma > 0.0 and stream is not None:
        x += stream.gauss(sigma)
        y += stream.gauss(sigma)
    return (x, y, yaw)


def imu_read(
    prev: VehicleState, curr: VehicleState, dt: float
) -> tuple[float, float, tuple[float, float]]:
    """(yaw, yaw rate, body accel) from finite differences of states.

    Body-frame acceleration includes the rotating-frame (centripetal)
    term: a = dv/dt + omega x v.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    yaw_rate = wrap_angle(curr.yaw - prev.yaw) / dt
    a_x = (curr.v_x - prev.v_x) / dt - yaw_rate * curr.v_y
    a_y = (curr.v_y - prev.v_y) / dt + yaw_rate * curr.v_x
    return (curr.yaw, yaw_rate, (a_x, a_y))


def _segment_array(scene: Scene) -> np.ndarray:
    segs = scene.segments()
    if not segs:
        return np.zeros((0, 4))
    return np.array([s[0] for s in segs], dtype=np.float64)


def cast_rays(
    origin: tuple[float, float], angles: np.ndarray, segments: np.ndarray
) -> np.ndarray:
    """Nearest intersection distance per ray; +inf where nothing is hit."""
    n = len(angles)
    if segments.shape[0] == 0:
        return np.full(n, NO_RETURN)
    ox, oy = origin
    dx = np.cos(angles)[:, None]  # (n, 1)
    dy = np.sin(angles)[:, None]
    ex = (segments[:, 2] - segments[:, 0])[None, :]  # (1, s)
    ey = (segments[:, 3] - segments[:, 1])[None, :]
    wx = (segments[:, 0] - ox)[None, :]
    wy = (segments[:, 1] - oy)[None, :]
    denom = dx * ey - dy * ex
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (wx * ey - wy * ex) / denom  # distance along the ray
        s = (wx * dy - wy * dx) / denom  # parameter along the segment
        valid = (np.abs(denom) > 1e-12) & (t >= 0.0) & (s >= 0.0) & (s <= 1.0)
        t = np.where(valid, t, NO_RETURN)
    return t.min(axis=1)


def lidar_scan(
    scene: Scene,
    sensor_pose: tuple[float, float, float],
    spec: LidarSpec = LidarSpec(),
    noise_sigma: float = 0.0,
    stream: NoiseStream | None = None,
    timestamp: float = 0.0,
    segments: np.ndarray | None = None,
) -> LidarScan:
    """One full scan from the given pose.

    Hits closer than range_min or farther than range_max are no-return;
    noise is applied to raw hit distances and the range check is then
    re-applied, so every finite reading respects the device limits.
    """
    if segments is None:
        segments = _segment_array(scene)
    angles = sensor_pose[2] + np.arange(spec.beams) * spec.angular_resolution
    dist = cast_rays((sensor_pose[0], sensor_pose[1]), angles, segments)
    hit = np.isfinite(dist)
    if noise_sigma > 0.0 and stream is not None:
        dist = dist + np.where(hit, stream.normal(spec.beams, noise_sigma), 0.0)
    ok = hit & (dist >= spec.range_min) & (dist <= spec.range_max)
    ranges = np.where(ok, dist, NO_RETURN)
    return LidarScan(
        timestamp=timestamp,
        angle_min=0.0,
        angle_increment=spec.angular_resolution,
        ranges=ranges,
    )


def actuate_noisy(
    cmd: tuple[float, float],
    noise: NoiseConfig,
    actuator,
    drive_stream: NoiseStream,
    steer_stream: NoiseStream,
) -> tuple[float, float]:
    """Perturb (throttle, steering) like imperfect actuators.

    Drive noise is N(0, drive_sigma) m/s on the velocity target; steering
    noise is N(0, steer_sigma) rad/s on the rate channel.  Both map back
    to the normalized command range and re-clamp.  Draws happen even at
    zero sigma so sequences stay aligned across configurations.
    """
    n_drive = drive_stream.gauss(1.0) * noise.drive_sigma
    n_steer = steer_stream.gauss(1.0) * noise.steer_sigma
    throttle = clamp(cmd[0] + n_drive / actuator.max_drive_speed, -1.0, 1.0)
    steering = clamp(cmd[1] + n_steer / actuator.max_steer_rate, -1.0, 1.0)
    return (throttle, steering)


class SensorRig:
    """Stateful per-session sensor pipeline: streams, cadence, frames."""

    def __init__(
        self,
        scene: Scene,
        noise: NoiseConfig,
        lidar_spec: LidarSpec = LidarSpec(),
        cpr: int = 1920,
    ):
        self.scene = scene
        self.noise = noise
        self.spec = lidar_spec
        self.cpr = cpr
        root = NoiseStream(noise.seed)
        self.lidar_stream = root.spawn("lidar")
        self.ips_stream = root.spawn("ips")
        self._segments = _segment_array(scene)
        self._scans_emitted = 0

    def set_scene(self, scene: Scene):
        self.scene = scene
        self._segments = _segment_array(scene)

    def lidar_due(self, sim_time: float) -> bool:
        return sim_time + 1e-9 >= (self._scans_emitted + 1) / self.spec.rate

    def frame(
        self,
        prev: VehicleState,
        curr: VehicleState,
        cmd_echo: tuple[float, float],
        dt: float,
    ) -> SensorFrame:
        scan = None
        if self.lidar_due(curr.sim_time):
            scan = lidar_scan(
                self.scene,
                (curr.x, curr.y, curr.yaw),
                self.spec,
                self.noise.lidar_sigma,
                self.lidar_stream,
                timestamp=curr.sim_time,
                segments=self._segments,
            )
            self._scans_emitted += 1
        yaw, yaw_rate, accel = imu_read(prev, curr, dt)
        return SensorFrame(
            throttle_fb=cmd_echo[0],
            steering_fb=cmd_echo[1],
            encoder_ticks=(
                encoder_read(curr.wheels[RL].cumulative_angle, self.cpr),
                encoder_read(curr.wheels[RR].cumulative_angle, self.cpr),
            ),
            ips_pose=ips_read(curr, self.noise.ips_sigma, self.ips_stream),
            imu_yaw=yaw,
            imu_yaw_rate=yaw_rate,
            imu_accel=accel,
            lidar=scan,
            sim_time=curr.sim_time,
        )
