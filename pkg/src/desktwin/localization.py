"""Pose estimation: wheel/IMU odometry and adaptive particle filtering.

The measurement model is a likelihood field: scan endpoints are scored by
their distance to the nearest occupied cell of the static map, via a
precomputed Euclidean distance transform.  The particle population is
resized between configured bounds in proportion to weight dispersion
(1 - ESS/N): degenerate weights ask for more hypotheses, agreeing
weights allow fewer.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .mapping import OccupancyGrid, free_cells
from .rng import NoiseStream
from .sensors import LidarScan, SensorFrame
from .util import wrap_angle


def odometry_update(
    prev: SensorFrame, curr: SensorFrame, wheel_radius: float, cpr: int = 1920
) -> tuple[float, float, float]:
    """Body-frame pose increment between two sensor frames.

    Distance comes from the mean rear-encoder tick delta, heading change
    from the IMU; the pair composes as a unicycle arc (midpoint heading).
    """
    d_ticks = (
        (curr.encoder_ticks[0] - prev.encoder_ticks[0])
        + (curr.encoder_ticks[1] - prev.encoder_ticks[1])
    ) / 2.0
    dist = d_ticks * math.tau * wheel_radius / cpr
    dyaw = wrap_angle(curr.imu_yaw - prev.imu_yaw)
    return (dist * math.cos(dyaw / 2.0), dist * math.sin(dyaw / 2.0), dyaw)


@dataclass
class MclConfig:
    min_particles: int = 100
    max_particles: int = 2000
    alpha_trans: float = 0.15  # motion jitter per meter travelled
    alpha_rot: float = 0.2  # motion jitter per radian turned
    floor_trans: float = 0.002  # m, jitter floor per update
    floor_rot: float = 0.01  # rad
    sigma_hit: float = 0.05  # m, likelihood field width
    floor_prob: float = 0.05  # uniform mixing floor
    beam_step: int = 10  # use every beam_step-th beam
    resample_ratio: float = 0.5  # resample when ESS < ratio * N
    # Neighboring beams are spatially correlated, so the independent-beam
    # product overstates the evidence; divide the log-likelihood by this
    # factor to keep secondary hypotheses alive during global init.
    beam_correlation_discount: float = 6.0
    # Fraction of the cloud's position/heading spread mixed into the
    # per-update jitter: a wide (searching) cloud explores, a converged
    # cloud only tracks.
    spread_jitter_frac: float = 0.15


@dataclass
class ParticleSet:
    poses: np.ndarray  # (N, 3)
    weights: np.ndarray  # (N,), normalized

    @property
    def count(self) -> int:
        return len(self.weights)

    @classmethod
    def uniform_over_free_space(
        cls, grid: OccupancyGrid, n: int, stream: NoiseStream
    ) -> "ParticleSet":
        cells = free_cells(grid)
        if len(cells) == 0:
            raise ValueError("grid has no free space to initialize particles")
        idx = (stream.uniforms(n) * len(cells)).astype(int)
        jitter = stream.uniforms(2 * n, -0.5, 0.5).reshape(n, 2) * grid.resolution
        xs = grid.origin[0] + (cells[idx, 0] + 0.5) * grid.resolution + jitter[:, 0]
        ys = grid.origin[1] + (cells[idx, 1] + 0.5) * grid.resolution + jitter[:, 1]
        yaws = stream.uniforms(n, -math.pi, math.pi)
        poses = np.stack([xs, ys, yaws], axis=1)
        return cls(poses, np.full(n, 1.0 / n))

    def estimate(self) -> tuple[float, float, float]:
        """Weighted mean position and circular-mean heading."""
        w = self.weights
        x = float(np.dot(w, self.poses[:, 0]))
        y = float(np.dot(w, self.poses[:, 1]))
        yaw = math.atan2(
            float(np.dot(w, np.sin(self.poses[:, 2]))),
            float(np.dot(w, np.cos(self.poses[:, 2]))),
        )
        return (x, y, yaw)

    def position_std(self) -> float:
        w = self.weights
        mx = np.dot(w, self.poses[:, 0])
        my = np.dot(w, self.poses[:, 1])
        var = np.dot(w, (self.poses[:, 0] - mx) ** 2) + np.dot(
            w, (self.poses[:, 1] - my) ** 2
        )
        return float(math.sqrt(max(var, 0.0)))

    def heading_std(self) -> float:
        """Circular standard deviation of the heading."""
        w = self.weights
        r = math.hypot(
            float(np.dot(w, np.cos(self.poses[:, 2]))),
            float(np.dot(w, np.sin(self.poses[:, 2]))),
        )
        r = min(max(r, 1e-12), 1.0)
        return math.sqrt(-2.0 * math.log(r))


class LikelihoodField:
    """Distance transform of the occupied cells of a static map."""

    def __init__(self, grid: OccupancyGrid, cfg: MclConfig):
        self.grid = grid
        self.cfg = cfg
        occ = grid.occupied_mask()
        if occ.any():
            dist_cells = ndimage.distance_transform_edt(~occ)
        else:
            dist_cells = np.full(occ.shape, 1e3)
        self.distance = dist_cells * grid.resolution  # meters
        self._inv2s2 = 1.0 / (2.0 * cfg.sigma_hit**2)

    def log_likelihood(self, poses: np.ndarray, scan: LidarScan) -> np.ndarray:
        """Per-pose log-likelihood of the decimated scan."""
        cfg = self.cfg
        ranges = scan.ranges[:: cfg.beam_step]
        bearings = scan.angle_min + np.arange(len(scan.ranges))[:: cfg.beam_step] * (
            scan.angle_increment
        )
        ok = np.isfinite(ranges)
        ranges, bearings = ranges[ok], bearings[ok]
        if len(ranges) == 0:
            return np.zeros(len(poses))
        ang = poses[:, 2:3] + bearings[None, :]  # (N, B)
        ex = poses[:, 0:1] + ranges[None, :] * np.cos(ang)
        ey = poses[:, 1:2] + ranges[None, :] * np.sin(ang)
        g = self.grid
        ix = np.floor((ex - g.origin[0]) / g.resolution).astype(int)
        iy = np.floor((ey - g.origin[1]) / g.resolution).astype(int)
        inside = (ix >= 0) & (ix < g.width) & (iy >= 0) & (iy < g.height)
        d = np.where(inside, self.distance[np.clip(iy, 0, g.height - 1), np.clip(ix, 0, g.width - 1)], 1e3)
        p = np.exp(-(d * d) * self._inv2s2) + cfg.floor_prob
        return np.log(p).sum(axis=1)


def low_variance_resample(
    particles: ParticleSet, target_n: int, u0: float
) -> ParticleSet:
    """Systematic resampling to exactly target_n equally-weighted particles."""
    n = particles.count
    positions = (u0 + np.arange(target_n)) / target_n
    cumulative = np.cumsum(particles.weights)
    cumulative[-1] = 1.0
    idx = np.searchsorted(cumulative, positions)
    idx = np.clip(idx, 0, n - 1)
    return ParticleSet(particles.poses[idx].copy(), np.full(target_n, 1.0 / target_n))


@dataclass
class MclResult:
    estimate: tuple[float, float, float]
    resampled: bool
    ess: float
    recovered: bool = False


def mcl_update(
    particles: ParticleSet,
    odom_delta: tuple[float, float, float],
    scan: LidarScan,
    field_model: LikelihoodField,
    cfg: MclConfig,
    stream: NoiseStream,
) -> tuple[ParticleSet, MclResult]:
    """One motion + measurement + (possible) resampling cycle."""
    n = particles.count
    dx, dy, dyaw = odom_delta
    dist = math.hypot(dx, dy)

    # motion jitter: odometry-scaled, plus spread-scaled exploration
    spread_t = cfg.spread_jitter_frac * particles.position_std()
    spread_r = cfg.spread_jitter_frac * particles.heading_std()
    sigma_t = (
        cfg.alpha_trans * dist + cfg.alpha_rot * abs(dyaw) * 0.1 + cfg.floor_trans + spread_t
    )
    sigma_r = (
        cfg.alpha_rot * abs(dyaw) + cfg.alpha_trans * dist * 0.5 + cfg.floor_rot + spread_r
    )
    noise = stream.normal(3 * n).reshape(n, 3)
    yaws = particles.poses[:, 2]
    cos_y, sin_y = np.cos(yaws), np.sin(yaws)
    poses = particles.poses.copy()
    poses[:, 0] += dx * cos_y - dy * sin_y + noise[:, 0] * sigma_t
    poses[:, 1] += dx * sin_y + dy * cos_y + noise[:, 1] * sigma_t
    poses[:, 2] = np.arctan2(
        np.sin(yaws + dyaw + noise[:, 2] * sigma_r),
        np.cos(yaws + dyaw + noise[:, 2] * sigma_r),
    )

    # measurement update in log space (correlation-discounted)
    log_w = np.log(particles.weights + 1e-300) + (
        field_model.log_likelihood(poses, scan) / cfg.beam_correlation_discount
    )
    log_w -= log_w.max()
    weights = np.exp(log_w)
    total = weights.sum()
    recovered = False
    if not np.isfinite(total) or total <= 0.0:
        # full underflow: reinitialize over free space
        fresh = ParticleSet.uniform_over_free_space(
            field_model.grid, cfg.max_particles, stream
        )
        result = MclResult(fresh.estimate(), resampled=True, ess=float("nan"), recovered=True)
        return fresh, result
    weights /= total

    updated = ParticleSet(poses, weights)
    ess = 1.0 / float(np.square(weights).sum())
    dispersion = 1.0 - ess / len(weights)  # 0 = uniform, -> 1 = degenerate
    target = int(
        round(cfg.min_particles + (cfg.max_particles - cfg.min_particles) * dispersion)
    )
    target = max(cfg.min_particles, min(cfg.max_particles, target))

    resample = ess < cfg.resample_ratio * len(weights) or abs(
        target - len(weights)
    ) > 0.1 * len(weights)
    if resample:
        updated = low_variance_resample(updated, target, stream.u01())
    return updated, MclResult(updated.estimate(), resample, ess, recovered)
