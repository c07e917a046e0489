"""Behavioral-cloning data pipeline: featurize, record, balance, mirror.

Features are a decimated lidar scan (36 beams, no-returns mapped to the
maximum range, divided by the maximum range) plus the normalized forward
speed.  The same featurization function is used bit-exactly when
recording demonstrations and when driving with a trained model.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .rng import NoiseStream
from .sensors import SensorFrame

DATASET_FORMAT_VERSION = 1


@dataclass(frozen=True)
class FeatureConfig:
    beam_step: int = 10  # 360 -> 36 beams
    range_max: float = 12.0  # m
    max_speed: float = 0.26  # m/s

    @property
    def n_beams(self) -> int:
        return 360 // self.beam_step

    @property
    def length(self) -> int:
        return self.n_beams + 1


@dataclass(frozen=True)
class DatasetRow:
    features: tuple  # beam features + normalized speed
    label_steering: float
    label_throttle: float
    t: float = 0.0
    lap_id: int = 0


def featurize(ranges, v_x: float, cfg: FeatureConfig = FeatureConfig()) -> tuple:
    """Fixed decimation and normalization; pure and deterministic."""
    sub = np.asarray(ranges, dtype=float)[:: cfg.beam_step]
    sub = np.where(np.isfinite(sub), sub, cfg.range_max)
    feats = np.clip(sub / cfg.range_max, 0.0, 1.0)
    return tuple(feats) + (v_x / cfg.max_speed,)


def frame_speed(frame: SensorFrame) -> float:
    """Forward speed channel carried in the frame's extension field."""
    return float(frame.extra.get("v_x", 0.0))


def featurize_frame(frame: SensorFrame, cfg: FeatureConfig = FeatureConfig()) -> tuple:
    return featurize(frame.lidar.ranges, frame_speed(frame), cfg)


def record_row(
    frame: SensorFrame,
    cmd: tuple[float, float],
    cfg: FeatureConfig = FeatureConfig(),
    lap_id: int = 0,
) -> DatasetRow | None:
    """One labeled row, or None when the frame carries no scan."""
    if frame.lidar is None:
        return None
    return DatasetRow(
        features=featurize_frame(frame, cfg),
        label_steering=cmd[1],
        label_throttle=cmd[0],
        t=frame.sim_time,
        lap_id=lap_id,
    )


def balance_dataset(
    rows: list[DatasetRow], bins: int = 21, seed: int = 0
) -> list[DatasetRow]:
    """Subsample over-represented steering bins.

    A histogram of steering labels over uniform bins caps every bin at
    twice the median non-empty bin count; surplus rows are dropped by a
    seeded draw.  No non-empty bin is ever emptied.
    """
    if not rows:
        raise ValueError("cannot balance an empty dataset")
    labels = np.array([r.label_steering for r in rows])
    edges = np.linspace(-1.0, 1.0, bins + 1)
    idx = np.clip(np.digitize(labels, edges) - 1, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    nonzero = counts[counts > 0]
    cap = max(1, int(2 * np.median(nonzero)))
    stream = NoiseStream(seed, "balance")
    keep = np.ones(len(rows), dtype=bool)
    for b in range(bins):
        members = np.nonzero(idx == b)[0]
        if len(members) > cap:
            order = stream.shuffle_order(len(members))
            drop = members[order[cap:]]
            keep[drop] = False
    return [r for r, k in zip(rows, keep) if k]


def mirror_row(row: DatasetRow, cfg: FeatureConfig = FeatureConfig()) -> DatasetRow:
    """Reflect about the forward axis: beam k maps to beam (n - k) mod n,
    steering negates, throttle and speed stay."""
    n = cfg.n_beams
    beams = row.features[:n]
    mirrored = tuple(beams[(n - k) % n] for k in range(n))
    return DatasetRow(
        features=mirrored + row.features[n:],
        label_steering=-row.label_steering,
        label_throttle=row.label_throttle,
        t=row.t,
        lap_id=row.lap_id,
    )


def augment_mirror(
    rows: list[DatasetRow], cfg: FeatureConfig = FeatureConfig()
) -> list[DatasetRow]:
    """Append the mirrored copy right after each row (dataset doubles)."""
    out = []
    for r in rows:
        out.append(r)
        out.append(mirror_row(r, cfg))
    return out


# ---------------------------------------------------------------------------
# dataset files: JSONL with a header line and a trailing summary


def row_to_json(row: DatasetRow) -> dict:
    return {
        "features": list(row.features),
        "steering": row.label_steering,
        "throttle": row.label_throttle,
        "t": row.t,
        "lap_id": row.lap_id,
    }


def row_from_json(doc: dict) -> DatasetRow:
    return DatasetRow(
        features=tuple(doc["features"]),
        label_steering=float(doc["steering"]),
        label_throttle=float(doc["throttle"]),
        t=float(doc.get("t", 0.0)),
        lap_id=int(doc.get("lap_id", 0)),
    )


def save_dataset(path: str, rows: list[DatasetRow], meta: dict | None = None):
    with open(path, "w") as f:
        header = {"type": "header", "format_version": DATASET_FORMAT_VERSION}
        header.update(meta or {})
        f.write(json.dumps(header) + "\n")
        for r in rows:
            f.write(json.dumps(row_to_json(r)) + "\n")
        f.write(json.dumps({"type": "summary", "rows": len(rows)}) + "\n")


def load_dataset(path: str) -> list[DatasetRow]:
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            if doc.get("type") in ("header", "summary"):
                continue
            rows.append(row_from_json(doc))
    return rows
