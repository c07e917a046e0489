"""Vehicle configuration: masses, geometry, actuators, validation.

All quantities are SI.  The body frame is x forward, y left, yaw CCW
(right-handed).  Positive steering means a left turn.
"""

import json
import math
from dataclasses import dataclass, field

from .tires import FrictionCurve
from .util import clamp


class ConfigError(ValueError):
    """Invalid configuration value; message names the offending key."""


@dataclass(frozen=True)
class PointMass:
    mass: float  # kg
    position: tuple[float, float, float]  # m, chassis frame


@dataclass(frozen=True)
class MassLayout:
    sprung_masses: tuple[PointMass, ...]
    total_mass: float = 0.0  # kg, sum of sprung masses

    def __post_init__(self):
        if not self.sprung_masses:
            raise ConfigError("mass_layout.sprung_masses: must be non-empty")
        for i, pm in enumerate(self.sprung_masses):
            if not (pm.mass > 0.0):
                raise ConfigError(
                    f"mass_layout.sprung_masses[{i}].mass: must be > 0, got {pm.mass}"
                )
        total = sum(pm.mass for pm in self.sprung_masses)
        if self.total_mass == 0.0:
            object.__setattr__(self, "total_mass", total)
        elif abs(self.total_mass - total) > 1e-9:
            raise ConfigError(
                f"mass_layout.total_mass: {self.total_mass} != sum of sprung masses {total}"
            )


def center_of_mass(layout: MassLayout) -> tuple[float, float, float]:
    """Mass-weighted mean position of the sprung masses."""
    m = layout.total_mass
    cx = sum(pm.mass * pm.position[0] for pm in layout.sprung_masses) / m
    cy = sum(pm.mass * pm.position[1] for pm in layout.sprung_masses) / m
    cz = sum(pm.mass * pm.position[2] for pm in layout.sprung_masses) / m
    return (cx, cy, cz)


@dataclass(frozen=True)
class AckermannGeometry:
    wheelbase: float = 0.1725  # m
    track: float = 0.135  # m
    max_steer: float = math.pi / 6  # rad, actuator saturation

    def __post_init__(self):
        if not (self.wheelbase > 0):
            raise ConfigError(f"geometry.wheelbase: must be > 0, got {self.wheelbase}")
        if not (self.track > 0):
            raise ConfigError(f"geometry.track: must be > 0, got {self.track}")
        if not (0 < self.max_steer < math.pi / 2):
            raise ConfigError(
                f"geometry.max_steer: must be in (0, pi/2), got {self.max_steer}"
            )


@dataclass(frozen=True)
class ActuatorConfig:
    max_drive_speed: float = 0.26  # m/s, top speed at full throttle
    max_drive_torque: float = 0.02  # N*m per driven wheel
    brake_torque: float = 0.02  # N*m, idle holding torque magnitude
    drive_gain: float = 0.1  # N*m*s/rad, wheel-speed tracking gain
    spin_damping: float = 2e-5  # N*m*s/rad, rolling-loss damping
    steer_inertia: float = 1e-4  # kg*m^2, steering mechanism
    max_steer_rate: float = 0.42  # rad/s, steering slew limit
    drive_wheel_inertia: float = 0.0  # kg*m^2; 0 = derive as m*r^2/2

    def __post_init__(self):
        for key in (
            "max_drive_speed",
            "max_drive_torque",
            "brake_torque",
            "drive_gain",
            "spin_damping",
            "steer_inertia",
            "max_steer_rate",
        ):
            if not (getattr(self, key) > 0):
                raise ConfigError(f"actuator.{key}: must be > 0, got {getattr(self, key)}")


@dataclass(frozen=True)
class SuspensionParams:
    spring_k: float = 500.0  # N/m per corner
    damping_b: float = 8.0  # N*s/m per corner
    travel_limit: float = 0.01  # m, |deflection| clamp about equilibrium
    wheel_mass: float = 0.05  # kg per wheel

    def __post_init__(self):
        if not (self.spring_k > 0):
            raise ConfigError(f"suspension.spring_k: must be > 0, got {self.spring_k}")
        if self.damping_b < 0:
            raise ConfigError(f"suspension.damping_b: must be >= 0, got {self.damping_b}")
        if not (self.travel_limit > 0):
            raise ConfigError(
                f"suspension.travel_limit: must be > 0, got {self.travel_limit}"
            )
        if not (self.wheel_mass > 0):
            raise ConfigError(f"suspension.wheel_mass: must be > 0, got {self.wheel_mass}")


@dataclass(frozen=True)
class BodyParams:
    length: float = 0.25  # m, footprint for collision
    width: float = 0.15  # m
    yaw_inertia: float = 0.016  # kg*m^2

    def __post_init__(self):
        for key in ("length", "width", "yaw_inertia"):
            if not (getattr(self, key) > 0):
                raise ConfigError(f"body.{key}: must be > 0, got {getattr(self, key)}")


@dataclass(frozen=True)
class VehicleConfig:
    mass_layout: MassLayout
    geometry: AckermannGeometry = AckermannGeometry()
    actuator: ActuatorConfig = ActuatorConfig()
    suspension: SuspensionParams = SuspensionParams()
    body: BodyParams = BodyParams()
    wheel_radius: float = 0.0325  # m
    friction_x: FrictionCurve = None  # longitudinal slip curve
    friction_y: FrictionCurve = None  # lateral slip curve
    gravity: float = 9.81  # m/s^2
    slip_epsilon: float = 1e-3  # m/s, slip denominator floor
    encoder_cpr: int = 1920  # counts per wheel revolution

    # derived, filled in __post_init__
    wheel_positions: tuple = field(default=None, compare=False)
    corner_masses: tuple = field(default=None, compare=False)
    gross_mass: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if not (self.wheel_radius > 0):
            raise ConfigError(f"wheel.radius: must be > 0, got {self.wheel_radius}")
        if self.friction_x is None:
            object.__setattr__(self, "friction_x", FrictionCurve.default())
        if self.friction_y is None:
            object.__setattr__(self, "friction_y", FrictionCurve.default())
        if not (self.slip_epsilon > 0):
            raise ConfigError(f"slip_epsilon: must be > 0, got {self.slip_epsilon}")
        if self.encoder_cpr <= 0:
            raise ConfigError(f"encoder_cpr: must be > 0, got {self.encoder_cpr}")

        l, w = self.geometry.wheelbase, self.geometry.track
        # wheel order: FL, FR, RL, RR; positions about the sprung CoM
        com = center_of_mass(self.mass_layout)
        positions = (
            (l / 2 - com[0], w / 2 - com[1]),
            (l / 2 - com[0], -w / 2 - com[1]),
            (-l / 2 - com[0], w / 2 - com[1]),
            (-l / 2 - com[0], -w / 2 - com[1]),
        )
        object.__setattr__(self, "wheel_positions", positions)
        # Static corner shares of the sprung mass: bilinear split by CoM
        # position between the axles and between the track sides.
        x_f, x_r = positions[0][0], positions[2][0]
        y_l, y_r = positions[0][1], positions[1][1]
        a = clamp((0.0 - x_r) / (x_f - x_r), 0.0, 1.0)  # front share
        b = clamp((0.0 - y_r) / (y_l - y_r), 0.0, 1.0)  # left share
        m = self.mass_layout.total_mass
        corner = (m * a * b, m * a * (1 - b), m * (1 - a) * b, m * (1 - a) * (1 - b))
        object.__setattr__(self, "corner_masses", corner)
        object.__setattr__(
            self, "gross_mass", m + 4 * self.suspension.wheel_mass
        )

    @property
    def wheel_inertia(self) -> float:
        if self.actuator.drive_wheel_inertia > 0:
            return self.actuator.drive_wheel_inertia
        return 0.5 * self.suspension.wheel_mass * self.wheel_radius**2


def default_config_dict() -> dict:
    """The stock vehicle as a plain JSON-compatible dict."""
    return {
        "mass_layout": {
            "sprung_masses": [
                {"mass": 0.5, "position": [0.08625, 0.0675, 0.05]},
                {"mass": 0.5, "position": [0.08625, -0.0675, 0.05]},
                {"mass": 0.5, "position": [-0.08625, 0.0675, 0.05]},
                {"mass": 0.5, "position": [-0.08625, -0.0675, 0.05]},
            ]
        },
        "geometry": {"wheelbase": 0.1725, "track": 0.135, "max_steer": math.pi / 6},
        "actuator": {
            "max_drive_speed": 0.26,
            "max_drive_torque": 0.02,
            "brake_torque": 0.02,
            "drive_gain": 0.1,
            "spin_damping": 2e-5,
            "steer_inertia": 1e-4,
            "max_steer_rate": 0.42,
        },
        "suspension": {
            "spring_k": 500.0,
            "damping_b": 8.0,
            "travel_limit": 0.01,
            "wheel_mass": 0.05,
        },
        "body": {"length": 0.25, "width": 0.15, "yaw_inertia": 0.016},
        "wheel": {"radius": 0.0325},
        "friction_x": {"anchors": [[0.0, 0.0], [0.2, 1.0], [0.8, 0.75]], "initial_slope": 10.0},
        "friction_y": {"anchors": [[0.0, 0.0], [0.2, 1.0], [0.8, 0.75]], "initial_slope": 10.0},
        "gravity": 9.81,
        "slip_epsilon": 1e-3,
        "encoder_cpr": 1920,
    }


def _require(doc: dict, key: str, kind, ctx: str):
    if key not in doc:
        raise ConfigError(f"{ctx}{key}: missing required key")
    val = doc[key]
    if kind is float and isinstance(val, int):
        val = float(val)
    if not isinstance(val, kind):
        raise ConfigError(f"{ctx}{key}: expected {kind.__name__}, got {type(val).__name__}")
    return val


def config_from_dict(doc: dict) -> VehicleConfig:
    """Validate a JSON-style dict; raise ConfigError naming any bad key."""
    if not isinstance(doc, dict):
        raise ConfigError("vehicle config: top level must be an object")
    merged = default_config_dict()
    for section, value in doc.items():
        if section not in merged:
            raise ConfigError(f"{section}: unknown key")
        if isinstance(merged[section], dict):
            for k in value:
                if k not in merged[section]:
                    raise ConfigError(f"{section}.{k}: unknown key")
            merged[section].update(value)
        else:
            merged[section] = value

    ml = merged["mass_layout"]
    masses = []
    for i, entry in enumerate(ml.get("sprung_masses", [])):
        m = _require(entry, "mass", float, f"mass_layout.sprung_masses[{i}].")
        pos = _require(entry, "position", list, f"mass_layout.sprung_masses[{i}].")
        if len(pos) != 3:
            raise ConfigError(
                f"mass_layout.sprung_masses[{i}].position: expected 3 numbers"
            )
        masses.append(PointMass(m, tuple(float(p) for p in pos)))
    layout = MassLayout(tuple(masses), float(ml.get("total_mass", 0.0)))

    def curve(section: str) -> FrictionCurve:
        spec = merged[section]
        anchors = _require(spec, "anchors", list, f"{section}.")
        if len(anchors) != 3 or any(len(a) != 2 for a in anchors):
            raise ConfigError(f"{section}.anchors: expected three [slip, force] pairs")
        slope = _require(spec, "initial_slope", float, f"{section}.")
        try:
            return FrictionCurve.fit(
                tuple(tuple(float(v) for v in a) for a in anchors), slope
            )
        except ValueError as e:
            raise ConfigError(f"{section}: {e}") from e

    g = merged["geometry"]
    act = merged["actuator"]
    sus = merged["suspension"]
    body = merged["body"]
    return VehicleConfig(
        mass_layout=layout,
        geometry=AckermannGeometry(
            float(g["wheelbase"]), float(g["track"]), float(g["max_steer"])
        ),
        actuator=ActuatorConfig(
            max_drive_speed=float(act["max_drive_speed"]),
            max_drive_torque=float(act["max_drive_torque"]),
            brake_torque=float(act["brake_torque"]),
            drive_gain=float(act["drive_gain"]),
            spin_damping=float(act["spin_damping"]),
            steer_inertia=float(act["steer_inertia"]),
            max_steer_rate=float(act["max_steer_rate"]),
            drive_wheel_inertia=float(act.get("drive_wheel_inertia", 0.0)),
        ),
        suspension=SuspensionParams(
            spring_k=float(sus["spring_k"]),
            damping_b=float(sus["damping_b"]),
            travel_limit=float(sus["travel_limit"]),
            wheel_mass=float(sus["wheel_mass"]),
        ),
        body=BodyParams(float(body["length"]), float(body["width"]), float(body["yaw_inertia"])),
        wheel_radius=float(_require(merged["wheel"], "radius", float, "wheel.")),
        friction_x=curve("friction_x"),
        friction_y=curve("friction_y"),
        gravity=float(merged["gravity"]),
        slip_epsilon=float(merged["slip_epsilon"]),
        encoder_cpr=int(merged["encoder_cpr"]),
    )


def load_vehicle_config(path: str) -> VehicleConfig:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    return config_from_dict(doc)


def default_config() -> VehicleConfig:
    return config_from_dict({})
