"""Quasi-3D vehicle dynamics with fixed-step integration.

The chassis is a planar rigid body (x, y, yaw) carrying four independent
vertical suspension/wheel oscillators whose instantaneous loads feed the
tire model.  Corner heights are stored as offsets from the static
equilibrium, so a settled vehicle has all-zero suspension state and the
sprung weight preload enters through the equilibrium shift.

Integration is fixed-step semi-implicit Euler.  The tire slip terms are
stiff at millisecond steps (the slip denominator is floored at ~1e-3
m/s), so the wheel-spin update and the lateral/yaw velocity update use a
linearized-implicit step: only the dissipative part of the tire slope is
treated implicitly, which keeps the update unconditionally stable while
leaving slow dynamics untouched.  Everything is deterministic: identical
inputs give bit-identical outputs.
"""

import math
from dataclasses import dataclass, replace

from .config import ActuatorConfig, AckermannGeometry, VehicleConfig
from .tires import compute_slip, tire_force
from .util import clamp, wrap_angle

# wheel indices
FL, FR, RL, RR = 0, 1, 2, 3
DRIVEN = (RL, RR)  # rear-wheel drive


class IntegrationFault(RuntimeError):
    """The integrator produced a non-finite state; never silent."""


@dataclass(frozen=True)
class SuspensionCorner:
    spring_k: float  # N/m
    damping_b: float  # N*s/m
    sprung_height: float = 0.0  # m, offset from equilibrium
    sprung_rate: float = 0.0  # m/s
    wheel_height: float = 0.0  # m, offset from equilibrium (ground contact at 0)
    wheel_rate: float = 0.0  # m/s
    wheel_mass: float = 0.05  # kg
    travel_limit: float = 0.01  # m


@dataclass(frozen=True)
class WheelState:
    radius: float  # m
    angular_velocity: float = 0.0  # rad/s
    angular_acceleration: float = 0.0  # rad/s^2
    cumulative_angle: float = 0.0  # rad
    steer_angle: float = 0.0  # rad, per-wheel linkage angle
    slip_long: float = 0.0
    slip_lat: float = 0.0
    normal_load: float = 0.0  # N


@dataclass(frozen=True)
class VehicleState:
    x: float = 0.0  # m
    y: float = 0.0  # m
    yaw: float = 0.0  # rad
    v_x: float = 0.0  # m/s, body frame longitudinal
    v_y: float = 0.0  # m/s, body frame lateral (left positive)
    yaw_rate: float = 0.0  # rad/s
    steer_angle: float = 0.0  # rad, central steering angle (actuator state)
    corners: tuple = ()  # four SuspensionCorner
    wheels: tuple = ()  # four WheelState
    throttle: float = 0.0  # last command applied to the integrator
    steering: float = 0.0
    sim_time: float = 0.0  # s

    @property
    def pose(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.yaw)


def initial_state(cfg: VehicleConfig, pose=(0.0, 0.0, 0.0)) -> VehicleState:
    """Vehicle at rest, suspension settled, wheels on the ground."""
    sus = cfg.suspension
    corners = tuple(
        SuspensionCorner(
            spring_k=sus.spring_k,
            damping_b=sus.damping_b,
            wheel_mass=sus.wheel_mass,
            travel_limit=sus.travel_limit,
        )
        for _ in range(4)
    )
    wheels = tuple(
        WheelState(
            radius=cfg.wheel_radius,
            normal_load=(cfg.corner_masses[i] + sus.wheel_mass) * cfg.gravity,
        )
        for i in range(4)
    )
    return VehicleState(
        x=pose[0], y=pose[1], yaw=pose[2], corners=corners, wheels=wheels
    )


def suspension_force(corner: SuspensionCorner) -> float:
    """Suspension restoring expression B*(Zdot - zdot) + K*(Z - z).

    Heights are offsets from static equilibrium, so a settled corner
    returns zero and the sprung-mass vertical dynamics read
    M * Zddot = -suspension_force(corner).
    """
    return corner.damping_b * (corner.sprung_rate - corner.wheel_rate) + (
        corner.spring_k * (corner.sprung_height - corner.wheel_height)
    )


def wheel_vertical_accel(corner: SuspensionCorner, gravity: float = 9.81) -> float:
    """Vertical acceleration of the unsprung wheel mass.

    Solves m*zddot = -B*(zdot - Zdot) - K*(z - Z) - m*g + ground force,
    with the ground a unilateral constraint at zero wheel height: while
    the contact force needed to hold the wheel is non-negative the wheel
    stays put, otherwise it lifts off and falls freely.
    """
    m = corner.wheel_mass
    dyn = -corner.damping_b * (corner.wheel_rate - corner.sprung_rate) - (
        corner.spring_k * (corner.wheel_height - corner.sprung_height)
    )
    if corner.wheel_height > 0.0:  # airborne
        return dyn / m - gravity
    needed = m * gravity - dyn  # contact force that holds the wheel still
    if needed >= 0.0:
        return 0.0
    return dyn / m - gravity  # spring overpowers gravity: liftoff


def ackermann_angles(
    geom: AckermannGeometry, steer: float
) -> tuple[float, float]:
    """Per-wheel linkage angles (delta_l, delta_r) for a commanded angle.

    delta_l = atan(2*l*tan(d) / (2*l + w*tan(d)))
    delta_r = atan(2*l*tan(d) / (2*l - w*tan(d)))

    The input is clamped to the actuator saturation.  Note the pair is
    antisymmetric with a swap: angles(-d) == (-delta_r(d), -delta_l(d)).
    """
    d = clamp(steer, -geom.max_steer, geom.max_steer)
    t = math.tan(d)
    l2 = 2.0 * geom.wheelbase
    num = l2 * t
    left = math.atan(num / (l2 + geom.track * t))
    right = math.atan(num / (l2 - geom.track * t))
    return (left, right)


def drive_torque(cmd: float, wheel: WheelState, cfg: ActuatorConfig) -> float:
    """Proportional wheel-speed tracking torque with saturation.

    At zero command the same law acts as the idle holding torque: it
    opposes rotation with magnitude capped at the braking torque.
    """
    cmd = clamp(cmd, -1.0, 1.0)
    target = cmd * cfg.max_drive_speed / wheel.radius  # rad/s
    limit = cfg.max_drive_torque if cmd != 0.0 else cfg.brake_torque
    return clamp(cfg.drive_gain * (target - wheel.angular_velocity), -limit, limit)


def steer_dynamics(cmd: float, delta: float, cfg, dt: float) -> float:
    """Rate-limited first-order steering response, saturated at max_steer."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    geom = cfg.geometry if isinstance(cfg, VehicleConfig) else cfg[0]
    act = cfg.actuator if isinstance(cfg, VehicleConfig) else cfg[1]
    target = clamp(cmd, -1.0, 1.0) * geom.max_steer
    step = clamp(target - delta, -act.max_steer_rate * dt, act.max_steer_rate * dt)
    return clamp(delta + step, -geom.max_steer, geom.max_steer)


def _solve_wheel_spin(
    omega: float,
    u: float,
    normal: float,
    cmd: float,
    driven: bool,
    cfg: VehicleConfig,
    dt: float,
) -> tuple[float, float, float]:
    """One stabilized spin step; returns (omega', slip_x, F_tx).

    The tire reaction is linearized about the current slip and its
    dissipative part (non-negative curve slope) is treated implicitly so
    the stiff slip mode cannot destabilize the fixed step.
    """
    act = cfg.actuator
    r = cfg.wheel_radius
    inertia = cfg.wheel_inertia
    eps = cfg.slip_epsilon
    denom = max(abs(u), eps)

    slip = (r * omega - u) / denom
    f_tx = normal * cfg.friction_x(slip)

    tau = 0.0
    gain_active = 0.0
    if driven:
        target = cmd * act.max_drive_speed / r
        limit = act.max_drive_torque if cmd != 0.0 else act.brake_torque
        raw = act.drive_gain * (target - omega)
        tau = clamp(raw, -limit, limit)
        if abs(raw) < limit:
            gain_active = act.drive_gain

    accel = (tau - r * f_tx - act.spin_damping * omega) / inertia
    stiffness = (
        gain_active
        + act.spin_damping
        + r * r * normal * cfg.friction_x.secant_slope(slip) / denom
    ) / inertia
    omega_new = omega + dt * accel / (1.0 + dt * stiffness)

    slip_new = (r * omega_new - u) / denom
    f_tx_new = normal * cfg.friction_x(slip_new)
    return (omega_new, slip_new, f_tx_new)


def _corner_step(
    corner: SuspensionCorner, corner_mass: float, gravity: float, dt: float
) -> tuple[SuspensionCorner, float]:
    """Advance one corner's vertical state; returns (corner', normal load)."""
    m = corner.wheel_mass
    susp = suspension_force(corner)
    # absolute spring+damper force on the sprung corner (preload included)
    f_sd = corner_mass * gravity - susp

    zs_rate = corner.sprung_rate + dt * (-susp / corner_mass)
    zs = corner.sprung_height + dt * zs_rate

    zw = corner.wheel_height
    zw_rate = corner.wheel_rate
    normal = 0.0
    if zw <= 0.0:
        normal = f_sd + m * gravity
        if normal >= 0.0:
            zw, zw_rate = 0.0, 0.0  # pinned on the ground
        else:
            normal = 0.0
    if normal == 0.0 and (zw > 0.0 or zw_rate != 0.0 or f_sd + m * gravity < 0.0):
        zw_rate = zw_rate + dt * (-f_sd / m - gravity)
        zw = zw + dt * zw_rate
        if zw <= 0.0:  # inelastic landing
            zw, zw_rate = 0.0, 0.0

    # travel stop: clamp deflection about equilibrium, kill relative rate
    d = zs - zw
    if d > corner.travel_limit:
        zs = zw + corner.travel_limit
        zs_rate = zw_rate
    elif d < -corner.travel_limit:
        zs = zw - corner.travel_limit
        zs_rate = zw_rate

    new = replace(
        corner,
        sprung_height=zs,
        sprung_rate=zs_rate,
        wheel_height=zw,
        wheel_rate=zw_rate,
    )
    return (new, max(0.0, normal))


def step(
    state: VehicleState, cmd: tuple[float, float], dt: float, cfg: VehicleConfig
) -> VehicleState:
    """Advance the vehicle by one fixed step.

    Order: steering actuator, per-corner vertical dynamics and normal
    loads, wheel spin with longitudinal tire forces, lateral/yaw solve,
    chassis velocities, pose.  dt must lie in (0, 0.01].
    """
    if not (0.0 < dt <= 0.01):
        raise ValueError(f"dt must be in (0, 0.01], got {dt}")
    if not _finite_state(state):
        raise IntegrationFault("non-finite state passed to step()")

    throttle = clamp(cmd[0], -1.0, 1.0)
    steering = clamp(cmd[1], -1.0, 1.0)
    act = cfg.actuator
    g = cfg.gravity

    delta = steer_dynamics(steering, state.steer_angle, cfg, dt)
    ack_l, ack_r = ackermann_angles(cfg.geometry, delta)
    # the formula pair is (outer, inner) for a left turn; assign per side
    wheel_steer = (ack_r, ack_l, 0.0, 0.0)

    corners = []
    normals = []
    for i in range(4):
        c, n = _corner_step(state.corners[i], cfg.corner_masses[i], g, dt)
        corners.append(c)
        normals.append(n)

    # tire-frame longitudinal velocities and wheel spin
    cos_d = [math.cos(a) for a in wheel_steer]
    sin_d = [math.sin(a) for a in wheel_steer]
    u = []
    new_omega = []
    f_long = []
    for i in range(4):
        px, py = cfg.wheel_positions[i]
        vbx = state.v_x - state.yaw_rate * py
        vby = state.v_y + state.yaw_rate * px
        ui = cos_d[i] * vbx + sin_d[i] * vby
        u.append(ui)
        om, _, ftx = _solve_wheel_spin(
            state.wheels[i].angular_velocity,
            ui,
            normals[i],
            throttle,
            i in DRIVEN,
            cfg,
            dt,
        )
        new_omega.append(om)
        f_long.append(ftx)

    # lateral/yaw implicit solve on (v_y, yaw_rate)
    eps = cfg.slip_epsilon
    m_tot = cfg.gross_mass
    i_z = cfg.body.yaw_inertia
    curve_y = cfg.friction_y

    def lateral_forces(vy: float, r: float):
        fbx_sum = fby_sum = torque = 0.0
        per_wheel = []
        for i in range(4):
            px, py = cfg.wheel_positions[i]
            vbx = state.v_x - r * py
            vby = vy + r * px
            w = -sin_d[i] * vbx + cos_d[i] * vby
            denom = max(abs(u[i]), eps)
            s_y = w / denom
            f_ty = -normals[i] * curve_y(s_y)
            fbx = cos_d[i] * f_long[i] - sin_d[i] * f_ty
            fby = sin_d[i] * f_long[i] + cos_d[i] * f_ty
            fbx_sum += fbx
            fby_sum += fby
            torque += px * fby - py * fbx
            per_wheel.append((s_y, f_ty))
        return fbx_sum, fby_sum, torque, per_wheel

    _, fby0, tz0, pw0 = lateral_forces(state.v_y, state.yaw_rate)
    h_vy = fby0 / m_tot - state.v_x * state.yaw_rate
    h_r = tz0 / i_z

    j00 = j01 = j10 = j11 = 0.0
    for i in range(4):
        px, py = cfg.wheel_positions[i]
        denom = max(abs(u[i]), eps)
        k = curve_y.secant_slope(pw0[i][0])
        gain = normals[i] * k / denom  # d(-F_ty)/dw, dissipative part
        dw_dvy = cos_d[i]
        dw_dr = sin_d[i] * py + cos_d[i] * px
        # dF_by/dw = -cos_d*gain ; d(torque)/dw = -(px*cos_d + py*sin_d)*gain
        j00 += -cos_d[i] * gain * dw_dvy / m_tot
        j01 += -cos_d[i] * gain * dw_dr / m_tot
        lever = px * cos_d[i] + py * sin_d[i]
        j10 += -lever * gain * dw_dvy / i_z
        j11 += -lever * gain * dw_dr / i_z
    j01 += -state.v_x  # coriolis coupling

    a00 = 1.0 - dt * j00
    a01 = -dt * j01
    a10 = -dt * j10
    a11 = 1.0 - dt * j11
    det = a00 * a11 - a01 * a10
    dvy = dt * (a11 * h_vy - a01 * h_r) / det
    dr = dt * (-a10 * h_vy + a00 * h_r) / det
    v_y = state.v_y + dvy
    yaw_rate = state.yaw_rate + dr

    fbx_sum, _, _, per_wheel = lateral_forces(v_y, yaw_rate)
    v_x = state.v_x + dt * (fbx_sum / m_tot + v_y * yaw_rate)

    yaw = wrap_angle(state.yaw + dt * yaw_rate)
    cy, sy = math.cos(yaw), math.sin(yaw)
    x = state.x + dt * (v_x * cy - v_y * sy)
    y = state.y + dt * (v_x * sy + v_y * cy)

    wheels = []
    for i in range(4):
        old = state.wheels[i]
        om = new_omega[i]
        denom = max(abs(u[i]), eps)
        wheels.append(
            WheelState(
                radius=old.radius,
                angular_velocity=om,
                angular_acceleration=(om - old.angular_velocity) / dt,
                cumulative_angle=old.cumulative_angle + om * dt,
                steer_angle=wheel_steer[i],
                slip_long=(old.radius * om - u[i]) / denom,
                slip_lat=per_wheel[i][0],
                normal_load=normals[i],
            )
        )

    out = VehicleState(
        x=x,
        y=y,
        yaw=yaw,
        v_x=v_x,
        v_y=v_y,
        yaw_rate=yaw_rate,
        steer_angle=delta,
        corners=tuple(corners),
        wheels=tuple(wheels),
        throttle=throttle,
        steering=steering,
        sim_time=state.sim_time + dt,
    )
    if not _finite_state(out):
        raise IntegrationFault(
            f"integration produced a non-finite state at t={state.sim_time:.4f}"
        )
    return out


def _finite_state(s: VehicleState) -> bool:
    vals = [s.x, s.y, s.yaw, s.v_x, s.v_y, s.yaw_rate, s.steer_angle]
    for c in s.corners:
        vals += [c.sprung_height, c.sprung_rate, c.wheel_height, c.wheel_rate]
    for w in s.wheels:
        vals += [w.angular_velocity, w.cumulative_angle, w.normal_load]
    return all(math.isfinite(v) for v in vals)


def static_spring_forces(state: VehicleState, cfg: VehicleConfig) -> list[float]:
    """Per-corner absolute spring force K * compression (preload included)."""
    out = []
    for i, c in enumerate(state.corners):
        c_eq = cfg.corner_masses[i] * cfg.gravity / c.spring_k
        compression = c_eq - (c.sprung_height - c.wheel_height)
        out.append(c.spring_k * compression)
    return out


def mechanical_energy(state: VehicleState, cfg: VehicleConfig) -> float:
    """Total mechanical energy: kinetic + spring potential + gravity."""
    e = 0.5 * cfg.gross_mass * (state.v_x**2 + state.v_y**2)
    e += 0.5 * cfg.body.yaw_inertia * state.yaw_rate**2
    i_w = cfg.wheel_inertia
    for i in range(4):
        c = state.corners[i]
        m_c = cfg.corner_masses[i]
        e += 0.5 * m_c * c.sprung_rate**2 + 0.5 * c.wheel_mass * c.wheel_rate**2
        c_eq = m_c * cfg.gravity / c.spring_k
        compression = c_eq - (c.sprung_height - c.wheel_height)
        e += 0.5 * c.spring_k * compression**2
        e += cfg.gravity * (m_c * c.sprung_height + c.wheel_mass * c.wheel_height)
        e += 0.5 * i_w * state.wheels[i].angular_velocity ** 2
    return e
