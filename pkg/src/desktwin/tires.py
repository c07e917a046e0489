"""Tire slip model: two-piece cubic slip/force spline and slip kinematics.

The force curve maps dimensionless slip S to a normalized force F (scaled
by the wheel's normal load).  It is built from three anchor points:

    (S_0, F_0)  origin of the curve
    (S_e, F_e)  extremum (peak grip), zero slope
    (S_a, F_a)  asymptote (post-peak plateau), zero slope

Piece 0 spans [S_0, S_e] with a configurable slope at S_0 and zero slope
at S_e; piece 1 spans [S_e, S_a] with zero slope at both ends.  Beyond
S_a the force saturates at F_a.  Negative slip uses the odd extension
F(-S) = -F(S).
"""

import math
from dataclasses import dataclass


def _hermite_coeffs(x0, y0, d0, x1, y1, d1):
    """Power-basis coefficients (a, b, c, d) of the cubic matching value
    and slope at both ends: a*x^3 + b*x^2 + c*x + d."""
    h = x1 - x0
    # coefficients in the shifted variable t = x - x0
    c0 = y0
    c1 = d0
    c2 = (3.0 * (y1 - y0) / h - 2.0 * d0 - d1) / h
    c3 = (2.0 * (y0 - y1) / h + d0 + d1) / (h * h)
    # expand (t = x - x0) back to the power basis in x
    a = c3
    b = c2 - 3.0 * c3 * x0
    c = c1 - 2.0 * c2 * x0 + 3.0 * c3 * x0 * x0
    d = c0 - c1 * x0 + c2 * x0 * x0 - c3 * x0 * x0 * x0
    return (a, b, c, d)


@dataclass(frozen=True)
class FrictionCurve:
    """Two-piece cubic slip curve with saturation and odd symmetry."""

    anchors: tuple  # ((S_0, F_0), (S_e, F_e), (S_a, F_a))
    initial_slope: float
    coeffs0: tuple  # (a, b, c, d) on [S_0, S_e]
    coeffs1: tuple  # (a, b, c, d) on [S_e, S_a]

    @classmethod
    def fit(cls, anchors, initial_slope: float) -> "FrictionCurve":
        (s0, f0), (se, fe), (sa, fa) = anchors
        if not (s0 < se < sa):
            raise ValueError(
                f"friction anchors must satisfy S_0 < S_e < S_a, got {s0}, {se}, {sa}"
            )
        if s0 < 0.0:
            raise ValueError(f"friction anchor S_0 must be >= 0, got {s0}")
        if abs(fe) < abs(f0) or abs(fe) < abs(fa):
            raise ValueError("extremum force must dominate origin and asymptote forces")
        c0 = _hermite_coeffs(s0, f0, initial_slope, se, fe, 0.0)
        c1 = _hermite_coeffs(se, fe, 0.0, sa, fa, 0.0)
        return cls(tuple(tuple(a) for a in anchors), initial_slope, c0, c1)

    @classmethod
    def default(cls) -> "FrictionCurve":
        return cls.fit(((0.0, 0.0), (0.2, 1.0), (0.8, 0.75)), 10.0)

    def __call__(self, slip: float) -> float:
        s = abs(slip)
        sign = 1.0 if slip >= 0.0 else -1.0
        (s0, _), (se, _), (sa, fa) = self.anchors
        if s >= sa:
            return sign * fa
        a, b, c, d = self.coeffs0 if s < se else self.coeffs1
        return sign * (((a * s + b) * s + c) * s + d)

    def slope(self, slip: float) -> float:
        """dF/dS; even by the odd symmetry of F."""
        s = abs(slip)
        (s0, _), (se, _), (sa, _) = self.anchors
        if s >= sa:
            return 0.0
        a, b, c, _ = self.coeffs0 if s < se else self.coeffs1
        return (3.0 * a * s + 2.0 * b) * s + c

    def secant_slope(self, slip: float) -> float:
        """F(S)/S through the origin; stays positive into saturation.

        This is the stabilizing stiffness used by the implicit slip
        updates: for a concave rising branch it upper-bounds the local
        slope, and unlike the local slope it does not vanish past the
        asymptote point.
        """
        s = abs(slip)
        if s < 1e-9:
            return max(self.slope(0.0), 0.0)
        return max(self(s) / s, 0.0)


def compute_slip(
    wheel_speed: float, v_x_tire: float, v_y_tire: float, eps: float = 1e-3
) -> tuple[float, float]:
    """Longitudinal and lateral slip of one tire.

    ``wheel_speed`` is the rim surface speed r*omega; velocities are in
    the tire frame (rotated by the steer angle for front wheels).  The
    denominator is floored at ``eps`` so standstill stays well defined.
    """
    denom = max(abs(v_x_tire), eps)
    s_x = (wheel_speed - v_x_tire) / denom
    s_y = v_y_tire / denom
    return (s_x, s_y)


def tire_force(
    curve_x: FrictionCurve,
    curve_y: FrictionCurve,
    s_x: float,
    s_y: float,
    normal_load: float,
) -> tuple[float, float]:
    """Tire-frame force components (F_tx, F_ty) in newtons.

    The lateral force opposes sideslip, hence the minus sign.  An
    airborne wheel (zero load) transmits nothing.
    """
    if normal_load <= 0.0:
        return (0.0, 0.0)
    return (normal_load * curve_x(s_x), -normal_load * curve_y(s_y))
