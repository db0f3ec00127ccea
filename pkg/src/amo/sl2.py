"""SL(2,R) Moebius geometry on the upper half-plane.

Real unimodular 2x2 matrices act on H = {Im z > 0} by fractional linear
maps. The functional phi(z) = (1 + |z|^2) / (2 Im z) is half the squared
Hilbert-Schmidt norm of any matrix sending i to z; elliptic matrices
(|trace| < 2) have a unique fixed point in H. These are the building blocks
for the transfer-matrix and renormalization computations elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Mat2R",
    "HPoint",
    "EllipticData",
    "NotElliptic",
    "moebius_act",
    "phi",
    "hs_norm_sq",
    "elliptic_data",
    "transport_to",
    "hyperbolic_dist",
    "midpoint_triple",
]

_DET_TOL = 1e-9
_DRIFT_TOL = 1e-12
_PARABOLIC_GUARD = 1e-12


class NotElliptic(ValueError):
    """Raised when |trace| >= 2 and an elliptic fixed point is required."""


@dataclass(frozen=True)
class Mat2R:
    """Real 2x2 matrix of unit determinant."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if not abs(det - 1.0) <= _DET_TOL:
            raise ValueError(f"determinant {det!r} is not 1 within {_DET_TOL}")

    @classmethod
    def normalized(cls, a: float, b: float, c: float, d: float) -> "Mat2R":
        """Build from entries, dividing by sqrt(det) (det must be > 0)."""
        det = a * d - b * c
        if det <= 0.0:
            raise ValueError("cannot renormalize matrix with det <= 0")
        s = math.sqrt(det)
        return cls(a / s, b / s, c / s, d / s)

    @classmethod
    def identity(cls) -> "Mat2R":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def rotation(cls, turns: float) -> "Mat2R":
        """Rotation by `turns` of a full revolution; rotation(1/4) = [[0,-1],[1,0]]."""
        co = math.cos(2.0 * math.pi * turns)
        si = math.sin(2.0 * math.pi * turns)
        return cls(co, -si, si, co)

    @property
    def trace(self) -> float:
        return self.a + self.d

    def inverse(self) -> "Mat2R":
        return Mat2R(self.d, -self.b, -self.c, self.a)

    def __matmul__(self, other: "Mat2R") -> "Mat2R":
        a = self.a * other.a + self.b * other.c
        b = self.a * other.b + self.b * other.d
        c = self.c * other.a + self.d * other.c
        d = self.c * other.b + self.d * other.d
        det = a * d - b * c
        if abs(det - 1.0) > _DRIFT_TOL and det > 0.0:
            # keep long products unimodular; elliptic classification is
            # sensitive to determinant drift
            s = math.sqrt(det)
            a, b, c, d = a / s, b / s, c / s, d / s
        return Mat2R(a, b, c, d)

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])


@dataclass(frozen=True)
class HPoint:
    """Point z = x + iy of the upper half-plane (y > 0 strictly)."""

    x: float
    y: float

    def __post_init__(self):
        if not self.y > 0.0:
            raise ValueError(f"HPoint needs y > 0, got y={self.y!r}")

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)

    @classmethod
    def i(cls) -> "HPoint":
        return cls(0.0, 1.0)


@dataclass(frozen=True)
class EllipticData:
    """Rotation number (in turns), fixed point and orientation of an elliptic matrix."""

    rho: float
    fixed_point: HPoint
    epsilon: int


def moebius_act(m: Mat2R, z: HPoint) -> HPoint:
    """Apply (az+b)/(cz+d); preserves the upper half-plane."""
    den_re = m.c * z.x + m.d
    den_im = m.c * z.y
    den_sq = den_re * den_re + den_im * den_im
    num_re = m.a * z.x + m.b
    num_im = m.a * z.y
    x = (num_re * den_re + num_im * den_im) / den_sq
    # Im((az+b)/(cz+d)) = y * det / |cz+d|^2 and det = 1
    y = z.y / den_sq
    return HPoint(x, y)


def phi(z: HPoint) -> float:
    """(1 + |z|^2) / (2 Im z); >= 1 with equality only at i."""
    return (1.0 + z.x * z.x + z.y * z.y) / (2.0 * z.y)


def hs_norm_sq(m: Mat2R) -> float:
    """Squared Hilbert-Schmidt norm a^2+b^2+c^2+d^2; equals 2*phi(m.i)."""
    return m.a * m.a + m.b * m.b + m.c * m.c + m.d * m.d


def transport_to(z: HPoint) -> Mat2R:
    """The upper-triangular matrix sending i to z (fixed gauge choice)."""
    s = math.sqrt(z.y)
    return Mat2R(s, z.x / s, 0.0, 1.0 / s)


def hyperbolic_dist(z: HPoint, w: HPoint) -> float:
    """Hyperbolic metric on H normalized so that dist(a*i, i) = |ln a|."""
    dx = z.x - w.x
    dy = z.y - w.y
    t = (dx * dx + dy * dy) / (2.0 * z.y * w.y)
    return math.acosh(1.0 + t)


def elliptic_data(m: Mat2R) -> EllipticData:
    """Rotation number, fixed point and orientation of an elliptic matrix.

    The rotation number rho in (0, 1/2) satisfies trace = 2 cos(2 pi rho);
    epsilon = +-1 is the sign making B^-1 m B = R_{epsilon*rho} for the
    upper-triangular B sending i to the fixed point.
    """
    tr = m.trace
    if abs(tr) >= 2.0 - _PARABOLIC_GUARD:
        raise NotElliptic(f"|trace| = {abs(tr)!r} is not < 2")
    rho = math.acos(0.5 * tr) / (2.0 * math.pi)
    disc = math.sqrt(4.0 - tr * tr)
    # fixed point of the Moebius map: c z^2 + (d - a) z - b = 0; c != 0 for
    # any elliptic real unimodular matrix
    if m.c == 0.0:
        raise NotElliptic("triangular matrix cannot be elliptic")
    x = (m.a - m.d) / (2.0 * m.c)
    y = disc / (2.0 * m.c)
    if y < 0.0:
        y = -y
    # (1,0) entry of B^-1 m B equals c*y, so orientation is the sign of c
    eps = 1 if m.c > 0.0 else -1
    return EllipticData(rho=rho, fixed_point=HPoint(x, y), epsilon=eps)


def midpoint_triple(m: Mat2R, k: float):
    """Images of (ki, i/k, i) under m, plus phi(z1)+phi(z2).

    z3 = m.i is the hyperbolic midpoint of z1 = m.(ki) and z2 = m.(i/k);
    the returned sum equals (k + 1/k) * phi(z3) exactly, hence is at least
    2 * phi(z3).
    """
    if not k > 0.0:
        raise ValueError("k must be positive")
    z1 = moebius_act(m, HPoint(0.0, k))
    z2 = moebius_act(m, HPoint(0.0, 1.0 / k))
    z3 = moebius_act(m, HPoint.i())
    return z1, z2, z3, phi(z1) + phi(z2)
