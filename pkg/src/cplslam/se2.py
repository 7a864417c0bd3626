"""Complex-number algebra for planar rotations and rigid motions.

A rotation is a unit complex number ``z = cos(theta) + i sin(theta)`` and a
pose is the pair ``(t, z)`` with ``t`` a complex translation.  The group
product is ``(t, z) * (t', z') = (z t' + t, z z')``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

UNIT_TOL = 1e-12


@dataclass(frozen=True)
class UnitComplex:
    """A unit complex number representing an element of SO(2)."""

    re: float = 1.0
    im: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.re) and math.isfinite(self.im)):
            raise ValueError("UnitComplex components must be finite")
        norm = math.hypot(self.re, self.im)
        if norm == 0.0:
            raise ValueError("cannot normalize a zero complex number")
        if abs(norm - 1.0) > UNIT_TOL:
            object.__setattr__(self, "re", self.re / norm)
            object.__setattr__(self, "im", self.im / norm)

    @classmethod
    def from_complex(cls, value: complex) -> "UnitComplex":
        value = complex(value)
        return cls(value.real, value.imag)

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)

    @property
    def angle(self) -> float:
        """Angle in (-pi, pi]."""
        theta = math.atan2(self.im, self.re)
        return math.pi if theta == -math.pi else theta

    def conj(self) -> "UnitComplex":
        return UnitComplex(self.re, -self.im)

    def __mul__(self, other: "UnitComplex") -> "UnitComplex":
        if not isinstance(other, UnitComplex):
            return NotImplemented
        return UnitComplex.from_complex(self.value * other.value)

    def matrix(self) -> np.ndarray:
        return np.array([[self.re, -self.im], [self.im, self.re]])


IDENTITY_ROTATION = UnitComplex(1.0, 0.0)


def from_angle(theta: float) -> UnitComplex:
    """Unit complex number ``exp(i theta)``."""
    theta = float(theta)
    if not math.isfinite(theta):
        raise ValueError(f"angle must be finite, got {theta}")
    return UnitComplex(math.cos(theta), math.sin(theta))


def from_matrix(R: np.ndarray) -> UnitComplex:
    """Unit complex number for a 2x2 rotation matrix."""
    R = np.asarray(R, dtype=float)
    if R.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {R.shape}")
    return UnitComplex(0.5 * (R[0, 0] + R[1, 1]), 0.5 * (R[1, 0] - R[0, 1]))


@dataclass(frozen=True)
class PlanarPose:
    """Element of SE(2) stored as a (translation, rotation) pair of complex numbers."""

    translation: complex = 0j
    rotation: UnitComplex = IDENTITY_ROTATION

    def __post_init__(self):
        object.__setattr__(self, "translation", complex(self.translation))
        if not isinstance(self.rotation, UnitComplex):
            object.__setattr__(self, "rotation", UnitComplex.from_complex(self.rotation))

    @classmethod
    def from_xytheta(cls, x: float, y: float, theta: float) -> "PlanarPose":
        return cls(complex(x, y), from_angle(theta))

    @property
    def x(self) -> float:
        return self.translation.real

    @property
    def y(self) -> float:
        return self.translation.imag

    @property
    def theta(self) -> float:
        return self.rotation.angle

    def matrix(self) -> np.ndarray:
        """3x3 homogeneous matrix."""
        T = np.eye(3)
        T[:2, :2] = self.rotation.matrix()
        T[0, 2] = self.translation.real
        T[1, 2] = self.translation.imag
        return T

    @classmethod
    def from_matrix(cls, T: np.ndarray) -> "PlanarPose":
        T = np.asarray(T, dtype=float)
        return cls(complex(T[0, 2], T[1, 2]), from_matrix(T[:2, :2]))

    def __matmul__(self, other: "PlanarPose") -> "PlanarPose":
        return compose(self, other)


IDENTITY_POSE = PlanarPose()


def compose(a: PlanarPose, b: PlanarPose) -> PlanarPose:
    """Group product ``a * b = (z_a t_b + t_a, z_a z_b)``."""
    za = a.rotation.value
    return PlanarPose(za * b.translation + a.translation, a.rotation * b.rotation)


def inverse(a: PlanarPose) -> PlanarPose:
    zc = a.rotation.conj()
    return PlanarPose(-zc.value * a.translation, zc)


def act(a: PlanarPose, p: complex) -> complex:
    """Apply the rigid motion to a point: ``z p + t``."""
    p = complex(p)
    if not (math.isfinite(p.real) and math.isfinite(p.imag)):
        raise ValueError("point must be finite")
    return a.rotation.value * p + a.translation


def relative(a: PlanarPose, b: PlanarPose) -> PlanarPose:
    """``a^{-1} * b``, the pose of ``b`` expressed in the frame of ``a``."""
    return compose(inverse(a), b)


def normalize(z: np.ndarray) -> np.ndarray:
    """Project an array of nonzero complex numbers onto the unit circle."""
    z = np.asarray(z, dtype=complex)
    mag = np.abs(z)
    if np.any(mag == 0):
        raise ValueError("cannot normalize zero entries")
    return z / mag
