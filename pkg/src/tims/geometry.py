"""3D vector type shared by every subsystem.

Components are plain Python floats so that message payloads serialize
exactly and replayed sessions stay bit-identical. Frame (leader mm vs
follower/world um) is carried by context, never mixed inside one value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class NonFiniteError(ValueError):
    """A vector component was NaN or infinite."""


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "z", float(self.z))

    def require_finite(self, what: str = "vector") -> "Vec3":
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise NonFiniteError(f"{what} has non-finite component: {self}")
        return self

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __mul__(self, k: float) -> "Vec3":
        return Vec3(self.x * k, self.y * k, self.z * k)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec3":
        return Vec3(-self.x, -self.y, -self.z)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def distance_to(self, other: "Vec3") -> float:
        return (self - other).norm()

    def scaled_to(self, length: float) -> "Vec3":
        """Same direction, given magnitude. Zero vector is left as zero."""
        n = self.norm()
        if n == 0.0:
            return Vec3(0.0, 0.0, 0.0)
        return self * (length / n)

    def clamped(self, lo: "Vec3", hi: "Vec3") -> tuple["Vec3", bool]:
        """Component-wise clamp into [lo, hi]; flag reports whether any axis hit."""
        cx = min(max(self.x, lo.x), hi.x)
        cy = min(max(self.y, lo.y), hi.y)
        cz = min(max(self.z, lo.z), hi.z)
        return Vec3(cx, cy, cz), (cx != self.x or cy != self.y or cz != self.z)

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def to_list(self) -> list[float]:
        return [self.x, self.y, self.z]

    @classmethod
    def from_array(cls, a) -> "Vec3":
        return cls(float(a[0]), float(a[1]), float(a[2]))

    @classmethod
    def zero(cls) -> "Vec3":
        return cls(0.0, 0.0, 0.0)


ZERO = Vec3(0.0, 0.0, 0.0)


def as_points_array(points) -> np.ndarray:
    """Stack a sequence of Vec3 (or 3-sequences) into an (N, 3) float array."""
    if isinstance(points, np.ndarray):
        a = np.asarray(points, dtype=float)
        if a.ndim != 2 or a.shape[1] != 3:
            raise ValueError(f"expected (N, 3) array, got {a.shape}")
        return a
    rows = []
    for p in points:
        if isinstance(p, Vec3):
            rows.append((p.x, p.y, p.z))
        else:
            rows.append((float(p[0]), float(p[1]), float(p[2])))
    return np.array(rows, dtype=float).reshape(-1, 3)
