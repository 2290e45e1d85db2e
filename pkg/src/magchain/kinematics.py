"""Constant-curvature segment transforms and chain pose composition.

Frame conventions: the world frame sits at the clamped magnet (index t+1),
+z along the parent lumen axis, bending into -y. Every rotation is about the
world x-axis, so all configurations live in the x = 0 plane. The field
direction angle theta is measured from +z toward -y, giving
B(theta) = ||B|| [0, -sin theta, cos theta].
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import CatheterSpec
from .errors import DomainError, GeometryError

# Below this arc angle the terms r(1-cos a) and r sin a with r = l_s/a are
# evaluated by series expansion; the singularity at a = 0 is removable.
ALPHA_SERIES_THRESHOLD = 1e-6


def _arc_terms(alpha: float, l_s: float) -> tuple[float, float]:
    """(r (1-cos a), r sin a) with r = l_s/a, exact in the a -> 0 limit."""
    if alpha < ALPHA_SERIES_THRESHOLD:
        return l_s * alpha / 2.0, l_s * (1.0 - alpha * alpha / 6.0)
    r = l_s / alpha
    return r * (1.0 - math.cos(alpha)), r * math.sin(alpha)


def magnet_offset(alpha: float, l_s: float, l_m: float) -> np.ndarray:
    """Position of magnet n in the frame of magnet n+1 (one arc segment)."""
    sa = math.sin(alpha)
    ca = math.cos(alpha)
    chord, rise = _arc_terms(alpha, l_s)
    return np.array([0.0,
                     -chord - (l_m / 2.0) * sa,
                     (l_m / 2.0) * (1.0 + ca) + rise])


def spring_end_positions(alpha: float, l_s: float, l_m: float) -> tuple[np.ndarray, np.ndarray]:
    """Spring end centers (s1 near magnet n+1, s2 near magnet n), frame n+1."""
    chord, rise = _arc_terms(alpha, l_s)
    s1 = np.array([0.0, 0.0, l_m / 2.0])
    s2 = np.array([0.0, -chord, l_m / 2.0 + rise])
    return s1, s2


def segment_transform(alpha: float, l_s: float, l_m: float) -> np.ndarray:
    """Rigid transform from magnet-n frame to magnet-(n+1) frame, 4x4."""
    if alpha < 0.0:
        raise DomainError(f"segment arc angle must be non-negative, got {alpha}")
    if alpha >= 2.0 * math.pi:
        raise DomainError(f"segment arc angle must be below 2*pi, got {alpha}")
    ca, sa = math.cos(alpha), math.sin(alpha)
    T = np.eye(4)
    T[1, 1] = ca
    T[1, 2] = -sa
    T[2, 1] = sa
    T[2, 2] = ca
    T[:3, 3] = magnet_offset(alpha, l_s, l_m)
    return T


@dataclass(frozen=True)
class SegmentPose:
    """World pose of one magnet; moment axis is the rotation's z column."""

    rotation: np.ndarray
    position: np.ndarray

    @property
    def moment_axis(self) -> np.ndarray:
        return self.rotation[:, 2]


@dataclass(frozen=True)
class ChainConfiguration:
    """A solved chain state: arc angles plus world poses of magnets 1..t+1."""

    t: int
    alphas: np.ndarray        # (t,), index 0 = distal spring 1
    theta: float              # field direction that produced the state
    poses: np.ndarray         # (t+1, 4, 4); row n-1 = magnet n, row t = clamp

    def pose(self, n: int) -> SegmentPose:
        """Pose of magnet n (1-based; n = t+1 is the clamped base)."""
        T = self.poses[n - 1]
        return SegmentPose(rotation=T[:3, :3].copy(), position=T[:3, 3].copy())

    def magnet_position(self, n: int) -> np.ndarray:
        return self.poses[n - 1][:3, 3].copy()

    def moment_axis(self, n: int) -> np.ndarray:
        return self.poses[n - 1][:3, 2].copy()

    def magnet_positions(self) -> np.ndarray:
        """Stacked positions of magnets 1..t+1, shape (t+1, 3)."""
        return self.poses[:, :3, 3].copy()

    @property
    def total_bend(self) -> float:
        return float(np.sum(self.alphas))


def compose_world_poses(alphas, spec: CatheterSpec) -> np.ndarray:
    """World poses for a chain with ``t = len(alphas)`` unsupported segments.

    Magnet t+1 is the clamp: identity pose at the origin. Poses compose from
    the clamp down to the tip, one segment transform per spring.
    """
    alphas = np.asarray(alphas, dtype=float)
    t = len(alphas)
    if t > spec.segment_count:
        raise DomainError(f"t={t} exceeds segment count N={spec.segment_count}")
    l_s = spec.spring_length
    l_m = spec.magnet.length
    poses = np.empty((t + 1, 4, 4))
    T = np.eye(4)
    poses[t] = T
    for n in range(t, 0, -1):
        T = T @ segment_transform(float(alphas[n - 1]), l_s, l_m)
        poses[n - 1] = T
    return poses


def chain_configuration(alphas, theta: float, spec: CatheterSpec) -> ChainConfiguration:
    alphas = np.asarray(alphas, dtype=float)
    return ChainConfiguration(t=len(alphas), alphas=alphas, theta=float(theta),
                              poses=compose_world_poses(alphas, spec))


def field_vector(magnitude: float, theta: float) -> np.ndarray:
    """Uniform external field at in-plane angle theta from +z toward -y."""
    return magnitude * np.array([0.0, -math.sin(theta), math.cos(theta)])


def lumen_center(alpha1: float, alpha2: float, d_p: float, spec: CatheterSpec) -> np.ndarray:
    """Target point d_p ahead of magnet 1 along its axis, from a t=2 state.

    Computed once from the two-segment solve and held fixed afterwards.
    """
    l_s = spec.spring_length
    l_m = spec.magnet.length
    T = segment_transform(alpha2, l_s, l_m) @ segment_transform(alpha1, l_s, l_m)
    return (T @ np.array([0.0, 0.0, d_p, 1.0]))[:3]


def target_direction(p1, pt) -> np.ndarray:
    """Unit vector from magnet 1 toward the lumen center."""
    v = np.asarray(pt, dtype=float) - np.asarray(p1, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise GeometryError("target direction undefined: lumen center coincides with tip")
    return v / norm


def signed_plane_angle(a, b) -> float:
    """Signed angle from ``a`` to ``b`` about +x; both must lie in the y-z plane."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return math.atan2(float(np.cross(a, b)[0]), float(np.dot(a, b)))
