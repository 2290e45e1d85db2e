"""Point-dipole field, force, and torque primitives.

Magnets are ideal dipoles; the external field is uniform, so it exerts pure
torques. Adjacent-magnet forces enter the chain statics only through their
equivalent torque about the spring far end (see ``equivalent_torque``).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import MU0
from .errors import GeometryError


@dataclass(frozen=True)
class Dipole:
    """A point dipole: position (m) and moment vector (A·m^2)."""

    position: np.ndarray
    moment: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "moment", np.asarray(self.moment, dtype=float))


@dataclass(frozen=True)
class WrenchPair:
    """Force (N) and torque (N·m) with an explicit frame tag."""

    force: np.ndarray
    torque: np.ndarray
    frame: str = field(default="world")


def dipole_field(source: Dipole, at) -> np.ndarray:
    """Field (T) of ``source`` at point ``at``, inverse-cube dipole law."""
    rel = np.asarray(at, dtype=float) - source.position
    r = np.linalg.norm(rel)
    if r == 0.0:
        raise GeometryError("dipole field evaluated at the source position")
    rhat = rel / r
    # (3 rr^T - I) m  ==  3 r (r.m) - m
    return MU0 / (4.0 * np.pi * r ** 3) * (3.0 * rhat * np.dot(rhat, source.moment)
                                           - source.moment)


def dipole_force_on(target: Dipole, source: Dipole) -> np.ndarray:
    """Force (N) on ``target`` from ``source``: (m_t . grad) B_s, closed form.

    The analytic expansion is used on the production path; finite differences
    of ``dipole_field`` serve only as a test oracle.
    """
    rel = target.position - source.position
    r = np.linalg.norm(rel)
    if r == 0.0:
        raise GeometryError("dipole force between coincident dipoles")
    rhat = rel / r
    ms, mt = source.moment, target.moment
    ms_r = np.dot(ms, rhat)
    mt_r = np.dot(mt, rhat)
    c = 3.0 * MU0 / (4.0 * np.pi * r ** 4)
    return c * (mt * ms_r + ms * mt_r + rhat * np.dot(ms, mt) - 5.0 * rhat * ms_r * mt_r)


def dipole_torque_on(target: Dipole, field_vec) -> np.ndarray:
    """Torque (N·m) m x B on ``target`` in a field ``field_vec``."""
    return np.cross(target.moment, np.asarray(field_vec, dtype=float))


def dipole_wrench_on(target: Dipole, source: Dipole, frame: str) -> WrenchPair:
    """Force and direct torque exerted by ``source`` on ``target``."""
    b = dipole_field(source, target.position)
    return WrenchPair(force=dipole_force_on(target, source),
                      torque=dipole_torque_on(target, b),
                      frame=frame)


def equivalent_torque(force, magnet_pos, spring_far_end) -> np.ndarray:
    """Moment of an inter-magnet force about the spring far end.

    All three vectors must be expressed in one common frame; the result is
    force x (spring_far_end - magnet_pos).
    """
    force = np.asarray(force, dtype=float)
    lever = np.asarray(spring_far_end, dtype=float) - np.asarray(magnet_pos, dtype=float)
    return np.cross(force, lever)
