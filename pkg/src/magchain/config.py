"""Physical parameters, unit conventions, and validation.

Everything downstream consumes validated ``CatheterSpec`` / ``EnvironmentSpec``
pairs expressed in SI units (m, T, rad, N·m/rad). User-facing documents use
mm / mT / degrees; the conversion happens here and nowhere else.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError

MU0 = 4e-7 * math.pi  # vacuum permeability, N/A^2

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# unit conversions (division keeps representable decimal inputs exact)
# ---------------------------------------------------------------------------

def mm_to_m(v):
    return v / 1000.0


def m_to_mm(v):
    return v * 1000.0


def mt_to_t(v):
    return v / 1000.0


def t_to_mt(v):
    return v * 1000.0


def deg_to_rad(v):
    return math.radians(v)


def rad_to_deg(v):
    return math.degrees(v)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MagnetSpec:
    """Cylindrical permanent magnet, dipole-equivalent."""

    remanence: float  # B_r, tesla
    diameter: float   # m
    length: float     # m

    def __post_init__(self):
        for name in ("remanence", "diameter", "length"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"magnet.{name} must be strictly positive")

    @property
    def volume(self) -> float:
        """Cylinder volume, m^3."""
        return math.pi * (self.diameter / 2.0) ** 2 * self.length

    @property
    def moment(self) -> float:
        """Dipole moment magnitude B_r V / mu0, A·m^2."""
        return self.remanence * self.volume / MU0


@dataclass(frozen=True)
class SpringSpec:
    """One spring joint: designed arc geometry plus stiffness once assigned."""

    index: int                # 1-based, distal tip = 1
    free_length: float        # l_s, m
    design_angle: float       # rad, arc angle at the design pose
    bending_stiffness: float | None = None      # N·m/rad
    compression_stiffness: float | None = None  # N/m

    def __post_init__(self):
        if self.free_length <= 0:
            raise ConfigError(f"spring[{self.index}].free_length must be positive")
        if self.design_angle <= 0:
            raise ConfigError(f"spring[{self.index}].design_angle must be positive")
        if self.bending_stiffness is not None and self.bending_stiffness <= 0:
            raise ConfigError(f"spring[{self.index}].bending_stiffness must be positive")

    @property
    def design_radius(self) -> float:
        """Curvature radius r_d = l_s / design_angle, m."""
        return self.free_length / self.design_angle


@dataclass(frozen=True)
class CatheterSpec:
    """Alternating magnet-spring chain; segment 1 is the distal tip."""

    magnet: MagnetSpec
    springs: tuple[SpringSpec, ...]

    def __post_init__(self):
        if not self.springs:
            raise ConfigError("at least one spring segment required")
        ls0 = self.springs[0].free_length
        ad0 = self.springs[0].design_angle
        for s in self.springs[1:]:
            if s.free_length != ls0 or s.design_angle != ad0:
                raise ConfigError(
                    "all springs must share identical free_length and design_angle")
        for i, s in enumerate(self.springs, start=1):
            if s.index != i:
                raise ConfigError(f"spring indices must run 1..N in order, got {s.index} at slot {i}")

    @property
    def segment_count(self) -> int:
        return len(self.springs)

    @property
    def spring_length(self) -> float:
        return self.springs[0].free_length

    @property
    def design_angle(self) -> float:
        return self.springs[0].design_angle

    @property
    def segment_pitch(self) -> float:
        """Length added per released segment, l_m + l_s."""
        return self.magnet.length + self.spring_length

    @property
    def free_length(self) -> float:
        """Length of the N movable segments, N (l_m + l_s)."""
        return self.segment_count * self.segment_pitch

    @property
    def total_length(self) -> float:
        """Free length plus the clamped base magnet; used to normalize errors."""
        return self.free_length + self.magnet.length

    def stiffness_vector(self, t: int | None = None) -> np.ndarray:
        """Bending stiffnesses of springs 1..t; raises if any is unset."""
        t = self.segment_count if t is None else t
        kb = []
        for s in self.springs[:t]:
            if s.bending_stiffness is None:
                raise ConfigError(f"spring[{s.index}].bending_stiffness is unset")
            kb.append(s.bending_stiffness)
        return np.asarray(kb, dtype=float)

    def has_stiffnesses(self) -> bool:
        return all(s.bending_stiffness is not None for s in self.springs)

    def with_stiffnesses(self, kb) -> "CatheterSpec":
        """Copy of this spec with bending stiffnesses assigned from ``kb``."""
        kb = np.asarray(kb, dtype=float)
        if kb.shape != (self.segment_count,):
            raise ConfigError(
                f"expected {self.segment_count} stiffness values, got {kb.shape}")
        springs = tuple(replace(s, bending_stiffness=float(k))
                        for s, k in zip(self.springs, kb))
        return replace(self, springs=springs)


@dataclass(frozen=True)
class EnvironmentSpec:
    """Actuation field and steering target."""

    field_magnitude: float   # ||B||, tesla
    lumen_distance: float    # d_p, m
    lumen_direction: float   # gamma, rad, in [0, pi]
    steering_margin: float   # beta, rad, in (0, pi/2)

    def __post_init__(self):
        if self.field_magnitude <= 0:
            raise ConfigError("environment.field_magnitude must be > 0")
        if self.lumen_distance <= 0:
            raise ConfigError("environment.lumen_distance must be > 0")
        if not 0.0 <= self.lumen_direction <= math.pi:
            raise ConfigError("environment.lumen_direction must lie in [0, pi]")
        if not 0.0 < self.steering_margin < math.pi / 2:
            raise ConfigError("environment.steering_margin must lie in (0, pi/2)")


# ---------------------------------------------------------------------------
# document parsing / serialization
# ---------------------------------------------------------------------------

def _require(doc: dict, path: str):
    node = doc
    for key in path.split("."):
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"missing key: {path}")
        node = node[key]
    return node


def load_spec(document) -> tuple[CatheterSpec, EnvironmentSpec]:
    """Parse a user-unit config document into validated SI specs.

    ``document`` may be a path to a YAML file, YAML text, or an already
    parsed mapping. All unit conversion happens here.
    """
    if isinstance(document, (str, Path)) and "\n" not in str(document):
        path = Path(document)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        text = path.read_text()
    elif isinstance(document, str):
        text = document
    else:
        text = None

    if text is not None:
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config parse failure: {exc}") from exc
    else:
        doc = document
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")

    version = _require(doc, "schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {version}")

    magnet = MagnetSpec(
        remanence=float(_require(doc, "magnet.remanence_T")),
        diameter=mm_to_m(float(_require(doc, "magnet.diameter_mm"))),
        length=mm_to_m(float(_require(doc, "magnet.length_mm"))),
    )

    count = int(_require(doc, "segments.count"))
    if count < 1:
        raise ConfigError("segments.count must be >= 1")
    ls = mm_to_m(float(_require(doc, "segments.spring_free_length_mm")))
    ad = deg_to_rad(float(_require(doc, "segments.design_angle_deg")))
    kb_list = doc.get("segments", {}).get("bending_stiffness_Nm_per_rad")
    kc_list = doc.get("segments", {}).get("compression_stiffness_N_per_m")
    if kb_list is not None and len(kb_list) != count:
        raise ConfigError("segments.bending_stiffness_Nm_per_rad length must equal segments.count")
    if kc_list is not None and len(kc_list) != count:
        raise ConfigError("segments.compression_stiffness_N_per_m length must equal segments.count")

    springs = tuple(
        SpringSpec(
            index=n,
            free_length=ls,
            design_angle=ad,
            bending_stiffness=float(kb_list[n - 1]) if kb_list is not None else None,
            compression_stiffness=float(kc_list[n - 1]) if kc_list is not None else None,
        )
        for n in range(1, count + 1)
    )
    spec = CatheterSpec(magnet=magnet, springs=springs)

    env = EnvironmentSpec(
        field_magnitude=mt_to_t(float(_require(doc, "environment.field_mT"))),
        lumen_distance=mm_to_m(float(_require(doc, "environment.lumen_distance_mm"))),
        lumen_direction=deg_to_rad(float(_require(doc, "environment.lumen_direction_deg"))),
        steering_margin=deg_to_rad(float(_require(doc, "environment.steering_margin_deg"))),
    )
    return spec, env


def spec_to_document(spec: CatheterSpec, env: EnvironmentSpec) -> dict:
    """User-unit document (mm/mT/deg) that round-trips through load_spec."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "magnet": {
            "remanence_T": spec.magnet.remanence,
            "diameter_mm": m_to_mm(spec.magnet.diameter),
            "length_mm": m_to_mm(spec.magnet.length),
        },
        "segments": {
            "count": spec.segment_count,
            "spring_free_length_mm": m_to_mm(spec.spring_length),
            "design_angle_deg": rad_to_deg(spec.design_angle),
        },
        "environment": {
            "field_mT": t_to_mt(env.field_magnitude),
            "lumen_distance_mm": m_to_mm(env.lumen_distance),
            "lumen_direction_deg": rad_to_deg(env.lumen_direction),
            "steering_margin_deg": rad_to_deg(env.steering_margin),
        },
    }
    if spec.has_stiffnesses():
        doc["segments"]["bending_stiffness_Nm_per_rad"] = [
            s.bending_stiffness for s in spec.springs]
    if all(s.compression_stiffness is not None for s in spec.springs):
        doc["segments"]["compression_stiffness_N_per_m"] = [
            s.compression_stiffness for s in spec.springs]
    return doc


def save_spec(spec: CatheterSpec, env: EnvironmentSpec, path) -> None:
    Path(path).write_text(yaml.safe_dump(spec_to_document(spec, env), sort_keys=False))


def to_si_dict(spec: CatheterSpec, env: EnvironmentSpec) -> dict:
    """SI-normalized snapshot for downstream tools and run manifests."""
    return {
        "si_units": True,
        "magnet": {
            "remanence_T": spec.magnet.remanence,
            "diameter_m": spec.magnet.diameter,
            "length_m": spec.magnet.length,
            "volume_m3": spec.magnet.volume,
            "dipole_moment_Am2": spec.magnet.moment,
        },
        "segments": {
            "count": spec.segment_count,
            "spring_free_length_m": spec.spring_length,
            "design_angle_rad": spec.design_angle,
            "design_radius_m": spec.springs[0].design_radius,
            "bending_stiffness_Nm_per_rad": [s.bending_stiffness for s in spec.springs],
            "compression_stiffness_N_per_m": [s.compression_stiffness for s in spec.springs],
            "free_length_m": spec.free_length,
            "total_length_m": spec.total_length,
        },
        "environment": {
            "field_T": env.field_magnitude,
            "lumen_distance_m": env.lumen_distance,
            "lumen_direction_rad": env.lumen_direction,
            "steering_margin_rad": env.steering_margin,
        },
    }


def save_si_json(spec: CatheterSpec, env: EnvironmentSpec, path) -> None:
    Path(path).write_text(json.dumps(to_si_dict(spec, env), indent=2) + "\n")


def default_spec() -> tuple[CatheterSpec, EnvironmentSpec]:
    """Reference design point: N=6 NdFeB/steel-spring chain, 40 mT, 80 mm lumen.

    Spring stiffnesses are left unset; fill them via the stiffness designer or
    from a measured table.
    """
    return load_spec({
        "schema_version": SCHEMA_VERSION,
        "magnet": {"remanence_T": 1.42, "diameter_mm": 1.5, "length_mm": 2.0},
        "segments": {"count": 6, "spring_free_length_mm": 3.14, "design_angle_deg": 90.0},
        "environment": {
            "field_mT": 40.0,
            "lumen_distance_mm": 80.0,
            "lumen_direction_deg": 180.0,
            "steering_margin_deg": 20.0,
        },
    })
