"""Helical spring stiffness conversion, synthetic catalogs, and matching.

A close-coiled spring under a transverse bending moment has bending stiffness
k_b = E d^4 / (32 c D_n) * 1 / (1 + E/(2G)), equivalently
k_b = E D_n^2 / (2 (2G + E)) * k_c with k_c = G d^4 / (8 c D_n^3) the axial
compression rate. Both forms are kept and pinned to each other by tests.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError

ELASTIC_MODULUS_STEEL = 200e9  # Pa
POISSON_STEEL = 0.3


@dataclass(frozen=True)
class SpringGeometry:
    """Coil geometry; diameters in meters, moduli in pascal."""

    wire_diameter: float
    nominal_diameter: float
    active_coils: float
    elastic_modulus: float = ELASTIC_MODULUS_STEEL
    poisson_ratio: float = POISSON_STEEL

    def __post_init__(self):
        if not 0.0 < self.wire_diameter < self.nominal_diameter:
            raise DomainError("need nominal_diameter > wire_diameter > 0")
        if self.active_coils < 1:
            raise DomainError("active_coils must be >= 1")

    @property
    def shear_modulus(self) -> float:
        return self.elastic_modulus / (2.0 + 2.0 * self.poisson_ratio)

    @property
    def outer_diameter(self) -> float:
        return self.nominal_diameter + self.wire_diameter


@dataclass(frozen=True)
class CatalogEntry:
    """One purchasable spring; geometry is optional for measured entries."""

    bending_stiffness: float                  # N·m/rad
    compression_stiffness: float | None = None  # N/m
    geometry: SpringGeometry | None = None


@dataclass(frozen=True)
class SpringMatch:
    index: int
    design_value: float
    entry: CatalogEntry
    relative_error: float


def kb_from_geometry(g: SpringGeometry) -> float:
    """Bending stiffness from coil geometry."""
    e = g.elastic_modulus
    return (e * g.wire_diameter ** 4 / (32.0 * g.active_coils * g.nominal_diameter)
            / (1.0 + e / (2.0 * g.shear_modulus)))


def kc_from_geometry(g: SpringGeometry) -> float:
    """Axial compression rate from coil geometry."""
    return (g.shear_modulus * g.wire_diameter ** 4
            / (8.0 * g.active_coils * g.nominal_diameter ** 3))


def kb_from_kc(k_c: float, nominal_diameter: float, elastic_modulus: float,
               shear_modulus: float) -> float:
    """Bending stiffness from a measured compression rate."""
    if min(k_c, nominal_diameter, elastic_modulus, shear_modulus) <= 0:
        raise DomainError("kb_from_kc requires strictly positive inputs")
    return (elastic_modulus * nominal_diameter ** 2
            / (2.0 * (2.0 * shear_modulus + elastic_modulus)) * k_c)


def default_catalog(wire_diameters=(0.1e-3, 0.15e-3), outer_min=1.0e-3,
                    outer_max=1.5e-3, outer_step=0.05e-3, coil_range=(3, 7),
                    elastic_modulus=ELASTIC_MODULUS_STEEL,
                    poisson_ratio=POISSON_STEEL) -> list[CatalogEntry]:
    """Synthetic vendor grid over manufacturable coil parameters.

    Outer diameters are sampled in 0.05 mm steps (typical vendor increment);
    the stiffness formulas consume the nominal diameter D - d.
    """
    entries = []
    n_outer = int(round((outer_max - outer_min) / outer_step)) + 1
    for d in wire_diameters:
        for i in range(n_outer):
            outer = outer_min + i * outer_step
            for c in range(coil_range[0], coil_range[1] + 1):
                g = SpringGeometry(wire_diameter=d, nominal_diameter=outer - d,
                                   active_coils=c, elastic_modulus=elastic_modulus,
                                   poisson_ratio=poisson_ratio)
                entries.append(CatalogEntry(bending_stiffness=kb_from_geometry(g),
                                            compression_stiffness=kc_from_geometry(g),
                                            geometry=g))
    return entries


def stiffness_errors(design_stiffnesses, selected_stiffnesses) -> np.ndarray:
    """Per-slot relative errors |k*_n - k_n| / k_n for an n-to-n pairing of
    selected springs against their design targets."""
    design = np.asarray(design_stiffnesses, dtype=float)
    selected = np.asarray(selected_stiffnesses, dtype=float)
    if design.shape != selected.shape:
        raise DomainError("design and selected stiffness vectors differ in length")
    return np.abs(selected - design) / design


def match_catalog(design_stiffnesses, catalog) -> list[SpringMatch]:
    """Nearest catalog entry per design value by relative stiffness error.

    Ties break toward the smaller wire diameter (more compliant margin);
    entries without geometry sort last among ties.
    """
    catalog = list(catalog)
    if not catalog:
        raise ConfigError("spring catalog is empty")
    kb = np.asarray(design_stiffnesses, dtype=float)
    matches = []
    for n, k in enumerate(kb, start=1):
        def rank(entry, k=k):
            err = abs(entry.bending_stiffness - k) / k
            wire = entry.geometry.wire_diameter if entry.geometry else np.inf
            return (err, wire, entry.bending_stiffness)

        best = min(catalog, key=rank)
        matches.append(SpringMatch(
            index=n, design_value=float(k), entry=best,
            relative_error=abs(best.bending_stiffness - k) / k))
    return matches


# ---------------------------------------------------------------------------
# CSV import/export
# ---------------------------------------------------------------------------

CATALOG_HEADER = ["d_mm", "D_mm", "c", "kb_Nm_per_rad", "kc_N_per_m"]


def save_catalog_csv(catalog, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# schema: spring_catalog v1\n")
        writer = csv.writer(fh)
        writer.writerow(CATALOG_HEADER)
        for entry in catalog:
            if entry.geometry is not None:
                g = entry.geometry
                row = [f"{g.wire_diameter*1e3:.6g}", f"{g.outer_diameter*1e3:.6g}",
                       f"{g.active_coils:.6g}"]
            else:
                row = ["", "", ""]
            kc = "" if entry.compression_stiffness is None else f"{entry.compression_stiffness:.9e}"
            writer.writerow(row + [f"{entry.bending_stiffness:.9e}", kc])


def load_catalog_csv(path) -> list[CatalogEntry]:
    """Read a catalog CSV; rows carry either geometry or a measured k_b."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"catalog file not found: {path}")
    entries = []
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if rows and rows[0][:1] == ["d_mm"]:
        rows = rows[1:]
    for row in rows:
        if len(row) != len(CATALOG_HEADER):
            raise ConfigError(f"catalog row has {len(row)} fields, "
                              f"expected {len(CATALOG_HEADER)}: {row}")
        d_mm, outer_mm, c, kb, kc = row
        geometry = None
        if d_mm and outer_mm and c:
            geometry = SpringGeometry(wire_diameter=float(d_mm) / 1000.0,
                                      nominal_diameter=(float(outer_mm) - float(d_mm)) / 1000.0,
                                      active_coils=float(c))
        if kb:
            kb_val = float(kb)
        elif geometry is not None:
            kb_val = kb_from_geometry(geometry)
        else:
            raise ConfigError(f"catalog row needs kb or full geometry: {row}")
        entries.append(CatalogEntry(
            bending_stiffness=kb_val,
            compression_stiffness=float(kc) if kc else None,
            geometry=geometry))
    if not entries:
        raise ConfigError(f"spring catalog is empty: {path}")
    return entries
