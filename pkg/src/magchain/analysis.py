"""Pivot-stability and efficiency analyses over advancement traces.

An advancement trace follows one steering direction gamma: the chain is
solved at every free length t = 2..N with warm-started aligned solves, the
lumen center being fixed by the t=2 state. Metrics quantify how little the
pivot magnet moves across states and how efficiently bending concentrates
and push transmits.
"""
from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .config import CatheterSpec, EnvironmentSpec, rad_to_deg
from .errors import ConfigError, DomainError, SolverError
from .equilibrium import SolveOptions, initial_values, solve_shape_aligned
from .kinematics import lumen_center


def pivot_magnet_index(t: int) -> int:
    """Magnet riding the pivot spring at free length t.

    Interpretation: the spatial pivot is the spring nearest the clamp, so the
    pivot magnet is magnet t in every state. Kept behind one function so the
    alternative (a fixed material magnet) stays a one-line change.
    """
    return t


@dataclass(frozen=True)
class TraceState:
    """One advancement state: solved shape plus derived positions."""

    t: int
    theta: float
    alphas: np.ndarray
    positions: np.ndarray       # (t+1, 3) magnets 1..t+1
    pivot_position: np.ndarray


@dataclass(frozen=True)
class AdvancementTrace:
    gamma: float
    states: tuple[TraceState, ...]
    target_point: np.ndarray

    def pivot_positions(self) -> np.ndarray:
        return np.stack([s.pivot_position for s in self.states])


@dataclass(frozen=True)
class PivotMetrics:
    sigma: float        # m, RMS spread of the pivot magnet about its mean
    d_max: float        # m, maximum pairwise pivot distance
    er_sigma: float     # fraction of the total tip length
    er_dmax: float


@dataclass
class SweepRecord:
    """One (gamma, field, lumen distance) evaluation."""

    gamma: float
    field_magnitude: float
    lumen_distance: float
    ok: bool = True
    message: str = ""
    sigma: float = math.nan
    d_max: float = math.nan
    er_sigma: float = math.nan
    er_dmax: float = math.nan
    shape_error: float = math.nan
    bend_eff_mean: float = math.nan
    bend_eff_std: float = math.nan
    prop_eff_mean: float = math.nan


def advancement_trace(gamma: float, spec: CatheterSpec, env: EnvironmentSpec,
                      options: SolveOptions | None = None) -> AdvancementTrace:
    """Solve the chain at every free length t = 2..N for one gamma.

    The lumen center comes from this gamma's own t=2 closure state and stays
    fixed while subsequent lengths are warm-started from their predecessor.
    """
    opts = options or SolveOptions()
    if not spec.has_stiffnesses():
        raise ConfigError("advancement trace requires all bending stiffnesses set")
    n_total = spec.segment_count
    if n_total < 2:
        raise DomainError("advancement requires at least 2 segments")

    states = []
    target_point = None
    previous = None
    for t in range(2, n_total + 1):
        init = initial_values(gamma, t, env, previous=previous,
                              seed_angle=opts.seed_angle)
        try:
            config = solve_shape_aligned(gamma, t, spec, env,
                                         target_point=target_point, init=init,
                                         options=opts)
        except SolverError as exc:
            raise SolverError(f"advancement state t={t} failed: {exc}",
                              best=exc.best, residual_norm=exc.residual_norm) from exc
        if t == 2:
            target_point = lumen_center(float(config.alphas[0]),
                                        float(config.alphas[1]),
                                        env.lumen_distance, spec)
        pivot = config.magnet_position(pivot_magnet_index(t))
        states.append(TraceState(t=t, theta=config.theta, alphas=config.alphas,
                                 positions=config.magnet_positions(),
                                 pivot_position=pivot))
        previous = (config.theta, config.alphas)
    return AdvancementTrace(gamma=gamma, states=tuple(states),
                            target_point=target_point)


def pivot_metrics(trace: AdvancementTrace, total_length: float) -> PivotMetrics:
    """Pivot-position spread across the trace states.

    sigma is the RMS distance from the mean over the N-1 states; d_max is the
    worst pairwise distance. Both are normalized by the catheter total length
    (base magnet included) for the relative errors.
    """
    pos = trace.pivot_positions()
    mean = pos.mean(axis=0)
    sigma = float(np.sqrt(np.mean(np.sum((pos - mean) ** 2, axis=1))))
    d_max = 0.0
    for i in range(len(pos)):
        for j in range(i + 1, len(pos)):
            d_max = max(d_max, float(np.linalg.norm(pos[i] - pos[j])))
    return PivotMetrics(sigma=sigma, d_max=d_max,
                        er_sigma=sigma / total_length,
                        er_dmax=d_max / total_length)


def bending_efficiency(state: TraceState) -> float:
    """Share of the total bend carried by the two springs nearest the clamp.

    A straight chain counts as perfectly concentrated (ratio 1); totals under
    a nanoradian are solver noise and get the same convention.
    """
    total = float(np.sum(state.alphas))
    if total <= 1e-9:
        return 1.0
    return float(state.alphas[-1] + state.alphas[-2]) / total


def bending_efficiency_stats(trace: AdvancementTrace) -> tuple[float, float]:
    vals = np.array([bending_efficiency(s) for s in trace.states])
    return float(vals.mean()), float(vals.std())


def advancing_direction(gamma: float) -> np.ndarray:
    """In-plane unit vector at angle gamma from +z (the child lumen axis)."""
    return np.array([0.0, -math.sin(gamma), math.cos(gamma)])


def propulsion_efficiency(trace: AdvancementTrace, spec: CatheterSpec) -> float:
    """Mean fraction of each push cycle's pitch delivered as tip displacement
    along the advancing direction."""
    v = advancing_direction(trace.gamma)
    pitch = spec.segment_pitch
    ratios = []
    for a, b in zip(trace.states, trace.states[1:]):
        dtip = b.positions[0] - a.positions[0]
        ratios.append(float(np.dot(dtip, v)) / pitch)
    if not ratios:
        return math.nan
    return float(np.mean(ratios))


def shape_error(trace: AdvancementTrace, reference: AdvancementTrace) -> float:
    """Mean over states of the RMS magnet-position deviation from a reference
    trace at the same gamma."""
    errs = []
    for a, b in zip(trace.states, reference.states):
        d2 = np.sum((a.positions - b.positions) ** 2, axis=1)
        errs.append(math.sqrt(float(np.mean(d2))))
    return float(np.mean(errs))


def nonoptimized_profile(design_stiffnesses) -> np.ndarray:
    """Comparison stiffness ladder: tip pair kept, then aggressive stiffening
    as multiples of the last designed value."""
    kb = np.asarray(design_stiffnesses, dtype=float)
    if len(kb) < 6:
        raise DomainError("non-optimized profile needs at least 6 designed values")
    k6 = kb[5]
    return np.array([kb[0], kb[1], 2 * k6, 2 * k6, 4 * k6, 4 * k6])


# ---------------------------------------------------------------------------
# parameter sweeps
# ---------------------------------------------------------------------------

def default_gamma_grid() -> np.ndarray:
    return np.deg2rad(np.arange(0.0, 181.0, 10.0))


def default_field_grid() -> np.ndarray:
    return np.arange(35.0, 46.0, 1.0) / 1000.0


def default_distance_grid() -> np.ndarray:
    return np.arange(4.0, 15.0, 1.0) / 100.0


def sweep(gamma_grid, field_grid, distance_grid, spec: CatheterSpec,
          env: EnvironmentSpec, options: SolveOptions | None = None
          ) -> list[SweepRecord]:
    """Evaluate the cartesian grid of steering directions and conditions.

    Shape errors compare against the standard trace recomputed at this run's
    design conditions (the ``env`` field and lumen distance) for the same
    gamma. Failed cells are recorded and the sweep continues.
    """
    opts = options or SolveOptions()
    total_length = spec.total_length
    standard_cache: dict[float, AdvancementTrace] = {}

    def standard_trace(gamma):
        if gamma not in standard_cache:
            standard_cache[gamma] = advancement_trace(gamma, spec, env, options=opts)
        return standard_cache[gamma]

    records = []
    for b in np.asarray(field_grid, dtype=float):
        for dp in np.asarray(distance_grid, dtype=float):
            cell_env = dataclasses.replace(env, field_magnitude=float(b),
                                           lumen_distance=float(dp))
            for gamma in np.asarray(gamma_grid, dtype=float):
                rec = SweepRecord(gamma=float(gamma), field_magnitude=float(b),
                                  lumen_distance=float(dp))
                try:
                    trace = advancement_trace(float(gamma), spec, cell_env,
                                              options=opts)
                    reference = standard_trace(float(gamma))
                except SolverError as exc:
                    rec.ok = False
                    rec.message = str(exc)
                    records.append(rec)
                    continue
                metrics = pivot_metrics(trace, total_length)
                rec.sigma = metrics.sigma
                rec.d_max = metrics.d_max
                rec.er_sigma = metrics.er_sigma
                rec.er_dmax = metrics.er_dmax
                rec.shape_error = shape_error(trace, reference)
                rec.bend_eff_mean, rec.bend_eff_std = bending_efficiency_stats(trace)
                rec.prop_eff_mean = propulsion_efficiency(trace, spec)
                records.append(rec)
    return records


# ---------------------------------------------------------------------------
# CSV output (user units: mm, mT, degrees; schemas versioned in the header)
# ---------------------------------------------------------------------------

def write_pivot_gamma_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# schema: pivot_vs_gamma v1\n")
        writer = csv.writer(fh)
        writer.writerow(["gamma_deg", "sigma_mm", "dmax_mm",
                         "er_sigma_pct", "er_dmax_pct"])
        for r in records:
            writer.writerow([f"{rad_to_deg(r.gamma):.1f}", f"{r.sigma*1e3:.6f}",
                             f"{r.d_max*1e3:.6f}", f"{r.er_sigma*100:.6f}",
                             f"{r.er_dmax*100:.6f}"])


def write_sweep_csv(records, vary: str, path) -> None:
    """Sweep table; ``vary`` in {"B", "dp"} picks the leading column."""
    if vary not in ("B", "dp"):
        raise DomainError("vary must be 'B' or 'dp'")
    lead = "B_mT" if vary == "B" else "dp_cm"
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: sweep_{vary} v1\n")
        writer = csv.writer(fh)
        writer.writerow([lead, "gamma_deg", "sigma_mm", "dmax_mm",
                         "er_sigma_pct", "er_dmax_pct", "shape_err_mm",
                         "bend_eff_mean", "bend_eff_std", "prop_eff_mean",
                         "status"])
        for r in records:
            lead_val = (f"{r.field_magnitude*1e3:.1f}" if vary == "B"
                        else f"{r.lumen_distance*1e2:.1f}")
            if r.ok:
                writer.writerow([lead_val, f"{rad_to_deg(r.gamma):.1f}",
                                 f"{r.sigma*1e3:.6f}", f"{r.d_max*1e3:.6f}",
                                 f"{r.er_sigma*100:.6f}", f"{r.er_dmax*100:.6f}",
                                 f"{r.shape_error*1e3:.6f}",
                                 f"{r.bend_eff_mean:.6f}", f"{r.bend_eff_std:.6f}",
                                 f"{r.prop_eff_mean:.6f}", "ok"])
            else:
                writer.writerow([lead_val, f"{rad_to_deg(r.gamma):.1f}",
                                 "", "", "", "", "", "", "", "", "failed"])


@dataclass(frozen=True)
class EfficiencyRow:
    gamma: float
    bend_eff_mean: float
    bend_eff_std: float
    prop_eff_mean: float
    profile: str


def efficiency_rows(gamma_grid, spec: CatheterSpec, env: EnvironmentSpec,
                    profile: str, options: SolveOptions | None = None
                    ) -> list[EfficiencyRow]:
    rows = []
    for gamma in np.asarray(gamma_grid, dtype=float):
        trace = advancement_trace(float(gamma), spec, env, options=options)
        mean, std = bending_efficiency_stats(trace)
        rows.append(EfficiencyRow(gamma=float(gamma), bend_eff_mean=mean,
                                  bend_eff_std=std,
                                  prop_eff_mean=propulsion_efficiency(trace, spec),
                                  profile=profile))
    return rows


def write_efficiency_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# schema: efficiency v1\n")
        writer = csv.writer(fh)
        writer.writerow(["gamma_deg", "bend_eff_mean", "bend_eff_std",
                         "prop_eff_mean", "profile"])
        for r in rows:
            writer.writerow([f"{rad_to_deg(r.gamma):.1f}", f"{r.bend_eff_mean:.6f}",
                             f"{r.bend_eff_std:.6f}", f"{r.prop_eff_mean:.6f}",
                             r.profile])
