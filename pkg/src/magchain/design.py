"""Recursive design of the gradient bending-stiffness distribution.

The pivot spring of each chain length is sized so that holding a quarter-arc
at the clamp is an equilibrium while the distal part aligns with the lumen
center. Stage n=1 and n=2 evaluate the closed design pose directly; stages
n>=3 solve the aligned state with the pivot frozen, then read off the torque
the pivot spring must carry.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .config import CatheterSpec, EnvironmentSpec, rad_to_deg, to_si_dict
from .errors import ConfigError, DesignError, SolverError
from .equilibrium import (SolveOptions, _chain_torque_x, _damped_newton,
                          _orientation_probe)
from .kinematics import (compose_world_poses, lumen_center, signed_plane_angle,
                         target_direction)

GAMMA_MAX = math.pi  # the design scenario: a fully reversed target lumen

ALIGNMENT_WARN = 1e-6  # rad; larger leftover alignment angles get flagged


@dataclass
class DesignStep:
    """Solver summary for one design stage."""

    n: int
    theta_star: float            # rad
    alphas: np.ndarray           # solved distal arc angles (empty for n=1)
    alignment_residual: float    # rad


@dataclass
class DesignTable:
    """Designed stiffness ladder with the traces that produced it."""

    stiffnesses: np.ndarray
    steps: list[DesignStep]
    target_point: np.ndarray
    parameters: dict
    warnings: list[str] = dc_field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("# schema: design_table v1\n")
            writer = csv.writer(fh)
            writer.writerow(["n", "kb_Nm_per_rad", "theta_star_deg",
                             "alignment_residual_rad"])
            for k, step in zip(self.stiffnesses, self.steps):
                writer.writerow([step.n, f"{k:.9e}",
                                 f"{rad_to_deg(step.theta_star):.6f}",
                                 f"{step.alignment_residual:.3e}"])

    def write_trace_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("# schema: design_trace v1\n")
            writer = csv.writer(fh)
            writer.writerow(["n", "theta_star_deg", "alignment_residual_rad",
                             "alphas_deg"])
            for step in self.steps:
                alphas = ";".join(f"{rad_to_deg(a):.6f}" for a in step.alphas)
                writer.writerow([step.n, f"{rad_to_deg(step.theta_star):.6f}",
                                 f"{step.alignment_residual:.3e}", alphas])


def load_design_table_csv(path) -> np.ndarray:
    """Stiffness vector from a design-table CSV (schema design_table v1)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"design table not found: {path}")
    kb = []
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh)
                if r and not r[0].startswith("#") and r[0] != "n"]
    for row in rows:
        kb.append(float(row[1]))
    if not kb:
        raise ConfigError(f"design table is empty: {path}")
    return np.asarray(kb)


# ---------------------------------------------------------------------------
# closed stages n = 1, 2
# ---------------------------------------------------------------------------

def _design_pose_torques(spec, env, coupling):
    """Torque sums at the closed design pose: both tip springs at the design
    angle, field at gamma_max + steering margin."""
    a_d = spec.design_angle
    theta2 = GAMMA_MAX + env.steering_margin
    alphas = np.array([a_d, a_d])
    return _chain_torque_x(alphas, theta2, spec, env, coupling=coupling), theta2


def design_k1(spec: CatheterSpec, env: EnvironmentSpec, coupling: bool = True) -> float:
    """Tip spring stiffness from the torque it carries in the design pose."""
    tau, _ = _design_pose_torques(spec, env, coupling)
    return abs(tau[0]) / spec.design_angle


def design_k2(spec: CatheterSpec, env: EnvironmentSpec, k1: float,
              coupling: bool = True) -> tuple[float, np.ndarray]:
    """Second stiffness plus the lumen center fixed for all later stages."""
    tau, _ = _design_pose_torques(spec, env, coupling)
    k2 = abs(tau[1]) / spec.design_angle
    a_d = spec.design_angle
    p_t = lumen_center(a_d, a_d, env.lumen_distance, spec)
    return k2, p_t


# ---------------------------------------------------------------------------
# stages n >= 3: aligned solve with a frozen pivot
# ---------------------------------------------------------------------------

def _pivot_system(n, spec, env, kb, target_point, s_a):
    """Residual builder: alignment row + equilibria of springs 1..n-1, with
    the pivot spring n frozen at the design angle."""
    a_d = spec.design_angle
    kb = np.asarray(kb, dtype=float)

    def fun_raw(x):
        theta = x[0]
        alphas = np.concatenate([x[1:], [a_d]])
        tau = _chain_torque_x(alphas, theta, spec, env)
        poses = compose_world_poses(alphas, spec)
        v = target_direction(poses[0][:3, 3], target_point)
        raw = np.empty(n)
        norms = np.empty(n)
        raw[0] = s_a * signed_plane_angle(poses[0][:3, 2], v)
        norms[0] = 0.0
        raw[1:] = tau[:n - 1] - kb[:n - 1] * x[1:]
        norms[1:] = np.abs(tau[:n - 1])
        return raw, norms

    return fun_raw


def _alignment_angle(theta, free_alphas, n, spec, target_point):
    alphas = np.concatenate([free_alphas, [spec.design_angle]])
    poses = compose_world_poses(alphas, spec)
    v = target_direction(poses[0][:3, 3], target_point)
    return signed_plane_angle(poses[0][:3, 2], v)


def _solve_stage_newton(n, spec, env, kb, target_point, theta0, alpha0, opts):
    fun_raw = _pivot_system(n, spec, env, kb, target_point, opts.alignment_scale)
    x0 = np.concatenate([[theta0], alpha0])
    lower = np.concatenate([[-np.inf], np.zeros(n - 1)])
    x, _ = _damped_newton(fun_raw, x0, lower=lower, options=opts)
    return float(x[0]), x[1:]


def _solve_stage_elimination(n, spec, env, kb, target_point, theta0, alpha0, opts):
    """Bound-respecting fallback: eliminate the equilibrium equalities with an
    inner Newton solve in alpha, then drive the 1-D alignment angle in theta
    to zero inside (0, theta0 + seed_angle]."""
    a_d = spec.design_angle
    kb = np.asarray(kb, dtype=float)
    warm = {"alpha": np.asarray(alpha0, dtype=float).copy()}

    def inner(theta):
        def fun_raw(a):
            alphas = np.concatenate([a, [a_d]])
            tau = _chain_torque_x(alphas, theta, spec, env)
            return tau[:n - 1] - kb[:n - 1] * a, np.abs(tau[:n - 1])

        a, _ = _damped_newton(fun_raw, warm["alpha"], lower=np.zeros(n - 1),
                              options=opts)
        warm["alpha"] = a
        return a

    def psi(theta):
        return _alignment_angle(theta, inner(theta), n, spec, target_point)

    theta_max = theta0 + opts.seed_angle
    step = math.radians(0.25)
    th_hi = theta_max
    psi_hi = psi(th_hi)
    bracket = None
    th = th_hi
    for _ in range(400):
        th_lo = th - step
        if th_lo <= 0.0:
            break
        psi_lo = psi(th_lo)
        if psi_lo == 0.0:
            bracket = (th_lo, th_lo)
            break
        if np.sign(psi_lo) != np.sign(psi_hi):
            bracket = (th_lo, th)
            break
        th, psi_hi = th_lo, psi_lo
    if bracket is None:
        res = minimize_scalar(lambda tt: abs(psi(tt)),
                              bounds=(max(1e-9, theta_max - math.radians(100)),
                                      theta_max),
                              method="bounded", options={"xatol": 1e-14})
        theta_star = float(res.x)
    elif bracket[0] == bracket[1]:
        theta_star = bracket[0]
    else:
        theta_star = brentq(psi, bracket[0], bracket[1], xtol=1e-14)
    return theta_star, inner(theta_star)


def design_kn(n: int, spec: CatheterSpec, env: EnvironmentSpec, stiffnesses,
              target_point, warm, options: SolveOptions | None = None
              ) -> tuple[float, float, np.ndarray, float]:
    """Stiffness of pivot spring n from the aligned n-segment state.

    ``warm`` is (theta0, alpha0) with alpha0 of length n-1. Returns
    (k_b,n, theta_star, solved alphas, leftover alignment angle).
    """
    opts = options or SolveOptions()
    if n < 3:
        raise DesignError("recursive stages start at n=3", stage=n)
    theta0, alpha0 = warm
    alpha0 = np.asarray(alpha0, dtype=float)
    if alpha0.shape != (n - 1,):
        raise DesignError(f"warm start must carry {n - 1} arc angles", stage=n)
    kb = np.asarray(stiffnesses, dtype=float)
    if len(kb) < n - 1:
        raise DesignError(f"stage {n} needs stiffnesses 1..{n - 1}", stage=n)

    a_d = spec.design_angle
    theta_bound = theta0 + opts.seed_angle
    alpha_bound = a_d + opts.seed_angle

    theta_star, alphas = None, None
    try:
        theta_star, alphas = _solve_stage_newton(
            n, spec, env, kb, target_point, theta0, alpha0, opts)
        in_bounds = (0.0 < theta_star <= theta_bound
                     and np.all(alphas >= 0.0)
                     and np.all(alphas <= alpha_bound))
        if not in_bounds:
            theta_star, alphas = None, None
    except SolverError:
        theta_star, alphas = None, None
    if theta_star is None:
        try:
            theta_star, alphas = _solve_stage_elimination(
                n, spec, env, kb, target_point, theta0, alpha0, opts)
        except SolverError as exc:
            raise DesignError(f"stage {n} failed to converge: {exc}",
                              stage=n) from exc

    align = _alignment_angle(theta_star, alphas, n, spec, target_point)
    full = np.concatenate([alphas, [a_d]])
    tau = _chain_torque_x(full, theta_star, spec, env)
    kn = abs(tau[n - 1]) / a_d
    return kn, theta_star, alphas, align


def design_all(spec: CatheterSpec, env: EnvironmentSpec,
               options: SolveOptions | None = None) -> DesignTable:
    """Run the full recursion for springs 1..N."""
    opts = options or SolveOptions()
    n_total = spec.segment_count
    if n_total < 2:
        raise DesignError("designing a gradient needs at least 2 segments")
    _orientation_probe(spec, env)
    a_d = spec.design_angle
    theta2 = GAMMA_MAX + env.steering_margin

    k1 = design_k1(spec, env)
    k2, p_t = design_k2(spec, env, k1)
    kb = [k1, k2]
    steps = [
        DesignStep(n=1, theta_star=theta2, alphas=np.array([]),
                   alignment_residual=0.0),
        DesignStep(n=2, theta_star=theta2, alphas=np.array([a_d, a_d]),
                   alignment_residual=0.0),
    ]
    warnings = []

    theta_prev = theta2
    alpha_prev = np.array([a_d])  # alpha_1* of the n=2 design state
    for n in range(3, n_total + 1):
        if n == 3:
            alpha0 = np.array([alpha_prev[0] / 2.0, alpha_prev[0] / 2.0])
        else:
            alpha0 = np.concatenate([[opts.seed_angle], alpha_prev])
        kn, theta_star, alphas, align = design_kn(
            n, spec, env, kb, p_t, (theta_prev, alpha0), options=opts)
        if abs(align) > ALIGNMENT_WARN:
            warnings.append(
                f"stage {n}: leftover alignment angle {align:.2e} rad")
        kb.append(kn)
        steps.append(DesignStep(n=n, theta_star=theta_star, alphas=alphas,
                                alignment_residual=align))
        theta_prev = theta_star
        alpha_prev = alphas

    kb = np.asarray(kb)
    if np.any(np.diff(kb) <= 0.0):
        raise DesignError("designed stiffnesses are not strictly increasing; "
                          "check the configuration")
    return DesignTable(stiffnesses=kb, steps=steps, target_point=p_t,
                       parameters=to_si_dict(spec, env), warnings=warnings)
