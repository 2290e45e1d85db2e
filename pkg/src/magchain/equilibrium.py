"""Torque-balance residuals and the chain shape solvers.

The equilibrium of spring n balances the field torques on magnets 1..n plus
the nearest-neighbor coupling torques against the elastic restoring torque
k_b,n * alpha_n. Residuals are scaled to O(1) by per-spring decade factors
s_n = 10^(-floor(log10 ||T_n||)) before the root solve.

Two evaluation routes exist on purpose: ``spring_torque_sum`` composes the
general 3-D magnetics primitives and is the reference; the solver hot path
uses a planar scalar reduction of the same formulas (rotations about x leave
torque x-components invariant). A property test pins them together.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import MU0, CatheterSpec, EnvironmentSpec
from .errors import DomainError, SolverError
from .kinematics import (ChainConfiguration, chain_configuration, compose_world_poses,
                         _arc_terms, field_vector, signed_plane_angle,
                         spring_end_positions, target_direction)
from .magnetics import (Dipole, dipole_field, dipole_force_on, dipole_torque_on,
                        equivalent_torque)


@dataclass
class SolveOptions:
    """Root-solve controls; defaults follow the toolkit-wide conventions."""

    tolerance: float = 1e-10        # infinity norm on scaled residuals
    max_iterations: int = 200
    alignment_scale: float = 10.0   # s_a, weight of the tip-alignment residual
    seed_angle: float = 1e-4        # delta, warm-start arc angle for a fresh segment
    fd_step: float = 1e-7           # rad, central-difference Jacobian step

    def __post_init__(self):
        if self.tolerance <= 0:
            raise DomainError("tolerance must be positive")


@dataclass(frozen=True)
class ResidualVector:
    """Scaled torque-balance residuals plus the quantities that built them."""

    values: np.ndarray       # s_n (tau_n - k_b,n alpha_n), length t
    scales: np.ndarray       # s_n
    raw_torques: np.ndarray  # (t, 3) world-frame torque sums on each spring


# Numerical underflow guards around the decade scaling: torques shrink to
# zero on the straight-chain approach, where an unbounded scale would overflow
# and amplify float noise beyond any tolerance. Both limits sit far below the
# ~1e-4 N·m working torque scale.
SCALE_CAP_EXPONENT = 15.0
TORQUE_FLOOR = 1e-18  # N·m; a balance row this small counts as satisfied


def torque_scale(norm: float) -> float:
    """Decade scale 10^(-floor(log10 norm)); 1 for a vanishing torque."""
    if norm == 0.0:
        return 1.0
    return 10.0 ** min(-math.floor(math.log10(norm)), SCALE_CAP_EXPONENT)


def _scales_of(norms: np.ndarray) -> np.ndarray:
    s = np.ones_like(norms)
    mask = norms > 0.0
    s[mask] = 10.0 ** np.minimum(-np.floor(np.log10(norms[mask])),
                                 SCALE_CAP_EXPONENT)
    return s


def _effective_residual(raw: np.ndarray, scales: np.ndarray) -> np.ndarray:
    f = scales * raw
    f[np.abs(raw) <= TORQUE_FLOOR] = 0.0
    return f


# ---------------------------------------------------------------------------
# torque evaluation
# ---------------------------------------------------------------------------

def _coupling_torque_x(alpha: float, m: float, l_s: float, l_m: float) -> float:
    """x-torque (t_in + t_eq) on magnet n from magnet n+1, frame n+1.

    Planar scalar reduction of the dipole field/force expressions; the lever
    of the equivalent transformation is s_2n - r_d,n = -(l_m/2) z_n.
    """
    sa = math.sin(alpha)
    ca = math.cos(alpha)
    chord, rise = _arc_terms(alpha, l_s)
    y = -chord - (l_m / 2.0) * sa
    z = (l_m / 2.0) * (1.0 + ca) + rise
    r2 = y * y + z * z
    r = math.sqrt(r2)
    c_field = MU0 * m / (4.0 * math.pi * r ** 3)
    by = c_field * 3.0 * y * z / r2
    bz = c_field * (3.0 * z * z / r2 - 1.0)
    t_in = m * (-sa * bz - ca * by)
    q = -sa * y + ca * z
    k_force = 3.0 * MU0 * m * m / (4.0 * math.pi * r ** 4)
    f_y = k_force * (-sa * z / r + ca * y / r - 5.0 * y * z * q / r ** 3)
    f_z = k_force * (2.0 * ca * z / r + q / r - 5.0 * z * z * q / r ** 3)
    t_eq = -(l_m / 2.0) * (f_y * ca + f_z * sa)
    return t_in + t_eq


def _chain_torque_x(alphas: np.ndarray, theta: float, spec: CatheterSpec,
                    env: EnvironmentSpec, coupling: bool = True) -> np.ndarray:
    """Signed x-components of the spring torque sums, springs 1..t.

    The planar chain keeps every torque on the world x-axis, and x-rotations
    preserve x-components, so frame-(n+1) coupling terms add directly.
    """
    t = len(alphas)
    poses = compose_world_poses(alphas, spec)
    m = spec.magnet.moment
    b = env.field_magnitude
    ct, st = math.cos(theta), math.sin(theta)
    zy = poses[:t, 1, 2]
    zz = poses[:t, 2, 2]
    tau = np.cumsum(m * b * (zy * ct + zz * st))
    if coupling:
        l_s = spec.spring_length
        l_m = spec.magnet.length
        for n in range(t):
            tau[n] += _coupling_torque_x(float(alphas[n]), m, l_s, l_m)
    return tau


def spring_torque_sum(n: int, alphas, theta: float, spec: CatheterSpec,
                      env: EnvironmentSpec, coupling: bool = True,
                      all_pairs: bool = False) -> np.ndarray:
    """World-frame torque sum acting on spring n (reference 3-D route).

    Sums the external-field torques on magnets 1..n and the coupling terms
    crossing the spring-n cut. Pairs interior to the cut are action-reaction
    and cancel. ``all_pairs`` additionally includes non-nearest magnet pairs
    across the cut; it exists for error estimation only and is never part of
    the equilibrium residual.
    """
    alphas = np.asarray(alphas, dtype=float)
    t = len(alphas)
    if not 1 <= n <= t:
        raise DomainError(f"spring index {n} outside 1..{t}")
    poses = compose_world_poses(alphas, spec)
    m = spec.magnet.moment
    bvec = field_vector(env.field_magnitude, theta)
    total = np.zeros(3)
    for i in range(1, n + 1):
        mag = Dipole(poses[i - 1][:3, 3], m * poses[i - 1][:3, 2])
        total += dipole_torque_on(mag, bvec)
    if not coupling:
        return total
    # world position of the spring-n far end (the cut point)
    _, s2_local = spring_end_positions(float(alphas[n - 1]), spec.spring_length,
                                       spec.magnet.length)
    base = poses[n]  # magnet n+1
    s2_world = base[:3, :3] @ s2_local + base[:3, 3]
    pairs = ([(i, j) for i in range(1, n + 1) for j in range(n + 1, t + 2)]
             if all_pairs else [(n, n + 1)])
    for i, j in pairs:
        target = Dipole(poses[i - 1][:3, 3], m * poses[i - 1][:3, 2])
        source = Dipole(poses[j - 1][:3, 3], m * poses[j - 1][:3, 2])
        f_in = dipole_force_on(target, source)
        total += dipole_torque_on(target, dipole_field(source, target.position))
        total += equivalent_torque(f_in, target.position, s2_world)
    return total


def scaled_residual(alphas, theta: float, spec: CatheterSpec,
                    env: EnvironmentSpec) -> ResidualVector:
    """Scaled torque-balance residual for springs 1..t at the given state."""
    alphas = np.asarray(alphas, dtype=float)
    if len(alphas) < 1:
        raise DomainError("at least one segment required")
    kb = spec.stiffness_vector(len(alphas))
    tau = _chain_torque_x(alphas, theta, spec, env)
    norms = np.abs(tau)
    scales = _scales_of(norms)
    values = scales * (tau - kb * alphas)
    raw = np.zeros((len(alphas), 3))
    raw[:, 0] = tau
    return ResidualVector(values=values, scales=scales, raw_torques=raw)


def _orientation_probe(spec: CatheterSpec, env: EnvironmentSpec) -> None:
    """Sign convention guard: a small positive theta on a straight single
    segment must produce a positive x-torque (positive torque opens alpha)."""
    tau = _chain_torque_x(np.zeros(1), 0.01, spec, env, coupling=False)
    if not tau[0] > 0.0:
        raise RuntimeError("torque orientation probe failed: check frame conventions")


# ---------------------------------------------------------------------------
# damped Newton on scaled residuals
# ---------------------------------------------------------------------------

def _fd_jacobian(fun_raw, x, lower, step):
    raw0, _ = fun_raw(x)
    m = len(raw0)
    n = len(x)
    J = np.empty((m, n))
    for j in range(n):
        hp = step
        hm = step
        if np.isfinite(lower[j]):
            hm = min(step, x[j] - lower[j])
        xp = x.copy()
        xp[j] += hp
        rp, _ = fun_raw(xp)
        if hm > 0.0:
            xm = x.copy()
            xm[j] -= hm
            rm, _ = fun_raw(xm)
        else:
            rm = raw0
        J[:, j] = (rp - rm) / (hp + hm)
    return J


def _damped_newton(fun_raw, x0, lower=None, options: SolveOptions | None = None,
                   trace=None):
    """Damped Newton with backtracking on scaled residuals.

    ``fun_raw(x) -> (raw, norms)`` returns unscaled residuals plus the torque
    norms defining the decade scales; a zero norm means "do not scale". The
    scales are frozen within each iteration so finite differences stay
    consistent across the floor-log discontinuities.
    """
    opts = options or SolveOptions()
    x = np.asarray(x0, dtype=float).copy()
    lower = (np.full_like(x, -np.inf) if lower is None
             else np.asarray(lower, dtype=float))
    x = np.maximum(x, lower)

    raw, norms = fun_raw(x)
    best_norm = np.inf
    best_x = x.copy()
    for it in range(opts.max_iterations + 1):
        s_live = _scales_of(norms)
        f_live = _effective_residual(raw, s_live)
        norm_live = float(np.max(np.abs(f_live))) if len(f_live) else 0.0
        if trace is not None:
            trace.append((it, norm_live, x.copy()))
        if norm_live < best_norm:
            best_norm = norm_live
            best_x = x.copy()
        if norm_live <= opts.tolerance:
            return x, it
        if it == opts.max_iterations:
            break

        scales = s_live  # frozen for this iteration
        J = scales[:, None] * _fd_jacobian(fun_raw, x, lower, opts.fd_step)
        f = _effective_residual(raw, scales)
        try:
            d = np.linalg.solve(J, -f)
            if not np.all(np.isfinite(d)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            d = np.linalg.lstsq(J, -f, rcond=None)[0]

        phi0 = float(np.dot(f, f))
        lam = 1.0
        accepted = False
        for _ in range(40):
            xn = np.maximum(x + lam * d, lower)
            rawn, normsn = fun_raw(xn)
            fn = _effective_residual(rawn, scales)
            phin = float(np.dot(fn, fn))
            if np.isfinite(phin) and phin < phi0:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            raise SolverError(
                f"line search stalled at iteration {it}, residual {norm_live:.3e}",
                best=best_x, residual_norm=best_norm, iterations=it)
        x, raw, norms = xn, rawn, normsn

    raise SolverError(
        f"no convergence after {opts.max_iterations} iterations, "
        f"residual {best_norm:.3e}",
        best=best_x, residual_norm=best_norm, iterations=opts.max_iterations)


# ---------------------------------------------------------------------------
# shape solves
# ---------------------------------------------------------------------------

def _check_solution(alphas, theta, spec, env, opts) -> None:
    """Re-evaluate the residual after a solve; never trust the solver report."""
    res = scaled_residual(alphas, theta, spec, env)
    raw = res.values / res.scales
    norm = float(np.max(np.abs(_effective_residual(raw, res.scales))))
    if norm > opts.tolerance:
        raise SolverError(f"post-solve residual re-check failed: {norm:.3e}",
                          best=alphas, residual_norm=norm)
    tau = res.raw_torques[:, 0]
    floor = -1e-9 * max(1.0, float(np.max(np.abs(tau))))
    if np.any(tau < floor):
        raise SolverError("solved state violates the positive-torque convention",
                          best=alphas, residual_norm=norm)


def solve_shape_for_field(theta: float, t: int, spec: CatheterSpec,
                          env: EnvironmentSpec, init=None,
                          options: SolveOptions | None = None,
                          trace=None) -> ChainConfiguration:
    """Equilibrium arc angles for a fixed field direction theta.

    The solve is local: supply ``init`` (or use ``solve_field_sweep`` for a
    far-from-straight target) when the straight chain is outside the basin.
    """
    opts = options or SolveOptions()
    if not 1 <= t <= spec.segment_count:
        raise DomainError(f"t={t} outside 1..{spec.segment_count}")
    kb = spec.stiffness_vector(t)
    _orientation_probe(spec, env)
    x0 = np.zeros(t) if init is None else np.asarray(init, dtype=float).copy()
    if x0.shape != (t,):
        raise DomainError(f"init must have length {t}")

    def fun_raw(x):
        tau = _chain_torque_x(x, theta, spec, env)
        return tau - kb * x, np.abs(tau)

    x, _ = _damped_newton(fun_raw, x0, lower=np.zeros(t), options=opts, trace=trace)
    _check_solution(x, theta, spec, env, opts)
    return chain_configuration(x, theta, spec)


def solve_field_sweep(theta: float, t: int, spec: CatheterSpec,
                      env: EnvironmentSpec, step: float = math.radians(1.0),
                      options: SolveOptions | None = None
                      ) -> tuple[ChainConfiguration, bool]:
    """Warm-started continuation in theta from the straight chain.

    Returns the final configuration and a monotonicity flag: False marks a
    decrease of the total bend along the sweep (possible bistability), which
    is reported rather than asserted away.
    """
    if theta < 0.0:
        raise DomainError("field sweep requires theta >= 0")
    thetas = list(np.arange(step, theta, step)) + ([theta] if theta > 0 else [0.0])
    init = np.zeros(t)
    monotone = True
    prev_bend = 0.0
    config = None
    for th in thetas:
        config = solve_shape_for_field(float(th), t, spec, env, init=init,
                                       options=options)
        if config.total_bend < prev_bend - 1e-12:
            monotone = False
        prev_bend = config.total_bend
        init = config.alphas
    if config is None:
        config = solve_shape_for_field(0.0, t, spec, env, options=options)
    return config, monotone


def initial_values(gamma: float, t: int, env: EnvironmentSpec, previous=None,
                   seed_angle: float = 1e-4):
    """Warm-start schedule for aligned solves.

    t=2 starts from the symmetric split with the field ahead of the tip by
    the steering margin (prorated with gamma); t>=3 prepends a seed angle to
    the previous state's solution.
    """
    if t == 2:
        theta0 = gamma + env.steering_margin * (gamma / math.pi)
        return theta0, np.array([gamma / 2.0, gamma / 2.0])
    if t < 2:
        raise DomainError("aligned solves require t >= 2")
    if previous is None:
        raise DomainError(f"t={t} warm start requires the t={t - 1} solution")
    theta_prev, alphas_prev = previous
    alphas_prev = np.asarray(alphas_prev, dtype=float)
    if alphas_prev.shape != (t - 1,):
        raise DomainError(f"previous solution must have length {t - 1}")
    return float(theta_prev), np.concatenate([[seed_angle], alphas_prev])


def solve_shape_aligned(gamma: float, t: int, spec: CatheterSpec,
                        env: EnvironmentSpec, target_point=None, init=None,
                        options: SolveOptions | None = None,
                        trace=None) -> ChainConfiguration:
    """Shape and field direction that align the chain with the target.

    For t=2 the closure is alpha_1 + alpha_2 = gamma; for t>=3 the tip axis
    z_1 is driven onto the fixed lumen center ``target_point`` through the
    signed in-plane alignment angle, weighted by the alignment scale.
    """
    opts = options or SolveOptions()
    if t < 2:
        raise DomainError("aligned solves require t >= 2")
    if t > spec.segment_count:
        raise DomainError(f"t={t} exceeds segment count {spec.segment_count}")
    if not 0.0 <= gamma <= math.pi:
        raise DomainError("steering direction gamma must lie in [0, pi] "
                          "(the model is planar)")
    kb = spec.stiffness_vector(t)
    _orientation_probe(spec, env)
    if t >= 3:
        if target_point is None:
            raise DomainError("t >= 3 aligned solve requires the lumen center point")
        if init is None:
            raise DomainError("t >= 3 aligned solves must be warm-started "
                              "(see initial_values)")
        target_point = np.asarray(target_point, dtype=float)
    if init is None:
        init = initial_values(gamma, t, env, seed_angle=opts.seed_angle)
    theta0, alpha0 = init
    alpha0 = np.asarray(alpha0, dtype=float)
    if alpha0.shape != (t,):
        raise DomainError(f"init alpha must have length {t}")

    s_a = opts.alignment_scale

    def fun_raw(x):
        theta = x[0]
        alphas = x[1:]
        tau = _chain_torque_x(alphas, theta, spec, env)
        raw = np.empty(t + 1)
        norms = np.empty(t + 1)
        if t == 2:
            raw[0] = alphas[0] + alphas[1] - gamma
        else:
            poses = compose_world_poses(alphas, spec)
            v = target_direction(poses[0][:3, 3], target_point)
            raw[0] = s_a * signed_plane_angle(poses[0][:3, 2], v)
        norms[0] = 0.0  # closure/alignment row is already O(1)
        raw[1:] = tau - kb * alphas
        norms[1:] = np.abs(tau)
        return raw, norms

    x0 = np.concatenate([[theta0], alpha0])
    lower = np.concatenate([[-np.inf], np.zeros(t)])
    x, _ = _damped_newton(fun_raw, x0, lower=lower, options=opts, trace=trace)
    theta_star, alphas_star = float(x[0]), x[1:]
    _check_solution(alphas_star, theta_star, spec, env, opts)
    return chain_configuration(alphas_star, theta_star, spec)


def dump_solver_trace(trace, path) -> None:
    """Write iteration rows (step, residual norm, state vector) as CSV."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        width = max((len(row[2]) for row in trace), default=0)
        writer.writerow(["step", "residual_norm"] + [f"x{i}" for i in range(width)])
        for step, norm, x in trace:
            writer.writerow([step, f"{norm:.12e}"] + [f"{v:.12e}" for v in x])
