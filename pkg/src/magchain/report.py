"""Figure rendering for the CLI report paths.

Every command that writes a delimited report also renders the matching
matplotlib figure next to it. Figures are plot files only; there is no
interactive display.
"""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .config import rad_to_deg

_SAVE_KW = dict(dpi=150, bbox_inches="tight")


def fig_design_table(table, path) -> None:
    """Stiffness ladder bar chart."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    n = np.arange(1, len(table.stiffnesses) + 1)
    ax.bar(n, table.stiffnesses * 1e5, color="#4878a8")
    ax.set_xlabel("spring index n (distal to proximal)")
    ax.set_ylabel(r"$k_b$ ($10^{-5}$ N·m/rad)")
    ax.set_title("designed bending stiffness distribution")
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def fig_pivot_vs_gamma(records, path) -> None:
    """Pivot spread metrics over the steering direction."""
    g = [rad_to_deg(r.gamma) for r in records]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
    ax1.plot(g, [r.sigma * 1e3 for r in records], "o-", color="#33658a",
             label=r"$\sigma_\gamma$")
    ax1.plot(g, [r.d_max * 1e3 for r in records], "s-", color="#f26419",
             label=r"$d_{\gamma,max}$")
    ax1.set_xlabel("target direction (deg)")
    ax1.set_ylabel("pivot spread (mm)")
    ax1.legend()
    ax2.plot(g, [r.er_sigma * 100 for r in records], "o-", color="#33658a")
    ax2.plot(g, [r.er_dmax * 100 for r in records], "s-", color="#f26419")
    ax2.set_xlabel("target direction (deg)")
    ax2.set_ylabel("relative error (% of total length)")
    fig.suptitle("steering pivot stability")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def _heatmap(ax, records, lead_values, gamma_values, getter, lead_label, title):
    grid = np.full((len(gamma_values), len(lead_values)), np.nan)
    lead_idx = {v: i for i, v in enumerate(lead_values)}
    g_idx = {v: i for i, v in enumerate(gamma_values)}
    for r, lead in records:
        if r.ok:
            grid[g_idx[r.gamma], lead_idx[lead]] = getter(r)
    im = ax.pcolormesh(lead_values, [rad_to_deg(g) for g in gamma_values], grid,
                       shading="nearest", cmap="viridis")
    ax.set_xlabel(lead_label)
    ax.set_ylabel("target direction (deg)")
    ax.set_title(title)
    return im


def fig_sweep_heatmaps(records, vary: str, path) -> None:
    """Three-panel heatmaps: pivot RMS spread, max spread, shape error."""
    if vary == "B":
        lead_of = lambda r: r.field_magnitude * 1e3
        lead_label = "field magnitude (mT)"
    else:
        lead_of = lambda r: r.lumen_distance * 1e2
        lead_label = "lumen distance (cm)"
    pairs = [(r, lead_of(r)) for r in records]
    lead_values = sorted({lead for _, lead in pairs})
    gamma_values = sorted({r.gamma for r, _ in pairs})

    fig, axes = plt.subplots(1, 3, figsize=(12, 3.4))
    panels = [(lambda r: r.sigma * 1e3, "pivot RMS spread (mm)"),
              (lambda r: r.d_max * 1e3, "pivot max spread (mm)"),
              (lambda r: r.shape_error * 1e3, "shape error (mm)")]
    for ax, (getter, title) in zip(axes, panels):
        im = _heatmap(ax, pairs, lead_values, gamma_values, getter,
                      lead_label, title)
        fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def fig_efficiency(rows, path) -> None:
    """Bending and propulsion efficiency vs steering direction, per profile."""
    profiles = sorted({r.profile for r in rows})
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2), sharey=True)
    colors = {"optimized": "#33658a", "nonoptimized": "#f26419"}
    for prof in profiles:
        sel = [r for r in rows if r.profile == prof]
        g = [rad_to_deg(r.gamma) for r in sel]
        color = colors.get(prof)
        ax1.errorbar(g, [r.bend_eff_mean for r in sel],
                     yerr=[r.bend_eff_std for r in sel], fmt="o-", capsize=2,
                     label=prof, color=color)
        ax2.plot(g, [r.prop_eff_mean for r in sel], "s-", label=prof, color=color)
    ax1.set_xlabel("target direction (deg)")
    ax1.set_ylabel("bending efficiency")
    ax1.axhline(0.8, ls=":", color="gray")
    ax1.legend()
    ax2.set_xlabel("target direction (deg)")
    ax2.set_ylabel("propulsion efficiency")
    ax2.axhline(0.8, ls=":", color="gray")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def fig_spring_match(matches, path) -> None:
    """Designed vs matched bending stiffness per spring slot."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    n = np.arange(1, len(matches) + 1)
    width = 0.38
    ax.bar(n - width / 2, [m.design_value * 1e5 for m in matches], width,
           label="design", color="#33658a")
    ax.bar(n + width / 2, [m.entry.bending_stiffness * 1e5 for m in matches],
           width, label="matched", color="#f26419")
    for i, m in enumerate(matches, start=1):
        ax.text(i, max(m.design_value, m.entry.bending_stiffness) * 1e5,
                f"{m.relative_error*100:.1f}%", ha="center", va="bottom",
                fontsize=7)
    ax.set_xlabel("spring index n")
    ax.set_ylabel(r"$k_b$ ($10^{-5}$ N·m/rad)")
    ax.legend()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def _arc_points(alpha, l_s, l_m, samples=24):
    """Local polyline through one magnet-spring segment (frame n+1)."""
    pts = [np.array([0.0, 0.0]), np.array([0.0, l_m / 2.0])]  # y, z
    if alpha < 1e-9:
        pts.append(np.array([0.0, l_m / 2.0 + l_s]))
    else:
        r = l_s / alpha
        for s in np.linspace(0.0, alpha, samples):
            pts.append(np.array([-r * (1 - math.cos(s)), l_m / 2.0 + r * math.sin(s)]))
    return pts


def fig_chain_shape(config, spec, path, target_point=None) -> None:
    """Planar y-z rendering of one solved chain state."""
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    l_s = spec.spring_length
    l_m = spec.magnet.length
    t = config.t
    segs = []
    for n in range(t, 0, -1):
        base = config.poses[n]
        R = base[1:3, 1:3]
        p = base[1:3, 3]
        local = _arc_points(float(config.alphas[n - 1]), l_s, l_m)
        segs.extend([(p + R @ q) for q in local])
    ys = [q[0] * 1e3 for q in segs]
    zs = [q[1] * 1e3 for q in segs]
    ax.plot(ys, zs, "-", color="#888888", lw=1.2)
    pos = config.magnet_positions() * 1e3
    ax.plot(pos[:, 1], pos[:, 2], "o", color="#33658a", ms=6, label="magnets")
    ax.plot(pos[-1, 1], pos[-1, 2], "ks", ms=7, label="clamp")
    if target_point is not None:
        ax.plot(target_point[1] * 1e3, target_point[2] * 1e3, "g*", ms=10,
                label="lumen center")
    ax.set_xlabel("y (mm)")
    ax.set_ylabel("z (mm)")
    ax.set_aspect("equal")
    ax.legend(fontsize=8)
    ax.set_title(f"t={config.t}, theta={rad_to_deg(config.theta):.1f} deg")
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
