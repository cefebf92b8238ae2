"""Minimal SVG line plot for trajectories (no plotting dependency).

Draws ||x(t)|| and each multiplier component as polylines in a fixed-size
frame with a light axis box and a legend. Output is a standalone SVG file.
"""

from __future__ import annotations

import numpy as np

__all__ = ["trajectory_svg", "write_svg"]

_WIDTH = 720
_HEIGHT = 420
_MARGIN = 50
_COLORS = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"]


def _scale(vals, lo, hi, out_lo, out_hi):
    span = hi - lo
    if span <= 0.0:
        span = 1.0
    return out_lo + (vals - lo) / span * (out_hi - out_lo)


def _polyline(xs, ys, color, width=1.5):
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    return (
        f'<polyline fill="none" stroke="{color}" stroke-width="{width}" '
        f'points="{pts}"/>'
    )


def trajectory_svg(traj, title="trajectory"):
    """Render the trajectory as an SVG document string."""
    times = traj.times
    norms = np.linalg.norm(traj.states, axis=1)
    series = [("||x||", norms, "#000000")]
    m = traj.lambdas.shape[1]
    for j in range(m):
        series.append(
            (f"lambda_{j + 1}", traj.lambdas[:, j], _COLORS[j % len(_COLORS)])
        )
    all_vals = np.concatenate([s[1] for s in series])
    v_lo = float(np.min(all_vals))
    v_hi = float(np.max(all_vals))
    if v_lo == v_hi:
        v_lo -= 1.0
        v_hi += 1.0
    t_lo = float(times[0])
    t_hi = float(times[-1]) if times[-1] > times[0] else float(times[0]) + 1.0
    x_px_lo, x_px_hi = _MARGIN, _WIDTH - _MARGIN
    y_px_lo, y_px_hi = _HEIGHT - _MARGIN, _MARGIN  # SVG y grows downward
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<rect x="{x_px_lo}" y="{y_px_hi}" width="{x_px_hi - x_px_lo}" '
        f'height="{y_px_lo - y_px_hi}" fill="none" stroke="#888888"/>',
        f'<text x="{_WIDTH / 2:.0f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
        f'<text x="{x_px_lo}" y="{y_px_lo + 30}" font-family="sans-serif" '
        f'font-size="11">t = {t_lo:g} .. {t_hi:g}</text>',
        f'<text x="{x_px_hi}" y="{y_px_lo + 30}" text-anchor="end" '
        f'font-family="sans-serif" font-size="11">'
        f"range {v_lo:.4g} .. {v_hi:.4g}</text>",
    ]
    xs = _scale(times, t_lo, t_hi, x_px_lo, x_px_hi)
    for name, vals, color in series:
        ys = _scale(np.asarray(vals, dtype=float), v_lo, v_hi, y_px_lo, y_px_hi)
        parts.append(_polyline(xs, ys, color))
    for idx, (name, _, color) in enumerate(series):
        lx = x_px_lo + 10
        ly = y_px_hi + 16 + 16 * idx
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{lx + 28}" y="{ly}" font-family="sans-serif" '
            f'font-size="11">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(traj, path, title="trajectory"):
    """Write the trajectory plot to ``path``."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(trajectory_svg(traj, title))
