"""Minimal SVG emission for trajectory figures: ground-truth points as
translucent background markers, integrated paths as polylines, both colored
by time. Hand-rolled to avoid any imaging dependency."""

from __future__ import annotations

import numpy as np

# Five-stop gradient, dark blue through green to yellow.
_PALETTE = np.array([
    (68, 1, 84),
    (59, 82, 139),
    (33, 145, 140),
    (94, 201, 98),
    (253, 231, 37),
], dtype=np.float64)


def time_color(fraction: float) -> str:
    """Hex color for a time fraction in [0, 1]."""
    f = min(max(float(fraction), 0.0), 1.0) * (len(_PALETTE) - 1)
    lo = int(np.floor(f))
    hi = min(lo + 1, len(_PALETTE) - 1)
    rgb = _PALETTE[lo] + (f - lo) * (_PALETTE[hi] - _PALETTE[lo])
    return "#%02x%02x%02x" % tuple(int(round(v)) for v in rgb)


def _fit_box(points: np.ndarray, width: int, height: int, margin: int):
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = np.maximum(hi - lo, 1e-12)
    scale = min((width - 2 * margin) / span[0], (height - 2 * margin) / span[1])

    def project(xy):
        xy = np.atleast_2d(xy)
        px = margin + (xy[:, 0] - lo[0]) * scale
        py = height - margin - (xy[:, 1] - lo[1]) * scale
        return np.column_stack([px, py])

    return project


def trajectory_svg(background, paths: np.ndarray, path_times: np.ndarray,
                   width: int = 720, height: int = 540) -> str:
    """Render a trajectory figure as an SVG string.

    ``background`` is a list of (time, (n, 2) points); ``paths`` is a
    (trajectories, steps, 2) array sampled at ``path_times``.
    """
    paths = np.asarray(paths, dtype=np.float64)
    path_times = np.asarray(path_times, dtype=np.float64)
    if paths.ndim != 3 or paths.shape[2] != 2:
        raise ValueError("paths must have shape (trajectories, steps, 2)")
    everything = [pts for _, pts in background] + [paths.reshape(-1, 2)]
    project = _fit_box(np.concatenate(everything, axis=0), width, height, margin=24)

    bg_times = [t for t, _ in background]
    t_lo = min(list(bg_times) + [path_times.min()])
    t_hi = max(list(bg_times) + [path_times.max()])
    t_span = max(t_hi - t_lo, 1e-12)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for t, pts in background:
        color = time_color((t - t_lo) / t_span)
        for px, py in project(pts):
            parts.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="2.4" '
                         f'fill="{color}" fill-opacity="0.28"/>')
    for traj in paths:
        proj = project(traj)
        for s in range(len(proj) - 1):
            color = time_color((path_times[s] - t_lo) / t_span)
            x1, y1 = proj[s]
            x2, y2 = proj[s + 1]
            parts.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
                         f'stroke="{color}" stroke-width="1.1" stroke-opacity="0.85"/>')
    parts.append("</svg>")
    return "\n".join(parts)
