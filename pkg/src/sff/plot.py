"""Deterministic SVG rendering of scenario maps, BRT contours and trajectories."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from skimage.measure import find_contours

from .fields import ValueField
from .regions import Region

SIZE = 480  # drawing width in pixels; height follows the workspace aspect
PAD = 24

COLORS = {
    "obstacle": "#555555",
    "goal": "#2e8b57",
    "zone": "#e0a030",
    "start": "#4169e1",
    "region": "#9ab8d8",
}


def _clip(poly: list[np.ndarray], a: np.ndarray, b: float) -> list[np.ndarray]:
    """Clip a convex polygon to ``a . p <= b``."""
    out = []
    for i, p in enumerate(poly):
        q = poly[(i + 1) % len(poly)]
        fp, fq = a @ p - b, a @ q - b
        if fp <= 0:
            out.append(p)
        if fp * fq < 0:
            out.append(p + (q - p) * (fp / (fp - fq)))
    return out


def region_polygon(region: Region, workspace: Sequence[Sequence[float]]) -> list[np.ndarray]:
    """Vertices of ``region`` intersected with the workspace rectangle."""
    (x0, x1), (y0, y1) = workspace[0], workspace[1]
    poly = [np.array(v, dtype=float) for v in ((x0, y0), (x1, y0), (x1, y1), (x0, y1))]
    for a, b in region.faces():
        poly = _clip(poly, np.asarray(a, dtype=float)[:2], float(b))
        if not poly:
            break
    return poly


def zero_contours(field: ValueField, dims: Sequence[int] = (0, 1), at=None) -> list[np.ndarray]:
    """Zero level set of ``field`` in the plane ``dims`` as polylines in state units.

    Fields with more than two axes are sliced at the node nearest ``at``
    along the remaining axes.
    """
    grid = field.grid
    v = field.values
    if grid.ndim > 2:
        idx = []
        for axis in range(grid.ndim):
            if axis in dims:
                idx.append(slice(None))
            else:
                pts = grid.axes[axis].points
                c = 0.0 if at is None else float(at[axis])
                idx.append(int(np.argmin(np.abs(pts - c))))
        v = v[tuple(idx)]
    if dims[0] > dims[1]:
        v = v.T
    lo = grid.lo[list(dims)]
    h = grid.spacing[list(dims)]
    return [lo + c * h for c in find_contours(v, 0.0)]


def _fmt(x: float) -> str:
    s = f"{x:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


class _Canvas:
    def __init__(self, workspace):
        (self.x0, x1), (self.y0, y1) = workspace[0], workspace[1]
        self.scale = SIZE / (x1 - self.x0)
        self.width = SIZE + 2 * PAD
        self.height = int(round((y1 - self.y0) * self.scale)) + 2 * PAD
        self.y1 = y1

    def xy(self, p) -> tuple[str, str]:
        return _fmt(PAD + (p[0] - self.x0) * self.scale), _fmt(PAD + (self.y1 - p[1]) * self.scale)

    def pt(self, p) -> str:
        return ",".join(self.xy(p))


def render_svg(scenario, field: ValueField | None = None, trajectory: np.ndarray | None = None,
               title: str | None = None) -> str:
    """SVG text of the scenario map with optional BRT contour and trajectory.

    Output depends only on the inputs, so equal inputs give byte-identical
    files.
    """
    ws = scenario.workspace
    cv = _Canvas(ws)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{cv.width}" height="{cv.height}" '
        f'viewBox="0 0 {cv.width} {cv.height}">',
        f'<rect x="0" y="0" width="{cv.width}" height="{cv.height}" fill="white"/>',
        f'<polygon points="{" ".join(cv.pt(p) for p in region_polygon(Region("ws", box=tuple(map(tuple, ws))), ws))}" '
        'fill="none" stroke="black" stroke-width="1"/>',
    ]
    if title:
        out.append(f'<text x="{PAD}" y="{PAD - 8}" font-family="sans-serif" font-size="12">{_escape(title)}</text>')
    for name in sorted(scenario.regions):
        r = scenario.regions[name]
        poly = region_polygon(r, ws)
        if len(poly) < 3:
            continue
        color = COLORS.get(r.kind, COLORS["region"])
        dash = ' stroke-dasharray="4,2"' if r.window is not None else ""
        out.append(f'<polygon points="{" ".join(cv.pt(p) for p in poly)}" fill="{color}" '
                   f'fill-opacity="0.45" stroke="{color}"{dash}/>')
        x, y = cv.xy(np.mean(poly, axis=0))
        out.append(f'<text x="{x}" y="{y}" font-family="sans-serif" '
                   f'font-size="11" text-anchor="middle">{_escape(name)}</text>')
    if field is not None:
        dims = scenario.position_dims
        for line in zero_contours(field, dims, scenario.x0):
            out.append(f'<polyline points="{" ".join(cv.pt(p) for p in line)}" fill="none" '
                       'stroke="#c0392b" stroke-width="1.5"/>')
    if trajectory is not None:
        pts = np.asarray(trajectory, dtype=float)[:, list(scenario.position_dims)]
        out.append(f'<polyline points="{" ".join(cv.pt(p) for p in pts)}" fill="none" '
                   'stroke="#1f3a93" stroke-width="2"/>')
        for p in pts:
            x, y = cv.xy(p)
            out.append(f'<circle cx="{x}" cy="{y}" r="2" fill="#1f3a93"/>')
    x, y = cv.xy(np.asarray(scenario.x0)[list(scenario.position_dims)])
    out.append(f'<circle cx="{x}" cy="{y}" r="4" fill="black"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


__all__ = ["region_polygon", "render_svg", "zero_contours"]
