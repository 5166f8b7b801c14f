"""Deterministic SVG scenes for diagrams and facet configurations."""

from __future__ import annotations

import math
from typing import Sequence

from .config import Configuration, FacetMark
from .facets import facet_of
from .laguerre import LaguerreDiagram


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def _header(xmin: float, ymin: float, width: float, height: float) -> str:
    return (
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{_fmt(xmin)} {_fmt(ymin)} {_fmt(width)} {_fmt(height)}">'
    )


DEFAULT_STYLE = {
    "cell_stroke": "#1f3a5f",
    "cell_fill": "none",
    "generator_fill": "#c23b22",
    "generator_opacity": "0.35",
    "facet_stroke": "#1f3a5f",
    "overlay_stroke": "#c23b22",
    "stroke_width": 0.01,
}


def render_diagram_svg(
    dia: LaguerreDiagram,
    style: dict | None = None,
    overlay_edges: Sequence[tuple[tuple, tuple]] = (),
) -> str:
    """Cells as closed paths, generators as weight-radius circles; optional
    overlay edges rendered dashed.  Output is byte-deterministic."""
    st = dict(DEFAULT_STYLE)
    if style:
        st.update(style)
    bb = dia.bbox
    w = bb.upper[0] - bb.lower[0]
    h = bb.upper[1] - bb.lower[1]
    sw = st["stroke_width"] * max(w, h)
    parts = [_header(bb.lower[0], bb.lower[1], w, h)]
    for cell in dia.cells:
        if cell.empty or not cell.vertices:
            continue
        d = "M " + " L ".join(f"{_fmt(x)} {_fmt(y)}" for x, y in cell.vertices) + " Z"
        parts.append(
            f'<path d="{d}" fill="{st["cell_fill"]}" stroke="{st["cell_stroke"]}" '
            f'stroke-width="{_fmt(sw)}"/>'
        )
    for (x, y), wt in zip(dia.nuclei.tolist(), dia.weights.tolist()):
        parts.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(wt)}" '
            f'fill="{st["generator_fill"]}" fill-opacity="{st["generator_opacity"]}"/>'
        )
    for (a, b) in overlay_edges:
        parts.append(
            f'<line x1="{_fmt(a[0])}" y1="{_fmt(a[1])}" x2="{_fmt(b[0])}" y2="{_fmt(b[1])}" '
            f'stroke="{st["overlay_stroke"]}" stroke-width="{_fmt(sw)}" '
            f'stroke-dasharray="{_fmt(4 * sw)} {_fmt(2 * sw)}"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def render_facets_svg(gamma: Configuration, style: dict | None = None, margin: float = 1.0) -> str:
    """Planar facet configurations as line segments with center dots."""
    st = dict(DEFAULT_STYLE)
    if style:
        st.update(style)
    segs = []
    xs: list[float] = []
    ys: list[float] = []
    for p in gamma:
        if not isinstance(p.mark, FacetMark):
            raise TypeError("facet rendering requires facet marks")
        a, b = facet_of(p).endpoints2d()
        segs.append((a, b, p.location))
        xs += [a[0], b[0]]
        ys += [a[1], b[1]]
    if not segs:
        xs, ys = [0.0], [0.0]
    xmin, xmax = min(xs) - margin, max(xs) + margin
    ymin, ymax = min(ys) - margin, max(ys) + margin
    w, h = xmax - xmin, ymax - ymin
    sw = st["stroke_width"] * max(w, h)
    parts = [_header(xmin, ymin, w, h)]
    for a, b, c in segs:
        parts.append(
            f'<line x1="{_fmt(a[0])}" y1="{_fmt(a[1])}" x2="{_fmt(b[0])}" y2="{_fmt(b[1])}" '
            f'stroke="{st["facet_stroke"]}" stroke-width="{_fmt(sw)}"/>'
        )
        parts.append(
            f'<circle cx="{_fmt(c[0])}" cy="{_fmt(c[1])}" r="{_fmt(2 * sw)}" '
            f'fill="{st["generator_fill"]}"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
