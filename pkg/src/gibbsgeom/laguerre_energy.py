"""Vertex-count energy of Laguerre diagrams and its conditional machinery.

The energy of a finite generator set is the sum over generators of the number
of vertices of their cells, infinite as soon as some cell is empty.  The
infinite case is a distinct flag, never a float sentinel.

Two evaluation routes exist: the diagram route (cell polygons, the literal
definition) and a fast route through the lifted convex hull, where the energy
equals three times the number of lower-hull triangles.  Tests hold the two
routes against each other; samplers use the fast one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .config import (
    Box,
    Configuration,
    MarkedPoint,
    Vec,
    WeightMark,
    Window,
    centered_box,
    origin_ball,
)
from .laguerre import (
    Cell,
    LaguerreDiagram,
    REL_TOL,
    build_diagram,
    check_general_position,
    default_bbox,
    generators_of,
    nuclei_hull_covers,
)
from .tempered import satisfies_ball_clearance, temperedness_level


class ClippedCellError(ValueError):
    """The bounding box cut a cell whose vertex count was requested."""


@dataclass
class VertexCountEnergy:
    per_cell_counts: list[int]
    empty_cells: list[int]
    clipped_cells: list[int]

    @property
    def infinite(self) -> bool:
        return bool(self.empty_cells)

    @property
    def value(self) -> int:
        if self.infinite:
            raise ValueError("energy is infinite (empty cell present)")
        return sum(self.per_cell_counts)

    def as_float(self) -> float:
        return math.inf if self.infinite else float(self.value)


def vertex_count_energy(
    gamma: Configuration | LaguerreDiagram,
    bbox: Box | None = None,
    allow_clipped: bool = False,
) -> VertexCountEnergy:
    """Diagram-route energy: per-cell counts of real vertices.

    Clipped cells make per-cell counts unreliable when true vertices might fall
    outside the box; by default their presence raises.  Callers that guarantee
    a box containing the whole vertex skeleton may opt in via allow_clipped.
    """
    dia = gamma if isinstance(gamma, LaguerreDiagram) else build_diagram(gamma, bbox)
    clipped = dia.clipped_cells()
    if clipped and not allow_clipped:
        raise ClippedCellError(
            f"cells {clipped} are clipped at the bounding box; enlarge it or pass allow_clipped=True"
        )
    counts = [c.real_vertex_count() for c in dia.cells]
    return VertexCountEnergy(counts, list(dia.empty_cells), clipped)


# ---------------------------------------------------------------------------
# Fast route: lifted convex hull
# ---------------------------------------------------------------------------


def triangulation_vertex_energy(
    nuclei: np.ndarray, weights: np.ndarray
) -> tuple[int | None, bool]:
    """(energy value or None when infinite, used_fallback).

    Lifts generators to (x, y, |x|^2 - w^2); lower-hull triangles correspond
    one-to-one to diagram vertices, each shared by three cells, so the energy
    is 3x the triangle count.  Generators absent from the lower hull have empty
    cells.  Degenerate hulls fall back to the diagram route.
    """
    n = len(weights)
    if n <= 2:
        return 0, False
    nuclei = np.asarray(nuclei, dtype=float).reshape(n, 2)
    if n == 3:
        a, b, c = nuclei
        det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        span = max(float(np.abs(nuclei).max()), 1.0)
        if abs(det) <= 1e-12 * span * span:
            return _slow_energy(nuclei, weights)
        return 3, False
    from scipy.spatial import ConvexHull, QhullError

    lift = np.column_stack([nuclei, np.einsum("ij,ij->i", nuclei, nuclei) - weights**2])
    try:
        hull = ConvexHull(lift)
    except QhullError:
        return _slow_energy(nuclei, weights)
    if len(hull.coplanar):
        return _slow_energy(nuclei, weights)
    eq = hull.equations
    lower = eq[:, 2] < -1e-12
    if np.any(np.abs(eq[:, 2]) <= 1e-12):
        return _slow_energy(nuclei, weights)
    # merged coplanar neighbors on the lower hull signal a degenerate quadruple
    simplices = hull.simplices[lower]
    eqs_low = eq[lower]
    neigh = hull.neighbors[lower]
    lower_ids = set(np.nonzero(lower)[0])
    id_map = {f: k for k, f in enumerate(np.nonzero(lower)[0])}
    for k, nb in enumerate(neigh):
        for f in nb:
            if f in lower_ids:
                other = eqs_low[id_map[f]]
                if np.allclose(other, eqs_low[k], atol=1e-12):
                    return _slow_energy(nuclei, weights)
    tri_count = int(lower.sum())
    on_lower = set(int(v) for v in simplices.ravel())
    if len(on_lower) < n:
        return None, False
    return 3 * tri_count, False


def _slow_energy(nuclei: np.ndarray, weights: np.ndarray) -> tuple[int | None, bool]:
    res = vertex_count_energy((nuclei, weights), allow_clipped=True)
    return (None, True) if res.infinite else (res.value, True)


def energy_value(gamma: Configuration, fast: bool = True) -> int | None:
    """Integer vertex-count energy, None when infinite."""
    nuclei, weights = generators_of(gamma)
    if fast:
        val, _ = triangulation_vertex_energy(nuclei, weights)
        return val
    res = vertex_count_energy(gamma, allow_clipped=True)
    return None if res.infinite else res.value


# ---------------------------------------------------------------------------
# Removal identity and its local Euler bookkeeping
# ---------------------------------------------------------------------------


@dataclass
class RemovalBreakdown:
    diff: int
    k: int  # vertices (= neighbors) of the removed cell
    new_vertices: int  # |V2|
    new_edges: int  # |E2|
    lost_vertices: int  # old corners of the removed cell that disappeared

    def euler_identities_hold(self) -> bool:
        return (
            3 * (self.k + self.new_vertices) == 2 * (self.k + self.new_edges)
            and self.k + self.new_vertices == self.new_edges + 1
        )


def _point_in_polygon(pt: Vec, poly: Sequence[Vec], margin: float) -> bool:
    m = len(poly)
    for t in range(m):
        a, b = poly[t], poly[(t + 1) % m]
        # inward normal of CCW edge
        nx, ny = -(b[1] - a[1]), b[0] - a[0]
        ln = math.hypot(nx, ny)
        if ln == 0.0:
            continue
        if ((pt[0] - a[0]) * nx + (pt[1] - a[1]) * ny) / ln < margin:
            return False
    return True


def _clip_segment_to_polygon(a: Vec, b: Vec, poly: Sequence[Vec]) -> tuple[Vec, Vec] | None:
    t0, t1 = 0.0, 1.0
    dx, dy = b[0] - a[0], b[1] - a[1]
    m = len(poly)
    for t in range(m):
        p, q = poly[t], poly[(t + 1) % m]
        nx, ny = -(q[1] - p[1]), q[0] - p[0]  # inward normal
        den = nx * dx + ny * dy
        num = nx * (p[0] - a[0]) + ny * (p[1] - a[1])
        if abs(den) < 1e-300:
            if num > 0.0:
                return None
            continue
        r = num / den
        if den > 0.0:
            t0 = max(t0, r)
        else:
            t1 = min(t1, r)
        if t0 > t1:
            return None
    return (
        (a[0] + t0 * dx, a[1] + t0 * dy),
        (a[0] + t1 * dx, a[1] + t1 * dy),
    )


def removal_breakdown(gamma: Configuration, i: int, bbox: Box | None = None) -> RemovalBreakdown:
    """Energy drop from deleting generator i plus the local graph counts.

    Preconditions (checked): general position, no empty cells, and the removed
    cell bounded and unclipped.  The vertex-set difference of the two diagrams
    gives the new vertices; new edges are the pieces of the post-removal edge
    skeleton that run through the removed cell's interior.
    """
    nuclei, weights = generators_of(gamma)
    if bbox is None:
        bbox = default_bbox(nuclei)
    gp = check_general_position(gamma)
    if not gp.in_general_position:
        raise ValueError("configuration not in general position")
    dia_full = build_diagram((nuclei, weights), bbox)
    if dia_full.empty_cells:
        raise ValueError("configuration has empty cells")
    cell = dia_full.cells[i]
    if cell.empty or cell.clipped:
        raise ValueError("removed cell must be bounded and unclipped")

    keep = [t for t in range(len(weights)) if t != i]
    dia_minus = build_diagram((nuclei[keep], weights[keep]), bbox)
    if dia_minus.empty_cells:
        raise ValueError("removal produced an empty cell; fixture violates preconditions")

    e_full = vertex_count_energy(dia_full, allow_clipped=True)
    e_minus = vertex_count_energy(dia_minus, allow_clipped=True)
    diff = e_full.value - e_minus.value

    tol = 10.0 * REL_TOL * dia_full.scale
    old_pts = [v.point for v in dia_full.vertices]
    new_vertices = 0
    for v in dia_minus.vertices:
        if v.on_bbox:
            continue
        if all(math.dist(v.point, q) > tol for q in old_pts):
            new_vertices += 1
    new_pts = [v.point for v in dia_minus.vertices]
    lost = 0
    for v in dia_full.vertices:
        if v.on_bbox:
            continue
        if all(math.dist(v.point, q) > tol for q in new_pts):
            lost += 1

    poly = cell.vertices
    margin = tol
    new_edges = 0
    for e in dia_minus.edges:
        seg = _clip_segment_to_polygon(e.endpoints[0], e.endpoints[1], poly)
        if seg is None:
            continue
        if math.dist(seg[0], seg[1]) <= tol:
            continue
        mid = ((seg[0][0] + seg[1][0]) / 2.0, (seg[0][1] + seg[1][1]) / 2.0)
        if _point_in_polygon(mid, poly, margin):
            new_edges += 1

    return RemovalBreakdown(
        diff=diff,
        k=len(cell.vertices),
        new_vertices=new_vertices,
        new_edges=new_edges,
        lost_vertices=lost,
    )


def removal_diff(gamma: Configuration, i: int, bbox: Box | None = None) -> int:
    """H(gamma) - H(gamma without generator i); equals 6 for a bounded cell of
    a general-position configuration with no empty cells."""
    return removal_breakdown(gamma, i, bbox).diff


# ---------------------------------------------------------------------------
# Conditional energy
# ---------------------------------------------------------------------------


@dataclass
class ConditionalEnergyResult:
    value: int | None
    stabilized_at: int | None
    values: dict[int, int | None]

    @property
    def stabilized(self) -> bool:
        return self.stabilized_at is not None


def laguerre_conditional_energy(
    gamma_window: Configuration,
    boundary: Configuration,
    window: Window,
    n_schedule: Sequence[int],
    fast: bool = True,
) -> ConditionalEnergyResult:
    """Energy difference H(gamma on [-n,n)^2) - H(off-window part) along an
    increasing schedule; reported as stabilized once two consecutive schedule
    values agree exactly.  Never extrapolates."""
    for p in boundary:
        if window.contains(p.location):
            raise ValueError("boundary configuration intersects the window")
    for p in gamma_window:
        if not window.contains(p.location):
            raise ValueError("gamma_window has a point outside the window")
    if list(n_schedule) != sorted(set(n_schedule)):
        raise ValueError("n_schedule must be strictly increasing")
    full = gamma_window.union(boundary)
    values: dict[int, int | None] = {}
    prev: tuple[int, int | None] | None = None
    result_val: int | None = None
    stabilized_at: int | None = None
    for n in n_schedule:
        box = centered_box(n, 2)
        inside = full.restrict(box)
        outside = Configuration(
            [p for p in inside if not window.contains(p.location)], dim=2
        )
        ein = energy_value(inside, fast=fast)
        eout = energy_value(outside, fast=fast)
        val = None if (ein is None or eout is None) else ein - eout
        values[n] = val
        if (
            stabilized_at is None
            and prev is not None
            and val is not None
            and prev[1] == val
        ):
            stabilized_at = n
            result_val = val
        prev = (n, val)
    return ConditionalEnergyResult(result_val, stabilized_at, values)


# ---------------------------------------------------------------------------
# Shielding sets (C1)/(C2) and admissibility
# ---------------------------------------------------------------------------


@dataclass
class ShieldingReport:
    c1: bool
    c2: bool
    grid_resolution: float
    window_n: int
    level: int
    mark_bound: float
    failures: list[Vec] = field(default_factory=list)

    @property
    def verdict(self) -> bool:
        return self.c1 and self.c2


def check_shielding(
    boundary: Configuration,
    window: Window,
    mark_bound: float,
    level: int,
    window_n: int,
    grid_step: float,
) -> ShieldingReport:
    """(C1): the boundary has a witness point inside U(0, level/2) within the
    annulus [-window_n, window_n)^2 minus the window.  (C2): for nuclei on a
    grid over the window, the cell of a generator with the maximal mark against
    the truncated boundary stays inside U(0, level/2).

    The mark-monotonicity of cells (heavier marks give larger cells) reduces
    the quantifier over configurations to the single maximal mark; the grid
    resolution is reported, and nothing finer is claimed.
    """
    shell = centered_box(window_n, 2)
    ring = Configuration(
        [p for p in boundary.restrict(shell) if not window.contains(p.location)], dim=2
    )
    half = 0.5 * level
    c1 = any(math.hypot(*p.location) < half for p in ring)

    if isinstance(window, Box):
        los, ups = window.lower, window.upper
    else:
        los = tuple(c - window.radius for c in window.center)
        ups = tuple(c + window.radius for c in window.center)
    xs = np.arange(los[0], ups[0] + grid_step / 2.0, grid_step)
    ys = np.arange(los[1], ups[1] + grid_step / 2.0, grid_step)
    nuclei_r, weights_r = generators_of(ring)
    bbox = default_bbox(
        np.vstack([nuclei_r, [[los[0], los[1]], [ups[0], ups[1]]]]) if len(ring) else None,
        factor=6.0,
        minimum=4.0 * window_n,
    )
    c2 = True
    failures: list[Vec] = []
    for gx in xs:
        for gy in ys:
            probe = (float(gx), float(gy))
            if not window.contains(probe):
                continue
            pts = np.vstack([nuclei_r, [probe]]) if len(ring) else np.array([probe])
            wts = np.append(weights_r, mark_bound)
            dia = build_diagram((pts, wts), bbox)
            cell = dia.cells[len(wts) - 1]
            ok = (
                not cell.empty
                and not cell.clipped
                and all(math.hypot(*v) < half for v in cell.vertices)
            )
            if not ok:
                c2 = False
                failures.append(probe)
    return ShieldingReport(
        c1=c1,
        c2=c2,
        grid_resolution=grid_step,
        window_n=window_n,
        level=level,
        mark_bound=mark_bound,
        failures=failures,
    )


@dataclass
class AdmissibilityReport:
    gp1: bool
    gp2: bool
    no_empty: bool
    tempered_level: int | None
    clearance_level: int | None
    clearance_range: tuple[int, int] | None
    hull_covers_window: bool
    params: dict

    @property
    def admissible_on_verified_ranges(self) -> bool:
        return (
            self.gp1
            and self.gp2
            and self.no_empty
            and self.tempered_level is not None
            and self.clearance_level is not None
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "gp1": self.gp1,
                "gp2": self.gp2,
                "no_empty": self.no_empty,
                "tempered_level": self.tempered_level,
                "clearance_level": self.clearance_level,
                "clearance_range": list(self.clearance_range) if self.clearance_range else None,
                "hull_covers_window": self.hull_covers_window,
                "params": self.params,
            },
            sort_keys=True,
        )


def is_admissible(
    gamma: Configuration,
    observation_window: Window,
    delta: float = 0.5,
    l_max: int | None = None,
    k_max: int | None = None,
    bbox: Box | None = None,
) -> AdmissibilityReport:
    """Aggregate the checkable admissibility flags on declared ranges.

    Full-plane coverage of the nuclei hull cannot be certified from finite
    data; coverage is reported relative to the observation window only.
    """
    from .tempered import configuration_extent

    ext = configuration_extent(gamma)
    if l_max is None:
        l_max = int(math.ceil(ext)) + 1
    if k_max is None:
        k_max = 2 * l_max
    gp = check_general_position(gamma)
    dia = build_diagram(gamma, bbox)
    t = temperedness_level(gamma, 2, delta, l_max)
    clearance: int | None = None
    for l in range(1, k_max + 1):
        if satisfies_ball_clearance(gamma, l, k_max):
            clearance = l
            break
    return AdmissibilityReport(
        gp1=gp.gp1,
        gp2=gp.gp2,
        no_empty=not dia.empty_cells,
        tempered_level=t,
        clearance_level=clearance,
        clearance_range=(clearance, k_max) if clearance is not None else None,
        hull_covers_window=nuclei_hull_covers(gamma, observation_window),
        params={"delta": delta, "l_max": l_max, "k_max": k_max},
    )
