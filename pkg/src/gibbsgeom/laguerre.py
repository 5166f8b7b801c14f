"""Power-distance geometry and Laguerre diagrams for finite generator sets.

Cells are built literally as intersections of dominance half-planes, clipped at
a caller bounding box.  Each polygon edge remembers which constraint produced
it (a generator index or a bounding-box side), which gives neighbor relations,
the vertex/edge skeleton and clipping flags for free.

Degeneracy policy: predicates that decide flags (general position, emptiness)
get an exact rational fallback; constructed coordinates are floating point with
a relative tolerance of about 1e-9 of the bounding-box scale.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .config import (
    Ball,
    Box,
    Configuration,
    MarkedPoint,
    Vec,
    WeightMark,
    Window,
    origin_ball,
)
from .poisson import substream

REL_TOL = 1e-9


@dataclass(frozen=True)
class HalfPlane:
    """Closed half-plane {z : <normal, z> <= offset}."""

    normal: tuple[float, float]
    offset: float


def power_distance(z: Sequence[float], nucleus: Sequence[float], weight: float) -> float:
    """|nucleus - z|^2 - weight^2."""
    dx = nucleus[0] - z[0]
    dy = nucleus[1] - z[1]
    return dx * dx + dy * dy - weight * weight


def half_plane(g1: tuple[Vec, float], g2: tuple[Vec, float]) -> HalfPlane:
    """Half-plane of points at least as close (in power distance) to g1 as g2.

    Coefficients: normal 2*(y'-x'), offset |y'|^2 - |x'|^2 + u^2 - v^2; the
    boundary is the radical axis of the two weighted points.
    """
    (x, u), (y, v) = g1, g2
    if x == y:
        raise ValueError("coincident nuclei have no radical axis")
    c = (2.0 * (y[0] - x[0]), 2.0 * (y[1] - x[1]))
    beta = (y[0] ** 2 + y[1] ** 2) - (x[0] ** 2 + x[1] ** 2) + u * u - v * v
    return HalfPlane(c, beta)


def generators_of(gamma: Configuration) -> tuple[np.ndarray, np.ndarray]:
    """Split a weight-marked configuration into nuclei and weight arrays."""
    nuclei = []
    weights = []
    for p in gamma:
        if not isinstance(p.mark, WeightMark):
            raise TypeError("Laguerre generators require weight marks")
        nuclei.append(p.location)
        weights.append(p.mark.weight)
    return np.asarray(nuclei, dtype=float).reshape(len(weights), 2), np.asarray(weights)


# ---------------------------------------------------------------------------
# Polygon clipping with labeled edges
# ---------------------------------------------------------------------------

# an edge label is ("gen", j) or ("bbox", side)


def _clip_labeled(verts, labels, c, beta, new_label):
    """Clip a labeled convex polygon by {<c, z> <= beta}.

    Returns (vertices, labels) with the cut edge labeled new_label, or
    (None, None) when nothing survives.
    """
    m = len(verts)
    s = [beta - (c[0] * v[0] + c[1] * v[1]) for v in verts]
    if all(v >= 0.0 for v in s):
        return verts, labels
    if all(v < 0.0 for v in s):
        return None, None
    out_v = []
    out_l = []
    for i in range(m):
        j = (i + 1) % m
        si, sj = s[i], s[j]
        if si >= 0.0:
            out_v.append(verts[i])
            if sj >= 0.0:
                out_l.append(labels[i])
            else:
                t = si / (si - sj)
                xi = (
                    verts[i][0] + t * (verts[j][0] - verts[i][0]),
                    verts[i][1] + t * (verts[j][1] - verts[i][1]),
                )
                out_l.append(labels[i])
                out_v.append(xi)
                out_l.append(new_label)
        elif sj >= 0.0:
            t = si / (si - sj)
            xi = (
                verts[i][0] + t * (verts[j][0] - verts[i][0]),
                verts[i][1] + t * (verts[j][1] - verts[i][1]),
            )
            out_v.append(xi)
            out_l.append(labels[i])
    if len(out_v) < 3:
        return None, None
    return out_v, out_l


def _merge_short_edges(verts, labels, tol):
    """Drop zero-length edges produced by constraints through existing vertices."""
    if verts is None:
        return None, None
    keep_v = []
    keep_l = []
    m = len(verts)
    for i in range(m):
        j = (i + 1) % m
        if math.dist(verts[i], verts[j]) > tol:
            keep_v.append(verts[i])
            keep_l.append(labels[i])
        # else: merge verts[i] into verts[j]; the degenerate edge's label dies
    if len(keep_v) < 3:
        return None, None
    return keep_v, keep_l


# ---------------------------------------------------------------------------
# Exact emptiness of a half-plane intersection
# ---------------------------------------------------------------------------


def _exact_feasible(constraints: list[tuple[float, float, float]]) -> bool:
    """Exact feasibility of {(cx, cy, beta)} half-planes over the whole plane.

    Treats the float coefficients as exact rationals.  If two constraint
    normals are independent, a nonempty intersection is line-free and has a
    vertex given by two active constraints; otherwise the problem is a
    one-dimensional interval check along the common normal.
    """
    if not constraints:
        return True
    fr = [(Fraction(cx), Fraction(cy), Fraction(b)) for cx, cy, b in constraints]
    pivot = None
    for i, j in itertools.combinations(range(len(fr)), 2):
        d = fr[i][0] * fr[j][1] - fr[i][1] * fr[j][0]
        if d != 0:
            pivot = (i, j)
            break
    if pivot is None:
        # all normals parallel: project onto the first normal
        c0x, c0y, _ = fr[0]
        lo, hi = None, None  # bounds on q = <c0, z>
        for cx, cy, b in fr:
            # c = lam * c0
            lam = cx / c0x if c0x != 0 else cy / c0y
            if lam == 0:
                continue
            bound = b / lam
            if lam > 0:
                hi = bound if hi is None else min(hi, bound)
            else:
                lo = bound if lo is None else max(lo, bound)
        if lo is None or hi is None:
            return True
        return lo <= hi
    for i, j in itertools.combinations(range(len(fr)), 2):
        ai, bi, gi = fr[i]
        aj, bj, gj = fr[j]
        d = ai * bj - bi * aj
        if d == 0:
            continue
        px = (gi * bj - gj * bi) / d
        py = (ai * gj - aj * gi) / d
        if all(cx * px + cy * py <= b for cx, cy, b in fr):
            return True
    return False


# ---------------------------------------------------------------------------
# Diagram structures
# ---------------------------------------------------------------------------


@dataclass
class Cell:
    index: int
    vertices: list[Vec]  # CCW; empty list when EMPTY or outside the bbox
    edge_labels: list  # label of edge vertices[i] -> vertices[i+1]
    empty: bool
    clipped: bool
    neighbors: tuple[int, ...]

    def real_vertex_count(self) -> int:
        """Vertices where two generator half-planes meet (bbox corners excluded)."""
        m = len(self.vertices)
        cnt = 0
        for i in range(m):
            prev = self.edge_labels[i - 1]
            nxt = self.edge_labels[i]
            if prev[0] == "gen" and nxt[0] == "gen":
                cnt += 1
        return cnt


@dataclass
class DiagramVertex:
    point: Vec
    cells: tuple[int, ...]
    on_bbox: bool


@dataclass
class DiagramEdge:
    cells: tuple[int, int]
    endpoints: tuple[Vec, Vec]
    seen_from: int


@dataclass
class LaguerreDiagram:
    nuclei: np.ndarray
    weights: np.ndarray
    bbox: Box
    cells: list[Cell]
    vertices: list[DiagramVertex]
    edges: list[DiagramEdge]
    empty_cells: list[int]

    @property
    def scale(self) -> float:
        return self.bbox.diameter()

    def clipped_cells(self) -> list[int]:
        return [c.index for c in self.cells if c.clipped]


def default_bbox(nuclei: np.ndarray, factor: float = 4.0, minimum: float = 1.0) -> Box:
    """A centered box at least `factor` times the nucleus spread."""
    if len(nuclei) == 0:
        return Box((-minimum, -minimum), (minimum, minimum))
    lo = nuclei.min(axis=0)
    hi = nuclei.max(axis=0)
    center = (lo + hi) / 2.0
    half = max(float((hi - lo).max()) * factor / 2.0, minimum)
    return Box(tuple(center - half), tuple(center + half))


def build_diagram(gamma: Configuration | tuple[np.ndarray, np.ndarray], bbox: Box | None = None) -> LaguerreDiagram:
    """Laguerre diagram of a finite generator set, clipped at bbox.

    Every cell is the intersection of its dominance half-planes; neighbors are
    generators whose half-plane contributes an edge of positive length.
    """
    if isinstance(gamma, Configuration):
        nuclei, weights = generators_of(gamma)
    else:
        nuclei, weights = gamma
        nuclei = np.asarray(nuclei, dtype=float).reshape(len(weights), 2)
        weights = np.asarray(weights, dtype=float)
    n = len(weights)
    if bbox is None:
        bbox = default_bbox(nuclei)
    for p in nuclei:
        if not bbox.contains(tuple(p)):
            raise ValueError("bounding box must contain every nucleus")
    scale = max(bbox.diameter(), 1.0)
    len_tol = REL_TOL * scale

    lo, up = bbox.lower, bbox.upper
    base_verts = [(lo[0], lo[1]), (up[0], lo[1]), (up[0], up[1]), (lo[0], up[1])]
    base_labels = [("bbox", 0), ("bbox", 1), ("bbox", 2), ("bbox", 3)]

    cells: list[Cell] = []
    empty_cells: list[int] = []
    sq = np.einsum("ij,ij->i", nuclei, nuclei)
    for i in range(n):
        # nearest-in-power first keeps intermediate polygons small
        order = sorted(
            (j for j in range(n) if j != i),
            key=lambda j: (sq[j] - 2.0 * float(nuclei[i] @ nuclei[j]) - weights[j] ** 2, j),
        )
        verts, labels = base_verts, base_labels
        for j in order:
            c = (2.0 * (nuclei[j][0] - nuclei[i][0]), 2.0 * (nuclei[j][1] - nuclei[i][1]))
            beta = float(sq[j] - sq[i] + weights[i] ** 2 - weights[j] ** 2)
            verts, labels = _clip_labeled(verts, labels, c, beta, ("gen", j))
            if verts is None:
                break
        if verts is not None:
            verts, labels = _merge_short_edges(verts, labels, len_tol)
        if verts is None:
            cons = []
            for j in range(n):
                if j == i:
                    continue
                cons.append(
                    (
                        2.0 * (nuclei[j][0] - nuclei[i][0]),
                        2.0 * (nuclei[j][1] - nuclei[i][1]),
                        float(sq[j] - sq[i] + weights[i] ** 2 - weights[j] ** 2),
                    )
                )
            feasible = _exact_feasible(cons)
            if feasible:
                # the cell exists but lies outside the bounding box
                cells.append(Cell(i, [], [], empty=False, clipped=True, neighbors=()))
            else:
                empty_cells.append(i)
                cells.append(Cell(i, [], [], empty=True, clipped=False, neighbors=()))
            continue
        neigh = []
        clipped = False
        m = len(verts)
        for t in range(m):
            lab = labels[t]
            if lab[0] == "bbox":
                clipped = True
            elif math.dist(verts[t], verts[(t + 1) % m]) > len_tol:
                if lab[1] not in neigh:
                    neigh.append(lab[1])
        cells.append(Cell(i, verts, labels, empty=False, clipped=clipped, neighbors=tuple(sorted(neigh))))

    vertices = _collect_vertices(cells, bbox, scale)
    edges = _collect_edges(cells, scale)
    return LaguerreDiagram(nuclei, weights, bbox, cells, vertices, edges, empty_cells)


def _on_bbox_boundary(pt: Vec, bbox: Box, tol: float) -> bool:
    return (
        min(abs(pt[0] - bbox.lower[0]), abs(pt[0] - bbox.upper[0])) <= tol
        or min(abs(pt[1] - bbox.lower[1]), abs(pt[1] - bbox.upper[1])) <= tol
    )


def _collect_vertices(cells: list[Cell], bbox: Box, scale: float) -> list[DiagramVertex]:
    tol = 10.0 * REL_TOL * scale
    records = []  # (point, cell, labels_touching)
    for cell in cells:
        m = len(cell.vertices)
        for t in range(m):
            prev = cell.edge_labels[t - 1]
            nxt = cell.edge_labels[t]
            records.append((cell.vertices[t], cell.index, (prev, nxt)))
    clusters: list[list] = []
    grid: dict[tuple[int, int], list[int]] = {}
    inv = 1.0 / tol
    for pt, idx, labs in records:
        key = (int(math.floor(pt[0] * inv)), int(math.floor(pt[1] * inv)))
        hit = None
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for ci in grid.get((key[0] + dx, key[1] + dy), ()):
                    if math.dist(clusters[ci][0][0], pt) <= tol:
                        hit = ci
                        break
                if hit is not None:
                    break
            if hit is not None:
                break
        if hit is None:
            clusters.append([(pt, idx, labs)])
            grid.setdefault(key, []).append(len(clusters) - 1)
        else:
            clusters[hit].append((pt, idx, labs))
    out = []
    for cl in clusters:
        pt = cl[0][0]
        cells_in = tuple(sorted({idx for _, idx, _ in cl}))
        on_bb = any(l[0] == "bbox" for _, _, labs in cl for l in labs) or _on_bbox_boundary(
            pt, bbox, tol
        )
        out.append(DiagramVertex(pt, cells_in, on_bb))
    return out


def _collect_edges(cells: list[Cell], scale: float) -> list[DiagramEdge]:
    tol = 10.0 * REL_TOL * scale
    found: dict[tuple[int, int], list] = {}
    for cell in cells:
        m = len(cell.vertices)
        for t in range(m):
            lab = cell.edge_labels[t]
            if lab[0] != "gen":
                continue
            a, b = cell.vertices[t], cell.vertices[(t + 1) % m]
            if math.dist(a, b) <= tol:
                continue
            key = (min(cell.index, lab[1]), max(cell.index, lab[1]))
            found.setdefault(key, []).append((a, b))
    out = []
    for key, segs in sorted(found.items()):
        out.append(DiagramEdge(key, segs[0], seen_from=len(segs)))
    return out


# ---------------------------------------------------------------------------
# Checkers
# ---------------------------------------------------------------------------


@dataclass
class GeneralPositionReport:
    gp1: bool
    gp2: bool
    collinear_triples: list[tuple[int, int, int]]
    cocircular_quadruples: list[tuple[int, int, int, int]]

    @property
    def in_general_position(self) -> bool:
        return self.gp1 and self.gp2


def _orient_exact(p, q, r) -> int:
    ax, ay = Fraction(p[0]), Fraction(p[1])
    bx, by = Fraction(q[0]), Fraction(q[1])
    cx, cy = Fraction(r[0]), Fraction(r[1])
    d = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return 0 if d == 0 else (1 if d > 0 else -1)


def _lifted_det_exact(pts4) -> int:
    # rows (x, y, x^2 + y^2 - w^2, 1); zero determinant = common radical center
    rows = []
    for x, y, w in pts4:
        fx, fy, fw = Fraction(x), Fraction(y), Fraction(w)
        rows.append((fx, fy, fx * fx + fy * fy - fw * fw, Fraction(1)))
    r0 = rows[0]
    red = [tuple(r[k] - r0[k] for k in range(3)) for r in rows[1:]]
    (a, b, c), (d, e, f), (g, h, i) = red
    det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    return 0 if det == 0 else (1 if det > 0 else -1)


def check_general_position(gamma: Configuration) -> GeneralPositionReport:
    """No 3 collinear nuclei; no 4 generators sharing a radical center.

    A float determinant filters clear cases; near-zero determinants are decided
    exactly in rational arithmetic over the binary-float inputs.
    """
    nuclei, weights = generators_of(gamma)
    n = len(weights)
    collinear: list[tuple[int, int, int]] = []
    cocircular: list[tuple[int, int, int, int]] = []
    if n >= 3:
        idx = np.array(list(itertools.combinations(range(n), 3)))
        a = nuclei[idx[:, 0]]
        b = nuclei[idx[:, 1]]
        c = nuclei[idx[:, 2]]
        det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (
            c[:, 0] - a[:, 0]
        )
        span = max(float(np.abs(nuclei).max()), 1.0)
        sus = np.abs(det) <= 1e-9 * span * span
        for t in idx[sus]:
            if _orient_exact(nuclei[t[0]], nuclei[t[1]], nuclei[t[2]]) == 0:
                collinear.append(tuple(int(v) for v in t))
    if n >= 4:
        lift = np.column_stack(
            [nuclei, np.einsum("ij,ij->i", nuclei, nuclei) - weights**2]
        )
        idx = np.array(list(itertools.combinations(range(n), 4)))
        p0 = lift[idx[:, 0]]
        d1 = lift[idx[:, 1]] - p0
        d2 = lift[idx[:, 2]] - p0
        d3 = lift[idx[:, 3]] - p0
        det = (
            d1[:, 0] * (d2[:, 1] * d3[:, 2] - d2[:, 2] * d3[:, 1])
            - d1[:, 1] * (d2[:, 0] * d3[:, 2] - d2[:, 2] * d3[:, 0])
            + d1[:, 2] * (d2[:, 0] * d3[:, 1] - d2[:, 1] * d3[:, 0])
        )
        span = max(float(np.abs(lift).max()), 1.0)
        sus = np.abs(det) <= 1e-9 * span**3
        for t in idx[sus]:
            quad = [(nuclei[j][0], nuclei[j][1], weights[j]) for j in t]
            if _lifted_det_exact(quad) == 0:
                cocircular.append(tuple(int(v) for v in t))
    return GeneralPositionReport(
        gp1=not collinear,
        gp2=not cocircular,
        collinear_triples=collinear,
        cocircular_quadruples=cocircular,
    )


def nuclei_hull_covers(gamma: Configuration, region: Window) -> bool:
    """Whether the convex hull of the nuclei contains the region.

    Always False for the whole plane (any finite set fails); meaningful as a
    window-relative diagnostic.
    """
    nuclei, _ = generators_of(gamma)
    if len(nuclei) < 3:
        return False
    from scipy.spatial import ConvexHull, QhullError

    try:
        hull = ConvexHull(nuclei)
    except QhullError:
        return False
    if isinstance(region, Box):
        probes = [
            (region.lower[0], region.lower[1]),
            (region.upper[0], region.lower[1]),
            (region.upper[0], region.upper[1]),
            (region.lower[0], region.upper[1]),
        ]
    else:
        probes = [
            (region.center[0] + region.radius * math.cos(t), region.center[1] + region.radius * math.sin(t))
            for t in np.linspace(0.0, 2.0 * math.pi, 64, endpoint=False)
        ]
    eqs = hull.equations
    for p in probes:
        vals = eqs[:, 0] * p[0] + eqs[:, 1] * p[1] + eqs[:, 2]
        if float(vals.max()) > 1e-12 * max(1.0, abs(p[0]), abs(p[1])):
            return False
    return True


@dataclass
class NormalityReport:
    normal: bool
    vertex_degree_histogram: dict[int, int]
    offending_vertices: list[DiagramVertex]


def is_normal(dia: LaguerreDiagram) -> NormalityReport:
    """Every interior vertex in exactly 3 cell boundaries, every interior
    generator-generator edge in exactly 2."""
    hist: dict[int, int] = {}
    bad: list[DiagramVertex] = []
    for v in dia.vertices:
        if v.on_bbox:
            continue
        deg = len(v.cells)
        hist[deg] = hist.get(deg, 0) + 1
        if deg != 3:
            bad.append(v)
    edges_ok = all(e.seen_from == 2 for e in dia.edges if not _edge_touches_bbox(e, dia))
    return NormalityReport(normal=not bad and edges_ok, vertex_degree_histogram=hist, offending_vertices=bad)


def _edge_touches_bbox(e: DiagramEdge, dia: LaguerreDiagram) -> bool:
    tol = 10.0 * REL_TOL * dia.scale
    return _on_bbox_boundary(e.endpoints[0], dia.bbox, tol) or _on_bbox_boundary(
        e.endpoints[1], dia.bbox, tol
    )


def vertex_count(dia: LaguerreDiagram, i: int) -> int:
    """Number of cell vertices of a bounded, unclipped, nonempty cell."""
    cell = dia.cells[i]
    if cell.empty:
        raise ValueError("vertex count undefined for an empty cell")
    if cell.clipped:
        raise ValueError("vertex count undefined for a cell clipped at the bounding box")
    return len(cell.vertices)


def rebuild_cell_from_neighbors(dia: LaguerreDiagram, i: int) -> list[Vec] | None:
    """Re-intersect a cell from its recorded neighbors' half-planes only."""
    cell = dia.cells[i]
    if cell.empty:
        return None
    lo, up = dia.bbox.lower, dia.bbox.upper
    verts = [(lo[0], lo[1]), (up[0], lo[1]), (up[0], up[1]), (lo[0], up[1])]
    labels = [("bbox", 0), ("bbox", 1), ("bbox", 2), ("bbox", 3)]
    xi = dia.nuclei[i]
    wi = dia.weights[i]
    for j in cell.neighbors:
        xj = dia.nuclei[j]
        wj = dia.weights[j]
        c = (2.0 * (xj[0] - xi[0]), 2.0 * (xj[1] - xi[1]))
        beta = float(xj @ xj - xi @ xi + wi * wi - wj * wj)
        verts, labels = _clip_labeled(verts, labels, c, beta, ("gen", j))
        if verts is None:
            return None
    verts, labels = _merge_short_edges(verts, labels, REL_TOL * dia.scale)
    return verts


def polygons_match(a: Sequence[Vec] | None, b: Sequence[Vec] | None, tol: float) -> bool:
    """Cyclic comparison of two convex polygons up to tolerance."""
    if a is None or b is None:
        return a is b
    if len(a) != len(b):
        return False
    m = len(a)
    for shift in range(m):
        if all(math.dist(a[(k + shift) % m], b[k]) <= tol for k in range(m)):
            return True
    return False


# ---------------------------------------------------------------------------
# Far-generator power bound (supports the (R0)/(R1) argument)
# ---------------------------------------------------------------------------


def check_far_generator_power_bound(l: int, trials: int, seed: int = 0) -> bool:
    """Randomized check that a generator at y' outside U(0, 2l+1) with weight
    |y'| - l has power distance above l^2 from every z in U(0, l/2), which in
    turn dominates the squared diameter bound (l/2 + |z|)^2."""
    if l < 1:
        raise ValueError("l must be >= 1")
    rng = substream(seed, 0)
    half = 0.5 * l
    for _ in range(trials):
        while True:
            z = rng.uniform(-half, half, size=2)
            if float(z @ z) < half * half:
                break
        r = rng.uniform(2.0 * l + 1.0, 10.0 * l)
        th = rng.uniform(0.0, 2.0 * math.pi)
        y = (r * math.cos(th), r * math.sin(th))
        rho = power_distance(tuple(z), y, r - l)
        zn = math.hypot(z[0], z[1])
        if not (rho > l * l and l * l >= (half + zn) ** 2 - 1e-12):
            return False
    return True
