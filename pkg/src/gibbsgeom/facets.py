"""Facet geometry, intersection energies and the attractive-interaction apparatus.

A facet is a (d-1)-dimensional disk: the hyperplane through ``center`` with unit
``normal``, intersected with the ball of ``radius`` around the center.  In the
plane facets are segments; in R^3 they are disks.  Energies sum Hausdorff
measures of intersections over unordered tuples, with infinite measures killed
by an indicator.

Intersections are classified with an absolute tolerance on the parametric
solution; inputs inside the tolerance band are flagged degenerate and count as
non-contributing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import (
    Ball,
    Box,
    Configuration,
    FacetMark,
    MarkedPoint,
    Vec,
    Window,
    canonical_direction,
    dist_to_window,
    max_mark_norm,
)
from .poisson import FacetMarkLaw, HemisphereUniform, DirectionAtoms, substream

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class Facet:
    center: Vec
    normal: Vec
    radius: float

    @property
    def dim(self) -> int:
        return len(self.center)

    def tangent2d(self) -> Vec:
        nx, ny = self.normal
        return (-ny, nx)

    def endpoints2d(self) -> tuple[Vec, Vec]:
        t = self.tangent2d()
        c, r = self.center, self.radius
        return (
            (c[0] - r * t[0], c[1] - r * t[1]),
            (c[0] + r * t[0], c[1] + r * t[1]),
        )


def facet_of(p: MarkedPoint) -> Facet:
    if not isinstance(p.mark, FacetMark):
        raise TypeError("point does not carry a facet mark")
    return Facet(p.location, p.mark.normal, p.mark.radius)


@dataclass(frozen=True)
class PairIntersection:
    dim: int  # -1 empty, 0 point, 1 segment, 2 planar region
    measure: float  # H^(d-2) measure when finite
    finite: bool
    degenerate: bool = False


@dataclass(frozen=True)
class TripleIntersection:
    count: int
    finite: bool
    degenerate: bool = False


def _dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def pair_intersection(f1: Facet, f2: Facet, tol: float = DEFAULT_TOL) -> PairIntersection:
    if f1.dim == 2:
        return _segment_pair(f1, f2, tol)
    if f1.dim == 3:
        return _disk_pair(f1, f2, tol)
    raise ValueError("facets supported in dimension 2 and 3 only")


def _segment_pair(f1: Facet, f2: Facet, tol: float) -> PairIntersection:
    n1, n2 = f1.normal, f2.normal
    cross = n1[0] * n2[1] - n1[1] * n2[0]
    if abs(cross) <= 1e-12:
        # parallel supporting lines
        h = _dot(n1, f2.center) - _dot(n1, f1.center)
        if abs(h) > tol:
            return PairIntersection(-1, 0.0, True)
        t1 = f1.tangent2d()
        s2 = _dot(t1, tuple(b - a for a, b in zip(f1.center, f2.center)))
        overlap = min(f1.radius, s2 + f2.radius) - max(-f1.radius, s2 - f2.radius)
        if overlap > tol:
            return PairIntersection(1, math.inf, False)
        if overlap > -tol:
            return PairIntersection(-1, 0.0, True, degenerate=True)
        return PairIntersection(-1, 0.0, True)
    b1 = _dot(n1, f1.center)
    b2 = _dot(n2, f2.center)
    px = (b1 * n2[1] - b2 * n1[1]) / cross
    py = (n1[0] * b2 - n2[0] * b1) / cross
    s1 = _dot(f1.tangent2d(), (px - f1.center[0], py - f1.center[1]))
    s2 = _dot(f2.tangent2d(), (px - f2.center[0], py - f2.center[1]))
    g1 = f1.radius - abs(s1)
    g2 = f2.radius - abs(s2)
    if g1 > tol and g2 > tol:
        return PairIntersection(0, 1.0, True)
    if g1 < -tol or g2 < -tol:
        return PairIntersection(-1, 0.0, True)
    return PairIntersection(-1, 0.0, True, degenerate=True)


def _chord_interval(f: Facet, p0, u, tol: float):
    """Parameter interval of {p0 + s u} inside the disk of f (line lies in the
    facet plane).  Returns None when the line misses the disk."""
    d = tuple(a - c for a, c in zip(p0, f.center))
    b = _dot(d, u)
    c = _dot(d, d) - f.radius * f.radius
    disc = b * b - c
    if disc <= 0.0:
        return None
    r = math.sqrt(disc)
    return (-b - r, -b + r)


def _disk_pair(f1: Facet, f2: Facet, tol: float) -> PairIntersection:
    n1 = np.asarray(f1.normal)
    n2 = np.asarray(f2.normal)
    m = np.cross(n1, n2)
    mn = float(np.linalg.norm(m))
    if mn <= 1e-12:
        h = _dot(f1.normal, tuple(b - a for a, b in zip(f1.center, f2.center)))
        if abs(h) > tol:
            return PairIntersection(-1, 0.0, True)
        g = math.dist(f1.center, f2.center)
        gap = f1.radius + f2.radius - g
        if gap > tol:
            return PairIntersection(2, math.inf, False)
        if gap > -tol:
            return PairIntersection(-1, 0.0, True, degenerate=True)
        return PairIntersection(-1, 0.0, True)
    A = np.vstack([n1, n2, m])
    rhs = np.array([_dot(f1.normal, f1.center), _dot(f2.normal, f2.center), 0.0])
    p0 = tuple(np.linalg.solve(A, rhs))
    u = tuple(m / mn)
    i1 = _chord_interval(f1, p0, u, tol)
    i2 = _chord_interval(f2, p0, u, tol)
    if i1 is None or i2 is None:
        return PairIntersection(-1, 0.0, True)
    lo = max(i1[0], i2[0])
    hi = min(i1[1], i2[1])
    if hi - lo > tol:
        return PairIntersection(1, hi - lo, True)
    if hi - lo > -tol:
        return PairIntersection(-1, 0.0, True, degenerate=True)
    return PairIntersection(-1, 0.0, True)


def triple_intersection_count(
    f1: Facet, f2: Facet, f3: Facet, tol: float = DEFAULT_TOL
) -> TripleIntersection:
    """H^0 content of a three-disk intersection in R^3: 0 or 1 generically,
    infinite (finite=False) when the triple intersection contains a segment."""
    if f1.dim != 3:
        raise ValueError("triple intersections are defined for disks in R^3")
    n1 = np.asarray(f1.normal)
    n2 = np.asarray(f2.normal)
    m = np.cross(n1, n2)
    mn = float(np.linalg.norm(m))
    if mn <= 1e-12:
        pr = _disk_pair(f1, f2, tol)
        if pr.dim != 2:
            return TripleIntersection(0, True, degenerate=pr.degenerate)
        # disks 1 and 2 overlap in a planar lens; cut it with the third plane
        m13 = np.cross(n1, np.asarray(f3.normal))
        if float(np.linalg.norm(m13)) <= 1e-12:
            h = _dot(f1.normal, tuple(b - a for a, b in zip(f1.center, f3.center)))
            if abs(h) > tol:
                return TripleIntersection(0, True)
            g = math.dist(f1.center, f3.center)
            if f1.radius + f3.radius - g > tol:
                return TripleIntersection(0, False)
            return TripleIntersection(0, True, degenerate=True)
        A = np.vstack([n1, np.asarray(f3.normal), m13])
        rhs = np.array([_dot(f1.normal, f1.center), _dot(f3.normal, f3.center), 0.0])
        p0 = tuple(np.linalg.solve(A, rhs))
        u = tuple(m13 / np.linalg.norm(m13))
        ivs = [_chord_interval(f, p0, u, tol) for f in (f1, f2, f3)]
        if any(iv is None for iv in ivs):
            return TripleIntersection(0, True)
        lo = max(iv[0] for iv in ivs)
        hi = min(iv[1] for iv in ivs)
        if hi - lo > tol:
            return TripleIntersection(0, False)
        if hi - lo > -tol:
            return TripleIntersection(0, True, degenerate=True)
        return TripleIntersection(0, True)
    A = np.vstack([n1, n2, m])
    rhs = np.array([_dot(f1.normal, f1.center), _dot(f2.normal, f2.center), 0.0])
    p0 = np.linalg.solve(A, rhs)
    u = m / mn
    i1 = _chord_interval(f1, tuple(p0), tuple(u), tol)
    i2 = _chord_interval(f2, tuple(p0), tuple(u), tol)
    if i1 is None or i2 is None:
        return TripleIntersection(0, True)
    lo = max(i1[0], i2[0])
    hi = min(i1[1], i2[1])
    if hi - lo <= tol:
        deg = hi - lo > -tol
        return TripleIntersection(0, True, degenerate=deg)
    n3 = np.asarray(f3.normal)
    denom = float(n3 @ u)
    if abs(denom) <= 1e-12:
        # third plane parallel to the chord line
        if abs(float(n3 @ (p0 - np.asarray(f3.center)))) > tol:
            return TripleIntersection(0, True)
        i3 = _chord_interval(f3, tuple(p0), tuple(u), tol)
        if i3 is None:
            return TripleIntersection(0, True)
        lo3, hi3 = max(lo, i3[0]), min(hi, i3[1])
        if hi3 - lo3 > tol:
            return TripleIntersection(0, False)
        if hi3 - lo3 > -tol:
            return TripleIntersection(0, True, degenerate=True)
        return TripleIntersection(0, True)
    s = (float(n3 @ np.asarray(f3.center)) - float(n3 @ p0)) / denom
    if not (lo + tol < s < hi - tol):
        if lo - tol <= s <= hi + tol:
            return TripleIntersection(0, True, degenerate=True)
        return TripleIntersection(0, True)
    q = p0 + s * u
    g3 = f3.radius - float(np.linalg.norm(q - np.asarray(f3.center)))
    if g3 > tol:
        return TripleIntersection(1, True)
    if g3 > -tol:
        return TripleIntersection(0, True, degenerate=True)
    return TripleIntersection(0, True)


# ---------------------------------------------------------------------------
# Energy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FacetEnergyModel:
    dim: int
    coefficients: tuple[float, ...]  # (a_2,) in the plane, (a_2, a_3) in R^3
    degeneracy_tolerance: float = DEFAULT_TOL

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError("facet energies implemented for dimension 2 and 3")
        if len(self.coefficients) != self.dim - 1:
            raise ValueError("need one coefficient per tuple order 2..d")


def facet_energy(gamma: Configuration, model: FacetEnergyModel) -> float:
    """Sum over unordered tuples of intersection measures times coefficients."""
    facets = [facet_of(p) for p in gamma]
    tol = model.degeneracy_tolerance
    total = 0.0
    a2 = model.coefficients[0]
    n = len(facets)
    if a2 != 0.0:
        for i in range(n):
            for j in range(i + 1, n):
                r = pair_intersection(facets[i], facets[j], tol)
                if r.finite and r.dim >= 0:
                    total += a2 * r.measure
    if model.dim == 3:
        a3 = model.coefficients[1]
        if a3 != 0.0:
            for i in range(n):
                for j in range(i + 1, n):
                    for k in range(j + 1, n):
                        t = triple_intersection_count(facets[i], facets[j], facets[k], tol)
                        if t.finite:
                            total += a3 * t.count
    return total


def crossing_pairs(gamma: Configuration, tol: float = DEFAULT_TOL) -> list[tuple[int, int]]:
    """Indices of transversally crossing segment pairs (planar facets)."""
    facets = [facet_of(p) for p in gamma]
    out = []
    for i in range(len(facets)):
        for j in range(i + 1, len(facets)):
            r = pair_intersection(facets[i], facets[j], tol)
            if r.dim == 0 and r.finite:
                out.append((i, j))
    return out


def count_crossings_vs(
    center: Vec,
    normal: Vec,
    radius: float,
    centers: np.ndarray,
    normals: np.ndarray,
    radii: np.ndarray,
    tol: float = DEFAULT_TOL,
) -> int:
    """Vectorized count of segments (rows) transversally crossing one segment."""
    if len(radii) == 0:
        return 0
    n1 = np.asarray(normal)
    cross = n1[0] * normals[:, 1] - n1[1] * normals[:, 0]
    ok = np.abs(cross) > 1e-12
    if not ok.any():
        return 0
    b1 = float(n1 @ np.asarray(center))
    b2 = np.einsum("ij,ij->i", normals, centers)
    with np.errstate(divide="ignore", invalid="ignore"):
        px = (b1 * normals[:, 1] - b2 * n1[1]) / cross
        py = (n1[0] * b2 - normals[:, 0] * b1) / cross
    t1 = (-n1[1], n1[0])
    s1 = t1[0] * (px - center[0]) + t1[1] * (py - center[1])
    s2 = -normals[:, 1] * (px - centers[:, 0]) + normals[:, 0] * (py - centers[:, 1])
    inside = (radius - np.abs(s1) > tol) & (radii - np.abs(s2) > tol)
    return int(np.count_nonzero(inside & ok))


# ---------------------------------------------------------------------------
# Truncation radius for conditional energies
# ---------------------------------------------------------------------------


def _max_dist_on_sphere_box(box: Box, radius: float) -> float:
    """max dist(x, box) over |x| <= radius (attained on the sphere)."""
    if box.dim == 2:
        thetas = np.linspace(0.0, 2.0 * math.pi, 4096, endpoint=False)
        pts = radius * np.stack([np.cos(thetas), np.sin(thetas)], axis=1)
        lo = np.asarray(box.lower)
        up = np.asarray(box.upper)
        ex = np.maximum(np.maximum(lo - pts, pts - up), 0.0)
        d = np.sqrt((ex**2).sum(axis=1))
        best = float(d.max())
        # golden-section polish around the strongest grid angles
        order = np.argsort(d)[-6:]
        step = 2.0 * math.pi / len(thetas)

        def f(t: float) -> float:
            x = (radius * math.cos(t), radius * math.sin(t))
            return dist_to_window(box, x)

        gr = (math.sqrt(5.0) - 1.0) / 2.0
        for idx in order:
            a = thetas[idx] - step
            b = thetas[idx] + step
            c = b - gr * (b - a)
            dd = a + gr * (b - a)
            for _ in range(80):
                if f(c) > f(dd):
                    b = dd
                else:
                    a = c
                c = b - gr * (b - a)
                dd = a + gr * (b - a)
            best = max(best, f((a + b) / 2.0))
        return best
    # higher dimensions: direction sampling plus local polish
    from scipy.optimize import minimize

    rng = np.random.default_rng(0)
    dirs = rng.standard_normal((8192, box.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts = radius * dirs
    lo = np.asarray(box.lower)
    up = np.asarray(box.upper)
    ex = np.maximum(np.maximum(lo - pts, pts - up), 0.0)
    d = np.sqrt((ex**2).sum(axis=1))
    best = float(d.max())
    for idx in np.argsort(d)[-4:]:
        res = minimize(
            lambda v: -dist_to_window(box, tuple(radius * v / np.linalg.norm(v))),
            dirs[idx],
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-12, "maxiter": 2000},
        )
        best = max(best, -float(res.fun))
    return best


def max_dist_on_ball(window: Window, radius: float) -> float:
    """max over |x| <= radius of dist(x, window)."""
    if isinstance(window, Ball):
        c = math.sqrt(sum(v * v for v in window.center))
        return max(radius + c - window.radius, 0.0)
    return _max_dist_on_sphere_box(window, radius)


def truncation_radius(mark_sup: float, l0: int, window: Window) -> int:
    """Integer interaction-truncation radius for a window and a mark bound.

    l1 is the smallest integer with (window + ball(mark_sup)) inside U(0, l1);
    l2 = max(l0, l1); the radius is the smallest integer k with U(0, 2*l2+1)
    covered by the window dilated by k.  Non-decreasing in mark_sup.
    """
    if mark_sup < 0:
        raise ValueError("mark_sup must be nonnegative")
    if isinstance(window, Ball) and not math.isfinite(window.radius):
        raise ValueError("window must be bounded")
    s = window.sup_norm() + mark_sup
    l1 = int(math.floor(s + 1e-12)) + 1
    l2 = max(int(l0), l1)
    md = max_dist_on_ball(window, 2.0 * l2 + 1.0)
    return max(1, int(math.ceil(md - 1e-9)))


def truncated_energy_difference(
    gamma_window: Configuration,
    boundary: Configuration,
    window: Window,
    tau: float,
    model: FacetEnergyModel,
) -> float:
    """Energy difference H(kept) - H(kept minus window points) with the union
    truncated to the window dilated by tau."""
    for p in gamma_window:
        if not window.contains(p.location):
            raise ValueError("gamma_window has a point outside the window")
    for p in boundary:
        if window.contains(p.location):
            raise ValueError("boundary configuration intersects the window")
    full = gamma_window.union(boundary)
    kept = [p for p in full if dist_to_window(window, p.location) <= tau]
    inner = Configuration(kept, dim=full.dim)
    outer = Configuration([p for p in kept if not window.contains(p.location)], dim=full.dim)
    return facet_energy(inner, model) - facet_energy(outer, model)


def facet_conditional_energy(
    gamma_window: Configuration,
    boundary: Configuration,
    window: Window,
    l0: int,
    model: FacetEnergyModel,
) -> float:
    """Conditional energy of the window contents given the boundary, evaluated
    at the truncation radius derived from the window's mark bound and l0."""
    tau = truncation_radius(max_mark_norm(gamma_window), l0, window)
    return truncated_energy_difference(gamma_window, boundary, window, tau, model)


def facet_conditional_energy_limit(
    gamma_window: Configuration,
    boundary: Configuration,
    window: Window,
    model: FacetEnergyModel,
    n_max: int = 1 << 20,
) -> tuple[float, int]:
    """Brute-force limit of H(gamma on [-n,n)^d) - H(gamma off-window on same).

    The schedule starts only once the box covers the whole (finite)
    configuration, which rules out spurious early agreement; it then doubles
    until two consecutive values agree exactly.
    """
    from .config import centered_box

    full = gamma_window.union(boundary)
    spread = max((max(abs(c) for c in p.location) for p in full), default=0.0)
    n = max(1, int(math.floor(spread)) + 1)
    prev = None
    while n <= n_max:
        box = centered_box(n, full.dim)
        inside = full.restrict(box)
        outside = Configuration(
            [p for p in inside if not window.contains(p.location)], dim=full.dim
        )
        val = facet_energy(inside, model) - facet_energy(outside, model)
        if prev is not None and val == prev:
            return val, n
        prev = val
        n *= 2
    raise RuntimeError("conditional energy did not stabilize within the schedule")


# ---------------------------------------------------------------------------
# Attractive-interaction counterexample apparatus (planar)
# ---------------------------------------------------------------------------


def _angle_mod_pi(u: Vec, v: Vec) -> float:
    d = abs(_dot(u, v))
    return math.acos(min(1.0, d))


@dataclass(frozen=True)
class CounterexampleSpec:
    """Two direction caps plus radius band for the attractive-facet family."""

    n1: Vec
    n2: Vec
    u: Vec
    v: Vec
    eps: float
    a: float
    b: float
    z: float

    def __post_init__(self):
        object.__setattr__(self, "n1", canonical_direction(self.n1))
        object.__setattr__(self, "n2", canonical_direction(self.n2))
        object.__setattr__(self, "u", canonical_direction(self.u))
        object.__setattr__(self, "v", canonical_direction(self.v))
        if self.n1 == self.n2:
            raise ValueError("n1 and n2 must be distinct directions")
        if not (self.eps > 0 and 0 < self.a <= self.b and self.z > 0):
            raise ValueError("need eps > 0, 0 < a <= b and z > 0")
        if _angle_mod_pi(self.u, self.v) <= 2.0 * self.eps:
            raise ValueError("direction caps overlap")


def default_counterexample_spec(z: float = 1.0) -> CounterexampleSpec:
    c45 = math.sqrt(0.5)
    return CounterexampleSpec(
        n1=(math.cos(math.pi / 3.0), math.sin(math.pi / 3.0)),
        n2=(math.cos(math.pi / 3.0), -math.sin(math.pi / 3.0)),
        u=(c45, c45),
        v=(c45, -c45),
        eps=math.pi / 12.0,
        a=1.0,
        b=2.0,
        z=z,
    )


def _line_intersection_point(x: Vec, n: Vec, y: Vec, m: Vec) -> Vec:
    det = n[0] * m[1] - n[1] * m[0]
    if abs(det) < 1e-14:
        raise ValueError("parallel lines")
    bn = _dot(n, x)
    bm = _dot(m, y)
    return ((bn * m[1] - bm * n[1]) / det, (n[0] * bm - m[0] * bn) / det)


def make_crossing_family(spec: CounterexampleSpec, n_points: int) -> Configuration:
    """Family of n_points facets on the x-axis in two parallel bundles; every
    cross-bundle pair crosses transversally and bundles are internally disjoint.

    The shared radius is 1.1x the minimum that makes the extreme pair cross;
    construction fails loudly if that rule leaves any cross pair open.
    """
    if n_points < 2 or n_points % 2 != 0:
        raise ValueError("n_points must be a positive even integer")
    half = n_points // 2
    xs = [1.0 - (i - 1) / n_points for i in range(1, half + 1)]
    ys = [-x for x in xs]
    p = _line_intersection_point((1.0, 0.0), spec.n1, (-1.0, 0.0), spec.n2)
    r_needed = max(math.dist(p, (1.0, 0.0)), math.dist(p, (-1.0, 0.0)))
    radius = 1.1 * r_needed
    for ax in xs:
        for by in ys:
            q = _line_intersection_point((ax, 0.0), spec.n1, (by, 0.0), spec.n2)
            req = max(math.dist(q, (ax, 0.0)), math.dist(q, (by, 0.0)))
            if req >= radius:
                raise ValueError(
                    "extreme-pair radius rule fails for these normals; "
                    "choose a more symmetric direction pair"
                )
    pts = [MarkedPoint((x, 0.0), FacetMark(spec.n1, radius)) for x in xs]
    pts += [MarkedPoint((y, 0.0), FacetMark(spec.n2, radius)) for y in ys]
    return Configuration(pts, dim=2)


def _cap_angles(spec: CounterexampleSpec) -> tuple[float, float]:
    tu = math.atan2(spec.u[1], spec.u[0])
    tv = math.atan2(spec.v[1], spec.v[0])
    return tu, tv


def guaranteed_crossing_scale(
    spec: CounterexampleSpec,
    validate_samples: int = 100_000,
    seed: int = 0,
) -> float:
    """Half-width s of the box [-s, s]^2 on which any two facets with centers in
    the box, directions in the two caps and radii above ``a`` cross at exactly
    one point.

    The center-to-crossing distances are convex in the two centers, so the
    scale-1 maximum is attained at corner pairs; the cap directions are scanned
    on a refined grid.  The result uses homogeneity in the box scale, takes a
    0.9 safety factor and is validated on random samples.
    """
    tu, tv = _cap_angles(spec)
    corners = [(sx, sy) for sx in (-1.0, 1.0) for sy in (-1.0, 1.0)]

    def pair_max(th_n: np.ndarray, th_m: np.ndarray) -> tuple[float, int, int]:
        nvec = np.stack([np.cos(th_n), np.sin(th_n)], axis=-1)
        mvec = np.stack([np.cos(th_m), np.sin(th_m)], axis=-1)
        best, bi, bj = 0.0, 0, 0
        for x in corners:
            for y in corners:
                bn = nvec[..., 0] * x[0] + nvec[..., 1] * x[1]
                bm = mvec[..., 0] * y[0] + mvec[..., 1] * y[1]
                det = nvec[..., 0] * mvec[..., 1] - nvec[..., 1] * mvec[..., 0]
                px = (bn * mvec[..., 1] - bm * nvec[..., 1]) / det
                py = (nvec[..., 0] * bm - mvec[..., 0] * bn) / det
                f1 = np.hypot(px - x[0], py - x[1])
                f2 = np.hypot(px - y[0], py - y[1])
                f = np.maximum(f1, f2)
                k = int(np.argmax(f))
                if f.flat[k] > best:
                    best = float(f.flat[k])
                    bi, bj = np.unravel_index(k, f.shape)
        return best, bi, bj

    lo_n, hi_n = tu - spec.eps, tu + spec.eps
    lo_m, hi_m = tv - spec.eps, tv + spec.eps
    best = 0.0
    for _ in range(4):
        th_n = np.linspace(lo_n, hi_n, 201)
        th_m = np.linspace(lo_m, hi_m, 201)
        tn, tm = np.meshgrid(th_n, th_m, indexing="ij")
        m, bi, bj = pair_max(tn, tm)
        best = max(best, m)
        wn = (hi_n - lo_n) / 20.0
        wm = (hi_m - lo_m) / 20.0
        lo_n = max(tu - spec.eps, th_n[bi] - wn)
        hi_n = min(tu + spec.eps, th_n[bi] + wn)
        lo_m = max(tv - spec.eps, th_m[bj] - wm)
        hi_m = min(tv + spec.eps, th_m[bj] + wm)
    if best <= 0.0:
        raise RuntimeError("degenerate cap geometry")
    s = 0.9 * spec.a / best

    if validate_samples > 0:
        rng = substream(seed, 0)
        x = rng.uniform(-s, s, size=(validate_samples, 2))
        y = rng.uniform(-s, s, size=(validate_samples, 2))
        thn = rng.uniform(tu - spec.eps, tu + spec.eps, size=validate_samples)
        thm = rng.uniform(tv - spec.eps, tv + spec.eps, size=validate_samples)
        nvec = np.stack([np.cos(thn), np.sin(thn)], axis=1)
        mvec = np.stack([np.cos(thm), np.sin(thm)], axis=1)
        bn = np.einsum("ij,ij->i", nvec, x)
        bm = np.einsum("ij,ij->i", mvec, y)
        det = nvec[:, 0] * mvec[:, 1] - nvec[:, 1] * mvec[:, 0]
        px = (bn * mvec[:, 1] - bm * nvec[:, 1]) / det
        py = (nvec[:, 0] * bm - mvec[:, 0] * bn) / det
        f1 = np.hypot(px - x[:, 0], py - x[:, 1])
        f2 = np.hypot(px - y[:, 0], py - y[:, 1])
        if not bool(((f1 < spec.a) & (f2 < spec.a)).all()):
            raise RuntimeError("crossing-scale validation failed")
    return s


def sample_paired_caps(
    k: int, spec: CounterexampleSpec, s: float, seed: int
) -> Configuration:
    """k facets with directions in each cap, centers uniform in [-s, s]^2 and
    radii uniform in (a, b); every cross-cap pair intersects by construction."""
    if k < 1:
        raise ValueError("k must be >= 1")
    tu, tv = _cap_angles(spec)
    rng = substream(seed, 0)
    pts: list[MarkedPoint] = []
    seen: set[Vec] = set()
    for theta0 in (tu, tv):
        for _ in range(k):
            loc = tuple(rng.uniform(-s, s, size=2))
            while loc in seen:
                loc = tuple(rng.uniform(-s, s, size=2))
            seen.add(loc)
            th = rng.uniform(theta0 - spec.eps, theta0 + spec.eps)
            r = rng.uniform(spec.a, spec.b)
            pts.append(MarkedPoint(loc, FacetMark(canonical_direction((math.cos(th), math.sin(th))), r)))
    return Configuration(pts, dim=2)


def cross_cap_pair_counts(
    gamma: Configuration, spec: CounterexampleSpec, tol: float = DEFAULT_TOL
) -> tuple[int, int]:
    """(cross-cap crossings, within-cap crossings) for a paired-cap sample."""
    tu, tv = _cap_angles(spec)

    def cap_of(p: MarkedPoint) -> int:
        th = math.atan2(p.mark.normal[1], p.mark.normal[0])
        du = min(abs(th - tu), math.pi - abs(th - tu))
        dv = min(abs(th - tv), math.pi - abs(th - tv))
        return 0 if du <= dv else 1

    caps = [cap_of(p) for p in gamma]
    cross = within = 0
    for i, j in crossing_pairs(gamma, tol):
        if caps[i] != caps[j]:
            cross += 1
        else:
            within += 1
    return cross, within


def partition_lower_bound_log_term(
    k: int, gamma_u: float, gamma_v: float, delta_rest: float
) -> float:
    """log of the k-th restricted contribution to the partition function of the
    attractive pair model: k^2 - Delta - Gu - Gv + k(log Gu + log Gv) - 2 log k!.
    Each term is a valid lower bound for log Z."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return (
        k * k
        - delta_rest
        - gamma_u
        - gamma_v
        + k * (math.log(gamma_u) + math.log(gamma_v))
        - 2.0 * math.lgamma(k + 1.0)
    )


def cap_intensities(
    spec: CounterexampleSpec, s: float, mark_law: FacetMarkLaw
) -> tuple[float, float, float]:
    """(Gamma_u, Gamma_v, Delta): reference-process masses of the two cap events
    on the box [-s, s]^2 and of its complement within the window."""
    area = (2.0 * s) ** 2
    rmass = mark_law.radius.mass(spec.a, spec.b)
    if isinstance(mark_law.direction, HemisphereUniform):
        dmass_u = dmass_v = 2.0 * spec.eps / math.pi
    elif isinstance(mark_law.direction, DirectionAtoms):
        dmass_u = sum(p for d, p in mark_law.direction.atoms if _angle_mod_pi(d, spec.u) <= spec.eps)
        dmass_v = sum(p for d, p in mark_law.direction.atoms if _angle_mod_pi(d, spec.v) <= spec.eps)
    else:
        raise TypeError("unsupported direction law")
    gu = spec.z * area * dmass_u * rmass
    gv = spec.z * area * dmass_v * rmass
    delta_rest = spec.z * area - gu - gv
    return gu, gv, delta_rest
