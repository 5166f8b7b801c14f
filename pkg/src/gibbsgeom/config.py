"""Marked point configurations, observation windows and mark statistics.

A configuration is a finite simple set of marked points in R^d x S.  Marks are
either facet marks (unit normal in the upper hemisphere plus a radius) or
scalar weights.  Points are kept in canonical lexicographic location order so
that serialization and iteration are deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

Vec = tuple[float, ...]

UNIT_TOL = 1e-12


def _vec(x: Sequence[float]) -> Vec:
    return tuple(float(v) for v in x)


def _norm(x: Sequence[float]) -> float:
    return math.sqrt(sum(v * v for v in x))


def in_upper_hemisphere(u: Sequence[float]) -> bool:
    """First nonzero coordinate strictly positive (ties broken by later axes)."""
    for v in u:
        if v > 0.0:
            return True
        if v < 0.0:
            return False
    return False


def canonical_direction(u: Sequence[float]) -> Vec:
    """Normalize to unit length and flip into the upper hemisphere."""
    n = _norm(u)
    if n == 0.0:
        raise ValueError("zero direction vector")
    w = tuple(v / n for v in u)
    if not in_upper_hemisphere(w):
        w = tuple(-v for v in w)
    return w


@dataclass(frozen=True)
class FacetMark:
    """Unit normal in the upper hemisphere plus a positive radius.

    The mark norm is sqrt(1 + radius^2): the mark lives in R^(d+1) with the
    Euclidean norm and the normal contributes exactly 1.
    """

    normal: Vec
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "normal", _vec(self.normal))
        object.__setattr__(self, "radius", float(self.radius))
        n = _norm(self.normal)
        if abs(n - 1.0) > UNIT_TOL:
            raise ValueError(f"facet normal not unit length: |n| = {n!r}")
        if not in_upper_hemisphere(self.normal):
            raise ValueError("facet normal must lie in the upper hemisphere")
        if not self.radius > 0.0:
            raise ValueError("facet radius must be positive")

    @property
    def norm(self) -> float:
        return math.sqrt(1.0 + self.radius * self.radius)


@dataclass(frozen=True)
class WeightMark:
    """Positive scalar weight; its own norm."""

    weight: float

    def __post_init__(self):
        object.__setattr__(self, "weight", float(self.weight))
        if not self.weight > 0.0:
            raise ValueError("weight must be positive")

    @property
    def norm(self) -> float:
        return self.weight


Mark = Union[FacetMark, WeightMark]


@dataclass(frozen=True)
class MarkedPoint:
    location: Vec
    mark: Mark

    def __post_init__(self):
        object.__setattr__(self, "location", _vec(self.location))

    @property
    def dim(self) -> int:
        return len(self.location)

    @property
    def mark_norm(self) -> float:
        return self.mark.norm


# ---------------------------------------------------------------------------
# Windows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    """Half-open axis-aligned box: lower <= x < upper componentwise.

    Degenerate boxes (lower == upper in some coordinate) are permitted; they
    are useful as point-like windows but have zero volume.
    """

    lower: Vec
    upper: Vec

    def __post_init__(self):
        object.__setattr__(self, "lower", _vec(self.lower))
        object.__setattr__(self, "upper", _vec(self.upper))
        if len(self.lower) != len(self.upper):
            raise ValueError("box corner dimension mismatch")
        if any(u < l for l, u in zip(self.lower, self.upper)):
            raise ValueError("box upper corner below lower corner")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, x: Sequence[float]) -> bool:
        return all(l <= v < u for l, v, u in zip(self.lower, x, self.upper))

    def volume(self) -> float:
        v = 1.0
        for l, u in zip(self.lower, self.upper):
            v *= u - l
        return v

    def sup_norm(self) -> float:
        """Largest Euclidean norm over the closure of the box."""
        return math.sqrt(sum(max(abs(l), abs(u)) ** 2 for l, u in zip(self.lower, self.upper)))

    def diameter(self) -> float:
        return _norm(tuple(u - l for l, u in zip(self.lower, self.upper)))


@dataclass(frozen=True)
class Ball:
    """Euclidean ball; open by default (U), closed when flagged (B)."""

    center: Vec
    radius: float
    closed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius < 0.0:
            raise ValueError("ball radius must be nonnegative")

    @property
    def dim(self) -> int:
        return len(self.center)

    def contains(self, x: Sequence[float]) -> bool:
        d = _norm(tuple(v - c for v, c in zip(x, self.center)))
        return d <= self.radius if self.closed else d < self.radius

    def volume(self) -> float:
        d = self.dim
        if d == 2:
            return math.pi * self.radius**2
        if d == 3:
            return 4.0 / 3.0 * math.pi * self.radius**3
        # unit-ball volume via Gamma for other d
        return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * self.radius**d

    def sup_norm(self) -> float:
        return _norm(self.center) + self.radius

    def diameter(self) -> float:
        return 2.0 * self.radius


Window = Union[Box, Ball]


def centered_box(n: float, dim: int = 2) -> Box:
    """The canonical window [-n, n)^dim."""
    return Box((-float(n),) * dim, (float(n),) * dim)


def origin_ball(radius: float, dim: int = 2, closed: bool = False) -> Ball:
    return Ball((0.0,) * dim, radius, closed=closed)


def dist_to_window(w: Window, x: Sequence[float]) -> float:
    """Euclidean distance from x to the closure of the window."""
    if isinstance(w, Box):
        s = 0.0
        for l, v, u in zip(w.lower, x, w.upper):
            e = max(l - v, v - u, 0.0)
            s += e * e
        return math.sqrt(s)
    d = _norm(tuple(v - c for v, c in zip(x, w.center)))
    return max(d - w.radius, 0.0)


def dilation_contains(w: Window, x: Sequence[float], r: float) -> bool:
    """Membership in the closed dilation (window) + ball(0, r)."""
    return dist_to_window(w, x) <= r


def bounding_box(w: Window) -> Box:
    if isinstance(w, Box):
        return w
    lo = tuple(c - w.radius for c in w.center)
    up = tuple(c + w.radius for c in w.center)
    return Box(lo, up)


# ---------------------------------------------------------------------------
# Configurations
# ---------------------------------------------------------------------------


class Configuration:
    """Finite simple marked point set with deterministic iteration order."""

    __slots__ = ("points", "dim")

    def __init__(self, points: Sequence[MarkedPoint] = (), dim: int | None = None):
        pts = sorted(points, key=lambda p: p.location)
        if dim is None:
            if not pts:
                raise ValueError("dimension required for an empty configuration")
            dim = pts[0].dim
        for p in pts:
            if p.dim != dim:
                raise ValueError("mixed point dimensions in configuration")
        for a, b in zip(pts, pts[1:]):
            if a.location == b.location:
                raise ValueError(f"duplicate location {a.location}")
        self.points: tuple[MarkedPoint, ...] = tuple(pts)
        self.dim: int = dim

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[MarkedPoint]:
        return iter(self.points)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Configuration)
            and self.dim == other.dim
            and self.points == other.points
        )

    def __hash__(self) -> int:
        return hash((self.dim, self.points))

    def __repr__(self) -> str:
        return f"Configuration({len(self.points)} points, dim={self.dim})"

    @staticmethod
    def empty(dim: int = 2) -> "Configuration":
        return Configuration((), dim=dim)

    def restrict(self, w: Window) -> "Configuration":
        return Configuration([p for p in self.points if w.contains(p.location)], dim=self.dim)

    def exclude(self, w: Window) -> "Configuration":
        return Configuration([p for p in self.points if not w.contains(p.location)], dim=self.dim)

    def union(self, other: "Configuration") -> "Configuration":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch in union")
        return Configuration(self.points + other.points, dim=self.dim)

    def locations(self) -> list[Vec]:
        return [p.location for p in self.points]


def max_mark_norm(gamma: Configuration) -> float:
    """Supremum of mark norms; 0 for the empty configuration."""
    return max((p.mark_norm for p in gamma), default=0.0)


def weighted_point_count(gamma: Configuration, d: int, delta: float) -> float:
    """Sum of 1 + mark_norm^(d+delta) over the configuration."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    ex = d + delta
    return sum(1.0 + p.mark_norm**ex for p in gamma)


def mark_balls_intersect(p: MarkedPoint, q: MarkedPoint) -> bool:
    """Whether the closed balls B(x, mark_norm) around the two points meet."""
    gap = _norm(tuple(a - b for a, b in zip(p.location, q.location)))
    return gap <= p.mark_norm + q.mark_norm


# ---------------------------------------------------------------------------
# Serialization (exact float round-trip via repr/17-digit decimals)
# ---------------------------------------------------------------------------


def _mark_to_obj(mark: Mark) -> dict:
    if isinstance(mark, FacetMark):
        return {"kind": "facet", "normal": list(mark.normal), "radius": mark.radius}
    return {"kind": "weight", "value": mark.weight}


def _mark_from_obj(obj: dict) -> Mark:
    if obj["kind"] == "facet":
        return FacetMark(tuple(obj["normal"]), obj["radius"])
    if obj["kind"] == "weight":
        return WeightMark(obj["value"])
    raise ValueError(f"unknown mark kind {obj.get('kind')!r}")


def configuration_to_obj(gamma: Configuration) -> list:
    return [{"x": list(p.location), "mark": _mark_to_obj(p.mark)} for p in gamma]


def configuration_from_obj(obj: list, dim: int = 2) -> Configuration:
    pts = [MarkedPoint(tuple(e["x"]), _mark_from_obj(e["mark"])) for e in obj]
    return Configuration(pts, dim=dim if not pts else None)


def configuration_to_json(gamma: Configuration) -> str:
    # json dumps floats via repr, which round-trips binary64 exactly
    return json.dumps(configuration_to_obj(gamma))


def configuration_from_json(s: str, dim: int = 2) -> Configuration:
    return configuration_from_obj(json.loads(s), dim=dim)
