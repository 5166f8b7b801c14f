"""Growth-bounded ("tempered") configurations and ball-clearance machinery.

A finite configuration has growth level t when its weighted point count inside
U(0, l) stays below t * l^d for every integer radius l.  Level-t configurations
enjoy a clearance property: beyond a threshold radius, points outside U(0, 2l+1)
carry balls B(x, mark_norm) that cannot reach U(0, l).  Both sides of that
implication are executable here.

All checks on finite data are explicit about the radius ranges they verified.
"""

from __future__ import annotations

import math

from .config import Configuration, max_mark_norm, origin_ball, weighted_point_count

DEFAULT_DELTA = 0.5


def clearance_radius(t: int, delta: float) -> float:
    """Threshold radius l(t) for the clearance property, in dimension 2.

    Formula: (1/2) * t^(1/delta) * 2^((2+delta)/delta).  Only the planar case
    is supported; no closed form is exposed for other dimensions.
    """
    if t < 1:
        raise ValueError("t must be a positive integer")
    if delta <= 0:
        raise ValueError("delta must be positive")
    return 0.5 * t ** (1.0 / delta) * 2.0 ** ((2.0 + delta) / delta)


def configuration_extent(gamma: Configuration) -> float:
    """Smallest radius r such that U(0, r) contains every point together with
    its ball B(x, mark_norm) (up to the open/closed boundary)."""
    ext = 0.0
    for p in gamma:
        ext = max(ext, math.sqrt(sum(v * v for v in p.location)) + p.mark_norm)
    return ext


def temperedness_level(
    gamma: Configuration,
    d: int,
    delta: float,
    l_max: int,
    t_cap: int = 10**6,
) -> int | None:
    """Smallest integer t with weighted count(U(0,l)) <= t * l^d for l = 1..l_max.

    U(0, l_max) must contain the whole configuration including its mark balls;
    beyond that radius the left side is constant while the right side grows,
    so the scan is exhaustive for finite data.  Returns None when no t <= t_cap
    works.
    """
    if l_max < 1:
        raise ValueError("l_max must be >= 1")
    if gamma and configuration_extent(gamma) >= l_max:
        raise ValueError(
            "l_max does not cover the configuration extent; the request is unverifiable"
        )
    t = 1
    for l in range(1, l_max + 1):
        cnt = weighted_point_count(gamma.restrict(origin_ball(float(l), gamma.dim)), d, delta)
        need = int(math.ceil(cnt / float(l) ** d - 1e-12))
        t = max(t, need)
    return t if t <= t_cap else None


def satisfies_ball_clearance(gamma: Configuration, l: int, k_max: int) -> bool:
    """True when for every k in l..k_max each point outside U(0, 2k+1) has its
    ball B(x, mark_norm) disjoint from U(0, k)."""
    if l < 1:
        raise ValueError("l must be >= 1")
    for p in gamma:
        r = math.sqrt(sum(v * v for v in p.location))
        for k in range(l, k_max + 1):
            if r >= 2 * k + 1 and r - p.mark_norm < k:
                return False
    return True


def check_clearance_property(
    gamma: Configuration, t: int, delta: float, l_range: range
) -> bool:
    """Clearance check over a declared radius range for a level-t configuration.

    For every l in l_range with l >= clearance_radius(t, delta), every point
    outside U(0, 2l+1) must have its ball miss U(0, l).
    """
    threshold = clearance_radius(t, delta)
    for l in l_range:
        if l < threshold:
            continue
        for p in gamma:
            r = math.sqrt(sum(v * v for v in p.location))
            if r >= 2 * l + 1 and r - p.mark_norm < l:
                return False
    return True
