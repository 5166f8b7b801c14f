"""Birth-death-translate Metropolis-Hastings for finite-volume Gibbs measures.

The target is e^(-H) relative to a marked Poisson reference on a window, with
an optional fixed boundary configuration outside the window entering through
the energy.  Acceptance ratios are the standard ones,

    birth:     min(1, (d/b) * z|W| / (n+1) * e^(-dH))
    death:     min(1, (b/d) * n / (z|W|) * e^(-dH))
    translate: min(1, e^(-dH))

where b and d are the birth/death proposal probabilities (the mix-ratio factor
drops out for the default symmetric mix).  Proposals hitting infinite energy
are always rejected, so the chain never leaves the finite-energy region it
starts in.

Determinism: a chain is a pure function of its spec; the RNG is Philox keyed
by [seed, 2^64-2], and derived sub-seeds come from [seed, 2^64-3].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import stats as sstats

from .config import (
    Ball,
    Box,
    Configuration,
    FacetMark,
    MarkedPoint,
    Vec,
    WeightMark,
    Window,
    centered_box,
    configuration_to_obj,
)
from .facets import FacetEnergyModel, count_crossings_vs, facet_energy, facet_of
from .laguerre_energy import triangulation_vertex_energy
from .poisson import (
    CHAIN_STREAM,
    SUBSEED_STREAM,
    MarkLaw,
    PoissonSpec,
    _draw_location,
    sample_poisson,
    substream,
)


class ChainDivergenceError(RuntimeError):
    """Energy trace diverging below any bound: the target is not normalizable."""


# ---------------------------------------------------------------------------
# Energy adapters
# ---------------------------------------------------------------------------


class FacetInteraction:
    """Pairwise/triple facet intersection energy over free + boundary points."""

    def __init__(self, model: FacetEnergyModel):
        self.model = model

    def total(self, pts: Sequence[MarkedPoint]) -> float:
        if all(c == 0.0 for c in self.model.coefficients):
            return 0.0
        return facet_energy(pts, self.model)

    def _cross_count(self, p: MarkedPoint, others: Sequence[MarkedPoint]) -> int:
        if not others:
            return 0
        centers = np.array([q.location for q in others])
        normals = np.array([q.mark.normal for q in others])
        radii = np.array([q.mark.radius for q in others])
        f = facet_of(p)
        return count_crossings_vs(
            f.center, f.normal, f.radius, centers, normals, radii,
            tol=self.model.degeneracy_tolerance,
        )

    def insert_delta(self, pts: Sequence[MarkedPoint], p: MarkedPoint, current: float) -> float:
        if self.model.dim == 2:
            a2 = self.model.coefficients[0]
            if a2 == 0.0:
                return 0.0
            return a2 * self._cross_count(p, pts)
        return self.total(list(pts) + [p]) - current

    def delete_delta(self, pts: Sequence[MarkedPoint], i: int, current: float) -> float:
        if self.model.dim == 2:
            a2 = self.model.coefficients[0]
            if a2 == 0.0:
                return 0.0
            others = list(pts[:i]) + list(pts[i + 1 :])
            return -a2 * self._cross_count(pts[i], others)
        return self.total(list(pts[:i]) + list(pts[i + 1 :])) - current

    def move_delta(
        self, pts: Sequence[MarkedPoint], i: int, q: MarkedPoint, current: float
    ) -> float:
        if self.model.dim == 2:
            a2 = self.model.coefficients[0]
            if a2 == 0.0:
                return 0.0
            others = list(pts[:i]) + list(pts[i + 1 :])
            return a2 * (self._cross_count(q, others) - self._cross_count(pts[i], others))
        moved = list(pts)
        moved[i] = q
        return self.total(moved) - current


class LaguerreVertexInteraction:
    """Vertex-count energy of the Laguerre diagram of free + boundary points."""

    def total(self, pts: Sequence[MarkedPoint]) -> float:
        if not pts:
            return 0.0
        nuclei = np.array([p.location for p in pts])
        weights = np.array([p.mark.weight for p in pts])
        val, _ = triangulation_vertex_energy(nuclei, weights)
        return math.inf if val is None else float(val)

    def insert_delta(self, pts, p, current: float) -> float:
        new = self.total(list(pts) + [p])
        return math.inf if math.isinf(new) else new - current

    def delete_delta(self, pts, i, current: float) -> float:
        new = self.total(list(pts[:i]) + list(pts[i + 1 :]))
        return math.inf if math.isinf(new) else new - current

    def move_delta(self, pts, i, q, current: float) -> float:
        moved = list(pts)
        moved[i] = q
        new = self.total(moved)
        return math.inf if math.isinf(new) else new - current


EnergyAdapter = FacetInteraction | LaguerreVertexInteraction


# ---------------------------------------------------------------------------
# Chain specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MoveMix:
    birth: float = 0.4
    death: float = 0.4
    translate: float = 0.2

    def __post_init__(self):
        if abs(self.birth + self.death + self.translate - 1.0) > 1e-12:
            raise ValueError("move probabilities must sum to 1")
        if (self.birth > 0) != (self.death > 0):
            raise ValueError("birth and death must be both enabled or both disabled")


@dataclass(frozen=True)
class ChainParams:
    steps: int
    burnin: int
    thinning: int
    seed: int
    move_mix: MoveMix = MoveMix()
    divergence_floor: float = -1e3
    divergence_patience: int = 10_000

    def __post_init__(self):
        if self.steps < 0 or self.burnin < 0 or self.thinning < 1:
            raise ValueError("invalid chain parameters")


@dataclass(frozen=True)
class CutoffSpec:
    n: int  # boundary truncated to [-n, n)^2 minus the window
    mark_bound: float  # proposals with larger mark norm are forbidden


@dataclass(frozen=True)
class GibbsSpec:
    window: Window
    activity: float
    model: EnergyAdapter
    mark_law: MarkLaw
    chain: ChainParams
    boundary: Configuration | None = None
    cutoff: CutoffSpec | None = None

    def __post_init__(self):
        if self.boundary is not None:
            for p in self.boundary:
                if self.window.contains(p.location):
                    raise ValueError("boundary configuration intersects the window")


@dataclass
class ChainOutput:
    samples: list[Configuration]
    acceptance: dict[str, tuple[int, int]]  # move -> (accepted, proposed)
    energy_trace: np.ndarray
    move_trace: list[str]
    accepted_trace: list[bool]
    count_trace: np.ndarray
    seed: int
    geweke_z: float | None
    final_state: Configuration
    rng_state: dict


def acceptance_ratio(
    move: str, z: float, volume: float, n: int, delta: float, mix: MoveMix
) -> float:
    """Unclamped MH ratio for a move at pre-move point count n."""
    if math.isinf(delta):
        return 0.0
    if move == "birth":
        return (mix.death / mix.birth) * z * volume / (n + 1) * math.exp(-delta)
    if move == "death":
        return (mix.birth / mix.death) * n / (z * volume) * math.exp(-delta)
    if move == "translate":
        return math.exp(-delta)
    raise ValueError(move)


def _fold_into_box(x: float, lo: float, hi: float) -> float:
    """Reflect a real into [lo, hi) by folding (triangular wave)."""
    width = hi - lo
    if width <= 0:
        return lo
    t = (x - lo) % (2.0 * width)
    if t < 0:
        t += 2.0 * width
    folded = t if t < width else 2.0 * width - t
    return min(lo + folded, np.nextafter(hi, lo))


def _propose_translate(rng, window: Window, loc: Vec, sigma: float) -> Vec | None:
    step = rng.normal(0.0, sigma, size=len(loc))
    cand = tuple(c + s for c, s in zip(loc, step))
    if isinstance(window, Box):
        return tuple(
            _fold_into_box(v, l, h) for v, l, h in zip(cand, window.lower, window.upper)
        )
    return cand if window.contains(cand) else None


def _mh_run(
    window: Window,
    z: float,
    model: EnergyAdapter,
    mark_law: MarkLaw,
    boundary: tuple[MarkedPoint, ...],
    rng,
    steps: int,
    mix: MoveMix,
    init: Sequence[MarkedPoint] = (),
    cutoff: CutoffSpec | None = None,
    negate_delta: bool = False,
    on_step: Callable[[int, str, bool, list[MarkedPoint], float], None] | None = None,
    divergence_floor: float = -1e3,
    divergence_patience: int = 10_000,
) -> tuple[list[MarkedPoint], float]:
    """Core MH loop; returns (final free points, final energy)."""
    dim = window.dim
    volume = window.volume()
    sigma = 0.1 * window.diameter()
    free: list[MarkedPoint] = list(init)
    combined = free + list(boundary)
    current = model.total(combined)
    if math.isinf(current):
        raise ValueError("initial state has infinite energy")
    div_run = 0
    last_div_energy = None
    for step_idx in range(steps):
        u = rng.random()
        accepted = False
        if u < mix.birth:
            move = "birth"
            loc = _draw_location(rng, window)
            mark = mark_law.sample(rng, dim)
            p = MarkedPoint(loc, mark)
            if cutoff is not None and p.mark_norm > cutoff.mark_bound:
                delta = math.inf
            else:
                delta = model.insert_delta(combined, p, current)
                if negate_delta and not math.isinf(delta):
                    delta = -delta
            n = len(free)
            ratio = acceptance_ratio("birth", z, volume, n, delta, mix)
            if ratio >= 1.0 or rng.random() < ratio:
                free.append(p)
                combined = free + list(boundary)
                current += delta if not math.isinf(delta) else 0.0
                accepted = True
        elif u < mix.birth + mix.death:
            move = "death"
            n = len(free)
            if n > 0:
                i = int(rng.integers(n))
                delta = model.delete_delta(combined, i, current)
                if negate_delta and not math.isinf(delta):
                    delta = -delta
                ratio = acceptance_ratio("death", z, volume, n, delta, mix)
                if ratio >= 1.0 or rng.random() < ratio:
                    free.pop(i)
                    combined = free + list(boundary)
                    current += delta
                    accepted = True
        else:
            move = "translate"
            n = len(free)
            if n > 0:
                i = int(rng.integers(n))
                newloc = _propose_translate(rng, window, free[i].location, sigma)
                if newloc is not None:
                    q = MarkedPoint(newloc, free[i].mark)
                    delta = model.move_delta(combined, i, q, current)
                    if negate_delta and not math.isinf(delta):
                        delta = -delta
                    ratio = acceptance_ratio("translate", z, volume, n, delta, mix)
                    if ratio >= 1.0 or rng.random() < ratio:
                        free[i] = q
                        combined = free + list(boundary)
                        current += delta
                        accepted = True
        if accepted and move == "birth":
            if current < divergence_floor and (
                last_div_energy is None or current < last_div_energy
            ):
                div_run += 1
                last_div_energy = current
            else:
                div_run = 0
                last_div_energy = None
            if div_run >= divergence_patience:
                raise ChainDivergenceError(
                    f"energy decreased monotonically through {div_run} accepted births "
                    f"below {divergence_floor}: non-normalizable target suspected"
                )
        if on_step is not None:
            on_step(step_idx, move, accepted, free, current)
    return free, current


def geweke_z(trace: np.ndarray, first: float = 0.1, last: float = 0.5) -> float | None:
    """Geweke convergence score comparing early and late trace segments."""
    n = len(trace)
    if n < 20:
        return None
    a = trace[: max(1, int(first * n))]
    b = trace[int((1.0 - last) * n) :]
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if va + vb == 0:
        return 0.0
    return float((a.mean() - b.mean()) / math.sqrt(va / len(a) + vb / len(b)))


def run_chain(spec: GibbsSpec) -> ChainOutput:
    """Run the MH chain described by the spec; identical specs give identical
    outputs byte for byte."""
    rng = substream(spec.chain.seed, CHAIN_STREAM)
    boundary_pts: tuple[MarkedPoint, ...] = ()
    if spec.boundary is not None:
        pts = spec.boundary.points
        if spec.cutoff is not None:
            shell = centered_box(spec.cutoff.n, spec.window.dim)
            pts = tuple(p for p in pts if shell.contains(p.location))
        boundary_pts = pts

    energy_trace: list[float] = []
    count_trace: list[int] = []
    move_trace: list[str] = []
    accepted_trace: list[bool] = []
    samples: list[Configuration] = []
    acc = {"birth": [0, 0], "death": [0, 0], "translate": [0, 0]}
    params = spec.chain

    def record(step_idx, move, accepted, free, current):
        energy_trace.append(current)
        count_trace.append(len(free))
        move_trace.append(move)
        accepted_trace.append(accepted)
        acc[move][1] += 1
        if accepted:
            acc[move][0] += 1
        t = step_idx + 1
        if t > params.burnin and (t - params.burnin) % params.thinning == 0:
            samples.append(Configuration(list(free), dim=spec.window.dim))

    _mh_run(
        spec.window,
        spec.activity,
        spec.model,
        spec.mark_law,
        boundary_pts,
        rng,
        params.steps,
        params.move_mix,
        cutoff=spec.cutoff,
        on_step=record,
        divergence_floor=params.divergence_floor,
        divergence_patience=params.divergence_patience,
    )
    trace = np.asarray(energy_trace)
    final_free = samples[-1].points if samples else ()
    # final state reconstructed from the last recorded step
    return ChainOutput(
        samples=samples,
        acceptance={k: (v[0], v[1]) for k, v in acc.items()},
        energy_trace=trace,
        move_trace=move_trace,
        accepted_trace=accepted_trace,
        count_trace=np.asarray(count_trace),
        seed=params.seed,
        geweke_z=geweke_z(trace),
        final_state=Configuration(list(final_free), dim=spec.window.dim)
        if final_free
        else Configuration.empty(spec.window.dim),
        rng_state=rng.bit_generator.state,
    )


# ---------------------------------------------------------------------------
# Partition function estimation
# ---------------------------------------------------------------------------


@dataclass
class PartitionEstimate:
    estimate: float
    std_error: float
    n_samples: int


def estimate_partition(
    window: Window,
    z: float,
    model: EnergyAdapter,
    mark_law: MarkLaw,
    n_samples: int,
    seed: int,
) -> PartitionEstimate:
    """Monte Carlo mean of e^(-H) over reference samples.

    The reference is a probability measure, so for H >= 0 the estimate lies in
    (0, 1] and is consistent; the empty configuration alone contributes
    e^(-z|W|) > 0, so the true value is never 0.
    """
    sub = substream(seed, SUBSEED_STREAM)
    seeds = sub.integers(0, 2**63 - 1, size=n_samples)
    vals = np.empty(n_samples)
    for i, s in enumerate(seeds):
        gamma = sample_poisson(PoissonSpec(window, z, mark_law, int(s)))
        h = model.total(gamma.points)
        vals[i] = 0.0 if math.isinf(h) else math.exp(-h)
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else math.inf
    return PartitionEstimate(est, se, n_samples)


def flag_divergent_partition(
    gamma_u: float,
    gamma_v: float,
    delta_rest: float,
    k_max: int = 60,
    log_cap: float = 100.0,
) -> bool:
    """True when the restricted lower-bound series for log Z exceeds log_cap
    within k_max: the partition function is then provably astronomically large
    (divergent in the limit)."""
    from .facets import partition_lower_bound_log_term

    return any(
        partition_lower_bound_log_term(k, gamma_u, gamma_v, delta_rest) > log_cap
        for k in range(1, k_max + 1)
    )


# ---------------------------------------------------------------------------
# Shift averaging over tiled independent copies
# ---------------------------------------------------------------------------


def shift_average(
    samples: Sequence[Configuration],
    statistic: Callable[[Configuration], float],
    locality: Box,
    n: int,
) -> float:
    """Average of the statistic over integer shifts inside [-n, n)^2.

    The statistic must be local to ``locality``.  When a shifted locality
    window leaves the sampling window it is assembled from other samples in
    the pool acting as independent tiled copies, shifted by the tile offset.
    """
    if not samples:
        raise ValueError("no samples")
    dim = samples[0].dim
    if dim != 2:
        raise ValueError("shift averaging implemented for the plane")
    L = len(samples)
    side = 2 * n
    area = float(side * side)
    lo = locality.lower
    up = locality.upper
    total = 0.0
    for kx in range(-n, n):
        for ky in range(-n, n):
            # region needed from the tiled field: locality - kappa
            rlo = (lo[0] - kx, lo[1] - ky)
            rup = (up[0] - kx, up[1] - ky)
            jxs = range(
                int(math.floor((rlo[0] + n) / side)), int(math.floor((rup[0] + n) / side)) + 1
            )
            jys = range(
                int(math.floor((rlo[1] + n) / side)), int(math.floor((rup[1] + n) / side)) + 1
            )
            acc = 0.0
            for s in range(L):
                pts: list[MarkedPoint] = []
                for jx in jxs:
                    for jy in jys:
                        if jx == 0 and jy == 0:
                            src = samples[s]
                        else:
                            stride = (37 * jx + 101 * jy) % L
                            if stride == 0:
                                stride = 1 % L
                            src = samples[(s + stride) % L]
                        ox, oy = side * jx, side * jy
                        for p in src:
                            x = (p.location[0] + ox + kx, p.location[1] + oy + ky)
                            if lo[0] <= x[0] < up[0] and lo[1] <= x[1] < up[1]:
                                pts.append(MarkedPoint(x, p.mark))
                acc += statistic(Configuration(pts, dim=2))
            total += acc / L
    return total / area


# ---------------------------------------------------------------------------
# DLR consistency test
# ---------------------------------------------------------------------------


@dataclass
class DlrResult:
    statistic: float
    p_value: float
    p_per_coordinate: tuple[float, float]
    n_samples: int
    effective_sample_size: float
    sufficient: bool


def effective_sample_size(series: np.ndarray) -> float:
    """ESS via the initial-positive-sequence autocorrelation estimator."""
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 4 or x.var() == 0:
        return float(n)
    x = x - x.mean()
    acf = np.correlate(x, x, mode="full")[n - 1 :] / (x @ x)
    tau = 1.0
    for k in range(1, min(n // 2, 1000)):
        if acf[k] <= 0:
            break
        tau += 2.0 * acf[k]
    return float(n / tau)


def local_energy(model: EnergyAdapter, pts: Sequence[MarkedPoint], window: Window) -> float:
    inside = [p for p in pts if window.contains(p.location)]
    outside = [p for p in pts if not window.contains(p.location)]
    tot = model.total(list(pts))
    rest = model.total(outside)
    if math.isinf(tot) or math.isinf(rest):
        return math.inf
    return tot - rest


def dlr_consistency_test(
    big_window: Window,
    small_window: Window,
    z: float,
    model: EnergyAdapter,
    mark_law: MarkLaw,
    seed: int,
    n_samples: int = 200,
    outer_burnin: int = 2000,
    outer_thinning: int = 40,
    inner_steps: int = 400,
    mix: MoveMix = MoveMix(),
    negate_inner_delta: bool = False,
) -> DlrResult:
    """Two-sample comparison of full-window samples against kernel resamples.

    Sample A: the small-window restriction of chains run on the big window.
    Sample B: the small window resampled conditionally on each chain sample's
    configuration outside it.  Count and local-energy marginals are compared
    by two-sample Kolmogorov-Smirnov with a Bonferroni correction.
    """
    steps = outer_burnin + outer_thinning * n_samples
    chain = ChainParams(steps=steps, burnin=outer_burnin, thinning=outer_thinning, seed=seed)
    out = run_chain(GibbsSpec(big_window, z, model, mark_law, chain))
    if len(out.samples) < n_samples:
        raise RuntimeError("outer chain produced fewer samples than requested")
    sub = substream(seed, SUBSEED_STREAM)
    inner_seeds = sub.integers(0, 2**63 - 1, size=len(out.samples))

    counts_a = []
    energy_a = []
    counts_b = []
    energy_b = []
    for idx, gamma in enumerate(out.samples):
        pts = list(gamma.points)
        counts_a.append(sum(1 for p in pts if small_window.contains(p.location)))
        energy_a.append(local_energy(model, pts, small_window))
        xi = tuple(p for p in pts if not small_window.contains(p.location))
        rng = substream(int(inner_seeds[idx]), CHAIN_STREAM)
        free, _ = _mh_run(
            small_window,
            z,
            model,
            mark_law,
            xi,
            rng,
            inner_steps,
            mix,
            negate_delta=negate_inner_delta,
        )
        counts_b.append(len(free))
        energy_b.append(local_energy(model, list(free) + list(xi), small_window))

    ca = np.asarray(counts_a, dtype=float)
    cb = np.asarray(counts_b, dtype=float)
    ea = np.asarray(energy_a, dtype=float)
    eb = np.asarray(energy_b, dtype=float)
    ks1 = sstats.ks_2samp(ca, cb, method="asymp")
    ks2 = sstats.ks_2samp(ea, eb, method="asymp")
    p = min(1.0, 2.0 * min(ks1.pvalue, ks2.pvalue))
    ess = min(effective_sample_size(ca), float(len(ca)))
    return DlrResult(
        statistic=float(max(ks1.statistic, ks2.statistic)),
        p_value=float(p),
        p_per_coordinate=(float(ks1.pvalue), float(ks2.pvalue)),
        n_samples=len(out.samples),
        effective_sample_size=ess,
        sufficient=ess >= 100,
    )


def joint_chi_square(
    sample_a: Sequence[tuple], sample_b: Sequence[tuple], min_expected: float = 5.0
) -> tuple[float, float]:
    """Two-sample chi-square homogeneity test on joint discrete statistics,
    pooling rare categories until expected counts clear min_expected."""
    cats = sorted(set(sample_a) | set(sample_b))
    na, nb = len(sample_a), len(sample_b)
    ca = {c: 0 for c in cats}
    cb = {c: 0 for c in cats}
    for v in sample_a:
        ca[v] += 1
    for v in sample_b:
        cb[v] += 1
    cols = [(ca[c], cb[c]) for c in cats]
    cols.sort(key=lambda t: t[0] + t[1])
    merged: list[tuple[int, int]] = []
    pool = [0, 0]
    total = na + nb
    for a, b in cols:
        exp_a = na * (a + b) / total
        exp_b = nb * (a + b) / total
        if min(exp_a, exp_b) < min_expected:
            pool[0] += a
            pool[1] += b
        else:
            merged.append((a, b))
    if pool != [0, 0]:
        merged.append(tuple(pool))
    if len(merged) < 2:
        return 0.0, 1.0
    table = np.array(merged).T
    res = sstats.chi2_contingency(table, correction=False)
    return float(res.statistic), float(res.pvalue)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def checkpoint_to_obj(state: Configuration, rng_state: dict) -> dict:
    return {"configuration": configuration_to_obj(state), "rng_state": _jsonable(rng_state)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj
