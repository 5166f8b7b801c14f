import math

import numpy as np
import pytest

from gibbsgeom.config import (
    Box,
    Configuration,
    FacetMark,
    WeightMark,
    centered_box,
    configuration_to_json,
    in_upper_hemisphere,
)
from gibbsgeom.poisson import (
    AtomLaw,
    DirectionAtoms,
    FacetMarkLaw,
    HemisphereUniform,
    PoissonSpec,
    UniformLaw,
    WeightMarkLaw,
    check_mark_moment,
    sample_poisson,
)

WEIGHT_LAW = WeightMarkLaw(UniformLaw(0.5, 2.0))

# Golden samples: full serialized output for three seeds of the same spec.
GOLDEN = {
    1: '[{"x": [-0.8496976978081776, 0.9675902669718193], "mark": {"kind": "weight", "value": 1.9211203209037777}}, {"x": [-0.3928639313864828, 0.6974174993715538], "mark": {"kind": "weight", "value": 0.7342021670652097}}, {"x": [-0.3813701776283309, -0.28608752641298496], "mark": {"kind": "weight", "value": 0.5553567957025353}}, {"x": [0.2729963442820156, 0.23889622504511165], "mark": {"kind": "weight", "value": 0.6268534447537426}}, {"x": [0.5179831060598505, 0.8066438426312901], "mark": {"kind": "weight", "value": 0.8291178735080567}}, {"x": [0.5977100138507387, 0.34488083260658664], "mark": {"kind": "weight", "value": 1.595290090740606}}, {"x": [0.7038861754759347, 0.3054526625302114], "mark": {"kind": "weight", "value": 1.414201915064256}}]',
    42: '[{"x": [-0.40031220710304205, 0.07694219211670505], "mark": {"kind": "weight", "value": 0.7944276832508129}}, {"x": [-0.2974647702934856, 0.4945046448796506], "mark": {"kind": "weight", "value": 1.8408929287181803}}, {"x": [-0.14616153495599504, 0.6855479497113028], "mark": {"kind": "weight", "value": 1.452173099474022}}, {"x": [-0.11250615731345204, 0.6327841902020663], "mark": {"kind": "weight", "value": 1.2635392793110647}}, {"x": [0.2988401592274721, 0.7697627071873543], "mark": {"kind": "weight", "value": 1.3306009117646558}}, {"x": [0.4244285920648898, -0.8589867639449389], "mark": {"kind": "weight", "value": 1.0909666234943292}}, {"x": [0.5376831081812348, -0.6200305317689896], "mark": {"kind": "weight", "value": 1.8334051180579851}}, {"x": [0.6403962957217753, -0.6215087518270901], "mark": {"kind": "weight", "value": 1.8014912223232193}}]',
    20260810: '[{"x": [-0.6741114988396137, 0.12014857679505941], "mark": {"kind": "weight", "value": 1.574429860052025}}, {"x": [-0.2822781974920643, 0.5763531918241962], "mark": {"kind": "weight", "value": 1.2005958144152244}}, {"x": [-0.06464786461046224, -0.08782828589662794], "mark": {"kind": "weight", "value": 1.641846628918605}}, {"x": [0.02012072304618817, 0.6477165674927765], "mark": {"kind": "weight", "value": 0.7395452213610403}}, {"x": [0.12401930824725316, 0.8592402048331567], "mark": {"kind": "weight", "value": 1.420564663225652}}]',
}


@pytest.fixture(scope="module")
def count_samples():
    """10^4 independent draws of a mean-20 process, reused across tests."""
    spec_of = lambda s: PoissonSpec(centered_box(1), 5.0, WEIGHT_LAW, s)
    return [sample_poisson(spec_of(s)) for s in range(10_000)]


def test_golden_samples_three_seeds():
    for seed, expected in GOLDEN.items():
        g = sample_poisson(PoissonSpec(centered_box(1), 1.5, WEIGHT_LAW, seed))
        assert configuration_to_json(g) == expected


def test_determinism_byte_for_byte():
    spec = PoissonSpec(centered_box(1), 3.0, WEIGHT_LAW, 123)
    a = configuration_to_json(sample_poisson(spec))
    b = configuration_to_json(sample_poisson(spec))
    assert a == b


def test_vanishing_activity_gives_empty():
    for seed in range(100):
        spec = PoissonSpec(Box((0.0, 0.0), (1.0, 1.0)), 1e-12, WEIGHT_LAW, seed)
        assert len(sample_poisson(spec)) == 0


def test_mean_count_matches_poisson(count_samples):
    counts = np.array([len(g) for g in count_samples])
    mean = counts.mean()
    # Poisson(20): sd of the mean over 10^4 draws
    assert abs(mean - 20.0) <= 3.0 * math.sqrt(20.0 / len(counts))


def test_disjoint_subwindow_counts_uncorrelated(count_samples):
    wa = Box((-1.0, -1.0), (0.0, 1.0))
    wb = Box((0.0, -1.0), (1.0, 1.0))
    na = np.array([len(g.restrict(wa)) for g in count_samples], dtype=float)
    nb = np.array([len(g.restrict(wb)) for g in count_samples], dtype=float)
    corr = np.corrcoef(na, nb)[0, 1]
    assert abs(corr) <= 3.0 / math.sqrt(len(count_samples))


def test_void_probability(count_samples):
    w = Box((-0.5, -0.5), (0.0, 0.0))  # area 0.25, z = 5 -> void prob e^-1.25
    p_true = math.exp(-5.0 * 0.25)
    hits = np.array([len(g.restrict(w)) == 0 for g in count_samples], dtype=float)
    se = math.sqrt(p_true * (1 - p_true) / len(hits))
    assert abs(hits.mean() - p_true) <= 3.0 * se


def test_marks_in_declared_support():
    law = FacetMarkLaw(HemisphereUniform(), UniformLaw(0.5, 1.5))
    g = sample_poisson(PoissonSpec(centered_box(2), 2.0, law, 99))
    assert len(g) > 0
    for p in g:
        assert isinstance(p.mark, FacetMark)
        assert 0.5 <= p.mark.radius <= 1.5
        assert in_upper_hemisphere(p.mark.normal)
        assert abs(sum(c * c for c in p.mark.normal) - 1.0) < 1e-12


def test_ball_window_sampling():
    from gibbsgeom.config import origin_ball

    g = sample_poisson(PoissonSpec(origin_ball(2.0), 2.0, WEIGHT_LAW, 5))
    for p in g:
        assert math.hypot(*p.location) < 2.0


def test_atom_direction_law():
    law = FacetMarkLaw(
        DirectionAtoms((((0.0, 1.0), 0.5), ((1.0, 0.0), 0.5))), AtomLaw(((1.0, 1.0),))
    )
    g = sample_poisson(PoissonSpec(centered_box(1), 5.0, law, 17))
    for p in g:
        assert p.mark.normal in ((0.0, 1.0), (1.0, 0.0))
        assert p.mark.radius == 1.0


# ---------------------------------------------------------------------------
# moment condition
# ---------------------------------------------------------------------------


def test_moment_holds_bounded_weight():
    v = check_mark_moment(WeightMarkLaw(UniformLaw(0.0 + 1e-9, 2.0)), 2, 0.5)
    assert v.verdict == "holds"
    assert v.integral is not None and math.isfinite(v.integral)


def test_moment_holds_bounded_facet_radius():
    v = check_mark_moment(FacetMarkLaw(HemisphereUniform(), UniformLaw(1.0, 43.0)), 2, 0.5)
    assert v.verdict == "holds"


def test_moment_single_atom_integral_is_e():
    # weight 1 with probability 1: integral equals exp(1^(d+2*delta)) = e
    v = check_mark_moment(WeightMarkLaw(AtomLaw(((1.0, 1.0),))), 2, 0.5)
    assert v.verdict == "holds"
    assert v.integral == pytest.approx(math.e, rel=1e-14)


def test_moment_unverifiable_outside_family():
    class OddLaw:
        pass

    assert check_mark_moment(OddLaw(), 2, 0.5).verdict == "unverifiable"
