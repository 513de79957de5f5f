import numpy as np
import pytest

from markovsphere import presets
from markovsphere.errors import (
    InvalidMapError,
    IrreducibilityError,
    SchemaError,
    StochasticityError,
)
from markovsphere.gdms import (
    MapFamily,
    build,
    family_from_json,
    family_to_json,
    map_from_json,
    map_to_json,
    stationary_vector,
    to_description,
)
from markovsphere.ratmap import RationalMap
from markovsphere.rng import RngState


def test_build_chaotic_pair_is_valid():
    g = presets.chaotic_pair()
    assert g.m == 2
    assert np.allclose(g.P, [[0.5, 0.5], [1.0, 0.0]])
    assert np.allclose(g.p, [2 / 3, 1 / 3])


def test_build_rejects_missing_return_path():
    desc = {
        "vertices": 2,
        "edges": [
            {"from": 1, "to": 2, "weight": 1.0,
             "family": {"kind": "atoms",
                        "atoms": [{"map": [[0, 0], [0, 0], [1, 0]], "weight": 1.0}]}},
            {"from": 2, "to": 2, "weight": 1.0,
             "family": {"kind": "atoms",
                        "atoms": [{"map": [[0, 0], [0, 0], [1, 0]], "weight": 1.0}]}},
        ],
    }
    with pytest.raises(IrreducibilityError):
        build(desc)


def test_build_rejects_bad_row_sum():
    desc = {
        "vertices": 1,
        "edges": [
            {"from": 1, "to": 1, "weight": 0.9,
             "family": {"kind": "atoms",
                        "atoms": [{"map": [[0, 0], [0, 0], [1, 0]], "weight": 1.0}]}},
        ],
    }
    with pytest.raises(StochasticityError):
        build(desc)


def test_build_rejects_low_degree():
    desc = {
        "vertices": 1,
        "edges": [
            {"from": 1, "to": 1, "weight": 1.0,
             "family": {"kind": "atoms",
                        "atoms": [{"map": [[1, 0], [1, 0]], "weight": 1.0}]}},
        ],
    }
    with pytest.raises(InvalidMapError):
        build(desc)


def test_stationary_single_vertex():
    assert stationary_vector([[1.0]]) == pytest.approx([1.0])


def test_stationary_two_state_hand_oracle():
    # p1 = p1/2 + p2, p1 + p2 = 1  =>  p = (2/3, 1/3)
    p = stationary_vector([[0.5, 0.5], [1.0, 0.0]])
    assert p == pytest.approx([2 / 3, 1 / 3])


def test_stationary_doubly_stochastic():
    P = np.array([[0.2, 0.3, 0.5], [0.5, 0.2, 0.3], [0.3, 0.5, 0.2]])
    assert stationary_vector(P) == pytest.approx([1 / 3] * 3)


def test_stationary_residual():
    rng = np.random.default_rng(0)
    for _ in range(50):
        P = rng.uniform(0.01, 1, (5, 5))
        P /= P.sum(axis=1, keepdims=True)
        p = stationary_vector(P)
        assert np.max(np.abs(p @ P - p)) <= 1e-12
        assert np.all(p > 0)


def test_admissible_words_single_loop():
    g = presets.dirac_zsquared()
    words = list(g.admissible_words(5, from_vertex=0, to_vertex=0))
    assert words == [(0, 0, 0, 0, 0)]


def test_admissible_words_chaotic_graph_hand_oracle():
    g = presets.chaotic_pair()
    words = list(g.admissible_words(2, from_vertex=0))
    # edges: 0 = (1,1), 1 = (1,2), 2 = (2,1); from vertex 1, length 2:
    # (0,0), (0,1), (1,2) in lexicographic order
    assert words == [(0, 0), (0, 1), (1, 2)]


def test_admissible_words_empty():
    g = presets.chaotic_pair()
    # vertex 2 -> vertex 2 needs an even-length path; length 1 is empty
    assert list(g.admissible_words(1, from_vertex=1, to_vertex=1)) == []


def test_word_count_matches_matrix_power_oracle():
    g = presets.chaotic_pair()
    A = np.zeros((2, 2))
    for e in g.edges:
        A[e.src, e.dst] += 1
    for n in range(1, 7):
        count = len(list(g.admissible_words(n, from_vertex=0)))
        assert count == int(np.linalg.matrix_power(A, n)[0].sum())


def test_support_net_atoms():
    fam = MapFamily("atoms", atoms=[(RationalMap([0, 0, 1]), 0.5),
                                    (RationalMap([1, 0, 1]), 0.5)])
    assert len(fam.support_net(0.5)) == 2


def test_support_net_disk_center_and_ring():
    fam = MapFamily("disk", template="quadratic_c", center=0j, radius=0.25)
    params = fam.net_params(0.5)
    assert any(abs(p) < 1e-12 for p in params)  # center forced
    ring = [p for p in params if abs(abs(p) - 0.25) < 1e-9]
    assert len(ring) >= 6
    assert np.all(np.abs(params) <= 0.25 + 1e-12)


def test_support_net_radius_zero():
    fam = MapFamily("disk", template="quadratic_c", center=0.1 + 0j, radius=0.0)
    net = fam.support_net(0.5)
    assert len(net) == 1
    assert net[0].num[0] == pytest.approx(0.1 + 0j)


def test_support_net_covers_disk_densely():
    fam = MapFamily("disk", template="quadratic_c", center=0.3 + 0.2j, radius=0.5)
    delta = 0.25
    params = fam.net_params(delta)
    rng = np.random.default_rng(4)
    probes = fam.center + fam.radius * np.sqrt(rng.uniform(size=4000)) * np.exp(
        2j * np.pi * rng.uniform(size=4000)
    )
    d = np.abs(probes[:, None] - params[None, :]).min(axis=1)
    assert d.max() <= delta * fam.radius


def test_sample_edge_dirac():
    g = presets.dirac_zsquared()
    st = RngState((1, 2, 3))
    edge, f, st = g.sample_edge_and_map(0, st)
    assert edge == 0 and f.degree == 2


def test_sample_edge_frequency_binomial():
    g = presets.chaotic_pair()
    n = 100_000
    hits = 0
    st = RngState((42,))
    for k in range(n):
        edge, _, st = g.sample_edge_and_map(0, st)
        hits += edge == 0
    phat = hits / n
    sigma = (0.25 / n) ** 0.5
    assert abs(phat - 0.5) <= 3 * sigma


def test_sample_disk_in_closed_disk():
    g = presets.quadratic_system(0, 0.1)
    st = RngState((7,))
    for _ in range(500):
        _, f, st = g.sample_edge_and_map(0, st)
        assert abs(f.num[0]) <= 0.1 + 1e-12


def test_description_round_trip():
    for desc in (presets.quadratic_description(0, 0.1),
                 presets.chaotic_pair_description(),
                 presets.siegel_pair_description()):
        g = build(desc)
        desc2 = to_description(g, meta=desc.get("meta"))
        g2 = build(desc2)
        assert to_description(g2) == to_description(g)


def test_map_json_round_trip():
    f = RationalMap([0.3, 1, 0.2, 1], [1, -0.4, 1])
    assert map_to_json(map_from_json(map_to_json(f))) == map_to_json(f)


def test_validation_report_contents():
    g = presets.chaotic_pair()
    rep = g.validation_report()
    assert rep["stationary"] == pytest.approx([2 / 3, 1 / 3])
    assert len(rep["cycle_cover"]) == 2


def test_shortest_loop_length():
    assert presets.dirac_zsquared().shortest_loop_length(0) == 1
    assert presets.chaotic_pair().shortest_loop_length(0) == 1
    assert presets.chaotic_pair().shortest_loop_length(1) == 2
