import math

import numpy as np
import pytest

from markovsphere.grid import ChartLattice, GridMask, write_pgm
from markovsphere.sphere import chordal_dist_batch


def test_encode_decode_round_trip():
    lat = ChartLattice(50)
    ids = np.array([0, 123, 2499, 2500, 4999], dtype=np.int64)
    chart, ix, iy = lat.decode(ids)
    assert np.array_equal(lat.encode(chart, ix, iy), ids)


def test_area_weights_total_sphere():
    lat = ChartLattice(100)
    w = lat.area_weights()
    assert w.sum() == pytest.approx(4 * math.pi, rel=1e-3)
    # each chart owns exactly a hemisphere
    assert w[0].sum() == pytest.approx(2 * math.pi, rel=1e-3)


def test_mark_mode_centers_only():
    lat = ChartLattice(250)  # cell 0.01, centers at ..., -0.005, 0.005, ...
    # centers within [0.005 - 0.016, 0.005 + 0.016]: three per axis
    ids = lat.square_ids(0, 0.005 + 0.005j, 0.016, mode="mark", cross=False)
    assert len(ids) == 9
    # cell squares intersecting [-0.011, 0.021]: five per axis
    cov = lat.square_ids(0, 0.005 + 0.005j, 0.016, mode="cover", cross=False)
    assert len(cov) == 25


def test_mark_tiny_square_never_empty():
    lat = ChartLattice(250)
    ids = lat.square_ids(0, 0.0031 + 0.0032j, 1e-6, mode="mark", cross=False)
    assert len(ids) == 1
    chart, coord = lat.centers(ids)
    assert abs(coord[0] - (0.005 + 0.005j)) < 1e-12


def test_cross_chart_marking_overlap():
    lat = ChartLattice(250)
    ids = lat.square_ids(0, 1.0 + 0j, 0.02, mode="mark")
    chart, coord = lat.centers(ids)
    assert (chart == 0).any() and (chart == 1).any()
    # inverted-chart marks must sit near 1/1.0 = 1.0
    inv = coord[chart]
    assert np.all(np.abs(inv - 1.0) < 0.1)


def test_cross_chart_skipped_away_from_overlap():
    lat = ChartLattice(250)
    ids = lat.square_ids(0, 0.2 + 0j, 0.05, mode="mark")
    chart, _ = lat.centers(ids)
    assert not chart.any()


def test_batched_matches_scalar():
    lat = ChartLattice(125)
    rng = np.random.default_rng(5)
    centers = rng.uniform(-1.2, 1.2, 300) + 1j * rng.uniform(-1.2, 1.2, 300)
    halves = rng.uniform(1e-4, 0.08, 300)
    charts = rng.integers(0, 2, 300)
    flat, offs = lat.squares_ids_batched(charts, centers, halves, mode="mark")
    for k in range(300):
        mine = np.sort(flat[offs[k]:offs[k + 1]])
        ref = np.sort(lat.square_ids(charts[k], centers[k], halves[k], mode="mark"))
        assert np.array_equal(mine, ref), k


def test_marked_region_within_two_cell_dilation():
    # mark-mode invariant: the full square is covered by the marked cells
    # dilated by 2 cells
    lat = ChartLattice(200)
    rng = np.random.default_rng(9)
    for _ in range(100):
        c = complex(*rng.uniform(-0.7, 0.7, 2))
        h = rng.uniform(0.001, 0.05)
        marked = lat.square_ids(0, c, h, mode="mark", cross=False)
        need = lat.square_ids(0, c, h, mode="cover", cross=False)
        dil = lat.dilate(marked, 2)
        assert np.isin(need, dil).all()


def test_dilate_counts():
    lat = ChartLattice(50)
    ids = lat.encode(np.array([0]), np.array([25]), np.array([25]))
    assert len(lat.dilate(ids, 1)) == 9
    assert len(lat.dilate(ids, 2)) == 25


def test_rle_round_trip():
    lat = ChartLattice(32)
    rng = np.random.default_rng(0)
    layers = rng.uniform(size=(2, 2, 32, 32)) < 0.2
    mask = GridMask(lat, layers)
    back = GridMask.from_rle_json(mask.rle_json())
    assert np.array_equal(back.layers, mask.layers)


def test_pgm_write(tmp_path):
    data = np.zeros((8, 8), dtype=bool)
    data[2, 3] = True
    path = tmp_path / "m.pgm"
    write_pgm(path, data)
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n8 8\n255\n")
    assert raw[-64:][2 * 8 + 3] == 255


def test_chordal_halfdistance_identical_sets():
    lat = ChartLattice(64)
    ids = lat.square_ids(0, 0.1 + 0.1j, 0.2, mode="mark")
    assert lat.chordal_halfdistance(ids, ids) == 0.0
