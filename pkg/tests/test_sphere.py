import math

import numpy as np
import pytest

from markovsphere.errors import InvalidPointError
from markovsphere.sphere import (
    CHART_LIMIT,
    Chart,
    SpherePoint,
    chordal_dist,
    chordal_dist_batch,
    normalize,
    normalize_batch,
    random_sphere_points,
)


def sp(z):
    return SpherePoint.from_complex(z)


def test_chordal_antipodal():
    assert chordal_dist(sp(0), SpherePoint.infinity()) == pytest.approx(2.0)


def test_chordal_identity():
    assert chordal_dist(sp(0.3 + 0.4j), sp(0.3 + 0.4j)) == 0.0


def test_chordal_zero_one():
    assert chordal_dist(sp(0), sp(1)) == pytest.approx(math.sqrt(2), abs=1e-12)


def test_normalize_switches_chart():
    p = normalize(SpherePoint(Chart.STANDARD, 2.0 + 0j))
    assert p.chart == Chart.INVERTED
    assert p.coord == pytest.approx(0.5)


def test_normalize_keeps_inside_band():
    p = normalize(SpherePoint(Chart.STANDARD, 0.3 + 0j))
    assert p == SpherePoint(Chart.STANDARD, 0.3 + 0j)
    # hysteresis: 1.2 stays put even though its canonical modulus is > 1
    q = normalize(SpherePoint(Chart.STANDARD, 1.2 + 0j))
    assert q.chart == Chart.STANDARD


def test_normalize_infinity_canonical():
    assert normalize(SpherePoint.infinity()) == SpherePoint.infinity()


def test_normalize_idempotent():
    rng = np.random.default_rng(7)
    for _ in range(200):
        z = complex(*rng.uniform(-3, 3, 2))
        p = normalize(SpherePoint(Chart.STANDARD, z))
        assert normalize(p) == p
        assert abs(p.coord) <= CHART_LIMIT + 1e-15


def test_normalize_rejects_nonfinite():
    with pytest.raises(InvalidPointError):
        normalize(SpherePoint(Chart.STANDARD, complex(math.inf, 0)))


def test_chart_agreement_random_pairs():
    # The same pair of points represented in either chart must give the
    # same distance to 1e-12 relative accuracy.
    rng = np.random.default_rng(12345)
    n = 10_000
    z = rng.uniform(0.3, 1.2, n) * np.exp(2j * np.pi * rng.uniform(size=n))
    w = rng.uniform(0.3, 1.2, n) * np.exp(2j * np.pi * rng.uniform(size=n))
    d_std = chordal_dist_batch(np.zeros(n, bool), z, np.zeros(n, bool), w)
    d_inv = chordal_dist_batch(np.ones(n, bool), 1 / z, np.ones(n, bool), 1 / w)
    d_mix = chordal_dist_batch(np.zeros(n, bool), z, np.ones(n, bool), 1 / w)
    assert np.allclose(d_std, d_inv, rtol=1e-12, atol=1e-13)
    assert np.allclose(d_std, d_mix, rtol=1e-12, atol=1e-13)


def test_triangle_inequality_random_triples():
    rng = np.random.default_rng(99)
    for _ in range(2000):
        a, b, c = (sp(complex(*rng.uniform(-2, 2, 2))) for _ in range(3))
        assert chordal_dist(a, c) <= chordal_dist(a, b) + chordal_dist(b, c) + 1e-12


def test_batch_normalize_matches_scalar():
    rng = np.random.default_rng(3)
    z = rng.uniform(-3, 3, 500) + 1j * rng.uniform(-3, 3, 500)
    ch, co = normalize_batch(np.zeros(500, bool), z)
    for i in range(500):
        p = normalize(SpherePoint(Chart.STANDARD, complex(z[i])))
        assert (p.chart == Chart.INVERTED) == ch[i]
        assert p.coord == pytest.approx(complex(co[i]))


def test_random_sphere_points_are_area_uniform():
    ch, co = random_sphere_points(20_000, 42)
    assert np.all(np.abs(co) <= 1.0 + 1e-12)
    # Fraction within chordal distance sqrt(2) of the origin-point is the
    # area of a hemisphere: 1/2.
    d = chordal_dist_batch(np.zeros_like(ch), np.zeros_like(co), ch, co)
    frac = np.mean(d <= math.sqrt(2.0))
    assert abs(frac - 0.5) < 0.02


def test_random_sphere_points_reproducible():
    a = random_sphere_points(100, 7, 1)
    b = random_sphere_points(100, 7, 1)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
