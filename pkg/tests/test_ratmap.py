import math

import numpy as np
import pytest

from markovsphere.errors import InvalidMapError
from markovsphere.ratmap import (
    Box,
    RationalMap,
    aberth_roots,
    aberth_roots_batch,
    fold_deriv_norm,
    fold_eval,
)
from markovsphere.sphere import Chart, SpherePoint, chordal_dist


def zsq():
    return RationalMap([0, 0, 1])


def sp(z):
    return SpherePoint.from_complex(z)


# -- root finder ------------------------------------------------------------


def test_aberth_against_numpy_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(300):
        deg = rng.integers(2, 13)
        c = rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)
        c[-1] += 3.0  # keep the leading coefficient well away from zero
        mine = np.sort_complex(aberth_roots(c))
        theirs = np.sort_complex(np.roots(c[::-1]))
        assert np.allclose(mine, theirs, rtol=1e-6, atol=1e-6)


def test_aberth_multiple_roots():
    # (z-1)^3 (z+2): multiple roots converge as a cluster
    p = np.polynomial.polynomial.polyfromroots([1, 1, 1, -2])
    r = np.sort_complex(aberth_roots(p))
    expect = np.sort_complex(np.array([1, 1, 1, -2], dtype=complex))
    assert np.allclose(r, expect, atol=2e-4)


def test_aberth_batch_matches_scalar():
    rng = np.random.default_rng(5)
    polys = rng.normal(size=(50, 5)) + 1j * rng.normal(size=(50, 5))
    polys[:, -1] += 2.0
    batch = aberth_roots_batch(polys)
    for i in range(50):
        a = np.sort_complex(batch[i])
        b = np.sort_complex(aberth_roots(polys[i]))
        assert np.allclose(a, b, rtol=1e-6, atol=1e-6)


# -- construction -----------------------------------------------------------


def test_degree_below_two_rejected():
    with pytest.raises(InvalidMapError):
        RationalMap([1, 1])  # z + 1


def test_padded_linear_map_rejected():
    with pytest.raises(InvalidMapError):
        RationalMap([1, 1, 0])  # (0*z^2 + z + 1) trims to degree 1


def test_common_root_rejected():
    # (z^2 - 1) / (z - 1) shares the root z = 1
    with pytest.raises(InvalidMapError):
        RationalMap([-1, 0, 1], [-1, 1, 0.0000000001])


def test_degree_cap():
    with pytest.raises(InvalidMapError):
        RationalMap([0] * 17 + [1])


# -- evaluation ---------------------------------------------------------------


def test_eval_square_at_one_plus_i():
    out = zsq().eval(sp(1 + 1j))
    assert out.chart == Chart.INVERTED
    assert out.coord == pytest.approx(1 / (2j))


def test_eval_polynomial_fixes_infinity():
    out = zsq().eval(SpherePoint.infinity())
    assert out.is_infinity


def test_eval_chaotic_generator_at_zero():
    # near-constant generator used by the chaotic two-vertex system; the
    # small z^2 term keeps numerator and denominator coprime
    f = RationalMap([0.8, 0, 0.05], [1, 0, 1])
    out = f.eval(sp(0))
    assert out.chart == Chart.STANDARD
    assert out.coord == pytest.approx(0.8)


def test_fully_cancelling_quotient_rejected():
    # a(z^2+1)/(z^2+1) is constant as a map; shared roots are rejected
    with pytest.raises(InvalidMapError):
        RationalMap([0.8, 0, 0.8], [1, 0, 1])


def test_eval_chart_consistency():
    f = RationalMap([1, 2, 0, 1], [2, 0, 1])
    rng = np.random.default_rng(11)
    for _ in range(300):
        z = complex(*rng.uniform(-0.95, 0.95, 2))
        if abs(z) < 1e-3:
            continue
        a = f.eval(SpherePoint(Chart.STANDARD, z))
        b = f.eval(SpherePoint(Chart.INVERTED, 1 / z))
        # same sphere point regardless of input chart
        assert chordal_dist(a, b) < 1e-12


# -- derivative norm ----------------------------------------------------------


def test_deriv_norm_values():
    f = zsq()
    assert f.deriv_norm(sp(1)) == pytest.approx(2.0)
    assert f.deriv_norm(sp(0)) == 0.0
    assert f.deriv_norm(sp(0.5)) == pytest.approx(1.0 * 1.25 / 1.0625)


def test_deriv_norm_finite_at_infinity():
    assert zsq().deriv_norm(SpherePoint.infinity()) == 0.0
    lattes = RationalMap([1, 0, 2, 0, 1], [0, -4, 0, 4])
    assert lattes.deriv_norm(SpherePoint.infinity()) == pytest.approx(4.0)


def test_chain_rule_random_compositions():
    rng = np.random.default_rng(77)
    maps = [
        zsq(),
        RationalMap([0.1, 0, 1]),
        RationalMap([1, 0, 2, 0, 1], [0, -4, 0, 4]),
        RationalMap([0.8, 0, 0.05], [1, 0, 1]),
    ]
    for _ in range(1000):
        seq = [maps[rng.integers(len(maps))] for _ in range(rng.integers(2, 5))]
        z = sp(complex(*rng.uniform(-1.2, 1.2, 2)))
        lhs = fold_deriv_norm(seq, z)
        # chain rule applied manually, one factor at a time
        rhs, q = 1.0, z
        for f in seq:
            rhs *= f.deriv_norm(q)
            q = f.eval(q)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


# -- preimages ---------------------------------------------------------------


def test_preimages_square_of_four():
    pairs = zsq().preimages(sp(4))
    pts = sorted(p.as_complex().real for p, _ in pairs)
    assert len(pairs) == 2 and all(m == 1 for _, m in pairs)
    assert pts == pytest.approx([-2, 2], abs=1e-8)


def test_preimages_double_root():
    pairs = zsq().preimages(sp(0))
    assert len(pairs) == 1
    p, mult = pairs[0]
    assert mult == 2 and abs(p.coord) < 1e-6


def test_preimages_z2_plus_one_at_zero():
    pairs = RationalMap([1, 0, 1]).preimages(sp(0))
    got = sorted((p.coord.real, p.coord.imag) for p, _ in pairs)
    assert got[0][1] == pytest.approx(-1, abs=1e-8)
    assert got[1][1] == pytest.approx(1, abs=1e-8)


def test_preimages_at_infinity_polynomial():
    pairs = zsq().preimages(SpherePoint.infinity())
    assert len(pairs) == 1
    p, mult = pairs[0]
    assert p.is_infinity and mult == 2


def test_preimage_eval_round_trip_and_count():
    rng = np.random.default_rng(31)
    f = RationalMap([0.3, 1, 0.2, 1], [1, -0.4, 1])
    for _ in range(200):
        w = sp(complex(*rng.uniform(-1.5, 1.5, 2)))
        pairs = f.preimages(w)
        assert sum(m for _, m in pairs) == f.degree
        for q, _ in pairs:
            assert chordal_dist(f.eval(q), w) <= 1e-8


def test_preimage_contains_forward_point():
    rng = np.random.default_rng(13)
    f = RationalMap([1, 0, 2, 0, 1], [0, -4, 0, 4])
    for _ in range(100):
        z = sp(complex(*rng.uniform(-1.5, 1.5, 2)))
        w = f.eval(z)
        pairs = f.preimages(w)
        assert min(chordal_dist(z, q) for q, _ in pairs) <= 1e-7


def test_preimage_roots_batch_round_trip():
    from markovsphere.sphere import chordal_dist_batch

    f = RationalMap([0.25, 0, 1])
    rng = np.random.default_rng(8)
    z = rng.uniform(-1, 1, 200) + 1j * rng.uniform(-1, 1, 200)
    ch, co = f.preimage_roots_batch(np.zeros(200, bool), z)
    for j in range(f.degree):
        img_ch, img_co = f.eval_batch(ch[:, j], co[:, j])
        d = chordal_dist_batch(img_ch, img_co, np.zeros(200, bool), z)
        assert np.max(d) < 1e-7


# -- boxes --------------------------------------------------------------------


def test_lipschitz_bound_against_dense_oracle():
    f = zsq()
    box = Box(Chart.STANDARD, 0j, 0.1)
    # dense 100x100 oracle for the true sup of the derivative norm
    off = np.linspace(-0.1, 0.1, 100)
    gx, gy = np.meshgrid(off, off)
    pts = (gx + 1j * gy).ravel()
    sup = f.deriv_norm_batch(np.zeros(pts.shape, bool), pts).max()
    bound = f.lipschitz_bound(box)
    assert bound >= sup  # safety factor dominates the sampling gap
    assert bound >= 0.2 * 1.2 * 0.99
    enc = f.image_enclosure(box)
    assert abs(enc.center) <= enc.half_width  # image encloses 0


def test_lipschitz_bound_inverted_chart():
    f = zsq()
    box = Box(Chart.INVERTED, 0.5 + 0j, 0.05)  # around the point 2
    bound = f.lipschitz_bound(box)
    assert math.isfinite(bound) and bound > 0


def test_fixed_points_of_square():
    fixed = zsq().fixed_points()
    reps = {(round(p.as_complex().real, 6) if not p.is_infinity else "inf"): n
            for p, n in fixed}
    assert 0.0 in reps and 1.0 in reps and "inf" in reps
    assert reps[1.0] == pytest.approx(2.0)
    assert reps[0.0] == pytest.approx(0.0, abs=1e-12)
    assert reps["inf"] == 0.0


def test_fold_eval_matches_pointwise():
    f, g = zsq(), RationalMap([0.1, 0, 1])
    p = sp(0.4 + 0.1j)
    assert chordal_dist(fold_eval([f, g], p), g.eval(f.eval(p))) == 0.0
