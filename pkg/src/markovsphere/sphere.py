"""Overflow-safe points and metrics on the Riemann sphere.

A point is stored as a complex coordinate in one of two stereographic
charts: the standard chart holds z itself, the inverted chart holds 1/z,
with (inverted, 0) representing infinity.  Normalization switches chart
only when the modulus exceeds 1.25, so points near the equator do not
flip back and forth and every stored coordinate satisfies |coord| <= 1.25.

All distances in the package use the chordal metric (diameter 2), which
is bi-Lipschitz equivalent to the great-circle metric and has a closed
form in either chart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import InvalidPointError

CHART_LIMIT = 1.25


class Chart(IntEnum):
    STANDARD = 0
    INVERTED = 1


@dataclass(frozen=True)
class SpherePoint:
    chart: Chart
    coord: complex

    @staticmethod
    def from_complex(z) -> "SpherePoint":
        z = complex(z)
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            raise InvalidPointError(f"non-finite coordinate {z!r}")
        if abs(z) <= CHART_LIMIT:
            return SpherePoint(Chart.STANDARD, z)
        return SpherePoint(Chart.INVERTED, 1.0 / z)

    @staticmethod
    def infinity() -> "SpherePoint":
        return SpherePoint(Chart.INVERTED, 0j)

    @property
    def is_infinity(self) -> bool:
        return self.chart == Chart.INVERTED and self.coord == 0

    def as_complex(self) -> complex:
        """Plane coordinate; infinity comes back as complex(inf, 0)."""
        if self.chart == Chart.STANDARD:
            return self.coord
        if self.coord == 0:
            return complex(math.inf, 0.0)
        return 1.0 / self.coord

    def abs_plane(self) -> float:
        """|z| of the represented point (inf for infinity)."""
        if self.chart == Chart.STANDARD:
            return abs(self.coord)
        a = abs(self.coord)
        return math.inf if a == 0 else 1.0 / a


def normalize(p: SpherePoint) -> SpherePoint:
    """Re-chart ``p`` so that |coord| <= 1.25; idempotent.

    Raises :class:`InvalidPointError` on non-finite coordinates.
    """
    z = complex(p.coord)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise InvalidPointError(f"non-finite coordinate {z!r}")
    if abs(z) <= CHART_LIMIT:
        return p if isinstance(p.chart, Chart) else SpherePoint(Chart(p.chart), z)
    return SpherePoint(Chart(1 - p.chart), 1.0 / z)


def chordal_dist(a: SpherePoint, b: SpherePoint) -> float:
    """Chordal distance, range [0, 2], continuous across chart switches."""
    za, zb = a.coord, b.coord
    if a.chart == b.chart:
        num = 2.0 * abs(za - zb)
    else:
        num = 2.0 * abs(za * zb - 1.0)
    return num / math.sqrt((1.0 + abs(za) ** 2) * (1.0 + abs(zb) ** 2))


# ---------------------------------------------------------------------------
# Vectorized forms.  Charts are carried as boolean arrays (True = inverted),
# coordinates as complex128 arrays; all kernels are shape-preserving.
# ---------------------------------------------------------------------------


def normalize_batch(chart, coord):
    """Vectorized chart normalization; returns new (chart, coord) arrays."""
    coord = np.asarray(coord, dtype=np.complex128)
    chart = np.asarray(chart, dtype=bool)
    flip = np.abs(coord) > CHART_LIMIT
    if flip.any():
        coord = np.where(flip, np.divide(1.0, coord, where=flip,
                                         out=np.zeros_like(coord)), coord)
        chart = chart ^ flip
    return chart, coord


def chordal_dist_batch(chart_a, coord_a, chart_b, coord_b):
    """Chordal distance between two batches of two-chart points."""
    coord_a = np.asarray(coord_a, dtype=np.complex128)
    coord_b = np.asarray(coord_b, dtype=np.complex128)
    same = np.asarray(chart_a, dtype=bool) == np.asarray(chart_b, dtype=bool)
    num = 2.0 * np.where(same, np.abs(coord_a - coord_b),
                         np.abs(coord_a * coord_b - 1.0))
    den = np.sqrt((1.0 + np.abs(coord_a) ** 2) * (1.0 + np.abs(coord_b) ** 2))
    return num / den


def points_to_arrays(points):
    """Pack an iterable of SpherePoints into (chart, coord) arrays."""
    pts = list(points)
    chart = np.array([p.chart == Chart.INVERTED for p in pts], dtype=bool)
    coord = np.array([p.coord for p in pts], dtype=np.complex128)
    return chart, coord


def arrays_to_points(chart, coord):
    chart = np.asarray(chart, dtype=bool).ravel()
    coord = np.asarray(coord, dtype=np.complex128).ravel()
    return [SpherePoint(Chart.INVERTED if c else Chart.STANDARD, complex(z))
            for c, z in zip(chart, coord)]


def random_sphere_points(n, *key):
    """n points uniform w.r.t. spherical area, as (chart, coord) arrays.

    Drawn by normalizing Gaussian triples keyed by (key, index, axis) and
    projecting stereographically, so the result is reproducible and
    independent of evaluation order.
    """
    from . import rng

    idx = np.arange(n, dtype=np.uint64)
    # Box-Muller from counter-based uniforms.
    g = []
    for axis in range(2):
        u1 = rng.uniform01(*key, idx, np.uint64(axis), np.uint64(0))
        u2 = rng.uniform01(*key, idx, np.uint64(axis), np.uint64(1))
        r = np.sqrt(-2.0 * np.log(np.maximum(u1, 1e-300)))
        g.append(r * np.cos(2.0 * np.pi * u2))
        g.append(r * np.sin(2.0 * np.pi * u2))
    x, y, z = g[0], g[1], g[2]
    norm = np.sqrt(x * x + y * y + z * z)
    norm = np.where(norm == 0, 1.0, norm)
    x, y, z = x / norm, y / norm, z / norm
    # Stereographic projection from the north pole; south half lands in the
    # standard chart, north half in the inverted chart (modulus <= 1).
    south = z <= 0
    denom = np.where(south, 1.0 - z, 1.0 + z)
    coord = (x + 1j * y) / denom
    coord = np.where(south, coord, np.conj(coord))
    return ~south, coord
