"""Canonical example systems used by tests, demos and the CLI."""

from __future__ import annotations

import cmath
import math

from .gdms import Gdms, build
from .ratmap import RationalMap

#: degree-4 map with whole-sphere Julia set (doubling on the square torus
#: pushed through the Weierstrass function with invariants g2=4, g3=0)
LATTES_NUM = [1, 0, 2, 0, 1]
LATTES_DEN = [0, -4, 0, 4]

GOLDEN_ROTATION = cmath.exp(2j * math.pi * ((math.sqrt(5) - 1) / 2))


def lattes_map() -> RationalMap:
    return RationalMap(LATTES_NUM, LATTES_DEN)


def quadratic_description(c=0j, s=0.0) -> dict:
    """One-vertex family z^2 + c' with c' uniform on the disk D(c, s).

    s == 0 degenerates to the deterministic map z^2 + c.
    """
    c = complex(c)
    if s == 0:
        family = {
            "kind": "atoms",
            "atoms": [{"map": [[c.real, c.imag], [0, 0], [1, 0]], "weight": 1.0}],
        }
    else:
        family = {
            "kind": "disk",
            "template": "quadratic_c",
            "center": [c.real, c.imag],
            "radius": float(s),
        }
    return {
        "vertices": 1,
        "edges": [{"from": 1, "to": 1, "weight": 1.0, "family": family}],
        "meta": {"name": f"quadratic c={c} s={s}"},
    }


def quadratic_system(c=0j, s=0.0) -> Gdms:
    return build(quadratic_description(c, s))


def dirac_description(num, den=((1.0, 0.0),)) -> dict:
    return {
        "vertices": 1,
        "edges": [
            {
                "from": 1,
                "to": 1,
                "weight": 1.0,
                "family": {
                    "kind": "atoms",
                    "atoms": [{"map": {"num": list(num), "den": list(den)}, "weight": 1.0}],
                },
            }
        ],
    }


def dirac_zsquared() -> Gdms:
    return build(dirac_description([[0, 0], [0, 0], [1, 0]]))


def siegel_pair_description() -> dict:
    """One vertex, two atoms: an irrationally-rotating map and z^2.

    Both fix 0; the rotation multiplier e^{2 pi i g} with g the golden
    ratio makes 0 linearizable, so {0} sits in a rotation domain and is a
    minimal set that is not attracting.
    """
    nu = GOLDEN_ROTATION
    return {
        "vertices": 1,
        "edges": [
            {
                "from": 1,
                "to": 1,
                "weight": 1.0,
                "family": {
                    "kind": "atoms",
                    "atoms": [
                        {"map": [[0, 0], [nu.real, nu.imag], [1, 0]], "weight": 0.5},
                        {"map": [[0, 0], [0, 0], [1, 0]], "weight": 0.5},
                    ],
                },
            }
        ],
        "meta": {"name": "golden rotation + squaring"},
    }


def siegel_pair() -> Gdms:
    return build(siegel_pair_description())


def chaotic_pair_description(eps=0.05, center=0.75, radius=0.5) -> dict:
    """Two-vertex system whose Julia set is the whole sphere at both
    vertices and whose only minimal set is the whole sphere.

    Vertex 1 applies the whole-sphere-Julia map and moves to vertex 1 or 2
    with probability 1/2 each; vertex 2 applies a near-constant map whose
    value ranges over a disk of the sphere and returns to vertex 1.  The
    scattering family is (eps z^2 + a)/(z^2 + 1) with a in D(center,
    radius); eps > 0 keeps the quotient coprime and the degree 2.
    """
    lattes = {"num": [[c, 0] for c in LATTES_NUM], "den": [[c, 0] for c in LATTES_DEN]}
    scatter_base = {"num": [[center, 0], [0, 0], [eps, 0]], "den": [[1, 0], [0, 0], [1, 0]]}
    return {
        "vertices": 2,
        "edges": [
            {"from": 1, "to": 1, "weight": 0.5,
             "family": {"kind": "atoms", "atoms": [{"map": lattes, "weight": 1.0}]}},
            {"from": 1, "to": 2, "weight": 0.5,
             "family": {"kind": "atoms", "atoms": [{"map": lattes, "weight": 1.0}]}},
            {"from": 2, "to": 1, "weight": 1.0,
             "family": {"kind": "disk", "template": "coeff_disk", "base": scatter_base,
                         "coeff_index": 0, "center": [center, 0], "radius": radius}},
        ],
        "meta": {"name": "chaotic two-vertex pair"},
    }


def chaotic_pair() -> Gdms:
    return build(chaotic_pair_description())
