"""System model: directed graph, edge measure supports, transition matrix.

An edge carries a measure on maps represented either as weighted atoms or
as a uniform distribution over a one-parameter disk of coefficients.
Vertices are 1-based in the external JSON, 0-based internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .errors import (
    InvalidMapError,
    IrreducibilityError,
    NumericFailure,
    SchemaError,
    StochasticityError,
)
from .ratmap import CoeffDiskKernel, RationalMap

MAX_VERTICES = 64
_ROWSUM_TOL = 1e-12
_STATIONARY_TOL = 1e-12


class MapFamily:
    """The support of one edge measure: weighted atoms or a parameter disk.

    Disk families draw the coefficient uniformly w.r.t. planar Lebesgue
    measure on the closed disk D(center, radius).  ``radius == 0``
    degenerates to a single atom.
    """

    def __init__(self, kind, *, atoms=None, template=None, base=None,
                 coeff_index=0, center=0j, radius=0.0, weight=1.0):
        if kind not in ("atoms", "disk"):
            raise SchemaError(f"unknown family kind {kind!r}")
        self.kind = kind
        self.weight = float(weight)
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise SchemaError("family weight must be positive and finite")
        if kind == "atoms":
            if not atoms:
                raise SchemaError("atoms family needs at least one atom")
            total = 0.0
            for f, w in atoms:
                if not isinstance(f, RationalMap):
                    raise SchemaError("atom maps must be RationalMap")
                if not (w > 0 and math.isfinite(w)):
                    raise SchemaError("atom weights must be positive and finite")
                total += w
            self.atoms = tuple((f, float(w)) for f, w in atoms)
            self._atom_cum = np.cumsum([w for _, w in self.atoms]) / total
        else:
            if template not in ("quadratic_c", "coeff_disk"):
                raise SchemaError(f"unknown disk template {template!r}")
            self.template = template
            self.center = complex(center)
            self.radius = float(radius)
            if self.radius < 0:
                raise SchemaError("disk radius must be >= 0")
            if template == "quadratic_c":
                base = RationalMap([self.center, 0, 1])
                coeff_index = 0
            if base is None:
                raise SchemaError("coeff_disk family needs a base map")
            self.base = base
            self.coeff_index = int(coeff_index)
            self.kernel = CoeffDiskKernel(base, self.coeff_index)
            self.atoms = None

    def map_at(self, c) -> RationalMap:
        """Concrete member of a disk family at parameter ``c``."""
        if self.kind != "disk":
            raise SchemaError("map_at only applies to disk families")
        num = self.base._num_pad.copy()
        num[self.coeff_index] = c
        return RationalMap(num, self.base.den)

    def net_params(self, delta: float):
        """Hexagonal parameter net of pitch delta*radius on the disk.

        Always contains the center; when radius > 0 it also contains a
        ring of at least six points exactly on the boundary circle, since
        set-valued iteration is sensitive to the edge of the support.
        """
        if self.kind != "disk":
            return None
        if delta <= 0:
            raise SchemaError("net delta must be positive")
        r = self.radius
        if r == 0:
            return np.array([self.center], dtype=np.complex128)
        pitch = delta * r
        pts = [0j]
        jmax = int(math.floor(r / (pitch * math.sqrt(3) / 2))) + 1
        for j in range(-jmax, jmax + 1):
            y = j * pitch * math.sqrt(3) / 2
            xoff = (pitch / 2) if (j % 2) else 0.0
            imax = int(math.floor(r / pitch)) + 1
            for i in range(-imax, imax + 1):
                x = i * pitch + xoff
                if x * x + y * y <= r * r and (x != 0 or y != 0):
                    pts.append(x + 1j * y)
        nring = max(6, int(math.ceil(2 * math.pi / delta)))
        ring = r * np.exp(2j * np.pi * np.arange(nring) / nring)
        allpts = np.concatenate([np.array(pts), ring]) + self.center
        # deduplicate
        out = []
        for p in allpts:
            if all(abs(p - q) > 1e-9 * max(r, 1.0) for q in out):
                out.append(p)
        return np.array(out, dtype=np.complex128)

    def support_net(self, delta: float):
        """Finite list of maps standing in for the compact support."""
        if self.kind == "atoms":
            return [f for f, _ in self.atoms]
        return [self.map_at(c) for c in self.net_params(delta)]

    def max_degree(self) -> int:
        if self.kind == "atoms":
            return max(f.degree for f, _ in self.atoms)
        return self.base.degree

    def all_polynomial(self) -> bool:
        if self.kind == "atoms":
            return all(f.is_polynomial for f, _ in self.atoms)
        return self.base.is_polynomial


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    family: MapFamily


@dataclass(frozen=True)
class Word:
    """An admissible edge sequence with matching map choices."""

    edges: tuple
    maps: tuple = ()


class Gdms:
    """Immutable validated system: graph, edge families, P and p."""

    def __init__(self, m: int, edges):
        if not (1 <= m <= MAX_VERTICES):
            raise SchemaError(f"vertex count {m} outside 1..{MAX_VERTICES}")
        self.m = m
        self.edges = tuple(edges)
        for e in self.edges:
            if not (0 <= e.src < m and 0 <= e.dst < m):
                raise SchemaError("edge endpoint out of range")
        self.out_edges = [[] for _ in range(m)]
        self.in_edges = [[] for _ in range(m)]
        for idx, e in enumerate(self.edges):
            self.out_edges[e.src].append(idx)
            self.in_edges[e.dst].append(idx)

        P = np.zeros((m, m))
        for e in self.edges:
            P[e.src, e.dst] += e.family.weight
        rowsums = P.sum(axis=1)
        if np.max(np.abs(rowsums - 1.0)) > _ROWSUM_TOL:
            raise StochasticityError(
                f"edge weights out of a vertex must sum to 1 (got {rowsums})"
            )
        self.P = P
        self._check_strongly_connected()
        self.p = stationary_vector(P)
        # per-vertex cumulative edge weights, in edge-index order
        self._out_cum = [
            np.cumsum([self.edges[k].family.weight for k in self.out_edges[i]])
            for i in range(m)
        ]

    def _reach(self, start, adjacency):
        seen = {start}
        stack = [start]
        while stack:
            v = stack.pop()
            for w in adjacency[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return seen

    def _check_strongly_connected(self):
        fwd = [[] for _ in range(self.m)]
        bwd = [[] for _ in range(self.m)]
        for e in self.edges:
            fwd[e.src].append(e.dst)
            bwd[e.dst].append(e.src)
        if len(self._reach(0, fwd)) != self.m or len(self._reach(0, bwd)) != self.m:
            raise IrreducibilityError("the directed graph is not strongly connected")

    # -- words ---------------------------------------------------------------

    def admissible_words(self, length: int, from_vertex=None, to_vertex=None):
        """Iterate admissible edge-index sequences in lexicographic order."""
        if length < 1:
            raise SchemaError("word length must be >= 1")
        starts = range(self.m) if from_vertex is None else [from_vertex]

        def rec(prefix, vertex, remaining):
            if remaining == 0:
                if to_vertex is None or vertex == to_vertex:
                    yield tuple(prefix)
                return
            for k in self.out_edges[vertex]:
                prefix.append(k)
                yield from rec(prefix, self.edges[k].dst, remaining - 1)
                prefix.pop()

        for s in starts:
            yield from rec([], s, length)

    def shortest_loop_length(self, vertex=0, cap=None) -> int:
        """Length of the shortest admissible cycle through ``vertex``."""
        cap = cap or self.m + 1
        frontier = {vertex}
        for n in range(1, cap + 1):
            nxt = set()
            for v in frontier:
                for k in self.out_edges[v]:
                    nxt.add(self.edges[k].dst)
            if vertex in nxt:
                return n
            frontier = nxt
        raise IrreducibilityError("no cycle found through vertex")

    def cycle_cover(self):
        """One shortest cycle (as edge indices) through every vertex."""
        cycles = []
        for v in range(self.m):
            # BFS over (vertex) levels remembering one predecessor edge
            prev = {v: []}
            frontier = [v]
            found = None
            for _ in range(self.m + 1):
                nxt = []
                seen_next = {}
                for u in frontier:
                    for k in self.out_edges[u]:
                        d = self.edges[k].dst
                        if d == v:
                            found = prev[u] + [k]
                            break
                        if d not in seen_next and d not in prev:
                            seen_next[d] = prev[u] + [k]
                            nxt.append(d)
                    if found:
                        break
                if found:
                    break
                prev.update(seen_next)
                frontier = nxt
            if not found:
                raise IrreducibilityError("no cycle found through vertex")
            cycles.append(found)
        return cycles

    # -- sampling -------------------------------------------------------------

    def sample_edge_and_map(self, vertex: int, state: _rng.RngState):
        """One transition of the chain: edge by weight, map from the family."""
        u, state = state.draw()
        cum = self._out_cum[vertex]
        total = cum[-1]
        j = int(np.searchsorted(cum, u * total, side="right"))
        j = min(j, len(cum) - 1)
        edge_idx = self.out_edges[vertex][j]
        fam = self.edges[edge_idx].family
        if fam.kind == "atoms":
            u2, state = state.draw()
            a = int(np.searchsorted(fam._atom_cum, u2, side="right"))
            a = min(a, len(fam.atoms) - 1)
            return edge_idx, fam.atoms[a][0], state
        c, state = state.draw_disk(fam.center, fam.radius)
        return edge_idx, fam.map_at(c), state

    def max_generator_degree(self) -> int:
        return max(e.family.max_degree() for e in self.edges)

    def all_polynomial(self) -> bool:
        return all(e.family.all_polynomial() for e in self.edges)

    def validation_report(self) -> dict:
        return {
            "vertices": self.m,
            "P": self.P.tolist(),
            "stationary": self.p.tolist(),
            "strongly_connected": True,
            "cycle_cover": [[int(k) for k in cyc] for cyc in self.cycle_cover()],
        }


def stationary_vector(P) -> np.ndarray:
    """Unique probability row vector with pP = p for irreducible P."""
    P = np.asarray(P, dtype=float)
    m = P.shape[0]
    if m == 1:
        return np.ones(1)
    a = P.T - np.eye(m)
    a[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    try:
        p = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"stationary solve failed: {exc}") from exc
    resid = np.max(np.abs(p @ P - p))
    if resid > _STATIONARY_TOL or np.any(p <= 0):
        raise NumericFailure(f"stationary vector residual {resid:.2e} or sign error")
    return p


# ---------------------------------------------------------------------------
# JSON parsing / emission
# ---------------------------------------------------------------------------


def _coeffs_from_json(obj):
    try:
        return [complex(re, im) for re, im in obj]
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"bad coefficient list {obj!r}") from exc


def map_from_json(obj) -> RationalMap:
    """Polynomial: [[re, im], ...] ascending.  Rational: {"num":..., "den":...}."""
    if isinstance(obj, dict):
        if "num" not in obj:
            raise SchemaError("rational map object needs 'num'")
        num = _coeffs_from_json(obj["num"])
        den = _coeffs_from_json(obj.get("den", [[1.0, 0.0]]))
        return RationalMap(num, den)
    return RationalMap(_coeffs_from_json(obj))


def map_to_json(f: RationalMap):
    num = [[z.real, z.imag] for z in f.num]
    if f.is_polynomial and f.den[0] == 1:
        return num
    return {"num": num, "den": [[z.real, z.imag] for z in f.den]}


def family_from_json(obj) -> MapFamily:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise SchemaError("family must be an object with a 'kind'")
    kind = obj["kind"]
    weight = obj.get("weight", 1.0)
    if kind == "atoms":
        atoms = []
        for a in obj.get("atoms", []):
            atoms.append((map_from_json(a["map"]), float(a["weight"])))
        return MapFamily("atoms", atoms=atoms, weight=weight)
    if kind == "disk":
        template = obj.get("template", "coeff_disk")
        center = obj.get("center", [0.0, 0.0])
        base = map_from_json(obj["base"]) if "base" in obj else None
        return MapFamily(
            "disk",
            template=template,
            base=base,
            coeff_index=obj.get("coeff_index", 0),
            center=complex(center[0], center[1]),
            radius=float(obj.get("radius", 0.0)),
            weight=weight,
        )
    raise SchemaError(f"unknown family kind {kind!r}")


def family_to_json(fam: MapFamily) -> dict:
    if fam.kind == "atoms":
        return {
            "kind": "atoms",
            "weight": fam.weight,
            "atoms": [{"map": map_to_json(f), "weight": w} for f, w in fam.atoms],
        }
    out = {
        "kind": "disk",
        "weight": fam.weight,
        "template": fam.template,
        "center": [fam.center.real, fam.center.imag],
        "radius": fam.radius,
        "coeff_index": fam.coeff_index,
    }
    if fam.template != "quadratic_c":
        out["base"] = map_to_json(fam.base)
    return out


def build(description: dict) -> Gdms:
    """Validated system from the external JSON document form.

    Edge weights are the measure masses; per-vertex totals must be 1.
    Raises SchemaError / StochasticityError / IrreducibilityError /
    InvalidMapError accordingly.
    """
    if not isinstance(description, dict):
        raise SchemaError("system description must be a JSON object")
    try:
        m = int(description["vertices"])
        edge_list = description["edges"]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"missing or malformed field: {exc}") from exc
    edges = []
    for e in edge_list:
        try:
            src, dst = int(e["from"]) - 1, int(e["to"]) - 1
            fam_obj = dict(e["family"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed edge {e!r}: {exc}") from exc
        fam_obj.setdefault("weight", e.get("weight", 1.0))
        if "weight" in e:
            fam_obj["weight"] = e["weight"]
        edges.append(Edge(src, dst, family_from_json(fam_obj)))
    return Gdms(m, edges)


def to_description(g: Gdms, meta=None) -> dict:
    out = {
        "vertices": g.m,
        "edges": [
            {
                "from": e.src + 1,
                "to": e.dst + 1,
                "weight": e.family.weight,
                "family": family_to_json(e.family),
            }
            for e in g.edges
        ],
    }
    if meta:
        out["meta"] = meta
    return out
