"""Sampling the chain on sphere x vertices; Lyapunov exponents; escape.

The ensemble engine keys every orbit's randomness by (seed, orbit index,
step index, draw slot), so a 1000-lane vectorized run and a lone scalar
replay of lane k produce bit-identical trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .errors import SchemaError, UnsupportedOperationError
from .gdms import Gdms
from .sphere import Chart, SpherePoint

_CLAMP = 1e-300

# draw slots within one (seed, orbit, step) key
_SLOT_EDGE = 0
_SLOT_ATOM = 1
_SLOT_DISK = 2


@dataclass(frozen=True)
class StepRecord:
    edge: int
    vertex: int  # terminal vertex of the edge
    map_ref: tuple  # ("atom", index) or ("disk", parameter)
    chart: Chart
    coord: complex
    log_deriv: float

    @property
    def point(self) -> SpherePoint:
        return SpherePoint(self.chart, self.coord)


@dataclass
class OrbitRecord:
    initial: SpherePoint
    initial_vertex: int
    seed: int
    steps: list

    def __len__(self):
        return len(self.steps)

    def write_csv(self, fileobj):
        fileobj.write("step,vertex,edge,re,im,chart,log_deriv_norm\n")
        fileobj.write(
            f"0,{self.initial_vertex + 1},,{self.initial.coord.real!r},"
            f"{self.initial.coord.imag!r},{int(self.initial.chart)},\n"
        )
        for k, s in enumerate(self.steps, start=1):
            fileobj.write(
                f"{k},{s.vertex + 1},{s.edge},{s.coord.real!r},{s.coord.imag!r},"
                f"{int(s.chart)},{s.log_deriv!r}\n"
            )


@dataclass(frozen=True)
class LyapunovEstimate:
    value: float
    n_steps: int
    n_orbits: int
    ci95_halfwidth: float
    clamped: bool


class ChainEnsemble:
    """Vectorized Markov chain state for a block of orbits.

    All lanes advance together; per-lane randomness is a pure function of
    (seed, orbit id, step, slot), so results do not depend on block size
    or evaluation order.
    """

    def __init__(self, g: Gdms, chart, coord, vertex, seed, orbit_ids=None):
        self.g = g
        self.chart = np.array(chart, dtype=bool).ravel().copy()
        self.coord = np.array(coord, dtype=np.complex128).ravel().copy()
        k = len(self.coord)
        vertex = np.asarray(vertex)
        self.vertex = (np.full(k, int(vertex)) if vertex.ndim == 0
                       else vertex.astype(np.int64).copy())
        self.seed = int(seed)
        self.orbit_ids = (np.arange(k, dtype=np.uint64) if orbit_ids is None
                          else np.asarray(orbit_ids, dtype=np.uint64))
        kmax = max(len(o) for o in g.out_edges)
        self._cum = np.ones((g.m, kmax))
        self._eidx = np.zeros((g.m, kmax), dtype=np.int64)
        for i in range(g.m):
            cum = np.cumsum([g.edges[e].family.weight for e in g.out_edges[i]])
            self._cum[i, : len(cum)] = cum / cum[-1]
            self._eidx[i, : len(cum)] = g.out_edges[i]
        self._dst = np.array([e.dst for e in g.edges], dtype=np.int64)

    def step(self, t: int, want_deriv=False, want_refs=False):
        """Advance one step; returns (edge indices, deriv norms or None, refs)."""
        u = _rng.uniform01(self.seed, self.orbit_ids, np.uint64(t), _SLOT_EDGE)
        cum_rows = self._cum[self.vertex]
        pick = (u[:, None] >= cum_rows).sum(axis=1)
        pick = np.minimum(pick, self._cum.shape[1] - 1)
        eidx = self._eidx[self.vertex, pick]

        deriv = np.ones(len(self.coord)) if want_deriv else None
        refs = [None] * len(self.coord) if want_refs else None

        for e in np.unique(eidx):
            lanes = eidx == e
            fam = self.g.edges[e].family
            ch, co = self.chart[lanes], self.coord[lanes]
            if fam.kind == "atoms":
                ua = _rng.uniform01(self.seed, self.orbit_ids[lanes], np.uint64(t),
                                    _SLOT_ATOM)
                aidx = (ua[:, None] >= fam._atom_cum[None, :]).sum(axis=1)
                aidx = np.minimum(aidx, len(fam.atoms) - 1)
                och = np.empty_like(ch)
                oco = np.empty_like(co)
                dloc = np.ones(len(co)) if want_deriv else None
                for a in np.unique(aidx):
                    sub = aidx == a
                    f = fam.atoms[a][0]
                    if want_deriv:
                        dloc[sub] = f.deriv_norm_batch(ch[sub], co[sub])
                    och[sub], oco[sub] = f.eval_batch(ch[sub], co[sub])
                if want_deriv:
                    deriv[lanes] = dloc
                if want_refs:
                    for i, a in zip(np.nonzero(lanes)[0], aidx):
                        refs[i] = ("atom", int(a))
            else:
                c = _rng.uniform_disk(fam.center, fam.radius, self.seed,
                                      self.orbit_ids[lanes], np.uint64(t), _SLOT_DISK)
                if want_deriv:
                    deriv[lanes] = fam.kernel.deriv_norm_batch(c, ch, co)
                och, oco = fam.kernel.eval_batch(c, ch, co)
                if want_refs:
                    for i, cv in zip(np.nonzero(lanes)[0], c):
                        refs[i] = ("disk", complex(cv))
            self.chart[lanes] = och
            self.coord[lanes] = oco
        self.vertex = self._dst[eidx]
        return eidx, deriv, refs


def run_orbit(g: Gdms, z0: SpherePoint, i0: int, n: int, seed: int) -> OrbitRecord:
    """One sample path started at (z0, i0); deterministic in (g, z0, i0, n, seed)."""
    if n < 1:
        raise SchemaError("orbit length must be >= 1")
    if not 0 <= i0 < g.m:
        raise SchemaError(f"vertex {i0} out of range")
    ens = ChainEnsemble(g, [z0.chart == Chart.INVERTED], [z0.coord], i0, seed,
                        orbit_ids=[0])
    steps = []
    for t in range(n):
        eidx, deriv, refs = ens.step(t, want_deriv=True, want_refs=True)
        steps.append(StepRecord(
            edge=int(eidx[0]),
            vertex=int(ens.vertex[0]),
            map_ref=refs[0],
            chart=Chart.INVERTED if ens.chart[0] else Chart.STANDARD,
            coord=complex(ens.coord[0]),
            log_deriv=float(np.log(max(float(deriv[0]), _CLAMP))),
        ))
    return OrbitRecord(z0, i0, seed, steps)


def replay_orbit(g: Gdms, record: OrbitRecord) -> bool:
    """Re-evaluate every step; True iff stored points are reproduced exactly."""
    chart = np.array([record.initial.chart == Chart.INVERTED])
    coord = np.array([record.initial.coord], dtype=np.complex128)
    for s in record.steps:
        fam = g.edges[s.edge].family
        if s.map_ref[0] == "atom":
            f = fam.atoms[s.map_ref[1]][0]
            chart, coord = f.eval_batch(chart, coord)
        else:
            chart, coord = fam.kernel.eval_batch(
                np.array([s.map_ref[1]]), chart, coord)
        if bool(chart[0]) != (s.chart == Chart.INVERTED) or complex(coord[0]) != s.coord:
            return False
    return True


def lyapunov(g: Gdms, z0: SpherePoint, i0: int, n: int, n_orbits: int,
             seed: int) -> LyapunovEstimate:
    """Ensemble Lyapunov estimate: mean of per-orbit Birkhoff averages.

    Per-step derivative norms are clamped below at 1e-300 (flagged), so a
    superattracting hit yields a very negative finite value instead of
    -inf.
    """
    if n < 100:
        raise SchemaError("lyapunov needs n >= 100 steps")
    ens = ChainEnsemble(
        g,
        np.full(n_orbits, z0.chart == Chart.INVERTED),
        np.full(n_orbits, z0.coord, dtype=np.complex128),
        i0, seed,
    )
    sums = np.zeros(n_orbits)
    clamped = False
    for t in range(n):
        _, deriv, _ = ens.step(t, want_deriv=True)
        small = deriv < _CLAMP
        if small.any():
            clamped = True
            deriv = np.maximum(deriv, _CLAMP)
        sums += np.log(deriv)
    per_orbit = sums / n
    value = float(per_orbit.mean())
    spread = float(per_orbit.std(ddof=1)) if n_orbits > 1 else 0.0
    ci = 1.96 * spread / math.sqrt(n_orbits) if n_orbits > 1 else math.inf
    return LyapunovEstimate(value=value, n_steps=n, n_orbits=n_orbits,
                            ci95_halfwidth=ci, clamped=clamped)


def escape_radius(g: Gdms) -> float:
    """Radius beyond which every generator strictly increases |z|.

    For a polynomial sum a_j z^j the bound (1 + sum_j |a_j|) / |a_d|
    guarantees |f(z)| >= (1 + |a_d|) |z| once |z| exceeds it; taking the
    worst generator (disk families at their extreme parameter) gives
    monotone escape for the whole system.  Equal to the familiar
    1 + sum|a_j|/|a_d| for monic generators.
    """
    if not g.all_polynomial():
        raise UnsupportedOperationError("escape radius needs polynomial generators")
    worst = 1.0
    for e in g.edges:
        fam = e.family
        if fam.kind == "atoms":
            for f, _ in fam.atoms:
                coeffs = np.abs(f.num) / abs(f.den[0])
                worst = max(worst, (1.0 + coeffs.sum()) / coeffs[-1])
        else:
            base = fam.base
            scale = abs(base.den[0])
            k = fam.coeff_index
            coeffs = np.abs(base._num_pad) / scale
            cmax = (abs(fam.center) + fam.radius) / scale
            total = coeffs.sum() - coeffs[k] + cmax
            if k == base.degree:
                cmin = (abs(fam.center) - fam.radius) / scale
                if cmin <= 0:
                    raise UnsupportedOperationError(
                        "leading coefficient disk reaches zero")
                worst = max(worst, (1.0 + total) / cmin)
            else:
                worst = max(worst, (1.0 + total) / coeffs[-1])
    return worst


def escape_check(g: Gdms, record: OrbitRecord):
    """(escaped, first index with |z| >= escape radius, radius used)."""
    r_esc = escape_radius(g)
    if record.initial.abs_plane() >= r_esc:
        return True, 0, r_esc
    for k, s in enumerate(record.steps, start=1):
        if s.point.abs_plane() >= r_esc:
            return True, k, r_esc
    return False, None, r_esc


def omega_tail(record: OrbitRecord, burn_in: float = 0.9):
    """Deduplicated tail of the orbit: seeds for minimal-set detection.

    Returns the last (1 - burn_in) fraction of (point, vertex) pairs,
    deduplicated at chordal resolution 1e-4.
    """
    if len(record.steps) < 10:
        raise SchemaError("record too short for a tail")
    start = int(math.floor(len(record.steps) * burn_in))
    out, seen = [], set()
    for s in record.steps[start:]:
        key = (s.vertex, int(s.chart),
               round(s.coord.real / 1e-4), round(s.coord.imag / 1e-4))
        if key not in seen:
            seen.add(key)
            out.append((s.point, s.vertex))
    return out
