"""Minimal sets: detection, attraction certificates, classification.

Detection follows the orbit-closure characterization: a minimal set is
the closure of the forward orbit set of any of its points.  Starting
from tail points of long random orbits (and from repelling fixed points
of self-loop generators, which seed the invariant sets random orbits
never converge to), the set-valued image map is iterated on a cell
lattice until the per-vertex cell sets are stable; a final "polish"
stage accumulates exact point orbits of boundary cells to sharpen the
rim beyond lattice quantization (important near tangencies, where the
extremal crawl advances more slowly than one cell per round).

Certificates verify the defining property of attracting minimal sets
directly: every admissible word of length N over the support net maps
the W-neighborhood strictly inside the U-neighborhood, with box
enclosures computed from sampled Lipschitz bounds.  They are
reproducible numerical evidence, not rigorous proofs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceededError, SchemaError, UnsupportedOperationError
from .gdms import Gdms
from .grid import ChartLattice
from .julia import (
    mark_cells_adversarial,
    mark_cells_random_words,
    repelling_fixed_seeds,
)
from .orbit import ChainEnsemble, escape_radius
from .sphere import Chart, SpherePoint, random_sphere_points

_SQRT2 = math.sqrt(2.0)
_TAG_DETECT = 201
_POLISH_RING_PITCH = 0.02
_LIP_SAMPLES = 5  # per axis


def _tight_escape_cut(g: Gdms):
    """Smallest sampled radius beyond which every generator grows |z|.

    Scans down from the coefficient-based escape radius while the sampled
    minimum of |f(z)| - |z| over circles and net parameters stays
    positive.  None for systems with a non-polynomial generator.
    """
    try:
        r_cap = escape_radius(g)
    except UnsupportedOperationError:
        return None
    ang = np.exp(2j * np.pi * np.arange(256) / 256)
    maps = []
    for e in g.edges:
        maps.extend(e.family.support_net(0.25))
    best = r_cap
    for r in np.geomspace(r_cap, 1.0, 40):
        # evaluate on the circle |z| = r in whichever chart is valid
        inv = r > 1.0
        z = (1.0 / r) * np.conj(ang) if inv else r * ang
        ok = True
        for f in maps:
            ch, co = f.eval_batch(np.full(len(z), inv), z)
            a = np.abs(co)
            with np.errstate(divide="ignore"):
                mag = np.where(ch, np.divide(1.0, a, where=a > 0,
                                             out=np.full_like(a, np.inf)), a)
            if (mag <= r * 1.02).any():
                ok = False
                break
        if not ok:
            break
        best = r
    return best


@dataclass
class MinimalSetCover:
    """Per-vertex cell cover of one minimal set candidate."""

    lattice: ChartLattice
    delta: float
    net_delta: float
    cells: list  # per vertex: sorted np.int64 ids
    stable: bool
    provenance: str

    def total_cells(self) -> int:
        return int(sum(len(c) for c in self.cells))

    def dilated(self, k: int):
        return [self.lattice.dilate(c, k) for c in self.cells]

    def layers(self, dilation: int = 0):
        lat = self.lattice
        m = len(self.cells)
        out = np.zeros((m, 2, lat.n, lat.n), dtype=bool)
        for v in range(m):
            ids = lat.dilate(self.cells[v], dilation) if dilation else self.cells[v]
            ch, ix, iy = lat.decode(ids)
            out[v, ch, ix, iy] = True
        return out

    def to_json(self) -> dict:
        return {
            "delta": self.delta,
            "net_delta": self.net_delta,
            "stable": self.stable,
            "provenance": self.provenance,
            "cells": [[int(c) for c in v] for v in self.cells],
            "resolution": self.lattice.n,
        }


class PointFlow:
    """Forward point dynamics on a cell lattice.

    The state is a bounded set of exact sample points per vertex (at most
    one per half-cell); every visited cell is accumulated into the cover.
    Exact evaluation has no Lipschitz inflation, so neutral boundaries
    (tangencies) stall where they should and escapes happen only when the
    true extremal drift is positive.  Disk families act through their
    support net (boundary ring included); polishing re-runs the rim with
    a much denser boundary ring.
    """

    def __init__(self, g: Gdms, delta: float, net_delta: float = 0.25,
                 box_cap: int = 10_000):
        if not 0 < delta <= 0.1:
            raise SchemaError("delta must be in (0, 0.1]")
        self.g = g
        self.lat = ChartLattice.with_pitch(delta)
        self.delta = self.lat.cell
        self.net_delta = net_delta
        self.box_cap = box_cap
        self.pairs = {}
        for e in g.edges:
            self.pairs.setdefault((e.src, e.dst), []).append(e.family)
        self.escape_cut = _tight_escape_cut(g)
        self._entries = {}
        for pair, fams in self.pairs.items():
            entries = []
            for fam in fams:
                if fam.kind == "atoms":
                    entries.append(("atoms", [f for f, _ in fam.atoms], None))
                else:
                    net = np.asarray(fam.net_params(net_delta),
                                     dtype=np.complex128)
                    nring = max(6, int(math.ceil(2 * math.pi / _POLISH_RING_PITCH)))
                    ring = fam.center + fam.radius * np.exp(
                        2j * np.pi * np.arange(nring) / nring) if fam.radius > 0 \
                        else np.zeros(0, dtype=np.complex128)
                    # transit-reduced set: the support boundary (extremal
                    # drift) plus the center; enough to transport escaping
                    # mass without filling interiors
                    on_ring = np.abs(net - fam.center) >= fam.radius * (1 - 1e-9)
                    reduced = np.concatenate([net[on_ring],
                                              [complex(fam.center)]])
                    entries.append(("disk", fam.kernel, net, ring, reduced))
            self._entries[pair] = entries

    def _apply(self, pts, dense=False, reduced=False):
        """Images of per-vertex point sets under every net generator."""
        parts = [[] for _ in range(self.g.m)]
        for (i, j), entries in self._entries.items():
            ch, co = pts[i]
            if len(co) == 0:
                continue
            for entry in entries:
                if entry[0] == "atoms":
                    for f in entry[1]:
                        parts[j].append(f.eval_batch(ch, co))
                else:
                    _, kernel, net, ring, small = entry
                    if reduced:
                        params = small
                    elif dense and len(ring):
                        # rim sharpening: boundary pushes plus the center
                        params = np.concatenate([ring, small[-1:]])
                    else:
                        params = net
                    nc = len(params)
                    ch2 = np.broadcast_to(ch[:, None], (len(co), nc)).ravel()
                    co2 = np.broadcast_to(co[:, None], (len(co), nc)).ravel()
                    c2 = np.broadcast_to(params[None, :], (len(co), nc)).ravel()
                    parts[j].append(kernel.eval_batch(c2, ch2, co2))
        return parts

    def _collapse_escaped(self, ch, co):
        if self.escape_cut is None:
            return ch, co
        mag = np.where(ch, np.abs(co), 1.0)  # inverted-chart |u|
        esc_inv = ch & (mag <= 1.0 / self.escape_cut) & (mag > 0)
        esc_std = ~ch & (np.abs(co) >= self.escape_cut)
        esc = esc_inv | esc_std | (ch & (co == 0))
        if esc.any():
            ch = ch.copy()
            co = co.copy()
            ch[esc] = True
            co[esc] = 0j
        return ch, co

    def _dedup(self, ch, co):
        """At most one representative point per half-cell."""
        lat = self.lat
        q = lat.cell / 2.0
        qx = np.floor((co.real - lat.origin) / q).astype(np.int64)
        qy = np.floor((co.imag - lat.origin) / q).astype(np.int64)
        side = 2 * lat.n + 4
        key = (ch.astype(np.int64) * side + np.clip(qx, 0, side - 1)) * side \
            + np.clip(qy, 0, side - 1)
        _, first = np.unique(key, return_index=True)
        first.sort()
        return ch[first], co[first]

    def seed_points(self, pairs):
        pts = [(np.zeros(0, bool), np.zeros(0, np.complex128))
               for _ in range(self.g.m)]
        by_v = {}
        for ch, co, v in pairs:
            by_v.setdefault(v, []).append((ch, co))
        for v, items in by_v.items():
            ch = np.array([c for c, _ in items], dtype=bool)
            co = np.array([z for _, z in items], dtype=np.complex128)
            pts[v] = self._dedup(ch, co)
        return pts

    @staticmethod
    def _member(sorted_arr, keys):
        if len(sorted_arr) == 0:
            return np.zeros(len(keys), dtype=bool)
        idx = np.searchsorted(sorted_arr, keys)
        idx = np.minimum(idx, len(sorted_arr) - 1)
        return sorted_arr[idx] == keys

    def _qkeys(self, ch, co):
        lat = self.lat
        q = lat.cell / 2.0
        qx = np.floor((co.real - lat.origin) / q).astype(np.int64)
        qy = np.floor((co.imag - lat.origin) / q).astype(np.int64)
        side = 2 * lat.n + 4
        return (ch.astype(np.int64) * side + np.clip(qx, 0, side - 1)) * side \
            + np.clip(qy, 0, side - 1)

    def run(self, seed_pts, max_rounds: int = 1000, dense: bool = False,
            start_cells=None, collect_reps: bool = False):
        """Breadth-first accumulation of the forward orbit closure.

        Phase space is quantized at half-cell resolution; every visited
        quantum is expanded exactly once, through exact images of an
        exact representative point, so the total work is proportional to
        the area explored.  Returns (cells_by_vertex, stable);
        stable=False when the box cap or the round limit was hit.

        Quantum-level exploration cannot crawl slower than half a cell
        per step; ``polish`` handles sub-quantum rim drift.
        """
        visited = [np.zeros(0, dtype=np.int64) for _ in range(self.g.m)]
        cover = [np.zeros(0, dtype=np.int64) for _ in range(self.g.m)]
        if start_cells is not None:
            cover = [c.copy() for c in start_cells]
        reps = [[] for _ in range(self.g.m)]
        frontier = []
        for v in range(self.g.m):
            ch, co = seed_pts[v]
            if len(co):
                ch, co = self._collapse_escaped(ch, co)
                ch, co = self._dedup(ch, co)
                visited[v] = np.unique(self._qkeys(ch, co))
                cover[v] = np.union1d(cover[v], self.lat.cells_of_points(
                    ch.astype(np.int64), co))
                if collect_reps:
                    reps[v].append((ch, co))
            frontier.append((ch, co))

        def packed_reps():
            out = []
            for v in range(self.g.m):
                if reps[v]:
                    out.append((np.concatenate([c for c, _ in reps[v]]),
                                np.concatenate([z for _, z in reps[v]])))
                else:
                    out.append((np.zeros(0, bool), np.zeros(0, np.complex128)))
            return out

        for _ in range(max_rounds):
            if all(len(co) == 0 for _, co in frontier):
                return cover, True, packed_reps()
            parts = self._apply(frontier, dense=dense)
            new_frontier = []
            for v in range(self.g.m):
                if not parts[v]:
                    new_frontier.append((np.zeros(0, bool),
                                         np.zeros(0, np.complex128)))
                    continue
                ch = np.concatenate([c for c, _ in parts[v]])
                co = np.concatenate([z for _, z in parts[v]])
                ch, co = self._collapse_escaped(ch, co)
                ch, co = self._dedup(ch, co)
                keys = self._qkeys(ch, co)
                fresh = ~self._member(visited[v], keys)
                ch, co = ch[fresh], co[fresh]
                if len(co):
                    visited[v] = np.union1d(visited[v], keys[fresh])
                    cover[v] = np.union1d(cover[v], self.lat.cells_of_points(
                        ch.astype(np.int64), co))
                    if collect_reps:
                        reps[v].append((ch, co))
                    if len(cover[v]) > self.box_cap:
                        return cover, False, packed_reps()
                new_frontier.append((ch, co))
            frontier = new_frontier
        return cover, False, packed_reps()

    def boundary_cells(self, cells_v):
        """Cells of one vertex with at least one unmarked 8-neighbor."""
        lat = self.lat
        if len(cells_v) == 0:
            return cells_v
        layer = np.zeros((2, lat.n, lat.n), dtype=bool)
        ch, ix, iy = lat.decode(cells_v)
        layer[ch, ix, iy] = True
        inner = np.ones_like(layer)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                shifted = np.zeros_like(layer)
                xs = slice(max(dx, 0), lat.n + min(dx, 0))
                xd = slice(max(-dx, 0), lat.n + min(-dx, 0))
                ys = slice(max(dy, 0), lat.n + min(dy, 0))
                yd = slice(max(-dy, 0), lat.n + min(-dy, 0))
                shifted[:, xd, yd] = layer[:, xs, ys]
                inner &= shifted
        border = layer & ~inner
        return lat.layer_ids(border)

    def polish(self, cover_cells, reps=None, max_rounds: int = 1500,
               idle_exit: int = None):
        """Sharpen the rim by exact sub-quantum point dynamics.

        Boundary-cell centers are iterated with the support net plus a
        dense boundary ring per disk family.  Points move exactly (no
        quantization of the state), so near-neutral rims crawl at their
        true speed: stalls where the dynamics stalls, adds cells where a
        genuine outward drift exists.  Returns (cells, ok); ok=False when
        the cap was exceeded (the rim is escaping).

        The idle allowance must cover the slowest useful crawl cadence
        (quadratic slowdown near the rim's fixed radius: around one new
        cell per cell/advance rounds), hence the 0.8/cell default.
        """
        if idle_exit is None:
            idle_exit = max(20, int(math.ceil(0.8 / self.lat.cell)))
        lat = self.lat
        state = [c.copy() for c in cover_cells]
        pts = []
        for v in range(self.g.m):
            rim = self.boundary_cells(state[v])
            if reps is not None and len(reps[v][1]):
                # exact representatives that landed in rim cells; synthetic
                # cell centers drift off thin invariant sets
                ch, co = reps[v]
                cells = lat.cells_of_points(ch.astype(np.int64), co)
                on_rim = np.isin(cells, rim)
                ch, co = ch[on_rim], co[on_rim]
                have = np.unique(cells[on_rim])
                missing = rim[~np.isin(rim, have)]
                mch, mco = lat.centers(missing)
                ch = np.concatenate([ch, mch])
                co = np.concatenate([co, mco])
            else:
                ch, co = lat.centers(rim)
            pts.append((ch, co))
        idle = 0
        for _ in range(max_rounds):
            parts = self._apply(pts, dense=True)
            added = False
            for v in range(self.g.m):
                if not parts[v]:
                    pts[v] = (np.zeros(0, bool), np.zeros(0, np.complex128))
                    continue
                ch = np.concatenate([c for c, _ in parts[v]])
                co = np.concatenate([z for _, z in parts[v]])
                ch, co = self._collapse_escaped(ch, co)
                cells = lat.cells_of_points(ch.astype(np.int64), co)
                fresh = ~np.isin(cells, state[v])
                if fresh.any():
                    state[v] = np.union1d(state[v], cells[fresh])
                    added = True
                if len(state[v]) > self.box_cap:
                    return state, False
                # keep one point per rim cell: the one of largest plane
                # modulus, so an outward crawl is never reset by dedup
                rim = self.boundary_cells(state[v])
                keep = np.isin(cells, rim)
                ch, co = ch[keep], co[keep]
                cell_keys = cells[keep]
                with np.errstate(divide="ignore"):
                    a = np.abs(co)
                    mag = np.where(ch, np.divide(1.0, a, where=a > 0,
                                                 out=np.full_like(a, np.inf)),
                                   a)
                order = np.lexsort((-mag, cell_keys))
                ch, co, cell_keys = ch[order], co[order], cell_keys[order]
                _, first = np.unique(cell_keys, return_index=True)
                pts[v] = (ch[first], co[first])
            idle = 0 if added else idle + 1
            if idle >= idle_exit:
                break
        return state, True


# ---------------------------------------------------------------------------
# Detection
# ---------------------------------------------------------------------------


def _orbit_tail_seeds(g: Gdms, n_seeds: int, orbit_len: int, seed: int):
    """Tail (point, vertex) samples of n_seeds random orbits."""
    ch0, co0 = random_sphere_points(n_seeds, seed, _TAG_DETECT)
    verts = np.arange(n_seeds, dtype=np.int64) % g.m
    ens = ChainEnsemble(g, ch0, co0, verts, seed ^ 0xD1CE)
    tail_from = int(orbit_len * 0.9)
    tails = [[] for _ in range(n_seeds)]
    for t in range(orbit_len):
        ens.step(t)
        if t >= tail_from:
            for k in range(n_seeds):
                tails[k].append((bool(ens.chart[k]), complex(ens.coord[k]),
                                 int(ens.vertex[k])))
    out = []
    for k in range(n_seeds):
        seen, pairs = set(), []
        for ch, co, v in tails[k]:
            key = (v, ch, round(co.real / 1e-4), round(co.imag / 1e-4))
            if key not in seen:
                seen.add(key)
                pairs.append((ch, co, v))
        out.append(pairs)
    return out


def _covers_equal(a, b, lat, tol_cells=1):
    for av, bv in zip(a, b):
        if len(av) == 0 and len(bv) == 0:
            continue
        if len(av) == 0 or len(bv) == 0:
            return False
        if not np.isin(av, lat.dilate(bv, tol_cells)).all():
            return False
        if not np.isin(bv, lat.dilate(av, tol_cells)).all():
            return False
    return True


def _points_inside(lat, pairs, cells) -> bool:
    """All (chart, coord, vertex) pairs lie inside the given cell sets."""
    for ch, co, v in pairs:
        if len(cells[v]) == 0:
            return False
        cell = int(lat.cells_of_points(np.array([int(ch)]), np.array([co]))[0])
        if not np.isin(cell, cells[v]):
            return False
    return True


def _entry_contains_smaller(entry, others, flow_at, m):
    """entry's cover strictly contains some smaller cover among others."""
    _, level, cover = entry
    total = sum(len(c) for c in cover)
    lat = flow_at(level).lat
    for other in others:
        if other is entry:
            continue
        _, lvl2, cov2 = other
        if sum(len(c) for c in cov2) >= total:
            continue
        inside = True
        for v in range(m):
            if len(cov2[v]) == 0:
                continue
            if len(cover[v]) == 0:
                inside = False
                break
            ch, co = flow_at(lvl2).lat.centers(cov2[v])
            cells = lat.cells_of_points(ch.astype(np.int64), co)
            if not np.isin(cells, cover[v]).all():
                inside = False
                break
        if inside:
            return True
    return False


def detect_minimal_sets(g: Gdms, n_seeds: int = 16, orbit_len: int = 1000,
                        delta: float = 0.01, seed: int = 0, *,
                        net_delta: float = 0.25, box_cap: int = 10_000,
                        polish: bool = True, escalate_levels: int = 3,
                        include_fixed_seeds: bool = True):
    """Detect minimal-set covers from orbit tails and fixed-point seeds.

    Each seed group's forward orbit closure is accumulated on the cell
    lattice and its rim polished by exact point dynamics.  Runs that
    exceed the box cap (escape sweeps through the sphere) are retried on
    lattices coarsened by powers of two, then refined back when
    possible.  A stable cover that strictly contains another stable
    cover is the orbit closure of a transient, not a minimal set: it is
    set aside, and later seeds landing inside such swept regions are
    skipped, since every minimal set they can reach is already
    represented.
    """
    if n_seeds < 8:
        raise SchemaError("n_seeds >= 8 required")
    if not 0 < delta <= 0.05:
        raise SchemaError("delta must be in (0, 0.05]")
    flows = {0: PointFlow(g, delta, net_delta, box_cap)}

    def flow_at(level):
        if level not in flows:
            flows[level] = PointFlow(g, delta * (2 ** level), net_delta, box_cap)
        return flows[level]

    def attempt(level, pairs):
        fl = flow_at(level)
        cover, ok, reps = fl.run(fl.seed_points(pairs), collect_reps=True)
        if ok and polish:
            cover, ok = fl.polish(cover, reps)
        return cover, ok

    kept = []   # (label, level, cover) accepted candidates
    swept = []  # (level, cover, capped) transient closures / capped sweeps

    def covered(pairs):
        for _, lvl, cov in kept:
            if _points_inside(flow_at(lvl).lat, pairs, cov):
                return True
        for lvl, cov, _ in swept:
            if _points_inside(flow_at(lvl).lat, pairs, cov):
                return True
        return False

    def run_group(label, pairs, escalate=True):
        level = 0
        cover, stable = attempt(level, pairs)
        while (not stable and escalate and level < escalate_levels
               and delta * 2 ** (level + 1) <= 0.1):
            level += 1
            cover, stable = attempt(level, pairs)
        if stable and level > 0:
            while level > 0:
                fl_coarse = flow_at(level)
                pts = []
                for v in range(g.m):
                    ch, co = fl_coarse.lat.centers(cover[v])
                    pts.extend((bool(c), complex(z), v) for c, z in zip(ch, co))
                fine_cover, ok = attempt(level - 1, pts)
                if not ok:
                    break
                level -= 1
                cover = fine_cover
        if not stable:
            swept.append((level, cover, True))
            return
        entry = (label, level, cover)
        if _entry_contains_smaller(entry, kept, flow_at, g.m):
            swept.append((level, cover, False))
            return
        kept.append(entry)
        # earlier covers may now be recognized as transient closures
        still = []
        for old in kept:
            if old is not entry and _entry_contains_smaller(old, kept, flow_at,
                                                            g.m):
                swept.append((old[1], old[2], False))
            else:
                still.append(old)
        kept[:] = still

    groups = []
    if g.all_polynomial():
        # infinity is a common superattracting fixed point: always a
        # minimal set, and seeding it first anchors the containment test
        groups.append(("infinity", [(True, 0j, v) for v in range(g.m)], False))
    tails = list(enumerate(_orbit_tail_seeds(g, n_seeds, orbit_len, seed)))
    # converged orbits have short deduplicated tails; running them first
    # keeps transient closures from masking their own attractors
    tails.sort(key=lambda kv: (len(kv[1]), kv[0]))
    groups.extend((f"orbit-{k}", pairs, True) for k, pairs in tails)
    if include_fixed_seeds:
        # Repelling fixed points seed the invariant sets random orbits
        # never converge to (essential for deterministic generators).
        by_vertex = {}
        for q, v in repelling_fixed_seeds(g, net_delta):
            by_vertex.setdefault(v, []).append(
                (q.chart == Chart.INVERTED, complex(q.coord), v))
        groups.extend((f"fixed-point-{v}", pairs, False)
                      for v, pairs in sorted(by_vertex.items()))

    for label, pairs, escalate in groups:
        if not pairs:
            continue
        # Skipping applies to orbit seeds only: their attractors are found
        # by earlier (shorter-tail) groups, so re-sweeping a known region
        # is redundant.  Fixed-point seeds always run: they carry the
        # non-attracting minimal sets, which a swept transient region may
        # contain without representing.
        if label.startswith("orbit") and covered(pairs):
            continue
        run_group(label, pairs, escalate=escalate)

    covers = [MinimalSetCover(flow_at(lvl).lat, flow_at(lvl).delta, net_delta,
                              [np.unique(c) for c in cov], True, label)
              for label, lvl, cov in kept]
    # Capped sweeps are reported flagged (candidate whole-sphere or huge
    # minimal sets) unless they contain a kept cover, in which case they
    # are transient closures passing through a known attractor.
    for lvl, cov, capped in swept:
        if capped and not _entry_contains_smaller(("", lvl, cov), kept,
                                                  flow_at, g.m):
            covers.append(
                MinimalSetCover(flow_at(lvl).lat, flow_at(lvl).delta, net_delta,
                                [np.unique(c) for c in cov], False, "capped"))

    merged = _merge_covers(covers, g.m)
    merged = _drop_nonminimal_supersets(merged)
    merged.sort(key=lambda c: (not c.stable, c.total_cells(),
                               tuple(int(v[0]) if len(v) else -1 for v in c.cells)))
    return merged


def _cover_contains(big: MinimalSetCover, small: MinimalSetCover) -> bool:
    """True when every cell center of ``small`` lies in a cell of ``big``."""
    for v in range(len(small.cells)):
        ids = small.cells[v]
        if len(ids) == 0:
            continue
        if len(big.cells[v]) == 0:
            return False
        ch, co = small.lattice.centers(ids)
        cells = big.lattice.cells_of_points(ch.astype(np.int64), co)
        if not np.isin(cells, big.cells[v]).all():
            return False
    return True


def _drop_nonminimal_supersets(covers):
    """Discard stable covers strictly containing another stable cover.

    Minimality: a compact forward-invariant family that properly
    contains another one is not minimal.
    """
    out = []
    stable = [c for c in covers if c.stable]
    for c in covers:
        if c.stable and any(
                o is not c and o.stable and
                c.total_cells() > o.total_cells() and _cover_contains(c, o)
                for o in stable):
            continue
        out.append(c)
    return out


def _merge_covers(covers, m):
    """Union covers that share a cell at some vertex (same lattice only)."""
    out = list(covers)
    changed = True
    while changed:
        changed = False
        for a in range(len(out)):
            for b in range(a + 1, len(out)):
                ca, cb = out[a], out[b]
                if ca.lattice.n != cb.lattice.n:
                    continue
                overlap = any(
                    len(np.intersect1d(ca.cells[v], cb.cells[v])) > 0
                    for v in range(m))
                if overlap:
                    cells = [np.union1d(ca.cells[v], cb.cells[v]) for v in range(m)]
                    out[a] = MinimalSetCover(ca.lattice, ca.delta, ca.net_delta,
                                             cells, ca.stable and cb.stable,
                                             ca.provenance)
                    del out[b]
                    changed = True
                    break
            if changed:
                break
    return out


# ---------------------------------------------------------------------------
# Certification
# ---------------------------------------------------------------------------


@dataclass
class StabilityCertificate:
    word_length: int
    delta: float
    net_delta: float
    u_cells: list
    w_cells: list
    margin: float
    word_count: int
    max_ratio: float  # worst terminal/initial enclosure half-width ratio
    fatou_words: int
    fatou_depth: int
    seed: int

    def to_json(self):
        return {
            "word_length": self.word_length,
            "delta": self.delta,
            "net_delta": self.net_delta,
            "margin": self.margin,
            "word_count": self.word_count,
            "max_ratio": self.max_ratio,
            "u_cells": [[int(c) for c in v] for v in self.u_cells],
            "w_cells": [[int(c) for c in v] for v in self.w_cells],
            "fatou_words": self.fatou_words,
            "fatou_depth": self.fatou_depth,
            "seed": self.seed,
        }


@dataclass
class CertificationFailure:
    word_length: int
    reason: str
    max_ratio: float
    failing_word: tuple = ()


def _enclose_batch(f, chart, center, half):
    """Vectorized image enclosures of a batch of boxes under one map."""
    ich, ico = f.eval_batch(chart.astype(bool), center)
    b = len(center)
    off = np.linspace(-1.0, 1.0, _LIP_SAMPLES)
    gx, gy = np.meshgrid(off, off, indexing="ij")
    probe = (gx + 1j * gy).ravel()
    pts = (center[:, None] + half[:, None] * probe[None, :]).ravel()
    pch = np.repeat(chart.astype(bool), len(probe))
    dn = f.deriv_norm_batch(pch, pts).reshape(b, len(probe))
    bound = dn.max(axis=1) * 1.2
    return ich.astype(np.int64), ico, bound * half * _SQRT2


def certify_attracting(g: Gdms, cover: MinimalSetCover, word_length: int,
                       delta: float = None, net_delta: float = None,
                       budget: int = 1_000_000, fatou_words: int = 8,
                       fatou_depth: int = 16, theta: float = 0.5, seed: int = 0):
    """Verify the attracting-set conditions for all net words of one length.

    U is the cover dilated by 2 cells, W by 4, on a lattice of pitch
    ``delta`` (the cover's own by default; a coarser pitch widens the
    U/W clearance and shrinks the box count, which is the standard way
    out when enclosures at the native pitch are too inflated or the
    word-box budget is exceeded).  Succeeds iff every admissible word of
    the given length over the support net maps every W box strictly
    inside U at the terminal vertex, and W's cells pass a sampled-word
    equicontinuity probe (Fatou containment evidence).  Returns a
    StabilityCertificate or a CertificationFailure.
    """
    if word_length < 1:
        raise SchemaError("word length must be >= 1")
    delta = cover.delta if delta is None else delta
    net_delta = cover.net_delta if net_delta is None else net_delta
    if delta <= cover.delta * (1 - 1e-9):
        raise SchemaError("certification pitch must not be finer than the cover")
    if abs(delta - cover.delta) < 1e-12:
        lat = cover.lattice
        base_cells = cover.cells
    else:
        lat = ChartLattice.with_pitch(delta)
        base_cells = []
        for v in range(g.m):
            if len(cover.cells[v]) == 0:
                base_cells.append(np.zeros(0, dtype=np.int64))
                continue
            ch, co = cover.lattice.centers(cover.cells[v])
            base_cells.append(np.unique(
                lat.cells_of_points(ch.astype(np.int64), co)))
    u_cells = [lat.dilate(c, 2) for c in base_cells]
    w_cells = [lat.dilate(c, 4) for c in base_cells]
    m = g.m
    u_layers = np.zeros((m, 2, lat.n, lat.n), dtype=bool)
    for v in range(m):
        chv, ixv, iyv = lat.decode(u_cells[v])
        u_layers[v, chv, ixv, iyv] = True

    nets = [e.family.support_net(net_delta) for e in g.edges]

    # budget: words x start boxes
    words = list(g.admissible_words(word_length))
    total = 0
    for w in words:
        combos = 1
        for e in w:
            combos *= len(nets[e])
        total += combos * len(w_cells[g.edges[w[0]].src])
    if total > budget:
        raise BudgetExceededError(
            f"{total} word-box pairs exceed budget {budget}; increase the net "
            f"delta or reduce the word length")

    # Fatou probe on W (sampled words; a lower test, recorded in the cert)
    for v in range(g.m):
        if len(w_cells[v]) == 0:
            continue
        marked = mark_cells_random_words(g, lat, w_cells[v], v, fatou_words,
                                         fatou_depth, theta, seed)
        if marked.any():
            return CertificationFailure(word_length,
                                        f"W cell at vertex {v} fails the "
                                        f"equicontinuity probe", math.nan)

    max_ratio = 0.0
    min_clear_cells = None

    for w in words:
        src = g.edges[w[0]].src
        if len(w_cells[src]) == 0:
            continue
        dst = g.edges[w[-1]].dst
        ch0, co0 = lat.centers(w_cells[src])
        h0 = np.full(len(co0), lat.cell / 2.0)
        for map_seq in _expand_words(nets, [], list(w)):
            ch, co, h = ch0.astype(np.int64), co0, h0
            for f in map_seq:
                ch, co, h = _enclose_batch(f, ch, co, h)
            max_ratio = max(max_ratio, float((h / h0).max()))
            # containment in U at dst, with cell-margin search
            clear = _containment_margin(lat, ch, co, h, u_layers[dst])
            if clear < 0:
                return CertificationFailure(
                    word_length, "terminal enclosure escapes U", max_ratio,
                    failing_word=tuple(int(e) for e in w))
            if min_clear_cells is None or clear < min_clear_cells:
                min_clear_cells = clear

    if min_clear_cells is None:
        return CertificationFailure(word_length, "no start boxes", math.nan)
    # chordal lower bound for the in-chart clearance
    margin = min_clear_cells * lat.cell * 2.0 / (1.0 + 1.5625)
    return StabilityCertificate(word_length, delta, net_delta,
                                u_cells, w_cells, margin, len(words), max_ratio,
                                fatou_words, fatou_depth, seed)


def _expand_words(nets, prefix, edges_left):
    if not edges_left:
        yield prefix
        return
    e = edges_left[0]
    for f in nets[e]:
        yield from _expand_words(nets, prefix + [f], edges_left[1:])


def _containment_margin(lat, chart, center, half, u_layer, max_clear=4):
    """Largest k (in cells) such that every box dilated by k*cell is still
    covered by marked cells of u_layer; -1 if not contained at all."""
    clear = -1
    for k in range(max_clear + 1):
        flat, offsets = lat.squares_ids_batched(
            chart, center, half + k * lat.cell, mode="cover")
        if (np.diff(offsets) == 0).any():
            break
        ch, ix, iy = lat.decode(flat)
        if not u_layer[ch, ix, iy].all():
            break
        clear = k
    return clear


def replay_certificate(g: Gdms, cover: MinimalSetCover,
                       cert: StabilityCertificate) -> bool:
    """Independent re-check of a stored certificate.

    Re-folds every enclosure and recomputes the margin; must agree
    bit-identically with the stored values (pure deterministic path).
    """
    redo = certify_attracting(g, cover, cert.word_length,
                              delta=cert.delta, net_delta=cert.net_delta,
                              fatou_words=cert.fatou_words,
                              fatou_depth=cert.fatou_depth, seed=cert.seed)
    if isinstance(redo, CertificationFailure):
        return False
    return (redo.margin == cert.margin and redo.word_count == cert.word_count
            and redo.max_ratio == cert.max_ratio)


# ---------------------------------------------------------------------------
# Classification and verdict
# ---------------------------------------------------------------------------


@dataclass
class Classification:
    kind: str  # "attracting" | "j_touching" | "sub_rotative"
    certificate: StabilityCertificate = None
    witnesses: list = field(default_factory=list)  # (vertex, SpherePoint)
    diagnostics: dict = field(default_factory=dict)

    def to_json(self):
        out = {"kind": self.kind, "diagnostics": self.diagnostics}
        if self.certificate is not None:
            out["certificate"] = self.certificate.to_json()
        if self.witnesses:
            out["witnesses"] = [
                {"vertex": v + 1, "chart": int(q.chart),
                 "coord": [q.coord.real, q.coord.imag]}
                for v, q in self.witnesses
            ]
        return out


def classify(g: Gdms, cover: MinimalSetCover, mask=None, n_max: int = 8,
             seed: int = 0, probe_words: int = 16, probe_depth: int = 32,
             theta: float = 0.5) -> Classification:
    """Decide attracting / J-touching / sub-rotative for one stable cover.

    Order: (1) Julia contact of the 1-cell-dilated cover (grid mask if
    provided, plus local random-word and deterministic adversarial
    probes; the local probes focus on the rim and a strided interior
    sample, since contact with the Julia set happens at the boundary of
    an orbit-closure cover); (2) attraction certificates for word
    lengths 1, 2, 4, ...; (3) otherwise sub-rotative by elimination,
    with the measured contraction ratios as evidence.
    """
    if not cover.stable:
        raise SchemaError("classification requires a stable cover")
    lat = cover.lattice
    dilated = cover.dilated(1)

    witnesses = []
    for v in range(g.m):
        cells = dilated[v]
        if len(cells) == 0:
            continue
        hit = np.zeros(len(cells), dtype=bool)
        if mask is not None:
            ch, co = lat.centers(cells)
            mcells = mask.lattice.cells_of_points(ch.astype(np.int64), co)
            mch, mix, miy = mask.lattice.decode(mcells)
            hit |= mask.layers[v, mch, mix, miy]
        if not hit.all():
            rest = cells[~hit]
            rim = _boundary_of(lat, cells)
            probe_sel = np.isin(rest, rim)
            stride = max(1, len(rest) // max(1, 2 * len(rim)))
            probe_sel[::stride] = True
            sub = np.zeros(len(rest), dtype=bool)
            sub[probe_sel] = mark_cells_random_words(
                g, lat, rest[probe_sel], v, probe_words, probe_depth, theta,
                seed)
            tmp = hit.copy()
            tmp[~hit] = sub
            hit = tmp
        if not hit.all():
            # adversarial probe on the not-yet-marked boundary cells
            rest = cells[~hit]
            bnd = rest[np.isin(rest, _boundary_of(lat, cells))]
            if len(bnd):
                # the crawl toward/past a tangency advances like u^2 per
                # step: reaching a witness needs depth ~ 1/cell
                adv_depth = max(400, int(3.0 / lat.cell))
                adv = mark_cells_adversarial(g, lat, bnd, v, adv_depth,
                                             theta, ring_pitch=0.05)
                marked = bnd[adv]
                if len(marked):
                    ch, co = lat.centers(marked)
                    witnesses.extend(
                        (v, SpherePoint(Chart.INVERTED if c else Chart.STANDARD,
                                        complex(z)))
                        for c, z in zip(ch, co))
        marked_cells = cells[hit]
        if len(marked_cells):
            ch, co = lat.centers(marked_cells)
            witnesses.extend(
                (v, SpherePoint(Chart.INVERTED if c else Chart.STANDARD, complex(z)))
                for c, z in zip(ch, co))
    if witnesses:
        return Classification("j_touching", witnesses=witnesses)

    ratios = {}
    n = 1
    while n <= n_max:
        # escalate the certification pitch when enclosures are too
        # inflated for the 2-cell clearance, and coarsen the net when the
        # word-box budget explodes ("larger delta or smaller N")
        for mult in (1, 2, 4):
            dc = cover.delta * mult
            if dc > 0.1:
                break
            result = None
            for nd in (cover.net_delta, 0.5, 1.0):
                if nd < cover.net_delta:
                    continue
                try:
                    result = certify_attracting(g, cover, n, delta=dc,
                                                net_delta=nd, seed=seed)
                except BudgetExceededError:
                    result = None
                    continue
                break
            if result is None:
                ratios[f"N={n} x{mult}"] = "budget"
                continue
            if isinstance(result, StabilityCertificate):
                return Classification("attracting", certificate=result,
                                      diagnostics={"ratios": ratios})
            ratios[f"N={n} x{mult}"] = result.max_ratio
        n *= 2
    return Classification("sub_rotative",
                          diagnostics={"ratios": ratios,
                                       "note": "certification failed up to "
                                               f"N={n_max}; contraction "
                                               "factors near or above 1"})


def _boundary_of(lat, cells):
    if len(cells) == 0:
        return cells
    layer = np.zeros((2, lat.n, lat.n), dtype=bool)
    ch, ix, iy = lat.decode(cells)
    layer[ch, ix, iy] = True
    inner = layer.copy()
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            if dx == 0 and dy == 0:
                continue
            shifted = np.zeros_like(layer)
            xs = slice(max(dx, 0), lat.n + min(dx, 0))
            xd = slice(max(-dx, 0), lat.n + min(-dx, 0))
            ys = slice(max(dy, 0), lat.n + min(dy, 0))
            yd = slice(max(-dy, 0), lat.n + min(-dy, 0))
            shifted[:, xd, yd] = layer[:, xs, ys]
            inner &= shifted
    return lat.layer_ids(layer & ~inner)


@dataclass
class MeanStabilityVerdict:
    mean_stable: bool  # None when undecided
    covers: list
    classifications: list
    alpha: int
    n_attracting: int
    bound_ok: bool
    contraction_rate: float  # empirical; nan when no certificates
    undecided_reason: str = ""

    def to_json(self):
        return {
            "mean_stable": self.mean_stable,
            "n_minimal_sets": len(self.covers),
            "n_attracting": self.n_attracting,
            "alpha": self.alpha,
            "bound_ok": self.bound_ok,
            "contraction_rate": self.contraction_rate,
            "undecided_reason": self.undecided_reason,
            "covers": [c.to_json() for c in self.covers],
            "classifications": [c.to_json() if c else None
                                for c in self.classifications],
        }


def mean_stable_verdict(g: Gdms, n_seeds: int = 16, orbit_len: int = 1000,
                        delta: float = 0.01, seed: int = 0,
                        net_delta: float = 0.25, box_cap: int = 10_000,
                        n_max: int = 8, mask=None) -> MeanStabilityVerdict:
    """Detect, classify, and report: mean stable iff every minimal set is
    attracting.  Also checks the finiteness bound on attracting sets."""
    covers = detect_minimal_sets(g, n_seeds, orbit_len, delta, seed,
                                 net_delta=net_delta, box_cap=box_cap)
    d = g.max_generator_degree()
    n_loop = g.shortest_loop_length(0)
    alpha = 2 * d ** n_loop - 2

    classifications = []
    undecided = ""
    for cov in covers:
        if not cov.stable:
            classifications.append(None)
            undecided = "unstable cover (box cap exceeded)"
            continue
        classifications.append(classify(g, cov, mask=mask, n_max=n_max, seed=seed))

    n_attr = sum(1 for c in classifications
                 if c is not None and c.kind == "attracting")
    bound_ok = n_attr <= alpha
    rates = [c.certificate.max_ratio ** (1.0 / c.certificate.word_length)
             for c in classifications
             if c is not None and c.kind == "attracting" and c.certificate]
    c_emp = max(rates) if rates else math.nan

    if undecided:
        mean_stable = None
    else:
        mean_stable = all(c.kind == "attracting" for c in classifications) \
            if classifications else None
        if mean_stable is None:
            undecided = "no minimal sets detected"
    return MeanStabilityVerdict(mean_stable, covers, classifications, alpha,
                                n_attr, bound_ok, c_emp, undecided)
