"""Per-vertex Julia/Fatou estimation and related checks.

Two independent estimators:

* a forward grid test that marks a cell when some sampled word expands
  the cell's corner/center probes past a chordal diameter threshold
  (non-equicontinuity witnessed directly), and
* backward inverse iteration from a repelling fixed point, which
  accumulates a point cloud on the Julia set.

Both are lower approximations of the true Julia set; budgets are part of
the reported result.  A deterministic "adversarial" probe (greedy
diameter ascent over the support net) supplements random words where the
expanding words have vanishing probability, e.g. exactly at a tangency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .errors import SeedFailureError
from .gdms import Gdms
from .grid import ChartLattice, GridMask
from .orbit import ChainEnsemble
from .sphere import Chart, SpherePoint, chordal_dist_batch

_TAG_FORWARD = 101
_TAG_BACKWARD = 102
_TAG_KERNEL = 103
_TAG_XI = 104

_PAIRS = [(i, j) for i in range(5) for j in range(i + 1, 5)]


def _probe_offsets(half):
    return np.array([0, half * (1 + 1j), half * (1 - 1j),
                     half * (-1 + 1j), half * (-1 - 1j)], dtype=np.complex128)


def _out_degree_tables(g: Gdms):
    kmax = max(len(o) for o in g.out_edges)
    table = np.zeros((g.m, kmax), dtype=np.int64)
    deg = np.zeros(g.m, dtype=np.int64)
    for i in range(g.m):
        deg[i] = len(g.out_edges[i])
        table[i, : deg[i]] = g.out_edges[i]
    return table, deg


def _apply_sampled_maps(g, eidx, lanes_key, t, chart, coord, seed):
    """Apply a per-lane random generator of the chosen edges to batches of
    probe points; chart/coord have shape (K, P)."""
    out_ch = np.empty_like(chart)
    out_co = np.empty_like(coord)
    for e in np.unique(eidx):
        sel = eidx == e
        fam = g.edges[e].family
        ch, co = chart[sel], coord[sel]
        if fam.kind == "atoms":
            ua = _rng.uniform01(seed, lanes_key[sel], np.uint64(t), 1)
            aidx = (ua[:, None] >= fam._atom_cum[None, :]).sum(axis=1)
            aidx = np.minimum(aidx, len(fam.atoms) - 1)
            och = np.empty_like(ch)
            oco = np.empty_like(co)
            for a in np.unique(aidx):
                sub = aidx == a
                f = fam.atoms[a][0]
                c2, z2 = f.eval_batch(ch[sub].ravel(), co[sub].ravel())
                och[sub] = c2.reshape(ch[sub].shape)
                oco[sub] = z2.reshape(co[sub].shape)
        else:
            c = _rng.uniform_disk(fam.center, fam.radius, seed, lanes_key[sel],
                                  np.uint64(t), 2)
            cc = np.broadcast_to(c[:, None], ch.shape).ravel()
            c2, z2 = fam.kernel.eval_batch(cc, ch.ravel(), co.ravel())
            och = c2.reshape(ch.shape)
            oco = z2.reshape(co.shape)
        out_ch[sel] = och
        out_co[sel] = oco
    return out_ch, out_co


def _probe_diameter(chart, coord):
    """Max pairwise chordal distance among the P probes; shape (K,)."""
    best = np.zeros(chart.shape[0])
    for i, j in _PAIRS:
        d = chordal_dist_batch(chart[:, i], coord[:, i], chart[:, j], coord[:, j])
        np.maximum(best, d, out=best)
    return best


def mark_cells_random_words(g: Gdms, lattice: ChartLattice, cell_ids, vertex: int,
                            n_words: int, depth: int, theta: float, seed: int):
    """True for each cell that some sampled word expands past theta.

    Words start at ``vertex``; edges are drawn uniformly (so low-weight
    edges are explored), maps within a family as in the chain.
    """
    cell_ids = np.asarray(cell_ids, dtype=np.int64)
    if len(cell_ids) == 0:
        return np.zeros(0, dtype=bool)
    if _is_deterministic(g):
        n_words = 1
    table, deg = _out_degree_tables(g)
    half = lattice.cell / 2.0
    offsets = _probe_offsets(half)

    marked = np.zeros(len(cell_ids), dtype=bool)
    cells_rep = np.repeat(np.arange(len(cell_ids)), n_words)
    word_rep = np.tile(np.arange(n_words, dtype=np.uint64), len(cell_ids))
    ch0, co0 = lattice.centers(cell_ids)
    chart = np.repeat(ch0, n_words)[:, None] & np.ones(5, dtype=bool)[None, :]
    coord = np.repeat(co0, n_words)[:, None] + offsets[None, :]
    vert = np.full(len(cells_rep), vertex, dtype=np.int64)
    lane_key = _rng.mix64(_TAG_FORWARD, np.repeat(cell_ids, n_words), word_rep)
    dst = np.array([e.dst for e in g.edges], dtype=np.int64)

    for t in range(depth):
        u = _rng.uniform01(seed, lane_key, np.uint64(t), 0)
        e_local = np.minimum((u * deg[vert]).astype(np.int64), deg[vert] - 1)
        eidx = table[vert, e_local]
        chart, coord = _apply_sampled_maps(g, eidx, lane_key, t, chart, coord, seed)
        vert = dst[eidx]
        diam = _probe_diameter(chart, coord)
        hit = diam >= theta
        if hit.any():
            marked[np.unique(cells_rep[hit])] = True
            keep = ~hit
            if not keep.any():
                return marked
            cells_rep, word_rep = cells_rep[keep], word_rep[keep]
            chart, coord, vert = chart[keep], coord[keep], vert[keep]
            lane_key = lane_key[keep]
    return marked


def _probe_diameter_nd(chart, coord):
    """Pairwise-max chordal diameter along the last axis (5 probes)."""
    best = np.zeros(chart.shape[:-1])
    for i, j in _PAIRS:
        d = chordal_dist_batch(chart[..., i], coord[..., i],
                               chart[..., j], coord[..., j])
        np.maximum(best, d, out=best)
    return best


def mark_cells_adversarial(g: Gdms, lattice: ChartLattice, cell_ids, vertex: int,
                           depth: int, theta: float, net_delta: float = 0.1,
                           ring_pitch: float = 0.05, objective: str = "auto"):
    """Deterministic greedy expansion probe.

    At each step every candidate generator of every outgoing edge is
    tried and the word continues with the best one.  A cell is marked
    only when its probes actually reach chordal diameter >= theta, so a
    mark is a sound non-equicontinuity witness regardless of how the
    word was chosen.

    Objectives: "escape" follows the probe with the largest plane
    modulus (for polynomial systems the boundary-parameter crawl that
    separates a cell straddling an invariant-set rim has near-zero
    immediate diameter gain, so diameter-greedy never finds it);
    "diameter" greedily grows the probe diameter (scattering systems).
    "auto" picks escape for all-polynomial systems.
    """
    if objective == "auto":
        objective = "escape" if g.all_polynomial() else "diameter"
    cell_ids = np.asarray(cell_ids, dtype=np.int64)
    if len(cell_ids) == 0:
        return np.zeros(0, dtype=bool)
    candidates = {}  # edge -> list of ("atom", f) | ("disk", kernel, params)
    for k, e in enumerate(g.edges):
        fam = e.family
        if fam.kind == "atoms":
            candidates[k] = [("atoms", [f for f, _ in fam.atoms])]
        else:
            if objective == "escape":
                # outward pushes come from the support boundary
                params = [complex(fam.center)]
            else:
                params = list(fam.net_params(net_delta))
            if fam.radius > 0:
                nring = max(6, int(math.ceil(2 * math.pi / ring_pitch)))
                ring = fam.center + fam.radius * np.exp(
                    2j * np.pi * np.arange(nring) / nring)
                params = params + list(ring)
            candidates[k] = [("disk", fam.kernel,
                              np.asarray(params, dtype=np.complex128))]

    half = lattice.cell / 2.0
    offsets = _probe_offsets(half)
    ch0, co0 = lattice.centers(cell_ids)
    chart = ch0[:, None] & np.ones(5, dtype=bool)[None, :]
    coord = co0[:, None] + offsets[None, :]
    vert = np.full(len(cell_ids), vertex, dtype=np.int64)
    marked = np.zeros(len(cell_ids), dtype=bool)
    alive = np.arange(len(cell_ids))
    best_ever = np.zeros(len(alive))
    stale = np.zeros(len(alive), dtype=np.int64)

    def scores(c2, z2):
        diam = _probe_diameter_nd(c2, z2)
        if objective == "diameter":
            return diam, diam
        with np.errstate(divide="ignore"):
            a = np.abs(z2)
            mag = np.where(c2, np.divide(1.0, a, where=a > 0,
                                         out=np.full_like(a, np.inf)), a)
        return mag.max(axis=-1), diam

    for _ in range(depth):
        best_s = np.full(len(alive), -1.0)
        best_d = np.zeros(len(alive))
        best_ch = np.empty_like(chart)
        best_co = np.empty_like(coord)
        best_v = np.empty_like(vert)
        for v in np.unique(vert):
            lanes = np.nonzero(vert == v)[0]
            ch_l, co_l = chart[lanes], coord[lanes]
            for k in g.out_edges[v]:
                for kind, *spec in candidates[k]:
                    if kind == "atoms":
                        for f in spec[0]:
                            c2, z2 = f.eval_batch(ch_l.ravel(), co_l.ravel())
                            c2 = c2.reshape(ch_l.shape)
                            z2 = z2.reshape(co_l.shape)
                            s, d = scores(c2, z2)
                            better = s > best_s[lanes]
                            if better.any():
                                idx = lanes[better]
                                best_s[idx] = s[better]
                                best_d[idx] = d[better]
                                best_ch[idx] = c2[better]
                                best_co[idx] = z2[better]
                                best_v[idx] = g.edges[k].dst
                    else:
                        kernel, params = spec
                        nc = len(params)
                        ch3 = np.broadcast_to(ch_l[:, None, :],
                                              (len(lanes), nc, 5))
                        co3 = np.broadcast_to(co_l[:, None, :],
                                              (len(lanes), nc, 5))
                        c3 = np.broadcast_to(params[None, :, None],
                                             (len(lanes), nc, 5))
                        c2, z2 = kernel.eval_batch(c3.ravel(), ch3.ravel(),
                                                   co3.ravel())
                        c2 = c2.reshape(len(lanes), nc, 5)
                        z2 = z2.reshape(len(lanes), nc, 5)
                        s, d = scores(c2, z2)  # (lanes, nc)
                        pick = s.argmax(axis=1)
                        rows = np.arange(len(lanes))
                        sbest = s[rows, pick]
                        better = sbest > best_s[lanes]
                        if better.any():
                            idx = lanes[better]
                            best_s[idx] = sbest[better]
                            best_d[idx] = d[rows, pick][better]
                            best_ch[idx] = c2[rows[better], pick[better]]
                            best_co[idx] = z2[rows[better], pick[better]]
                            best_v[idx] = g.edges[k].dst
        chart, coord, vert = best_ch, best_co, best_v
        hit = best_d >= theta
        # lanes whose objective has stopped improving while the diameter
        # stays small are contracting toward an attractor; crawling lanes
        # keep improving every step
        finite = np.isfinite(best_s)
        grew = finite & (best_s > best_ever * (1 + 1e-12) + 1e-15)
        stale = np.where(grew, 0, stale + 1)
        best_ever = np.where(finite, np.maximum(best_ever, best_s), best_ever)
        dead = (~hit) & (best_d < 0.25 * theta) & (stale >= 30)
        drop = hit | dead
        if drop.any():
            marked[alive[hit]] = True
            keep = ~drop
            if not keep.any():
                break
            alive = alive[keep]
            chart, coord, vert = chart[keep], coord[keep], vert[keep]
            best_ever, stale = best_ever[keep], stale[keep]
    return marked


def _is_deterministic(g: Gdms) -> bool:
    for i in range(g.m):
        if len(g.out_edges[i]) != 1:
            return False
    for e in g.edges:
        fam = e.family
        if fam.kind == "atoms":
            if len(fam.atoms) != 1:
                return False
        elif fam.radius > 0:
            return False
    return True


def julia_forward(g: Gdms, resolution: int, word_samples: int = 32, depth: int = 24,
                  theta: float = 0.5, seed: int = 0,
                  adversarial: bool = False) -> GridMask:
    """Forward non-equicontinuity grid test at every vertex.

    A cell is marked Julia when, for one of the sampled words from its
    vertex, the images of the cell's corner and center probes reach
    chordal diameter >= theta at some step.
    """
    if resolution < 64:
        raise ValueError("resolution >= 64 required")
    lat = ChartLattice(resolution)
    all_ids = lat.layer_ids(np.ones((2, lat.n, lat.n), dtype=bool))
    layers = np.zeros((g.m, 2, lat.n, lat.n), dtype=bool)
    for v in range(g.m):
        marked = mark_cells_random_words(g, lat, all_ids, v, word_samples, depth,
                                         theta, seed)
        if adversarial:
            rest = all_ids[~marked]
            adv = mark_cells_adversarial(g, lat, rest, v, depth, theta)
            full = marked.copy()
            full[~marked] = adv
            marked = full
        chart, ix, iy = lat.decode(all_ids[marked])
        layers[v, chart, ix, iy] = True
    return GridMask(lat, layers)


def repelling_fixed_seeds(g: Gdms, net_delta: float = 0.25,
                          threshold: float = 1.0 + 1e-9,
                          dedup: float = 1e-10, per_vertex_cap: int = 64):
    """Repelling fixed points of self-loop generators, as (point, vertex).

    These lie in the Julia set at their vertex (powers of the generator
    are admissible words along the self-loop).  Points closer than
    ``dedup`` (chordal) to an already-collected one are skipped."""
    from .sphere import chordal_dist

    out = []
    for v in range(g.m):
        found = 0
        for k in g.out_edges[v]:
            e = g.edges[k]
            if e.dst != v:
                continue
            for f in e.family.support_net(net_delta):
                for q, mult in f.fixed_points():
                    if mult <= threshold or found >= per_vertex_cap:
                        continue
                    if all(v2 != v or chordal_dist(q, q2) >= dedup
                           for q2, v2 in out):
                        out.append((q, v))
                        found += 1
    return out


def julia_backward(g: Gdms, n_points: int, seed: int, net_delta: float = 0.25,
                   start=None, burn: int = 100, lanes: int = 256):
    """Inverse-iteration point cloud, tagged by vertex.

    Walks reversed edges (uniform), net maps (uniform), random preimages;
    discards the first ``burn`` iterations.  Returns a list of
    (chart_array, coord_array) per vertex.
    """
    if start is None:
        seeds = repelling_fixed_seeds(g, net_delta)
        if not seeds:
            raise SeedFailureError("no repelling fixed point among self-loop "
                                   "net generators")
        start = seeds[0]
    q0, v0 = start
    nets = [e.family.support_net(net_delta) for e in g.edges]
    in_table_maxlen = max(len(x) for x in g.in_edges)
    in_table = np.zeros((g.m, in_table_maxlen), dtype=np.int64)
    in_deg = np.zeros(g.m, dtype=np.int64)
    for j in range(g.m):
        in_deg[j] = len(g.in_edges[j])
        in_table[j, : in_deg[j]] = g.in_edges[j]

    lanes = min(lanes, n_points)
    chart = np.full(lanes, q0.chart == Chart.INVERTED)
    coord = np.full(lanes, q0.coord, dtype=np.complex128)
    vert = np.full(lanes, v0, dtype=np.int64)
    lane_ids = np.arange(lanes, dtype=np.uint64)

    per_vertex = [[] for _ in range(g.m)]
    collected = 0
    t = 0
    while collected < n_points:
        u = _rng.uniform01(seed, _TAG_BACKWARD, lane_ids, np.uint64(t), 0)
        pick = np.minimum((u * in_deg[vert]).astype(np.int64), in_deg[vert] - 1)
        eidx = in_table[vert, pick]
        new_ch = np.empty_like(chart)
        new_co = np.empty_like(coord)
        for e in np.unique(eidx):
            sel = eidx == e
            net = nets[e]
            um = _rng.uniform01(seed, _TAG_BACKWARD, lane_ids[sel], np.uint64(t), 1)
            midx = np.minimum((um * len(net)).astype(np.int64), len(net) - 1)
            for mi in np.unique(midx):
                sub = np.nonzero(sel)[0][midx == mi]
                f = net[mi]
                rch, rco = f.preimage_roots_batch(chart[sub], coord[sub])
                ur = _rng.uniform01(seed, _TAG_BACKWARD, lane_ids[sub],
                                    np.uint64(t), 2)
                ridx = np.minimum((ur * f.degree).astype(np.int64), f.degree - 1)
                rows = np.arange(len(sub))
                new_ch[sub] = rch[rows, ridx]
                new_co[sub] = rco[rows, ridx]
            vert[sel] = g.edges[e].src
        chart, coord = new_ch, new_co
        t += 1
        if t > burn:
            take = min(lanes, n_points - collected)
            for j in range(g.m):
                mask = vert[:take] == j
                if mask.any():
                    per_vertex[j].append((chart[:take][mask].copy(),
                                          coord[:take][mask].copy()))
            collected += take
    out = []
    for j in range(g.m):
        if per_vertex[j]:
            chs = np.concatenate([c for c, _ in per_vertex[j]])
            cos = np.concatenate([z for _, z in per_vertex[j]])
        else:
            chs = np.zeros(0, dtype=bool)
            cos = np.zeros(0, dtype=np.complex128)
        out.append((chs, cos))
    return out


@dataclass
class KernelJuliaReport:
    empty: bool
    tested: int
    witnesses_found: int
    failing: list  # (vertex, SpherePoint)


def kernel_julia_empty(g: Gdms, mask: GridMask, word_budget: int = 64,
                       depth: int = 16, seed: int = 0, cloud=None,
                       net_delta: float = 0.25) -> KernelJuliaReport:
    """Check that every tested Julia point escapes to the Fatou grid under
    some sampled word.

    Test points are the Julia-marked cells' representatives: the backward
    cloud point inside the cell when one exists (these sit on the Julia
    set to root-finder accuracy), the cell center otherwise.  A witness
    for point (z, i) is a sampled word h with h(z) landing in an unmarked
    cell at the matching vertex.
    """
    lat = mask.lattice
    if cloud is None:
        try:
            cloud = julia_backward(g, 4096, seed ^ 0x9E, net_delta)
        except SeedFailureError:
            cloud = [(np.zeros(0, bool), np.zeros(0, np.complex128))
                     for _ in range(g.m)]

    reps_pt, reps_vx = [], []
    for v in range(g.m):
        ids = mask.ids(v)
        if len(ids) == 0:
            continue
        have = np.zeros(len(ids), dtype=bool)
        order = np.argsort(ids)
        ids_sorted = ids[order]
        cch, cco = cloud[v]
        if len(cco):
            cells_of_cloud = lat.cells_of_points(cch.astype(np.int64), cco)
            pos = np.searchsorted(ids_sorted, cells_of_cloud)
            pos = np.clip(pos, 0, len(ids_sorted) - 1)
            inside = ids_sorted[pos] == cells_of_cloud
            # first cloud point found per cell wins
            for k in np.nonzero(inside)[0]:
                row = order[pos[k]]
                if not have[row]:
                    have[row] = True
                    reps_pt.append((bool(cch[k]), complex(cco[k])))
                    reps_vx.append(v)
        centers_ch, centers_co = lat.centers(ids[~have])
        for cchv, ccov in zip(centers_ch, centers_co):
            reps_pt.append((bool(cchv), complex(ccov)))
            reps_vx.append(v)

    if not reps_pt:
        return KernelJuliaReport(True, 0, 0, [])

    chart0 = np.array([c for c, _ in reps_pt])
    coord0 = np.array([z for _, z in reps_pt], dtype=np.complex128)
    vert0 = np.array(reps_vx, dtype=np.int64)
    n = len(vert0)

    table, deg = _out_degree_tables(g)
    has_witness = np.zeros(n, dtype=bool)
    layers = mask.layers
    dst = np.array([e.dst for e in g.edges], dtype=np.int64)

    rep_ids = np.arange(n, dtype=np.uint64)
    for w in range(word_budget):
        pending = ~has_witness
        if not pending.any():
            break
        idxs = np.nonzero(pending)[0]
        chart = chart0[idxs].copy()
        coord = coord0[idxs].copy()
        vert = vert0[idxs].copy()
        key = _rng.mix64(_TAG_KERNEL, rep_ids[idxs], np.uint64(w))
        for t in range(depth):
            u = _rng.uniform01(seed, key, np.uint64(t), 0)
            e_local = np.minimum((u * deg[vert]).astype(np.int64), deg[vert] - 1)
            eidx = table[vert, e_local]
            chart_, coord_ = _apply_sampled_maps(
                g, eidx, key, t, chart[:, None], coord[:, None], seed)
            chart, coord = chart_[:, 0], coord_[:, 0]
            vert = dst[eidx]
            cells = lat.cells_of_points(chart.astype(np.int64), coord)
            cch, cix, ciy = lat.decode(cells)
            in_fatou = ~layers[vert, cch, cix, ciy]
            if in_fatou.any():
                has_witness[idxs[in_fatou]] = True
                keep = ~in_fatou
                if not keep.any():
                    break
                idxs = idxs[keep]
                chart, coord, vert, key = (chart[keep], coord[keep], vert[keep],
                                           key[keep])

    failing = [(int(vert0[k]),
                SpherePoint(Chart.INVERTED if chart0[k] else Chart.STANDARD,
                            complex(coord0[k])))
               for k in np.nonzero(~has_witness)[0]]
    return KernelJuliaReport(len(failing) == 0, n, int(has_witness.sum()), failing)


def sample_word(g: Gdms, length: int, seed: int, start_from_stationary=True):
    """One admissible word sampled from the chain (edges by weight)."""
    u0 = float(_rng.uniform01(seed, _TAG_XI, 0, 0))
    if start_from_stationary:
        i0 = int(np.searchsorted(np.cumsum(g.p), u0))
        i0 = min(i0, g.m - 1)
    else:
        i0 = 0
    ens = ChainEnsemble(g, [False], [0j], i0, seed ^ 0x5A5A, orbit_ids=[0])
    edges, maps = [], []
    for t in range(length):
        eidx, _, refs = ens.step(t, want_refs=True)
        e = int(eidx[0])
        edges.append(e)
        fam = g.edges[e].family
        if refs[0][0] == "atom":
            maps.append(fam.atoms[refs[0][1]][0])
        else:
            maps.append(fam.map_at(refs[0][1]))
    return i0, edges, maps


def sample_julia_area(g: Gdms, seed: int, resolution: int, depth: int,
                      theta: float = 0.5) -> float:
    """Spherical-area fraction where one fixed random word sequence fails
    the probe-diameter equicontinuity test."""
    lat = ChartLattice(resolution)
    _, _, maps = sample_word(g, depth, seed)
    all_ids = lat.layer_ids(np.ones((2, lat.n, lat.n), dtype=bool))
    half = lat.cell / 2.0
    offsets = _probe_offsets(half)
    ch0, co0 = lat.centers(all_ids)
    chart = ch0[:, None] & np.ones(5, dtype=bool)[None, :]
    coord = co0[:, None] + offsets[None, :]
    marked = np.zeros(len(all_ids), dtype=bool)
    alive = np.arange(len(all_ids))
    for f in maps:
        c2, z2 = f.eval_batch(chart.ravel(), coord.ravel())
        chart = c2.reshape(chart.shape)
        coord = z2.reshape(coord.shape)
        diam = _probe_diameter(chart, coord)
        hit = diam >= theta
        if hit.any():
            marked[alive[hit]] = True
            keep = ~hit
            if not keep.any():
                break
            alive = alive[keep]
            chart, coord = chart[keep], coord[keep]
    w = lat.area_weights()
    chs, ixs, iys = lat.decode(all_ids[marked])
    return float(w[chs, ixs, iys].sum() / w.sum())


def chaotic_check(g: Gdms, resolution: int = 128, seed: int = 0,
                  detect_kwargs=None) -> dict:
    """Chaotic iff the Julia mask covers (almost) everything at every
    vertex and minimal-set detection always returns a whole-sphere cover."""
    from .minimal import detect_minimal_sets

    mask = julia_forward(g, resolution, word_samples=16, depth=20, seed=seed)
    julia_fracs = [mask.fraction_marked(v) for v in range(g.m)]
    julia_ok = all(f >= 0.99 for f in julia_fracs)

    kw = dict(n_seeds=20, orbit_len=400, delta=0.05, seed=seed ^ 0xC0,
              net_delta=0.25)
    if detect_kwargs:
        kw.update(detect_kwargs)
    covers = detect_minimal_sets(g, **kw)
    w = None
    cover_fracs = []
    for cov in covers:
        lat = cov.lattice
        if w is None or w.shape[1] != lat.n:
            w = lat.area_weights()
        fr = []
        for v in range(g.m):
            ids = cov.cells[v]
            chs, ixs, iys = lat.decode(ids)
            fr.append(float(w[chs, ixs, iys].sum() / w.sum()))
        cover_fracs.append(fr)
    minimal_ok = (len(covers) > 0 and
                  all(min(fr) >= 0.99 for fr in cover_fracs))
    return {
        "chaotic": bool(julia_ok and minimal_ok),
        "julia_area_fractions": julia_fracs,
        "cover_area_fractions": cover_fracs,
        "n_covers": len(covers),
    }
