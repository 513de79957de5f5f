"""Two-chart cell lattices for set-valued computations.

Both charts carry the same square lattice over [-1.25, 1.25]^2, so every
sphere point is covered by at least one cell and points in the equatorial
overlap band (modulus in [0.8, 1.25]) appear in both charts.  Sets of
cells are kept consistent across charts: whenever cells touching the
overlap are marked, the corresponding cells of the other chart are marked
too (via the exact image of an enclosing disk under w -> 1/w).

Cells are addressed by flat int64 ids: id = (chart*n + ix)*n + iy.

Two marking modes are used deliberately:

* ``mark`` (cell center inside the region) for set-valued dynamics.  Its
  quantization error is two-sided (about half a cell), which keeps
  iterated covers from inflating each round; covered regions still lie
  within the marked cells dilated by two cells.
* ``cover`` (cell intersects the region) for containment certificates,
  where over-approximation is the sound direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

OVERLAP_INNER = 0.8  # |w| above which a point also lives in the other chart
SPAN = 1.25


class ChartLattice:
    def __init__(self, n: int):
        if n < 2:
            raise ValueError("lattice needs at least 2 cells per side")
        self.n = int(n)
        self.cell = 2.0 * SPAN / self.n
        self.origin = -SPAN

    @classmethod
    def with_pitch(cls, delta: float) -> "ChartLattice":
        return cls(int(math.ceil(2.0 * SPAN / delta)))

    @property
    def ncells(self) -> int:
        return 2 * self.n * self.n

    # -- id arithmetic -----------------------------------------------------

    def encode(self, chart, ix, iy):
        return (np.asarray(chart, dtype=np.int64) * self.n + ix) * self.n + iy

    def decode(self, ids):
        ids = np.asarray(ids, dtype=np.int64)
        iy = ids % self.n
        rest = ids // self.n
        ix = rest % self.n
        chart = rest // self.n
        return chart, ix, iy

    def centers(self, ids):
        chart, ix, iy = self.decode(ids)
        coord = (self.origin + (ix + 0.5) * self.cell) + 1j * (
            self.origin + (iy + 0.5) * self.cell
        )
        return chart.astype(bool), coord

    def cells_of_points(self, chart, coord):
        """Ids of the cells containing the given points (clipped to range)."""
        coord = np.asarray(coord, dtype=np.complex128)
        ix = np.clip(((coord.real - self.origin) / self.cell).astype(np.int64),
                     0, self.n - 1)
        iy = np.clip(((coord.imag - self.origin) / self.cell).astype(np.int64),
                     0, self.n - 1)
        return self.encode(np.asarray(chart, dtype=np.int64), ix, iy)

    # -- region marking ------------------------------------------------------

    def _range_ids(self, chart, x0, x1, y0, y1, mode):
        """Cells of one chart for the rectangle [x0,x1]x[y0,y1]."""
        if mode == "mark":  # cell centers inside the rectangle
            ix0 = int(math.ceil((x0 - self.origin) / self.cell - 0.5 - 1e-12))
            ix1 = int(math.floor((x1 - self.origin) / self.cell - 0.5 + 1e-12))
            iy0 = int(math.ceil((y0 - self.origin) / self.cell - 0.5 - 1e-12))
            iy1 = int(math.floor((y1 - self.origin) / self.cell - 0.5 + 1e-12))
            # never lose an in-range region entirely: fall back to the
            # cell containing its midpoint
            if ix1 < ix0:
                mid = int(((x0 + x1) / 2 - self.origin) / self.cell)
                if not 0 <= mid < self.n:
                    return np.zeros(0, dtype=np.int64)
                ix0 = ix1 = mid
            if iy1 < iy0:
                mid = int(((y0 + y1) / 2 - self.origin) / self.cell)
                if not 0 <= mid < self.n:
                    return np.zeros(0, dtype=np.int64)
                iy0 = iy1 = mid
        else:  # "cover": cell squares intersecting the rectangle
            ix0 = int(math.floor((x0 - self.origin) / self.cell - 1e-12))
            ix1 = int(math.floor((x1 - self.origin) / self.cell + 1e-12))
            iy0 = int(math.floor((y0 - self.origin) / self.cell - 1e-12))
            iy1 = int(math.floor((y1 - self.origin) / self.cell + 1e-12))
        ix0, ix1 = max(ix0, 0), min(ix1, self.n - 1)
        iy0, iy1 = max(iy0, 0), min(iy1, self.n - 1)
        if ix1 < ix0 or iy1 < iy0:
            return np.zeros(0, dtype=np.int64)
        ix = np.arange(ix0, ix1 + 1, dtype=np.int64)
        iy = np.arange(iy0, iy1 + 1, dtype=np.int64)
        gx, gy = np.meshgrid(ix, iy, indexing="ij")
        return self.encode(int(chart), gx.ravel(), gy.ravel())

    def _other_chart_ids(self, chart, cx, cy, half, mode):
        """Cells of the opposite chart shadowing the square, via inversion
        of its enclosing disk."""
        c = complex(cx, cy)
        r = half * math.sqrt(2.0)
        amax = abs(c) + r
        if amax < OVERLAP_INNER:
            return np.zeros(0, dtype=np.int64)
        other = 1 - int(chart)
        if abs(c) <= r:
            # 0 inside the disk: the inverse image is everything with
            # |u| >= 1/(|c|+r); mark that whole region of the other chart.
            ids = self._range_ids(other, -SPAN, SPAN, -SPAN, SPAN, mode)
            _, coords = self.centers(ids)
            keep = np.abs(coords) >= 1.0 / amax - self.cell
            return ids[keep]
        denom = abs(c) ** 2 - r * r
        m = complex(c.real, -c.imag) / denom  # conj(c) / (|c|^2 - r^2)
        rho = r / denom
        return self._range_ids(other, m.real - rho, m.real + rho,
                               m.imag - rho, m.imag + rho, mode)

    def square_ids(self, chart, center, half, mode="mark", cross=True):
        """All lattice cells (both charts) for one square region."""
        cx, cy = center.real, center.imag
        own = self._range_ids(int(chart), cx - half, cx + half, cy - half, cy + half,
                              mode)
        if not cross:
            return own
        other = self._other_chart_ids(int(chart), cx, cy, half, mode)
        if len(other) == 0:
            return own
        return np.concatenate([own, other])

    def _rect_cells_batched(self, rchart, rx0, rx1, ry0, ry1, rowner, mode):
        """Cells of axis rectangles (one chart each), as (ids, owners).

        Rectangles fully outside the lattice contribute nothing; in mark
        mode a rectangle thinner than one cell falls back to the cell
        containing its midpoint (when in range)."""
        if len(rx0) == 0:
            return (np.zeros(0, dtype=np.int64),) * 2
        o, c, n = self.origin, self.cell, self.n
        if mode == "mark":
            ix0 = np.ceil((rx0 - o) / c - 0.5 - 1e-12)
            ix1 = np.floor((rx1 - o) / c - 0.5 + 1e-12)
            iy0 = np.ceil((ry0 - o) / c - 0.5 - 1e-12)
            iy1 = np.floor((ry1 - o) / c - 0.5 + 1e-12)
            for lo, hi, a, b in ((ix0, ix1, rx0, rx1), (iy0, iy1, ry0, ry1)):
                thin = hi < lo
                if thin.any():
                    mid = np.floor(((a + b) / 2 - o) / c)
                    ok = thin & (mid >= 0) & (mid < n)
                    lo[ok] = mid[ok]
                    hi[ok] = mid[ok]
        else:
            ix0 = np.floor((rx0 - o) / c - 1e-12)
            ix1 = np.floor((rx1 - o) / c + 1e-12)
            iy0 = np.floor((ry0 - o) / c - 1e-12)
            iy1 = np.floor((ry1 - o) / c + 1e-12)
        # one-sided clips keep out-of-range rectangles empty
        ix0 = np.maximum(ix0, 0).astype(np.int64)
        iy0 = np.maximum(iy0, 0).astype(np.int64)
        ix1 = np.minimum(ix1, n - 1).astype(np.int64)
        iy1 = np.minimum(iy1, n - 1).astype(np.int64)
        keep = (ix1 >= ix0) & (iy1 >= iy0)
        if not keep.any():
            return (np.zeros(0, dtype=np.int64),) * 2
        ix0, ix1, iy0, iy1 = ix0[keep], ix1[keep], iy0[keep], iy1[keep]
        rchart, rowner = rchart[keep], rowner[keep]
        wx = ix1 - ix0 + 1
        wy = iy1 - iy0 + 1
        id_parts, owner_parts = [], []
        for w in np.unique(np.maximum(wx, wy)):
            b = np.nonzero(np.maximum(wx, wy) == w)[0]
            off = np.arange(w)
            gx = ix0[b][:, None, None] + off[None, :, None]
            gy = iy0[b][:, None, None] + off[None, None, :]
            valid = (gx <= ix1[b][:, None, None]) & (gy <= iy1[b][:, None, None])
            ids = self.encode(rchart[b][:, None, None], gx, gy)
            owner = np.broadcast_to(rowner[b][:, None, None], ids.shape)
            id_parts.append(ids[valid])
            owner_parts.append(owner[valid])
        return np.concatenate(id_parts), np.concatenate(owner_parts)

    def squares_ids_batched(self, chart, centers, halves, mode="mark"):
        """Cell ids for a batch of squares, CSR-style.

        Returns (flat_ids, offsets) with square k's cells (both charts) in
        flat_ids[offsets[k]:offsets[k+1]].  Own-chart rectangles and the
        inversion shadows of overlap-touching squares are both emitted
        through a vectorized rectangle rasterizer; only squares whose
        enclosing disk contains the origin (unbounded inversion image)
        fall back to the scalar routine.
        """
        chart = np.asarray(chart, dtype=np.int64).ravel()
        centers = np.asarray(centers, dtype=np.complex128).ravel()
        halves = np.broadcast_to(np.asarray(halves, dtype=float).ravel(),
                                 centers.shape).astype(float)
        k_total = len(centers)
        owners_all = np.arange(k_total, dtype=np.int64)
        r_enc = halves * math.sqrt(2.0)
        absc = np.abs(centers)
        crosses = absc + r_enc >= OVERLAP_INNER
        invertible = crosses & (absc > r_enc)
        weird = crosses & ~invertible

        id_parts, owner_parts = [], []
        ids, owners = self._rect_cells_batched(
            chart, centers.real - halves, centers.real + halves,
            centers.imag - halves, centers.imag + halves, owners_all, mode)
        id_parts.append(ids)
        owner_parts.append(owners)

        if invertible.any():
            b = np.nonzero(invertible)[0]
            denom = absc[b] ** 2 - r_enc[b] ** 2
            m = np.conj(centers[b]) / denom
            rho = r_enc[b] / denom
            ids, owners = self._rect_cells_batched(
                1 - chart[b], m.real - rho, m.real + rho,
                m.imag - rho, m.imag + rho, b, mode)
            id_parts.append(ids)
            owner_parts.append(owners)

        for k in np.nonzero(weird)[0]:
            ids = self._other_chart_ids(chart[k], centers[k].real,
                                        centers[k].imag, float(halves[k]), mode)
            id_parts.append(ids)
            owner_parts.append(np.full(len(ids), k, dtype=np.int64))

        flat = np.concatenate(id_parts)
        owners = np.concatenate(owner_parts)
        if len(flat):
            order = np.argsort(owners, kind="stable")
            flat = flat[order]
            owners = owners[order]
        counts = np.bincount(owners, minlength=k_total) if len(flat) else \
            np.zeros(k_total, dtype=np.int64)
        offsets = np.zeros(k_total + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        return flat, offsets

    def mark_squares(self, chart, centers, halves, mode="mark"):
        """Union of cell ids for a batch of squares."""
        flat, _ = self.squares_ids_batched(chart, centers, halves, mode)
        return np.unique(flat)

    # -- set utilities ---------------------------------------------------------

    def dilate(self, ids, k: int):
        """Chebyshev dilation by k cells within each chart (no cross-talk)."""
        if k <= 0 or len(ids) == 0:
            return np.asarray(ids, dtype=np.int64)
        chart, ix, iy = self.decode(ids)
        offs = np.arange(-k, k + 1)
        ox, oy = np.meshgrid(offs, offs, indexing="ij")
        nx = ix[:, None] + ox.ravel()[None, :]
        ny = iy[:, None] + oy.ravel()[None, :]
        keep = (nx >= 0) & (nx < self.n) & (ny >= 0) & (ny < self.n)
        ch = np.broadcast_to(chart[:, None], nx.shape)[keep]
        out = self.encode(ch, nx[keep], ny[keep])
        return np.unique(out)

    def to_layers(self, ids, m_layers=1, layer=0, out=None):
        """Scatter ids into boolean layers of shape (m_layers, 2, n, n)."""
        if out is None:
            out = np.zeros((m_layers, 2, self.n, self.n), dtype=bool)
        chart, ix, iy = self.decode(ids)
        out[layer, chart, ix, iy] = True
        return out

    def layer_ids(self, layer):
        """Inverse of to_layers for one (2, n, n) boolean array."""
        chart, ix, iy = np.nonzero(layer)
        return self.encode(chart.astype(np.int64), ix.astype(np.int64),
                           iy.astype(np.int64))

    # -- spherical geometry ------------------------------------------------------

    def area_weights(self, subsample: int = 3):
        """Spherical area of (cell intersect ownership region), shape (2, n, n).

        The standard chart owns |z| <= 1, the inverted chart |u| < 1, so
        the weights of both charts sum to the full sphere area 4*pi.
        Cells are subsampled ``subsample``^2 times for the boundary cut.
        """
        n, cell = self.n, self.cell
        t = (np.arange(n) + 0.5) * cell + self.origin
        sub = (np.arange(subsample) + 0.5) / subsample - 0.5
        xs = t[:, None] + sub[None, :] * cell  # (n, s)
        pts_x = xs[:, None, :, None]
        pts_y = xs[None, :, None, :]
        r2 = pts_x ** 2 + pts_y ** 2
        dens = 4.0 / (1.0 + r2) ** 2 * (cell / subsample) ** 2
        inside_std = r2 <= 1.0
        inside_inv = r2 < 1.0
        w_std = np.where(inside_std, dens, 0.0).sum(axis=(2, 3))
        w_inv = np.where(inside_inv, dens, 0.0).sum(axis=(2, 3))
        return np.stack([w_std, w_inv])

    def chordal_halfdistance(self, ids_a, ids_b):
        """Directed Hausdorff distance (chordal) from cells A to cells B,
        measured between cell centers."""
        from .sphere import chordal_dist_batch

        ca, za = self.centers(ids_a)
        cb, zb = self.centers(ids_b)
        best = np.full(len(ids_a), np.inf)
        chunk = 4096
        for s in range(0, len(ids_b), chunk):
            d = chordal_dist_batch(ca[:, None], za[:, None],
                                   cb[None, s:s + chunk], zb[None, s:s + chunk])
            best = np.minimum(best, d.min(axis=1))
        return float(best.max()) if len(best) else 0.0


@dataclass
class GridMask:
    """Per-vertex boolean layers on a shared lattice (True = marked)."""

    lattice: ChartLattice
    layers: np.ndarray  # (m, 2, n, n) bool

    @property
    def resolution(self) -> int:
        return self.lattice.n

    def ids(self, vertex: int):
        return self.lattice.layer_ids(self.layers[vertex])

    def fraction_marked(self, vertex: int, weights=None) -> float:
        w = self.lattice.area_weights() if weights is None else weights
        total = w.sum()
        return float((w * self.layers[vertex]).sum() / total)

    def dilated(self, k: int) -> "GridMask":
        out = np.zeros_like(self.layers)
        for v in range(self.layers.shape[0]):
            ids = self.lattice.dilate(self.ids(v), k)
            self.lattice.to_layers(ids, 1, 0, out[v : v + 1])
        return GridMask(self.lattice, out)

    def rle_json(self) -> dict:
        out = {"resolution": self.lattice.n, "vertices": self.layers.shape[0],
               "layers": []}
        for v in range(self.layers.shape[0]):
            entry = {}
            for ci, name in enumerate(("standard", "inverted")):
                flat = self.layers[v, ci].ravel()
                runs = []
                idx = np.nonzero(flat)[0]
                if len(idx):
                    breaks = np.nonzero(np.diff(idx) > 1)[0]
                    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
                    ends = np.concatenate([idx[breaks], [idx[-1]]])
                    for s, e in zip(starts, ends):
                        runs.extend([int(s), int(e - s + 1)])
                entry[name] = runs
            out["layers"].append(entry)
        return out

    @staticmethod
    def from_rle_json(doc) -> "GridMask":
        lat = ChartLattice(int(doc["resolution"]))
        m = int(doc["vertices"])
        layers = np.zeros((m, 2, lat.n, lat.n), dtype=bool)
        for v, entry in enumerate(doc["layers"]):
            for ci, name in enumerate(("standard", "inverted")):
                flat = layers[v, ci].ravel()
                runs = entry[name]
                for k in range(0, len(runs), 2):
                    flat[runs[k] : runs[k] + runs[k + 1]] = True
                layers[v, ci] = flat.reshape(lat.n, lat.n)
        return GridMask(lat, layers)


def write_pgm(path, data: np.ndarray, maxval: int = 255):
    """Binary PGM (P5) image; data is (rows, cols) in [0, maxval]."""
    arr = np.asarray(data)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8) * maxval
    arr = np.clip(arr, 0, maxval).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{arr.shape[1]} {arr.shape[0]}\n{maxval}\n".encode())
        fh.write(arr.tobytes())
