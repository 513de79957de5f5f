"""Rational maps of degree >= 2 on the sphere.

Coefficient vectors are ascending-degree.  Evaluation never forms the
quotient when it would overflow: numerator and denominator are evaluated
separately (in the reversed-coefficient form when the input sits in the
inverted chart) and the output chart is chosen by comparing their
moduli, so every intermediate stays bounded.

Compositions are never expanded symbolically; callers fold evaluations
and use the chain rule for derivative norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import InvalidMapError, NumericFailure
from .sphere import CHART_LIMIT, Chart, SpherePoint, chordal_dist

DEGREE_CAP = 16
_COPRIME_TOL = 1e-9


def _trim(coeffs):
    c = np.asarray(coeffs, dtype=np.complex128).ravel()
    nz = np.nonzero(c)[0]
    if len(nz) == 0:
        return np.zeros(0, dtype=np.complex128)
    return c[: nz[-1] + 1]


# ---------------------------------------------------------------------------
# Polynomial root finding: Aberth-Ehrlich simultaneous iteration with
# Cauchy-bound initialization, deflated-Newton fallback.
# ---------------------------------------------------------------------------


def _poly_eval_scale(a, z):
    """|a_0| + |a_1||z| + ... ; conditioning scale for |p(z)| tests."""
    s = np.zeros_like(np.abs(z))
    zp = np.ones_like(np.abs(z))
    for c in a:
        s = s + abs(c) * zp
        zp = zp * np.abs(z)
    return s


def aberth_roots(coeffs, maxiter=200, tol=5e-14):
    """All complex roots of the polynomial with ascending ``coeffs``.

    Raises :class:`NumericFailure` (carrying the best iterate) if the
    iteration and the Newton fallback both stall.
    """
    a = _trim(coeffs)
    if len(a) <= 1:
        return np.zeros(0, dtype=np.complex128)
    a = a / a[-1]
    n = len(a) - 1
    if n == 1:
        return np.array([-a[0]], dtype=np.complex128)
    da = npoly.polyder(a)

    cauchy = 1.0 + np.max(np.abs(a[:-1]))
    centroid = -a[-2] / n
    k = np.arange(n)
    # Perturbed circle: irrational angle step avoids symmetric stalls.
    ang = 2.0 * np.pi * (k + 0.35) / n + 0.5 / n
    z = centroid + (0.65 * cauchy) * np.exp(1j * ang) * (1.0 + 0.01 * ((k % 3) - 1))

    done = np.zeros(n, dtype=bool)
    for _ in range(maxiter):
        p = npoly.polyval(z, a)
        scale = _poly_eval_scale(a, z) + 1e-300
        done |= np.abs(p) <= tol * scale
        if done.all():
            return z
        pd = npoly.polyval(z, da)
        pd = np.where(pd == 0, 1e-300, pd)
        w = p / pd
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        s = np.sum(1.0 / diff, axis=1) - 1.0  # undo the diagonal fill
        denom = 1.0 - w * s
        denom = np.where(np.abs(denom) < 1e-30, 1e-30, denom)
        step = np.where(done, 0.0, w / denom)
        z = z - step
        # Clusters at multiple roots stall the relative-residual test
        # (residual and conditioning scale vanish together), so a tiny
        # correction also counts as converged.
        done |= np.abs(step) <= 1e-15 * (1.0 + np.abs(z))

    if done.all():
        return z
    # Fallback: deflated Newton from scattered starts.
    roots = _deflated_newton(a, maxiter)
    if roots is None:
        raise NumericFailure("root finder did not converge", partial=z)
    return roots


def _deflated_newton(a, maxiter):
    work = a.copy()
    roots = []
    while len(work) > 2:
        n = len(work) - 1
        dwork = npoly.polyder(work)
        root = None
        for attempt in range(8):
            z = (1.0 + np.max(np.abs(work[:-1] / work[-1]))) * np.exp(
                2j * np.pi * (attempt * 0.381966)
            ) * (0.3 + 0.15 * attempt)
            for _ in range(maxiter):
                p = npoly.polyval(z, work)
                if abs(p) <= 1e-13 * (_poly_eval_scale(work, np.asarray(z)) + 1e-300):
                    root = z
                    break
                pd = npoly.polyval(z, dwork)
                if pd == 0:
                    z += 1e-3 * (1 + 1j)
                    continue
                z = z - p / pd
            if root is not None:
                break
        if root is None:
            return None
        roots.append(root)
        # Synthetic division by (z - root).
        new = np.zeros(n, dtype=np.complex128)
        carry = work[-1]
        for i in range(n - 1, -1, -1):
            new[i] = carry
            carry = work[i] + carry * root
        work = new
    if len(work) == 2:
        roots.append(-work[0] / work[1])
    return np.asarray(roots, dtype=np.complex128)


def aberth_roots_batch(coeffs, maxiter=80, tol=1e-12):
    """Roots for a batch of same-degree polynomials, shape (m, n+1) -> (m, n).

    Lanes that fail to converge are re-solved one by one with the scalar
    routine.  Leading coefficients must be bounded away from zero.
    """
    c = np.asarray(coeffs, dtype=np.complex128)
    m, w = c.shape
    n = w - 1
    a = c / c[:, -1:]
    da = np.arange(1, n + 1)[None, :] * a[:, 1:]

    cauchy = 1.0 + np.max(np.abs(a[:, :-1]), axis=1)
    centroid = -a[:, -2] / n
    k = np.arange(n)
    ang = 2.0 * np.pi * (k + 0.35) / n + 0.5 / n
    z = centroid[:, None] + (0.65 * cauchy)[:, None] * np.exp(1j * ang)[None, :]

    powers = np.arange(w)
    done = np.zeros(z.shape, dtype=bool)
    for _ in range(maxiter):
        zp = z[:, :, None] ** powers[None, None, :]
        p = np.sum(a[:, None, :] * zp, axis=2)
        scale = np.sum(np.abs(a)[:, None, :] * np.abs(zp), axis=2) + 1e-300
        done |= np.abs(p) <= tol * scale
        if done.all():
            return z
        pd = np.sum(da[:, None, :] * zp[:, :, :n], axis=2)
        pd = np.where(pd == 0, 1e-300, pd)
        wq = p / pd
        diff = z[:, :, None] - z[:, None, :]
        idx = np.arange(n)
        diff[:, idx, idx] = 1.0
        s = np.sum(1.0 / diff, axis=2) - 1.0
        denom = 1.0 - wq * s
        denom = np.where(np.abs(denom) < 1e-30, 1e-30, denom)
        step = np.where(done, 0.0, wq / denom)
        z = z - step
        done |= np.abs(step) <= 1e-14 * (1.0 + np.abs(z))

    bad = ~done.all(axis=1)
    for i in np.nonzero(bad)[0]:
        z[i] = aberth_roots(c[i], tol=tol)
    return z


# ---------------------------------------------------------------------------
# Rational maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    """Axis-aligned square in one chart: |Re(z-c)|, |Im(z-c)| <= half_width."""

    chart: Chart
    center: complex
    half_width: float

    @property
    def in_chart_region(self) -> bool:
        return abs(self.center) + self.half_width <= 1.5

    def corners(self):
        h = self.half_width
        c = self.center
        return [c + h * (1 + 1j), c + h * (1 - 1j), c + h * (-1 + 1j), c + h * (-1 - 1j)]


class RationalMap:
    """Quotient of coprime polynomials, degree 2..16.

    ``den=[1]`` gives a polynomial map.  Maps are immutable after
    construction and safe to share across threads.
    """

    def __init__(self, num, den=(1.0,)):
        num = _trim(num)
        den = _trim(den)
        if len(num) == 0 or len(den) == 0:
            raise InvalidMapError("zero numerator or denominator")
        d = max(len(num), len(den)) - 1
        if d < 2:
            raise InvalidMapError(f"degree {d} < 2")
        if d > DEGREE_CAP:
            raise InvalidMapError(f"degree {d} exceeds cap {DEGREE_CAP}")
        self.num = num
        self.den = den
        self.degree = d
        self._check_coprime()

        pad = np.zeros(d + 1, dtype=np.complex128)
        pad[: len(num)] = num
        self._num_pad = pad
        pad = np.zeros(d + 1, dtype=np.complex128)
        pad[: len(den)] = den
        self._den_pad = pad
        self._num_rev = self._num_pad[::-1].copy()
        self._den_rev = self._den_pad[::-1].copy()
        self._dnum = npoly.polyder(self._num_pad)
        self._dden = npoly.polyder(self._den_pad)
        self._dnum_rev = npoly.polyder(self._num_rev)
        self._dden_rev = npoly.polyder(self._den_rev)

    def _check_coprime(self):
        if len(self.den) == 1:
            if self.den[0] == 0:
                raise InvalidMapError("zero denominator")
            return
        rn = aberth_roots(self.num)
        rd = aberth_roots(self.den)
        if len(rn) and len(rd):
            dist = np.abs(rn[:, None] - rd[None, :])
            if dist.min() < _COPRIME_TOL:
                raise InvalidMapError(
                    f"numerator and denominator share a root within {_COPRIME_TOL}"
                )

    @property
    def is_polynomial(self) -> bool:
        return len(self.den) == 1

    # -- evaluation --------------------------------------------------------

    def _nd(self, chart, coord):
        """Numerator/denominator values in the appropriate chart form."""
        chart = np.asarray(chart, dtype=bool)
        coord = np.asarray(coord, dtype=np.complex128)
        n_val = np.empty_like(coord)
        d_val = np.empty_like(coord)
        std = ~chart
        if std.any():
            z = coord[std]
            n_val[std] = npoly.polyval(z, self._num_pad)
            d_val[std] = npoly.polyval(z, self._den_pad)
        if chart.any():
            u = coord[chart]
            n_val[chart] = npoly.polyval(u, self._num_rev)
            d_val[chart] = npoly.polyval(u, self._den_rev)
        return n_val, d_val

    def eval_batch(self, chart, coord):
        """Vectorized image; returns normalized (chart, coord) arrays."""
        chart = np.atleast_1d(np.asarray(chart, dtype=bool))
        coord = np.atleast_1d(np.asarray(coord, dtype=np.complex128))
        n_val, d_val = self._nd(chart, coord)
        an, ad = np.abs(n_val), np.abs(d_val)
        both_zero = (an == 0) & (ad == 0)
        if both_zero.any():
            raise InvalidMapError("0/0 after common-root elimination")
        inv = an > ad
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(inv, d_val / np.where(inv, n_val, 1.0),
                           n_val / np.where(inv, 1.0, d_val))
        return inv, out

    def eval(self, p: SpherePoint) -> SpherePoint:
        ch, co = self.eval_batch([p.chart == Chart.INVERTED], [p.coord])
        return SpherePoint(Chart.INVERTED if ch[0] else Chart.STANDARD, complex(co[0]))

    def deriv_norm_batch(self, chart, coord):
        """Norm of the differential w.r.t. the spherical metric."""
        chart = np.atleast_1d(np.asarray(chart, dtype=bool))
        coord = np.atleast_1d(np.asarray(coord, dtype=np.complex128))
        w_val = np.empty_like(coord)
        n_val, d_val = self._nd(chart, coord)
        std = ~chart
        if std.any():
            z = coord[std]
            w_val[std] = npoly.polyval(z, self._dnum) * d_val[std] - n_val[std] * npoly.polyval(z, self._dden)
        if chart.any():
            u = coord[chart]
            w_val[chart] = npoly.polyval(u, self._dnum_rev) * d_val[chart] - n_val[chart] * npoly.polyval(u, self._dden_rev)
        denom = np.abs(n_val) ** 2 + np.abs(d_val) ** 2
        return np.abs(w_val) * (1.0 + np.abs(coord) ** 2) / denom

    def deriv_norm(self, p: SpherePoint) -> float:
        return float(self.deriv_norm_batch([p.chart == Chart.INVERTED], [p.coord])[0])

    # -- preimages ----------------------------------------------------------

    def _preimage_poly(self, w: SpherePoint):
        if w.chart == Chart.STANDARD:
            return self._num_pad - w.coord * self._den_pad
        return w.coord * self._num_pad - self._den_pad

    def preimages(self, w: SpherePoint, residual_tol=1e-8):
        """All solutions of f(z) = w as (point, multiplicity) pairs.

        Multiplicities sum to the degree; roots clustered within 1e-6
        (chordal) are merged.  Raises :class:`NumericFailure` with the
        partial list if residuals cannot be brought under ``residual_tol``.
        """
        p = self._preimage_poly(w)
        scale = np.max(np.abs(p))
        if scale == 0:
            raise InvalidMapError("degenerate preimage equation")
        trimmed = p.copy()
        keep = np.nonzero(np.abs(trimmed) > 1e-12 * scale)[0]
        m_inf = 0
        if len(keep) == 0:
            raise InvalidMapError("degenerate preimage equation")
        top = keep[-1]
        m_inf = self.degree - top
        trimmed = trimmed[: top + 1]

        finite = aberth_roots(trimmed) if len(trimmed) > 1 else np.zeros(0, np.complex128)
        pts = [SpherePoint.from_complex(z) for z in finite]
        if m_inf > 0:
            pts.extend([SpherePoint.infinity()] * m_inf)

        bad = [q for q in pts if chordal_dist(self.eval(q), w) > residual_tol]
        if bad:
            raise NumericFailure(
                f"{len(bad)} preimages exceed residual {residual_tol}",
                partial=[(q, 1) for q in pts],
            )

        # Cluster for multiplicities.
        out = []
        used = [False] * len(pts)
        for i, q in enumerate(pts):
            if used[i]:
                continue
            mult = 1
            used[i] = True
            for j in range(i + 1, len(pts)):
                if not used[j] and chordal_dist(q, pts[j]) <= 1e-6:
                    used[j] = True
                    mult += 1
            out.append((q, mult))
        return out

    def preimage_roots_batch(self, chart, coord):
        """Preimage root arrays for a batch of targets, shape (m, degree).

        Intended for inverse-iteration sampling: multiple roots appear as
        repeated entries, so a uniform pick over columns is a
        multiplicity-weighted pick.  Targets whose preimage polynomial
        drops degree (preimages at infinity) fall back to the scalar path
        and encode infinity as an inverted-chart zero.
        """
        chart = np.asarray(chart, dtype=bool)
        coord = np.asarray(coord, dtype=np.complex128)
        m = len(coord)
        wq = coord.copy()
        polys = np.where(chart[:, None],
                         wq[:, None] * self._num_pad[None, :] - self._den_pad[None, :],
                         self._num_pad[None, :] - wq[:, None] * self._den_pad[None, :])
        scale = np.max(np.abs(polys), axis=1)
        good = np.abs(polys[:, -1]) > 1e-10 * scale
        roots_chart = np.zeros((m, self.degree), dtype=bool)
        roots_coord = np.zeros((m, self.degree), dtype=np.complex128)
        if good.any():
            rr = aberth_roots_batch(polys[good])
            big = np.abs(rr) > CHART_LIMIT
            with np.errstate(divide="ignore"):
                rc = np.where(big, 1.0 / rr, rr)
            roots_chart[good] = big
            roots_coord[good] = rc
        for i in np.nonzero(~good)[0]:
            target = SpherePoint(Chart(int(chart[i])), complex(coord[i]))
            pairs = self.preimages(target)
            flat = []
            for q, mult in pairs:
                flat.extend([q] * mult)
            roots_chart[i] = [q.chart == Chart.INVERTED for q in flat]
            roots_coord[i] = [q.coord for q in flat]
        return roots_chart, roots_coord

    # -- box estimates -------------------------------------------------------

    def lipschitz_bound(self, box: Box, samples=5, safety=1.2) -> float:
        """Sampled upper estimate of sup of the derivative norm on the box.

        Max over a ``samples`` x ``samples`` grid, inflated by ``safety``.
        Not rigorous; adequate for reproducible numerical certificates.
        """
        if not box.in_chart_region:
            raise InvalidMapError("box outside chart region")
        off = np.linspace(-box.half_width, box.half_width, samples)
        gx, gy = np.meshgrid(off, off)
        pts = box.center + gx.ravel() + 1j * gy.ravel()
        ch = np.full(pts.shape, box.chart == Chart.INVERTED, dtype=bool)
        return float(self.deriv_norm_batch(ch, pts).max()) * safety

    def image_enclosure(self, box: Box) -> Box:
        """Box around the image of ``box``'s center that encloses the image
        of the whole box under the sampled Lipschitz estimate."""
        bound = self.lipschitz_bound(box)
        center = self.eval(SpherePoint(box.chart, box.center))
        half = bound * box.half_width * math.sqrt(2.0)
        return Box(center.chart, center.coord, half)

    # -- misc ----------------------------------------------------------------

    def fixed_points(self):
        """Finite-chart fixed points with spherical multiplier norms.

        Returns a list of (SpherePoint, deriv_norm).  The fixed point at
        infinity (for polynomials) is included.
        """
        eqn = np.zeros(self.degree + 2, dtype=np.complex128)
        eqn[: self.degree + 1] = self._num_pad
        eqn[1:] -= self._den_pad  # num(z) - z*den(z) = 0
        out = []
        if np.max(np.abs(eqn)) > 0:
            for z in aberth_roots(eqn):
                q = SpherePoint.from_complex(z)
                out.append((q, self.deriv_norm(q)))
        if self.is_polynomial:
            q = SpherePoint.infinity()
            out.append((q, self.deriv_norm(q)))
        return out

    def __repr__(self):
        return f"RationalMap(num={list(self.num)}, den={list(self.den)})"


class CoeffDiskKernel:
    """Vectorized evaluation of a one-parameter coefficient family.

    The family replaces numerator coefficient ``k`` of a base map by a
    per-lane complex parameter c; everything else is shared.  Evaluation
    and derivative norms are linear in c, so the component polynomials
    are precomputed once.
    """

    def __init__(self, base: RationalMap, k: int):
        d = base.degree
        if not 0 <= k <= d:
            raise InvalidMapError(f"coefficient index {k} out of range 0..{d}")
        self.base = base
        self.k = k
        num0 = base._num_pad.copy()
        num0[k] = 0
        self._num0 = num0
        self._num0_rev = num0[::-1].copy()
        self._dnum0 = npoly.polyder(num0)
        self._dnum0_rev = npoly.polyder(self._num0_rev)
        self._den = base._den_pad
        self._den_rev = base._den_rev
        self._dden = base._dden
        self._dden_rev = base._dden_rev
        self._k_rev = d - k

    def _pieces(self, chart, coord):
        chart = np.asarray(chart, dtype=bool)
        coord = np.asarray(coord, dtype=np.complex128)
        n0 = np.empty_like(coord)
        dn0 = np.empty_like(coord)
        dv = np.empty_like(coord)
        ddv = np.empty_like(coord)
        zk = np.empty_like(coord)
        dzk = np.empty_like(coord)
        std = ~chart
        if std.any():
            z = coord[std]
            n0[std] = npoly.polyval(z, self._num0)
            dn0[std] = npoly.polyval(z, self._dnum0)
            dv[std] = npoly.polyval(z, self._den)
            ddv[std] = npoly.polyval(z, self._dden)
            k = self.k
            zk[std] = z ** k
            dzk[std] = k * z ** (k - 1) if k >= 1 else 0.0
        if chart.any():
            u = coord[chart]
            n0[chart] = npoly.polyval(u, self._num0_rev)
            dn0[chart] = npoly.polyval(u, self._dnum0_rev)
            dv[chart] = npoly.polyval(u, self._den_rev)
            ddv[chart] = npoly.polyval(u, self._dden_rev)
            kr = self._k_rev
            zk[chart] = u ** kr
            dzk[chart] = kr * u ** (kr - 1) if kr >= 1 else 0.0
        return n0, dn0, dv, ddv, zk, dzk

    def eval_batch(self, c, chart, coord):
        c = np.asarray(c, dtype=np.complex128)
        n0, _, dv, _, zk, _ = self._pieces(chart, coord)
        n_val = n0 + c * zk
        an, ad = np.abs(n_val), np.abs(dv)
        inv = an > ad
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(inv, dv / np.where(inv, n_val, 1.0),
                           n_val / np.where(inv, 1.0, dv))
        return inv, out

    def deriv_norm_batch(self, c, chart, coord):
        c = np.asarray(c, dtype=np.complex128)
        n0, dn0, dv, ddv, zk, dzk = self._pieces(chart, coord)
        n_val = n0 + c * zk
        dn_val = dn0 + c * dzk
        w_val = dn_val * dv - n_val * ddv
        denom = np.abs(n_val) ** 2 + np.abs(dv) ** 2
        coord = np.asarray(coord, dtype=np.complex128)
        return np.abs(w_val) * (1.0 + np.abs(coord) ** 2) / denom


def fold_eval(maps, p: SpherePoint) -> SpherePoint:
    """Evaluate the composition maps[-1] o ... o maps[0] at ``p``."""
    for f in maps:
        p = f.eval(p)
    return p


def fold_deriv_norm(maps, p: SpherePoint) -> float:
    """Spherical derivative norm of the composition via the chain rule."""
    acc = 1.0
    for f in maps:
        acc *= f.deriv_norm(p)
        p = f.eval(p)
    return acc
