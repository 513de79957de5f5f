"""Counter-based random numbers.

Every draw is a pure function of a tuple of 64-bit words (seed plus
whatever indices identify the draw: orbit number, step number, draw slot,
retry counter).  There is no sequential state, so ensembles can be
evaluated in any order, in parallel, or re-evaluated piecewise and always
produce bit-identical results.

The mixer is the splitmix64 finalizer applied to a running combination of
the key words; it passes the usual avalanche checks and is far cheaper
than a full Philox round while remaining adequate for Monte Carlo use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_FIFTYTHREE = np.float64(1.0 / (1 << 53))


def _mix(h):
    h = (h ^ (h >> np.uint64(30))) * _M1
    h = (h ^ (h >> np.uint64(27))) * _M2
    return h ^ (h >> np.uint64(31))


_MASK64 = (1 << 64) - 1


def mix64(*words):
    """Hash the given words (ints or uint64 arrays, broadcast together)."""
    with np.errstate(over="ignore"):
        h = np.uint64(0)
        for w in words:
            if isinstance(w, (int, np.integer)):
                w = np.uint64(int(w) & _MASK64)
            else:
                w = np.asarray(w).astype(np.uint64, copy=False)
            h = _mix((h + _GAMMA) ^ (w * _M2 + _GAMMA))
        return _mix(h + _GAMMA)


def uniform01(*words):
    """Uniform doubles in [0, 1), one per broadcast element of ``words``."""
    return (mix64(*words) >> np.uint64(11)).astype(np.float64) * _FIFTYTHREE


def uniform_disk(center, radius, *words, max_tries=64):
    """Uniform points on the closed disk ``|c - center| <= radius``.

    Rejection sampling on the bounding square; the expected number of
    tries per point is 4/pi.  The try counter is part of the key, so the
    result is independent of evaluation order.
    """
    shape = np.broadcast_shapes(*(np.shape(w) for w in words)) if words else ()
    out = np.full(shape, center, dtype=np.complex128)
    if radius == 0:
        return out
    pending = np.ones(shape, dtype=bool)
    for t in range(max_tries):
        if not pending.any():
            break
        x = uniform01(*words, np.uint64(2 * t))
        y = uniform01(*words, np.uint64(2 * t + 1))
        c = (2.0 * x - 1.0) + 1j * (2.0 * y - 1.0)
        ok = pending & (np.abs(c) <= 1.0)
        out = np.where(ok, center + radius * c, out)
        pending &= ~ok
    # max_tries failures have probability (1 - pi/4)^64 ~ 1e-43; fall back
    # to the disk center rather than loop forever.
    return out


@dataclass(frozen=True)
class RngState:
    """Explicit, splittable stream position for scalar sampling APIs.

    ``key`` identifies the stream (seed, orbit index, step index, ...);
    ``counter`` advances with every draw taken from it.
    """

    key: tuple
    counter: int = 0

    def draw(self):
        u = float(uniform01(*self.key, np.uint64(self.counter)))
        return u, RngState(self.key, self.counter + 1)

    def draw_disk(self, center, radius):
        c = complex(uniform_disk(center, radius, *self.key, np.uint64(self.counter)))
        return c, RngState(self.key, self.counter + 1)

    def split(self, *extra):
        return RngState(self.key + tuple(int(e) for e in extra))
