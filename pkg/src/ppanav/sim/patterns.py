"""Planar marker artwork in pattern coordinates.

Coordinates are metres on the pattern plane: ``u`` to the right as seen by a
viewer facing the pattern, ``v`` up, origin at the centre. Each pattern
reports its white board extent and an ``ink`` function marking black.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _square_ring(u, v, outer, inner):
    cheb = np.maximum(np.abs(u), np.abs(v))
    return (cheb <= outer) & (cheb > inner)


def _rect_ring(u, v, half_w, half_h, t):
    inside_outer = (np.abs(u) <= half_w) & (np.abs(v) <= half_h)
    inside_inner = (np.abs(u) < half_w - t) & (np.abs(v) < half_h - t)
    return inside_outer & ~inside_inner


def _disk(u, v, cu, cv, r):
    return (u - cu) ** 2 + (v - cv) ** 2 <= r * r


@dataclass(frozen=True)
class Break:
    """A white gap cut through both outlines.

    ``side`` is one of "left", "right", "top", "bottom"; ``offset`` is the
    gap centre along that side and ``width`` its extent, both in metres.
    """

    side: str
    offset: float
    width: float


@dataclass(frozen=True)
class GateMarker:
    """Four black disks inside two concentric black square outlines."""

    side: float = 0.46
    thickness: float = 0.025
    gap: float = 0.025
    disk_radius: float = 0.045
    disk_offset: float = 0.08
    margin: float = 0.02
    breaks: tuple = ()

    kind = "gate"

    @property
    def half_extent(self):
        h = self.side / 2 + self.margin
        return h, h

    def disk_centres(self):
        """Disk centres (u, v), ordered TL, TR, BL, BR as seen by the viewer."""
        a = self.disk_offset
        return [(-a, a), (a, a), (-a, -a), (a, -a)]

    def outline_bounds(self):
        h = self.side / 2
        t, g = self.thickness, self.gap
        return [(h, h - t), (h - t - g, h - 2 * t - g)]

    def ink(self, u, v):
        black = np.zeros(np.broadcast(u, v).shape, dtype=bool)
        for outer, inner in self.outline_bounds():
            black |= _square_ring(u, v, outer, inner)
        for b in self.breaks:
            black &= ~_break_region(u, v, b, self.side / 2, self.side / 2 - 2 * self.thickness - self.gap)
        for cu, cv in self.disk_centres():
            black |= _disk(u, v, cu, cv, self.disk_radius)
        return black

    def with_breaks(self, *breaks):
        return GateMarker(self.side, self.thickness, self.gap, self.disk_radius,
                          self.disk_offset, self.margin, tuple(breaks))


def _break_region(u, v, b, outer, inner):
    lo, hi = b.offset - b.width / 2, b.offset + b.width / 2
    pad = 1e-3
    if b.side in ("left", "right"):
        across = u if b.side == "right" else -u
        return (across >= inner - pad) & (across <= outer + pad) & (v >= lo) & (v <= hi)
    across = v if b.side == "top" else -v
    return (across >= inner - pad) & (across <= outer + pad) & (u >= lo) & (u <= hi)


# Free slots for the small disks of a slalom marker, filled in order.
_SLALOM_SLOTS = ((0.045, 0.0), (0.145, 0.0), (0.045, 0.1), (0.145, 0.1),
                 (0.045, -0.1), (0.145, -0.1))

SLALOM_STEP_DEG = 15.0


@dataclass(frozen=True)
class SlalomMarker:
    """Double outline around one large anchor disk and ``k`` small disks.

    The turn angle is ``k * 15`` degrees. The anchor sits on the side the
    rover should turn toward: anchor left of the small disks means Left.
    """

    direction: str = "left"
    k: int = 2
    width: float = 0.58
    height: float = 0.49
    thickness: float = 0.025
    gap: float = 0.025
    anchor_radius: float = 0.08
    anchor_u: float = -0.11
    small_radius: float = 0.04
    margin: float = 0.02

    kind = "slalom"

    def __post_init__(self):
        if self.direction not in ("left", "right"):
            raise ValueError(f"slalom direction must be left or right, not {self.direction!r}")
        if not 1 <= self.k <= 5:
            raise ValueError("slalom k must lie in 1..5")

    @property
    def angle_deg(self):
        return self.k * SLALOM_STEP_DEG

    @property
    def half_extent(self):
        return self.width / 2 + self.margin, self.height / 2 + self.margin

    @property
    def enclosed_height(self):
        """Height of the region inside the outer outline."""
        return self.height - 2 * self.thickness

    def _mirror(self):
        return 1.0 if self.direction == "left" else -1.0

    def anchor_centre(self):
        return (self._mirror() * self.anchor_u, 0.0)

    def small_centres(self):
        m = self._mirror()
        return [(m * u, v) for u, v in _SLALOM_SLOTS[:self.k]]

    def ink(self, u, v):
        hw, hh, t, g = self.width / 2, self.height / 2, self.thickness, self.gap
        black = _rect_ring(u, v, hw, hh, t) | _rect_ring(u, v, hw - t - g, hh - t - g, t)
        cu, cv = self.anchor_centre()
        black |= _disk(u, v, cu, cv, self.anchor_radius)
        for cu, cv in self.small_centres():
            black |= _disk(u, v, cu, cv, self.small_radius)
        return black


@dataclass(frozen=True)
class OutlineDecoy:
    """Gate-like clutter with a single outline; the disks are not enclosed twice."""

    side: float = 0.46
    thickness: float = 0.025
    disk_radius: float = 0.045
    disk_offset: float = 0.08
    margin: float = 0.02

    kind = "outline"

    @property
    def half_extent(self):
        h = self.side / 2 + self.margin
        return h, h

    def ink(self, u, v):
        h = self.side / 2
        black = _square_ring(u, v, h, h - self.thickness)
        a = self.disk_offset
        for cu, cv in ((-a, a), (a, a), (-a, -a), (a, -a)):
            black |= _disk(u, v, cu, cv, self.disk_radius)
        return black


@dataclass(frozen=True)
class BlobDecoy:
    """Seeded random black disks and bars on a white board."""

    seed: int = 0
    size: float = 0.46
    count: int = 7
    blobs: tuple = field(default=(), compare=False)

    kind = "random"

    def __post_init__(self):
        g = np.random.default_rng(self.seed)
        h = self.size / 2
        shapes = []
        for _ in range(self.count):
            cu, cv = g.uniform(-h * 0.8, h * 0.8, 2)
            if g.random() < 0.5:
                shapes.append(("disk", cu, cv, g.uniform(0.02, 0.06), 0.0))
            else:
                shapes.append(("bar", cu, cv, g.uniform(0.03, 0.12), g.uniform(0.01, 0.03)))
        object.__setattr__(self, "blobs", tuple(shapes))

    @property
    def half_extent(self):
        h = self.size / 2
        return h, h

    def ink(self, u, v):
        black = np.zeros(np.broadcast(u, v).shape, dtype=bool)
        for shape, cu, cv, a, b in self.blobs:
            if shape == "disk":
                black |= _disk(u, v, cu, cv, a)
            else:
                black |= (np.abs(u - cu) <= a) & (np.abs(v - cv) <= b)
        return black
