"""Software model of a 256x256 pixel processor array.

Every pixel holds a few grey (analogue) and binary (digital) registers and
all pixels execute the same instruction. Here a grey register is a
:class:`GreyImage` and a binary register a :class:`BitImage`; every
operation is a whole-plane function returning a fresh image.

Binary planes are bit-packed, 64 columns per ``uint64`` word, so row logic
runs a word at a time. 256 columns fill exactly four words: packed storage
carries no padding bits.

Connectivity is 4-neighbour (north, south, east, west) everywhere.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import _kernels as K

SIZE = K.SIZE
WORDS = K.WORDS

# Register file of one processing element.
GREY_REGISTERS = 7
BIT_REGISTERS = 13

NORTH, SOUTH, EAST, WEST = "north", "south", "east", "west"
_DIRS = {EAST: K.EAST, WEST: K.WEST, SOUTH: K.SOUTH, NORTH: K.NORTH}


class _Registers:
    """Counts planes alive at once, the emulator's stand-in for register use."""

    def __init__(self):
        self._lock = threading.Lock()
        self.live = {"bit": 0, "grey": 0}
        self.peak = {"bit": 0, "grey": 0}

    def acquire(self, kind):
        with self._lock:
            self.live[kind] += 1
            if self.live[kind] > self.peak[kind]:
                self.peak[kind] = self.live[kind]

    def release(self, kind):
        with self._lock:
            self.live[kind] -= 1

    def reset_peak(self):
        with self._lock:
            self.peak = dict(self.live)


registers = _Registers()


class register_budget:
    """Context manager reporting the peak number of planes alive inside it.

    Planes that already existed on entry are not charged to the block::

        with register_budget() as budget:
            detect_disks(frame, cfg, tracker)
        assert budget.bit <= BIT_REGISTERS
    """

    def __enter__(self):
        self._base = dict(registers.live)
        registers.reset_peak()
        self.bit = self.grey = 0
        return self

    def __exit__(self, *exc):
        self.bit = registers.peak["bit"] - self._base["bit"]
        self.grey = registers.peak["grey"] - self._base["grey"]
        return False


class PixelCoord(NamedTuple):
    row: int
    col: int


@dataclass(frozen=True)
class BoundingBox:
    min: PixelCoord
    max: PixelCoord

    @property
    def centre(self) -> PixelCoord:
        return PixelCoord((self.min.row + self.max.row) // 2,
                          (self.min.col + self.max.col) // 2)

    @property
    def height(self) -> int:
        return self.max.row - self.min.row + 1

    @property
    def width(self) -> int:
        return self.max.col - self.min.col + 1


class Border:
    """Seed every pixel on the edge of the array."""

    def __repr__(self):
        return "Border()"


@dataclass(frozen=True)
class Points:
    """Seed the listed pixels."""

    coords: tuple

    def __init__(self, coords: Iterable[Sequence[int]]):
        coords = tuple(PixelCoord(int(r), int(c)) for r, c in coords)
        if not coords:
            raise ValueError("Points seed list must not be empty")
        object.__setattr__(self, "coords", coords)


BORDER = Border()


def _readonly(a):
    a.flags.writeable = False
    return a


class BitImage:
    """A binary register plane, bit-packed as (256, 4) uint64 words."""

    __slots__ = ("words", "__weakref__")

    def __init__(self, words: np.ndarray):
        assert words.shape == (SIZE, WORDS) and words.dtype == np.uint64
        self.words = _readonly(words)
        registers.acquire("bit")

    def __del__(self):
        registers.release("bit")

    @classmethod
    def zeros(cls) -> "BitImage":
        return cls(np.zeros((SIZE, WORDS), dtype=np.uint64))

    @classmethod
    def ones(cls) -> "BitImage":
        return cls(np.full((SIZE, WORDS), np.uint64(0xFFFFFFFFFFFFFFFF)))

    @classmethod
    def from_array(cls, bits) -> "BitImage":
        bits = np.asarray(bits, dtype=bool)
        if bits.shape != (SIZE, SIZE):
            raise ValueError(f"expected a {SIZE}x{SIZE} array, got {bits.shape}")
        packed = np.packbits(bits, axis=1, bitorder="little")
        return cls(packed.view("<u8").astype(np.uint64))

    def to_array(self) -> np.ndarray:
        raw = np.ascontiguousarray(self.words.astype("<u8")).view(np.uint8)
        return np.unpackbits(raw, axis=1, bitorder="little").astype(bool)

    def count(self) -> int:
        return K.popcount(self.words)

    def __getitem__(self, rc) -> bool:
        r, c = rc
        return bool((int(self.words[r, c // 64]) >> (c % 64)) & 1)

    def __eq__(self, other):
        if not isinstance(other, BitImage):
            return NotImplemented
        return np.array_equal(self.words, other.words)

    __hash__ = None

    def __invert__(self):
        return bit_not(self)

    def __and__(self, other):
        return bit_and(self, other)

    def __or__(self, other):
        return bit_or(self, other)

    def __xor__(self, other):
        return bit_xor(self, other)

    def __repr__(self):
        return f"BitImage(set={self.count()})"


class GreyImage:
    """An analogue register plane: 256x256 intensities in [0, 255]."""

    __slots__ = ("pixels", "__weakref__")

    def __init__(self, pixels):
        pixels = np.asarray(pixels)
        if pixels.shape != (SIZE, SIZE):
            raise ValueError(f"expected a {SIZE}x{SIZE} array, got {pixels.shape}")
        if pixels.dtype != np.uint8:
            if pixels.size and (pixels.min() < 0 or pixels.max() > 255):
                raise ValueError("grey levels must lie in [0, 255]")
            pixels = pixels.astype(np.uint8)
        else:
            pixels = pixels.copy()
        self.pixels = _readonly(pixels)
        registers.acquire("grey")

    def __del__(self):
        registers.release("grey")

    @classmethod
    def filled(cls, level: int) -> "GreyImage":
        return cls(np.full((SIZE, SIZE), level, dtype=np.uint8))

    def __eq__(self, other):
        if not isinstance(other, GreyImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None

    def __repr__(self):
        return f"GreyImage(mean={self.pixels.mean():.1f})"


def threshold(img: GreyImage, level: int) -> BitImage:
    """White (1) wherever the grey level reaches ``level``."""
    if not 0 <= level <= 255:
        raise ValueError(f"threshold level {level} outside [0, 255]")
    return BitImage.from_array(img.pixels >= level)


def bit_not(a: BitImage) -> BitImage:
    return BitImage(~a.words)


def bit_and(a: BitImage, b: BitImage) -> BitImage:
    return BitImage(a.words & b.words)


def bit_or(a: BitImage, b: BitImage) -> BitImage:
    return BitImage(a.words | b.words)


def bit_xor(a: BitImage, b: BitImage) -> BitImage:
    return BitImage(a.words ^ b.words)


def shift(img: BitImage, direction: str, steps: int) -> BitImage:
    """Translate the plane; north is toward row 0. Vacated pixels read 0."""
    if steps < 0:
        raise ValueError("steps must be non-negative")
    if steps == 0:
        return BitImage(img.words.copy())
    return BitImage(K.shift(img.words, _DIRS[direction], steps))


def seed_plane(seeds) -> BitImage:
    if isinstance(seeds, Border):
        edge = np.zeros((SIZE, SIZE), dtype=bool)
        edge[0, :] = edge[-1, :] = edge[:, 0] = edge[:, -1] = True
        return BitImage.from_array(edge)
    if isinstance(seeds, Points):
        bits = np.zeros((SIZE, WORDS), dtype=np.uint64)
        for r, c in seeds.coords:
            _check_coord(r, c)
            bits[r, c // 64] |= np.uint64(1) << np.uint64(c % 64)
        return BitImage(bits)
    raise TypeError(f"unknown seed spec {seeds!r}")


_BORDER_WORDS = None


def _border_words():
    global _BORDER_WORDS
    if _BORDER_WORDS is None:
        plane = seed_plane(BORDER)
        _BORDER_WORDS = plane.words
    return _BORDER_WORDS


def flood(mask: BitImage, seeds) -> BitImage:
    """Pixels of ``mask`` 4-connected through ``mask`` to some seed pixel.

    ``seeds`` is :data:`BORDER` (every array-edge pixel) or a :class:`Points`.
    Seeds lying on 0-pixels of the mask start nothing.
    """
    if isinstance(seeds, Border):
        words = _border_words()
    else:
        words = seed_plane(seeds).words
    return BitImage(K.flood(mask.words, words))


def count_components(img: BitImage) -> int:
    """Number of 4-connected components of 1-pixels."""
    return int(K.count_components(img.words))


def component_stats(img: BitImage) -> list[tuple[PixelCoord, int]]:
    """(first pixel in scan order, pixel count) for each component."""
    return [(PixelCoord(int(r), int(c)), int(a))
            for r, c, a in K.component_stats(img.words)]


def scan_event(img: BitImage) -> PixelCoord | None:
    """First 1-pixel in row-major order, or None for an empty plane."""
    r, c = K.first_set(img.words)
    if r < 0:
        return None
    return PixelCoord(int(r), int(c))


def scan_boundingbox(img: BitImage) -> BoundingBox | None:
    r0, c0, r1, c1 = K.bounding_box(img.words)
    if r0 < 0:
        return None
    return BoundingBox(PixelCoord(int(r0), int(c0)), PixelCoord(int(r1), int(c1)))


def _check_coord(r, c):
    if not (0 <= r < SIZE and 0 <= c < SIZE):
        raise ValueError(f"pixel ({r}, {c}) outside the array")


def load_point(p: Sequence[int]) -> BitImage:
    return seed_plane(Points([p]))


def global_or(img: BitImage) -> bool:
    return bool(img.words.any())
