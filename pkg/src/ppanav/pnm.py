"""Binary PGM (P5, 8-bit) and PBM (P4) files for grey and bit planes.

PBM stores 1 as black, the opposite of the array's white-is-1 polarity, so
bits are inverted on the way in and out: a saved plane looks like the scene.
"""

from __future__ import annotations

import os

import numpy as np

from .ppa import SIZE, BitImage, GreyImage


class PnmError(ValueError):
    pass


def _read_header(data: bytes, magic: bytes, nfields: int):
    if not data.startswith(magic):
        raise PnmError(f"not a {magic.decode()} file")
    fields = []
    pos = 2
    while len(fields) < nfields:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise PnmError("truncated header")
        fields.append(int(data[start:pos]))
    # exactly one whitespace byte separates header and raster
    return fields, pos + 1


def read_pgm(path: str | os.PathLike) -> GreyImage:
    with open(path, "rb") as f:
        data = f.read()
    (w, h, maxval), start = _read_header(data, b"P5", 3)
    if (w, h) != (SIZE, SIZE):
        raise PnmError(f"{path}: expected {SIZE}x{SIZE}, got {w}x{h}")
    if maxval > 255:
        raise PnmError(f"{path}: only 8-bit PGM is supported")
    raster = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=start)
    pixels = raster.reshape(h, w).astype(np.uint16)
    if maxval != 255:
        pixels = (pixels * 255 + maxval // 2) // maxval
    return GreyImage(pixels.astype(np.uint8))


def write_pgm(path: str | os.PathLike, img: GreyImage) -> None:
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (SIZE, SIZE))
        f.write(img.pixels.tobytes())


def read_pbm(path: str | os.PathLike) -> BitImage:
    with open(path, "rb") as f:
        data = f.read()
    (w, h), start = _read_header(data, b"P4", 2)
    if (w, h) != (SIZE, SIZE):
        raise PnmError(f"{path}: expected {SIZE}x{SIZE}, got {w}x{h}")
    stride = (w + 7) // 8
    raster = np.frombuffer(data, dtype=np.uint8, count=stride * h, offset=start)
    black = np.unpackbits(raster.reshape(h, stride), axis=1)[:, :w].astype(bool)
    return BitImage.from_array(~black)


def write_pbm(path: str | os.PathLike, img: BitImage) -> None:
    black = ~img.to_array()
    with open(path, "wb") as f:
        f.write(b"P4\n%d %d\n" % (SIZE, SIZE))
        f.write(np.packbits(black, axis=1).tobytes())
