"""8-bit grayscale image container and deterministic I/O.

Pixel convention throughout the package: 0 = black ink, 255 = white
background. PNG output is produced by a built-in encoder (fixed zlib
level, filter 0) so output bytes never depend on the codec version;
arbitrary PNG/PGM input is decoded with Pillow.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_PNG_SIG = b"\x89PNG\r\n\x1a\n"


@dataclass(frozen=True)
class GrayImage:
    """Single-channel 8-bit raster; ``array`` is (height, width) uint8."""

    array: np.ndarray

    def __post_init__(self):
        a = self.array
        if a.ndim != 2 or a.dtype != np.uint8 or a.size == 0:
            raise ValueError("GrayImage requires a non-empty 2-D uint8 array")

    @property
    def width(self) -> int:
        return self.array.shape[1]

    @property
    def height(self) -> int:
        return self.array.shape[0]

    @staticmethod
    def full(height: int, width: int, value: int = 255) -> "GrayImage":
        return GrayImage(np.full((height, width), value, dtype=np.uint8))

    def save(self, path: str | Path) -> None:
        path = Path(path)
        if path.suffix.lower() == ".pgm":
            path.write_bytes(encode_pgm(self.array))
        else:
            path.write_bytes(encode_png(self.array))

    @staticmethod
    def load(path: str | Path) -> "GrayImage":
        return GrayImage(load_gray_array(path))


def encode_png(array: np.ndarray) -> bytes:
    """Grayscale 8-bit PNG with filter type 0 and a fixed compression level."""
    h, w = array.shape
    raw = b"".join(b"\x00" + array[row].tobytes() for row in range(h))

    def chunk(tag: bytes, payload: bytes) -> bytes:
        return (
            struct.pack(">I", len(payload))
            + tag
            + payload
            + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
        )

    ihdr = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)
    idat = zlib.compress(raw, 6)
    return _PNG_SIG + chunk(b"IHDR", ihdr) + chunk(b"IDAT", idat) + chunk(b"IEND", b"")


def encode_pgm(array: np.ndarray) -> bytes:
    """Binary (P5) PGM with a canonical single-space header; bit-exact."""
    h, w = array.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + array.tobytes()


def load_gray_array(path: str | Path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8)


def resize(array: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with pixel-center alignment and edge clamping.

    Self-contained so resampling results never depend on an external
    imaging library's filter choices.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError("resize target must be at least 1x1")
    in_h, in_w = array.shape
    src = array.astype(np.float64)

    ys = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, in_h - 1)
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :]

    top = src[y0[:, None], x0[None, :]] * (1 - wx) + src[y0[:, None], x1[None, :]] * wx
    bot = src[y1[:, None], x0[None, :]] * (1 - wx) + src[y1[:, None], x1[None, :]] * wx
    out = top * (1 - wy) + bot * wy
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def resize_to_height(array: np.ndarray, target_h: int) -> np.ndarray:
    """Rescale to a fixed height, preserving aspect ratio (width >= 1)."""
    h, w = array.shape
    out_w = max(1, int(round(w * target_h / h)))
    return resize(array, target_h, out_w)
