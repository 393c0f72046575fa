"""Raster carrier, YCbCr / I-channel color conversion and bit-exact PPM/PGM I/O.

All conversions are pure functions; identical inputs give byte-identical
outputs regardless of caller thread. Files are binary P6 (color) and P5
(masks / ternary images), maxval 255 only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RGB8 = "RGB8"
YCBCR8 = "YCbCr8"
GRAY8 = "Gray8"

_CHANNELS = {RGB8: 3, YCBCR8: 3, GRAY8: 1}

# Ternary PGM encoding: 0=Black, 128=Gray, 255=White.
# Ground truth PGM: 0=non-skin, 128=undecided, 255=skin.
BLACK = 0
GRAY = 128
WHITE = 255

# Attainable range of the I (YIQ) channel for 8-bit RGB input.
I_MAX = 0.595716 * 255.0
I_MIN = -(0.274453 + 0.321263) * 255.0


class ImageFormatError(ValueError):
    """Raised for malformed or unsupported PPM/PGM data."""


@dataclass
class Raster:
    """W x H grid of 8-bit samples in a named color space.

    ``data`` is (H, W, C) for 3-channel spaces and (H, W) for Gray8.
    """

    space: str
    data: np.ndarray

    def __post_init__(self):
        if self.space not in _CHANNELS:
            raise ValueError(f"unknown color space {self.space!r}")
        self.data = np.asarray(self.data, dtype=np.uint8)
        c = _CHANNELS[self.space]
        if c == 1:
            if self.data.ndim != 2:
                raise ValueError("Gray8 raster must be 2-D")
        elif self.data.ndim != 3 or self.data.shape[2] != c:
            raise ValueError(f"{self.space} raster must be (H, W, {c})")
        if self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise ValueError("raster must be at least 1x1")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def rgb_to_ycbcr(rgb) -> tuple[int, int, int]:
    """Full-range BT.601 transform of one RGB triple, rounded half-up."""
    r, g, b = (float(v) for v in rgb)
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    out = []
    for v in (y, cb, cr):
        q = int(np.floor(v + 0.5))
        out.append(min(255, max(0, q)))
    return tuple(out)


def rgb_to_ycbcr_image(img: Raster) -> Raster:
    """Vectorized full-range BT.601 conversion of an RGB8 raster."""
    if img.space != RGB8:
        raise ValueError("expected an RGB8 raster")
    rgb = img.data.astype(np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    out = np.stack([y, cb, cr], axis=-1)
    out = np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)
    return Raster(YCBCR8, out)


def rgb_to_i_channel(rgb) -> float:
    """I (YIQ) chrominance of one RGB triple, as a real value."""
    r, g, b = (float(v) for v in rgb)
    return 0.595716 * r - 0.274453 * g - 0.321263 * b


def i_channel_image(img: Raster) -> np.ndarray:
    """I channel of an RGB8 raster as float64 (H, W)."""
    if img.space != RGB8:
        raise ValueError("expected an RGB8 raster")
    rgb = img.data.astype(np.float64)
    return 0.595716 * rgb[..., 0] - 0.274453 * rgb[..., 1] - 0.321263 * rgb[..., 2]


def quantize_i_channel(i: np.ndarray) -> np.ndarray:
    """Affine map of the I channel from its attainable range onto [0, 255]."""
    q = (np.asarray(i, dtype=np.float64) - I_MIN) / (I_MAX - I_MIN) * 255.0
    return np.clip(np.floor(q + 0.5), 0, 255).astype(np.uint8)


def _read_header(buf: bytes, magic: bytes):
    if not buf.startswith(magic):
        raise ImageFormatError(f"expected {magic.decode()} file")
    pos = len(magic)
    fields = []
    while len(fields) < 3:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < len(buf) and buf[pos : pos + 1] == b"#":
            while pos < len(buf) and buf[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated header")
        fields.append(buf[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        w, h, maxval = (int(f) for f in fields)
    except ValueError as e:
        raise ImageFormatError("non-numeric header field") from e
    if w < 1 or h < 1:
        raise ImageFormatError("non-positive dimensions")
    if maxval != 255:
        raise ImageFormatError(f"unsupported maxval {maxval}")
    return w, h, pos


def read_ppm(path) -> Raster:
    """Read a binary P6 PPM as an RGB8 raster."""
    with open(path, "rb") as f:
        buf = f.read()
    w, h, pos = _read_header(buf, b"P6")
    need = w * h * 3
    body = buf[pos : pos + need]
    if len(body) != need:
        raise ImageFormatError("truncated pixel data")
    return Raster(RGB8, np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3))


def write_ppm(path, img: Raster) -> None:
    if img.space != RGB8:
        raise ValueError("PPM output requires an RGB8 raster")
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (img.width, img.height))
        f.write(np.ascontiguousarray(img.data).tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary P5 PGM as a (H, W) uint8 array."""
    with open(path, "rb") as f:
        buf = f.read()
    w, h, pos = _read_header(buf, b"P5")
    need = w * h
    body = buf[pos : pos + need]
    if len(body) != need:
        raise ImageFormatError("truncated pixel data")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w)


def write_pgm(path, gray: np.ndarray) -> None:
    gray = np.asarray(gray, dtype=np.uint8)
    if gray.ndim != 2:
        raise ValueError("PGM output requires a 2-D array")
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (gray.shape[1], gray.shape[0]))
        f.write(np.ascontiguousarray(gray).tobytes())
