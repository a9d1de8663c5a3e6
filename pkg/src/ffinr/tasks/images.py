"""Grayscale image grids: loading, saving and built-in synthetic targets.

Pixel ``(row i, col j)`` of an ``H x W`` image sits at the coordinate
``((j + 0.5) / W, (i + 0.5) / H)``; the first coordinate runs along columns.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import FormatError, InvalidInputError

LUMA = (0.299, 0.587, 0.114)


@dataclass
class ImageGrid:
    pixels: np.ndarray  # (height, width), values in [0, 1]

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.float64)
        if p.ndim != 2 or p.size == 0:
            raise InvalidInputError("image must be a non-empty 2-D array")
        if not np.all(np.isfinite(p)) or p.min() < 0 or p.max() > 1:
            raise InvalidInputError("pixel values must lie in [0, 1]")
        self.pixels = p

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def coords(self) -> np.ndarray:
        return grid_coords(self.height, self.width)

    def sha256(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.pixels).tobytes()).hexdigest()


def grid_coords(height: int, width: int) -> np.ndarray:
    """Pixel centres in row-major order, shape ``(height * width, 2)``."""
    xs = (np.arange(width) + 0.5) / width
    ys = (np.arange(height) + 0.5) / height
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel()], axis=1)


def _pgm_tokens(data: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping ``#`` comments."""
    tokens, i = [], 2
    while len(tokens) < count:
        if i >= len(data):
            raise FormatError("truncated PGM header")
        c = data[i:i + 1]
        if c == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
                j += 1
            tokens.append(data[i:j])
            i = j
    return tokens, i + 1  # one whitespace byte ends the header


def read_pgm(data: bytes) -> ImageGrid:
    if data[:2] != b"P5":
        raise FormatError(f"unsupported PGM magic {data[:2]!r}; only binary P5 is read")
    tokens, start = _pgm_tokens(data, 3)
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError:
        raise FormatError(f"non-numeric PGM header fields {tokens}") from None
    if w < 1 or h < 1:
        raise FormatError(f"invalid PGM size {w}x{h}")
    if maxval != 255:
        raise FormatError(f"unsupported PGM maxval {maxval}; only 8-bit (255) is read")
    body = data[start:start + w * h]
    if len(body) < w * h:
        raise FormatError(f"truncated PGM: expected {w * h} pixel bytes, found {len(body)}")
    return ImageGrid(np.frombuffer(body, dtype=np.uint8).reshape(h, w) / 255.0)


def _read_png(path: Path) -> ImageGrid:
    from PIL import Image

    try:
        im = Image.open(path)
        im.load()
    except Exception as exc:  # Pillow raises several unrelated types
        raise FormatError(f"cannot decode PNG {path}: {exc}") from None
    if im.mode == "L":
        return ImageGrid(np.asarray(im, dtype=np.float64) / 255.0)
    if im.mode in ("RGB", "RGBA"):
        rgb = np.asarray(im, dtype=np.float64)[..., :3]
        return ImageGrid(np.clip(rgb @ np.array(LUMA), 0, 255) / 255.0)
    raise FormatError(f"unsupported PNG mode {im.mode!r}; need 8-bit L, RGB or RGBA")


def load_image(path) -> ImageGrid:
    """8-bit P5 PGM or 8-bit PNG (RGB converted with luma weights 0.299/0.587/0.114)."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from None
    if data[:2] == b"P5":
        return read_pgm(data)
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return _read_png(path)
    raise FormatError(f"{path}: not a P5 PGM or PNG file")


def to_bytes(img: ImageGrid) -> np.ndarray:
    return np.rint(np.clip(img.pixels, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_pgm(img: ImageGrid, path) -> None:
    header = f"P5\n{img.width} {img.height}\n255\n".encode()
    Path(path).write_bytes(header + to_bytes(img).tobytes())


def standard_image(size: int = 64) -> ImageGrid:
    """Test card with a smooth background, hard-edged shapes and a stripe patch."""
    c = grid_coords(size, size)
    x, y = c[:, 0], c[:, 1]
    img = 0.25 + 0.3 * x + 0.1 * np.sin(2 * np.pi * y)
    img = np.where((x - 0.3) ** 2 + (y - 0.32) ** 2 < 0.18 ** 2, 0.85, img)
    img = np.where((x > 0.55) & (x < 0.9) & (y > 0.12) & (y < 0.42), 0.1, img)
    stripes = (x > 0.55) & (x < 0.9) & (y > 0.58) & (y < 0.9)
    img = np.where(stripes, 0.5 + 0.35 * np.sin(2 * np.pi * 10 * x), img)
    img = img + 0.3 * np.exp(-((x - 0.25) ** 2 + (y - 0.75) ** 2) / (2 * 0.08 ** 2))
    return ImageGrid(np.clip(img, 0.0, 1.0).reshape(size, size))


def smooth_image(size: int = 64) -> ImageGrid:
    """Low-frequency target: a few broad Gaussian blobs and one slow wave."""
    c = grid_coords(size, size)
    x, y = c[:, 0], c[:, 1]
    img = 0.45 + 0.15 * np.sin(2 * np.pi * (x + 0.5 * y))
    for cx, cy, s, a in ((0.3, 0.3, 0.15, 0.3), (0.7, 0.6, 0.2, -0.25), (0.45, 0.8, 0.12, 0.2)):
        img = img + a * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * s * s))
    return ImageGrid(np.clip(img, 0.0, 1.0).reshape(size, size))


BUILTIN = {"standard": standard_image, "smooth": smooth_image}
