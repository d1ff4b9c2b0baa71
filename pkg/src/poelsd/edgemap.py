"""Edge strength map ingestion and preprocessing.

An edge strength map is a float64 array of shape (height, width) with values
in [0, 1]. Coordinates follow the image convention: x is the column index
(rightward), y is the row index (downward).
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ImageFormatError

NORMALIZE_MODES = ("auto", "fixed-255", "none")


def check_edge_map(values) -> np.ndarray:
    """Coerce to a float64 2D array and verify the [0, 1] range."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"edge map must be a non-empty 2D grid, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("edge map values must lie in [0, 1]")
    return arr


# ---------------------------------------------------------------------------
# PGM / PNG

_PGM_TOKEN = re.compile(rb"(#[^\n]*\n?)|(\S+)")


def _pgm_header(data: bytes):
    """Parse magic, width, height, maxval. Returns them plus the raster offset."""
    tokens = []
    pos = 0
    while len(tokens) < 4:
        m = _PGM_TOKEN.search(data, pos)
        if m is None:
            raise ImageFormatError("truncated PGM header")
        pos = m.end()
        if m.group(2) is not None:
            tokens.append(m.group(2))
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        if magic in (b"P3", b"P6"):
            raise ImageFormatError("multi-channel PNM images are not supported")
        raise ImageFormatError(f"not a PGM file (magic {magic!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise ImageFormatError("malformed PGM header") from exc
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise ImageFormatError("invalid PGM dimensions or maxval")
    # exactly one whitespace byte separates maxval from binary raster data
    return magic, width, height, maxval, pos + 1


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Read a P2 or P5 PGM file. Returns (raw integer raster, maxval)."""
    data = Path(path).read_bytes()
    magic, width, height, maxval, offset = _pgm_header(data)
    if magic == b"P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        count = width * height
        if len(data) - offset < count * dtype.itemsize:
            raise ImageFormatError("truncated PGM raster")
        raster = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
        img = raster.astype(np.uint16 if maxval > 255 else np.uint8)
    else:
        body = re.sub(rb"#[^\n]*", b"", data[offset - 1 :]).split()
        if len(body) < width * height:
            raise ImageFormatError("truncated PGM raster")
        img = np.array([int(t) for t in body[: width * height]], dtype=np.int64)
        if img.max(initial=0) > maxval:
            raise ImageFormatError("PGM sample exceeds maxval")
        img = img.astype(np.uint16 if maxval > 255 else np.uint8)
    return img.reshape(height, width), maxval


def write_pgm(path, img: np.ndarray, maxval: int | None = None, ascii: bool = False) -> None:
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError("PGM output must be single-channel")
    if maxval is None:
        maxval = 65535 if img.dtype == np.uint16 or img.max(initial=0) > 255 else 255
    height, width = img.shape
    header = f"{'P2' if ascii else 'P5'}\n{width} {height}\n{maxval}\n".encode()
    if ascii:
        rows = [" ".join(str(int(v)) for v in row) for row in img]
        Path(path).write_bytes(header + ("\n".join(rows) + "\n").encode())
    else:
        dtype = ">u2" if maxval > 255 else "u1"
        Path(path).write_bytes(header + img.astype(dtype).tobytes())


def read_image(path) -> tuple[np.ndarray, int]:
    """Read a single-channel PGM or PNG. Returns (raw raster, container max)."""
    path = Path(path)
    try:
        head = path.read_bytes()[:8]
    except OSError as exc:
        raise ImageFormatError(f"cannot read {path}: {exc.strerror}") from exc
    if head[:1] == b"P":
        img, maxval = read_pgm(path)
        return img, (255 if maxval <= 255 else 65535)
    if head == b"\x89PNG\r\n\x1a\n":
        from PIL import Image

        with Image.open(path) as im:
            if im.mode in ("L", "1"):
                return np.asarray(im.convert("L"), dtype=np.uint8), 255
            if im.mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im, dtype=np.int64)
                if arr.min(initial=0) < 0 or arr.max(initial=0) > 65535:
                    raise ImageFormatError("PNG samples outside 16-bit range")
                return arr.astype(np.uint16), 65535
            raise ImageFormatError(f"multi-channel or unsupported PNG mode {im.mode!r}")
    raise ImageFormatError(f"unrecognized image format: {path}")


def load_edge_map(path, normalize: str = "auto") -> np.ndarray:
    if normalize not in NORMALIZE_MODES:
        raise ValueError(f"normalize must be one of {NORMALIZE_MODES}")
    raw, container_max = read_image(path)
    if normalize == "auto":
        return raw.astype(np.float64) / container_max
    if normalize == "fixed-255":
        values = raw.astype(np.float64) / 255.0
        if values.max(initial=0.0) > 1.0:
            raise ImageFormatError("fixed-255 normalization of a 16-bit image exceeds 1")
        return values
    if raw.max(initial=0) > 1:
        raise ImageFormatError("raw values exceed 1 with normalize='none'")
    return raw.astype(np.float64)


def save_edge_map(path, values: np.ndarray, bits: int = 8) -> None:
    """Quantize a [0, 1] map and write it as PGM or PNG (chosen by suffix)."""
    values = check_edge_map(values)
    maxval = 255 if bits == 8 else 65535
    raw = np.rint(values * maxval).astype(np.uint8 if bits == 8 else np.uint16)
    path = Path(path)
    if path.suffix.lower() == ".png":
        from PIL import Image

        Image.fromarray(raw).save(path)
    else:
        write_pgm(path, raw, maxval)


# ---------------------------------------------------------------------------
# preprocessing


def fallback_edges(image) -> np.ndarray:
    """Gradient magnitude edge map from a grayscale image.

    Central differences on an edge-replicated border; the strongest response
    is rescaled to 1.0. A constant image yields all zeros.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ImageFormatError("fallback edges require a single-channel image")
    padded = np.pad(img, 1, mode="edge")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    mag = np.hypot(gx, gy)
    peak = mag.max(initial=0.0)
    if peak == 0.0:
        return np.zeros_like(mag)
    return mag / peak


def nms_thin(values: np.ndarray, orientation) -> np.ndarray:
    """Suppress pixels that are not maximal across their estimated orientation.

    Each valid pixel is compared with bilinear samples one pixel away on both
    sides along the normal of its orientation. Ties keep the pixel, so flat
    plateaus survive.
    """
    values = check_edge_map(values)
    if values.shape != orientation.shape:
        raise ValueError(
            f"dimension mismatch: map {values.shape} vs orientation {orientation.shape}"
        )
    out = np.zeros_like(values)
    ys, xs = np.nonzero(orientation.valid)
    if ys.size == 0:
        return out
    theta = orientation.angles()[ys, xs]
    nx, ny = -np.sin(theta), np.cos(theta)
    centre = values[ys, xs]
    fwd = ndimage.map_coordinates(values, [ys + ny, xs + nx], order=1, mode="constant", cval=0.0)
    bwd = ndimage.map_coordinates(values, [ys - ny, xs - nx], order=1, mode="constant", cval=0.0)
    keep = (centre >= fwd) & (centre >= bwd)
    out[ys[keep], xs[keep]] = centre[keep]
    return out


def binarize(values: np.ndarray, lam: float) -> np.ndarray:
    """1.0 where value > lam, else 0.0."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    values = np.asarray(values, dtype=np.float64)
    return (values > lam).astype(np.float64)
