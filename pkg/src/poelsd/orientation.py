"""Per-pixel orientation estimation from directional window sums."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

INVALID = -1


@dataclass(frozen=True)
class WindowBank:
    """P binary line windows of half-width W.

    Window i covers the offsets (dx, dy) with |-dx sin(t_i) + dy cos(t_i)| < 0.5
    and dx^2 + dy^2 <= W^2, where t_i = i*pi/P (0-based i).
    """

    W: int
    P: int
    angles: tuple[float, ...]
    masks: np.ndarray = field(repr=False)
    # per direction: (dy, dx) int arrays in raster order of the window
    offsets: tuple[tuple[np.ndarray, np.ndarray], ...] = field(repr=False)

    @property
    def size(self) -> int:
        return 2 * self.W + 1


def build_window_bank(W: int = 7, P: int = 16) -> WindowBank:
    if W < 1:
        raise ValueError(f"window half-width must be >= 1, got {W}")
    if P < 2:
        raise ValueError(f"direction count must be >= 2, got {P}")
    angles = tuple(i * math.pi / P for i in range(P))
    size = 2 * W + 1
    masks = np.zeros((P, size, size), dtype=np.float64)
    offsets = []
    for i, theta in enumerate(angles):
        s, c = math.sin(theta), math.cos(theta)
        dys, dxs = [], []
        for dy in range(-W, W + 1):
            for dx in range(-W, W + 1):
                if abs(-dx * s + dy * c) < 0.5 and dx * dx + dy * dy <= W * W:
                    masks[i, dy + W, dx + W] = 1.0
                    dys.append(dy)
                    dxs.append(dx)
        offsets.append((np.array(dys, dtype=np.intp), np.array(dxs, dtype=np.intp)))
    masks.setflags(write=False)
    return WindowBank(W=W, P=P, angles=angles, masks=masks, offsets=tuple(offsets))


@dataclass
class OrientationMap:
    angle_index: np.ndarray  # int16, INVALID where the source value is 0
    valid: np.ndarray  # bool
    P: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.angle_index.shape

    def angles(self) -> np.ndarray:
        """Angles in radians; NaN at invalid pixels."""
        out = self.angle_index.astype(np.float64) * (math.pi / self.P)
        out[~self.valid] = np.nan
        return out


def directional_sums(values: np.ndarray, bank: WindowBank, x: int, y: int) -> np.ndarray:
    """Window responses S_i(x, y) for all P directions, zero padded at borders."""
    height, width = values.shape
    if not (0 <= x < width and 0 <= y < height):
        raise IndexError(f"pixel ({x}, {y}) outside {width}x{height} map")
    sums = np.zeros(bank.P, dtype=np.float64)
    for i, (dys, dxs) in enumerate(bank.offsets):
        acc = 0.0
        for dy, dx in zip(dys, dxs):
            yy, xx = y + dy, x + dx
            if 0 <= yy < height and 0 <= xx < width:
                acc += values[yy, xx]
        sums[i] = acc
    return sums


def response_stack(values: np.ndarray, bank: WindowBank, mask: np.ndarray | None = None):
    """Responses for every direction at the pixels selected by ``mask``.

    Returns (ys, xs, sums) with sums of shape (P, n). Accumulation follows each
    window's raster order so results are bit-identical to ``directional_sums``.
    """
    values = np.asarray(values, dtype=np.float64)
    height, width = values.shape
    W = bank.W
    if mask is None:
        mask = values > 0
    ys, xs = np.nonzero(mask)
    padded = np.zeros((height + 2 * W, width + 2 * W), dtype=np.float64)
    padded[W : W + height, W : W + width] = values
    flat = padded.ravel()
    stride = width + 2 * W
    base = (ys + W) * stride + (xs + W)
    sums = np.zeros((bank.P, ys.size), dtype=np.float64)
    for i, (dys, dxs) in enumerate(bank.offsets):
        acc = sums[i]
        for off in dys * stride + dxs:
            acc += flat[base + off]
    return ys, xs, sums


def estimate_orientation(values: np.ndarray, bank: WindowBank) -> OrientationMap:
    """Quantized orientation (argmax direction, smallest index on ties) of every positive pixel."""
    values = np.asarray(values, dtype=np.float64)
    valid = values > 0
    ys, xs, sums = response_stack(values, bank, valid)
    index = np.full(values.shape, INVALID, dtype=np.int16)
    if ys.size:
        index[ys, xs] = np.argmax(sums, axis=0)
    return OrientationMap(angle_index=index, valid=valid, P=bank.P)


def export_windows(bank: WindowBank, directory) -> list[Path]:
    """Write each window mask as an 8-bit PGM (255 inside the window)."""
    from .edgemap import write_pgm

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(bank.P):
        path = directory / f"window_{i:02d}.pgm"
        write_pgm(path, (bank.masks[i] * 255).astype(np.uint8), 255)
        paths.append(path)
    return paths


def export_angle_map(orient: OrientationMap, path) -> None:
    """Angle indices scaled to gray levels 1..255; invalid pixels are 0."""
    from .edgemap import write_pgm

    gray = np.zeros(orient.shape, dtype=np.uint8)
    idx = orient.angle_index[orient.valid].astype(np.float64)
    gray[orient.valid] = (1 + np.rint(idx * 254.0 / max(orient.P - 1, 1))).astype(np.uint8)
    write_pgm(path, gray, 255)
