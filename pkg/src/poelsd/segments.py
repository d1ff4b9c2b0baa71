"""Line segments from accepted regions, plus their text/JSON/SVG serialization.

Text format: one segment per line, ``x1 y1 x2 y2 score``, whitespace separated.
JSON format: ``[{"x1": .., "y1": .., "x2": .., "y2": .., "score": ..}, ...]``.
Coordinates are pixel centres (x = column, y = row).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFitError
from .growing import Region, fit_region
from .validation import region_size

FORMATS = ("text", "json", "svg")


@dataclass(frozen=True)
class LineSegment:
    x1: float
    y1: float
    x2: float
    y2: float
    score: float = 0.0

    @property
    def length(self) -> float:
        return math.hypot(self.x2 - self.x1, self.y2 - self.y1)

    @property
    def angle(self) -> float:
        """Undirected orientation in [0, pi)."""
        return math.atan2(self.y2 - self.y1, self.x2 - self.x1) % math.pi

    def endpoints(self):
        return (self.x1, self.y1), (self.x2, self.y2)


def extract_endpoints(region: Region) -> LineSegment:
    """Refit the region and span its pixel projections along the fitted line."""
    ref, theta = fit_region(region.pixels)
    c, s = math.cos(theta), math.sin(theta)
    pts = np.asarray(region.pixels, dtype=np.float64)[:, :2]
    t = (pts[:, 0] - ref[0]) * c + (pts[:, 1] - ref[1]) * s
    t_min, t_max = float(t.min()), float(t.max())
    if t_max - t_min <= 0.0:
        raise DegenerateFitError("region projects to a single point")
    return LineSegment(
        ref[0] + t_min * c, ref[1] + t_min * s,
        ref[0] + t_max * c, ref[1] + t_max * s,
        score=region_size(region),
    )


def regions_to_segments(regions) -> list[LineSegment]:
    out = []
    for region in regions:
        try:
            out.append(extract_endpoints(region))
        except DegenerateFitError:
            continue
    return out


def serialize(segments, fmt: str = "text", image_dims: tuple[int, int] | None = None) -> bytes:
    if fmt == "text":
        return "".join(
            f"{s.x1:.6f} {s.y1:.6f} {s.x2:.6f} {s.y2:.6f} {s.score:.6f}\n" for s in segments
        ).encode()
    if fmt == "json":
        rows = [{"x1": s.x1, "y1": s.y1, "x2": s.x2, "y2": s.y2, "score": s.score}
                for s in segments]
        return (json.dumps(rows, indent=1) + "\n").encode()
    if fmt == "svg":
        width, height = image_dims if image_dims else (0, 0)
        lines = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="-0.5 -0.5 {width} {height}">'
        ]
        for s in segments:
            lines.append(
                f'  <line x1="{s.x1:.3f}" y1="{s.y1:.3f}" x2="{s.x2:.3f}" y2="{s.y2:.3f}" '
                f'stroke="red" stroke-width="1"><title>{s.score:.3f}</title></line>'
            )
        lines.append("</svg>")
        return ("\n".join(lines) + "\n").encode()
    raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")


def parse(data: bytes | str, fmt: str = "text") -> list[LineSegment]:
    if isinstance(data, bytes):
        data = data.decode()
    if fmt == "text":
        segs = []
        for lineno, line in enumerate(data.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) not in (4, 5):
                raise ValueError(f"line {lineno}: expected 4 or 5 fields, got {len(fields)}")
            segs.append(LineSegment(*(float(f) for f in fields)))
        return segs
    if fmt == "json":
        rows = json.loads(data) if data.strip() else []
        return [LineSegment(float(r["x1"]), float(r["y1"]), float(r["x2"]), float(r["y2"]),
                            float(r.get("score", 0.0))) for r in rows]
    raise ValueError(f"cannot parse format {fmt!r}")


def write_segments(path, segments, fmt: str | None = None, image_dims=None) -> None:
    from pathlib import Path

    path = Path(path)
    fmt = fmt or _format_for(path)
    path.write_bytes(serialize(segments, fmt, image_dims))


def read_segments(path, fmt: str | None = None) -> list[LineSegment]:
    from pathlib import Path

    path = Path(path)
    return parse(path.read_bytes(), fmt or _format_for(path))


def _format_for(path) -> str:
    suffix = path.suffix.lower()
    return {".json": "json", ".svg": "svg"}.get(suffix, "text")
