"""Heatmap (pixel) and structural (endpoint) evaluation of detected segments."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

SAP_FRAME = 128.0


@dataclass(frozen=True)
class EvalConfig:
    d_match: float = 0.0075  # fraction of the image diagonal
    d_t: tuple[float, ...] = (5.0, 10.0, 15.0)  # squared distance, 128x128 frame
    thresholds: tuple[float, ...] | None = None  # score cutoffs; None = score deciles

    def __post_init__(self):
        if not self.d_match > 0:
            raise ValueError("d_match must be positive")
        if not all(d > 0 for d in self.d_t):
            raise ValueError("d_t values must be positive")


@dataclass
class EvalReport:
    precision: float = 0.0
    recall: float = 0.0
    f_h: float = 0.0
    ap_h: float = 0.0
    ar_h: float = 0.0
    sap: dict = field(default_factory=dict)
    per_image: list = field(default_factory=list)
    curve: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "precision": self.precision, "recall": self.recall, "f_h": self.f_h,
            "ap_h": self.ap_h, "ar_h": self.ar_h,
            "sap": {f"sAP{d:g}": v for d, v in self.sap.items()},
            "per_image": self.per_image,
            "curve": self.curve,
        }


def f_score(precision: float, recall: float) -> float:
    total = precision + recall
    return 2.0 * precision * recall / total if total > 0 else 0.0


# ---------------------------------------------------------------------------
# rasterization


def _round(v: float) -> int:
    return int(math.floor(v + 0.5))


def bresenham(x0: int, y0: int, x1: int, y1: int):
    """Integer pixels of the segment between two grid points, all octants."""
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    xs, ys = [], []
    while True:
        xs.append(x0)
        ys.append(y0)
        if x0 == x1 and y0 == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy
    return xs, ys


def rasterize(segments, width: int, height: int) -> np.ndarray:
    """Binary uint8 map with 1 on every pixel touched by a segment."""
    out = np.zeros((height, width), dtype=np.uint8)
    for seg in segments:
        xs, ys = bresenham(_round(seg.x1), _round(seg.y1), _round(seg.x2), _round(seg.y2))
        xs, ys = np.asarray(xs), np.asarray(ys)
        inside = (xs >= 0) & (xs < width) & (ys >= 0) & (ys < height)
        out[ys[inside], xs[inside]] = 1
    return out


# ---------------------------------------------------------------------------
# heatmap metric


def heatmap_match(pred_map, gt_map, d_match: float = 0.0075) -> tuple[int, int, int]:
    """One-to-one nearest-first pixel matching. Returns (matched, n_pred, n_gt).

    Pairs are taken in increasing distance; ties are ordered by the pair's
    pixel locations independent of which map is the prediction, so swapping
    the arguments yields the same number of matches.
    """
    pred_map = np.asarray(pred_map) > 0
    gt_map = np.asarray(gt_map) > 0
    if pred_map.shape != gt_map.shape:
        raise ValueError(f"dimension mismatch: {pred_map.shape} vs {gt_map.shape}")
    height, width = pred_map.shape
    radius = d_match * math.hypot(width, height)
    r2 = radius * radius

    both = pred_map & gt_map
    exact = int(both.sum())
    pred_left = pred_map & ~both
    gt_left = gt_map & ~both
    n_pred, n_gt = int(pred_map.sum()), int(gt_map.sum())
    if not pred_left.any() or not gt_left.any():
        return exact, n_pred, n_gt

    p_pts = np.argwhere(pred_left)  # (y, x)
    g_pts = np.argwhere(gt_left)
    pairs = cKDTree(p_pts).query_ball_tree(cKDTree(g_pts), radius + 1e-9)
    pi = np.repeat(np.arange(len(pairs)), [len(p) for p in pairs])
    if pi.size == 0:
        return exact, n_pred, n_gt
    gi = np.fromiter((j for p in pairs for j in p), dtype=np.intp, count=pi.size)
    d = p_pts[pi] - g_pts[gi]
    d2 = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]
    keep = d2 <= r2
    pi, gi, d2 = pi[keep], gi[keep], d2[keep]
    pf = p_pts[pi, 0] * width + p_pts[pi, 1]
    gf = g_pts[gi, 0] * width + g_pts[gi, 1]
    order = np.lexsort((np.maximum(pf, gf), np.minimum(pf, gf), d2))

    p_used = bytearray(len(p_pts))
    g_used = bytearray(len(g_pts))
    matched = 0
    for a, b in zip(pi[order].tolist(), gi[order].tolist()):
        if p_used[a] or g_used[b]:
            continue
        p_used[a] = g_used[b] = 1
        matched += 1
    return exact + matched, n_pred, n_gt


def _ratio(matched: int, n: int, n_other: int) -> float:
    if n:
        return matched / n
    return 1.0 if n_other == 0 else 0.0


def heatmap_scores(pred_map, gt_map, d_match: float = 0.0075) -> tuple[float, float, float]:
    """(precision, recall, F^H). Both maps empty scores 1."""
    matched, n_pred, n_gt = heatmap_match(pred_map, gt_map, d_match)
    precision = _ratio(matched, n_pred, n_gt)
    recall = _ratio(matched, n_gt, n_pred)
    return precision, recall, f_score(precision, recall)


def default_thresholds(scores) -> list[float]:
    scores = np.asarray(list(scores), dtype=np.float64)
    if scores.size == 0:
        return [0.0]
    return sorted(set(np.quantile(scores, np.linspace(0.0, 0.9, 10)).tolist()))


def pr_sweep(pred, gt, dims, thresholds=None, d_match: float = 0.0075):
    """Heatmap precision/recall at each score cutoff, pooled over images.

    ``pred`` and ``gt`` are per-image lists of segments, ``dims`` per-image
    (width, height). Returns (ap_h, ar_h, curve) where curve holds
    (threshold, precision or None, recall or None). Precision is undefined
    when no detection survives a cutoff and is left out of the AP mean.
    """
    if thresholds is None:
        thresholds = default_thresholds(s.score for segs in pred for s in segs)
    gt_maps = [rasterize(g, w, h) for g, (w, h) in zip(gt, dims)]
    curve = []
    cache = {}
    for t in thresholds:
        kept = tuple(tuple(i for i, s in enumerate(segs) if s.score >= t) for segs in pred)
        if kept not in cache:
            matched_p = matched_g = n_pred = n_gt = 0
            for segs, idx, gmap, (w, h) in zip(pred, kept, gt_maps, dims):
                pmap = rasterize([segs[i] for i in idx], w, h)
                m, n_p, n_g = heatmap_match(pmap, gmap, d_match)
                matched_p += m
                matched_g += m
                n_pred += n_p
                n_gt += n_g
            precision = matched_p / n_pred if n_pred else None
            recall = matched_g / n_gt if n_gt else None
            cache[kept] = (precision, recall)
        curve.append((float(t), *cache[kept]))
    precisions = [p for _, p, _ in curve if p is not None]
    recalls = [r for _, _, r in curve if r is not None]
    ap_h = float(np.mean(precisions)) if precisions else 0.0
    ar_h = float(np.mean(recalls)) if recalls else 0.0
    return ap_h, ar_h, curve


# ---------------------------------------------------------------------------
# structural AP


def _to_frame(segs, dims):
    arr = np.array([[s.x1, s.y1, s.x2, s.y2] for s in segs], dtype=np.float64).reshape(-1, 4)
    if dims is not None:
        w, h = dims
        arr = arr * np.array([SAP_FRAME / w, SAP_FRAME / h] * 2)
    return arr


def endpoint_distance(det, gts) -> np.ndarray:
    """Squared endpoint distance of one (4,) detection to every (n, 4) ground truth,
    minimized over the two endpoint pairings."""
    direct = ((gts[:, 0:2] - det[0:2]) ** 2).sum(1) + ((gts[:, 2:4] - det[2:4]) ** 2).sum(1)
    swapped = ((gts[:, 2:4] - det[0:2]) ** 2).sum(1) + ((gts[:, 0:2] - det[2:4]) ** 2).sum(1)
    return np.minimum(direct, swapped)


def sap_curve(pred, gt, d_t: float, dims=None):
    """Ranked precision/recall under the endpoint criterion, pooled over images.

    Returns (precision, recall) arrays indexed by rank. Coordinates are
    rescaled to the 128x128 frame when ``dims`` (per-image (width, height))
    is given; otherwise they are taken as already in that frame.
    """
    if dims is None:
        dims = [None] * len(gt)
    gts = [_to_frame(g, d) for g, d in zip(gt, dims)]
    dets = [_to_frame(p, d) for p, d in zip(pred, dims)]
    ranked = [(-s.score, img, j) for img, segs in enumerate(pred) for j, s in enumerate(segs)]
    ranked.sort()
    n_gt = sum(len(g) for g in gts)
    hit = [np.zeros(len(g), dtype=bool) for g in gts]
    tp = np.zeros(len(ranked))
    for k, (_, img, j) in enumerate(ranked):
        if len(gts[img]) == 0:
            continue
        dist = endpoint_distance(dets[img][j], gts[img])
        dist[hit[img]] = np.inf
        best = int(np.argmin(dist))
        if dist[best] <= d_t:
            hit[img][best] = True
            tp[k] = 1
    cum = np.cumsum(tp)
    precision = cum / np.arange(1, len(ranked) + 1) if len(ranked) else np.zeros(0)
    recall = cum / n_gt if n_gt else np.zeros(len(ranked))
    return precision, recall


def structural_ap(pred, gt, d_t: float = 5.0, dims=None) -> float:
    """Area under the ranked PR curve (trapezoids over recall, starting at recall 0)."""
    precision, recall = sap_curve(pred, gt, d_t, dims)
    if precision.size == 0:
        return 0.0
    r = np.concatenate([[0.0], recall])
    p = np.concatenate([[precision[0]], precision])
    return float(np.sum(np.diff(r) * (p[1:] + p[:-1]) / 2.0))


# ---------------------------------------------------------------------------
# dataset evaluation


def evaluate(pred, gt, dims, config: EvalConfig | None = None, metric: str = "both",
             names=None) -> EvalReport:
    """Full report over per-image prediction/ground-truth segment lists."""
    config = config or EvalConfig()
    if metric not in ("heatmap", "sap", "both"):
        raise ValueError(f"unknown metric {metric!r}")
    names = names or [str(i) for i in range(len(gt))]
    report = EvalReport()
    if metric in ("heatmap", "both"):
        tot_m = tot_p = tot_g = 0
        for name, p, g, (w, h) in zip(names, pred, gt, dims):
            m, n_p, n_g = heatmap_match(rasterize(p, w, h), rasterize(g, w, h), config.d_match)
            tot_m, tot_p, tot_g = tot_m + m, tot_p + n_p, tot_g + n_g
            prec, rec = _ratio(m, n_p, n_g), _ratio(m, n_g, n_p)
            report.per_image.append({"image": name, "precision": prec, "recall": rec,
                                     "f_h": f_score(prec, rec)})
        report.precision = _ratio(tot_m, tot_p, tot_g)
        report.recall = _ratio(tot_m, tot_g, tot_p)
        report.f_h = f_score(report.precision, report.recall)
        report.ap_h, report.ar_h, report.curve = pr_sweep(
            pred, gt, dims, config.thresholds, config.d_match)
    if metric in ("sap", "both"):
        for d_t in config.d_t:
            report.sap[d_t] = structural_ap(pred, gt, d_t, dims)
    return report


def load_shanghaitech_json(path) -> dict:
    """Read a wireframe annotation file.

    Layout: a JSON list of ``{"filename": str, "width": int, "height": int,
    "lines": [[x1, y1, x2, y2], ...]}``; each line may also be given as
    ``[[x1, y1], [x2, y2]]``. Returns {stem: (segments, (width, height))}.
    """
    from .segments import LineSegment

    records = json.loads(Path(path).read_text())
    out = {}
    for rec in records:
        segs = []
        for line in rec["lines"]:
            flat = np.asarray(line, dtype=np.float64).ravel()
            if flat.size != 4:
                raise ValueError(f"{rec['filename']}: line needs 4 coordinates, got {flat.size}")
            segs.append(LineSegment(*flat.tolist(), score=1.0))
        out[Path(rec["filename"]).stem] = (segs, (int(rec["width"]), int(rec["height"])))
    return out
