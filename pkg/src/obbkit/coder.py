"""Anchors, midpoint-offset delta coding, label assignment and sampling."""
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (GeometryError, as_hboxes, as_midpoints, as_rects, external_hbox,
                       midpoint_from_quad, rect_to_quad, vertices_from_midpoint)
from .overlap import pairwise_hbox_iou

# bound on the log-scale deltas, guards exp() against untrained outputs
DELTA_CLAMP = math.log(1000.0 / 16)

POSITIVE, NEGATIVE, IGNORE = 1, 0, -1


@dataclass(frozen=True)
class AnchorSpec:
    """One ``(stride, area)`` pair per pyramid level plus shared h:w ratios."""

    levels: tuple = ((4, 32.0 ** 2), (8, 64.0 ** 2), (16, 128.0 ** 2), (32, 256.0 ** 2), (64, 512.0 ** 2))
    ratios: tuple = (0.5, 1.0, 2.0)

    def __post_init__(self):
        strides = [s for s, _ in self.levels]
        if any(b <= a for a, b in zip(strides, strides[1:])):
            raise ValueError("anchor strides must be strictly increasing")
        if any(r <= 0 for r in self.ratios) or any(a <= 0 for _, a in self.levels):
            raise ValueError("anchor ratios and areas must be positive")


def generate_anchors(spec, level_shapes):
    """Horizontal anchors for each level as ``(H*W*R, 4)`` arrays.

    Anchor order is row-major over cells with the ratio index varying fastest.
    Cell ``(i, j)`` is centred at ``((j + 0.5) * stride, (i + 0.5) * stride)``.
    """
    if len(level_shapes) != len(spec.levels):
        raise ValueError("need one feature shape per anchor level")
    ratios = np.asarray(spec.ratios, dtype=np.float64)
    out = []
    for (stride, area), (h, w) in zip(spec.levels, level_shapes):
        aw = np.sqrt(area / ratios)
        ah = aw * ratios
        cy, cx = np.meshgrid((np.arange(h) + 0.5) * stride, (np.arange(w) + 0.5) * stride, indexing="ij")
        cx = np.repeat(cx.reshape(-1), len(ratios))
        cy = np.repeat(cy.reshape(-1), len(ratios))
        out.append(np.stack([cx, cy, np.tile(aw, h * w), np.tile(ah, h * w)], axis=-1))
    return out


def decode(anchors, deltas):
    """Apply ``(dx, dy, dw, dh, dalpha, dbeta)`` deltas to hbox anchors.

    The midpoint offsets scale with the decoded width and height and are then
    clamped so every vertex stays on its side of the external rectangle.
    """
    a = as_hboxes(anchors)
    d = np.asarray(deltas, dtype=np.float64)
    if d.shape[-1:] != (6,) or not np.all(np.isfinite(d)):
        raise GeometryError("deltas must be finite with trailing size 6")
    dw = np.clip(d[..., 2], -DELTA_CLAMP, DELTA_CLAMP)
    dh = np.clip(d[..., 3], -DELTA_CLAMP, DELTA_CLAMP)
    w = a[..., 2] * np.exp(dw)
    h = a[..., 3] * np.exp(dh)
    x = d[..., 0] * a[..., 2] + a[..., 0]
    y = d[..., 1] * a[..., 3] + a[..., 1]
    da = np.clip(d[..., 4] * w, -0.5 * w, 0.5 * w)
    db = np.clip(d[..., 5] * h, -0.5 * h, 0.5 * h)
    return np.stack(np.broadcast_arrays(x, y, w, h, da, db), axis=-1)


def encode(anchors, gts):
    """Regression targets of midpoint-offset boxes ``gts`` relative to ``anchors``."""
    a = as_hboxes(anchors)
    g = as_midpoints(gts)
    if np.any(a[..., 2:] <= 0) or np.any(g[..., 2:4] <= 0):
        raise GeometryError("encode needs positive anchor and target sizes")
    return np.stack(np.broadcast_arrays(
        (g[..., 0] - a[..., 0]) / a[..., 2],
        (g[..., 1] - a[..., 1]) / a[..., 3],
        np.log(g[..., 2] / a[..., 2]),
        np.log(g[..., 3] / a[..., 3]),
        g[..., 4] / g[..., 2],
        g[..., 5] / g[..., 3],
    ), axis=-1)


def _rotate(points, cos_t, sin_t):
    x = points[..., 0]
    y = points[..., 1]
    return np.stack([x * cos_t - y * sin_t, x * sin_t + y * cos_t], axis=-1)


def encode_head_targets(rois, gts, frame="hbox"):
    """Second-stage targets of midpoint boxes ``gts`` w.r.t. rotated RoIs.

    ``frame="hbox"`` encodes against the external rectangle of each RoI.
    ``frame="rroi"`` first expresses the target in the RoI's own rotated frame
    and encodes against the axis-aligned ``(0, 0, w, h)`` box there.
    """
    r = as_rects(rois)
    g = as_midpoints(gts)
    if frame == "hbox":
        return encode(external_hbox(rect_to_quad(r)), g)
    if frame == "rroi":
        c = np.cos(r[..., 4])[..., None]
        s = np.sin(r[..., 4])[..., None]
        local = _rotate(vertices_from_midpoint(g) - r[..., None, :2], c, -s)
        anchor = np.concatenate([np.zeros(r.shape[:-1] + (2,)), r[..., 2:4]], axis=-1)
        return encode(anchor, midpoint_from_quad(local))
    raise ValueError(f"unknown target frame {frame!r}")


def decode_head_targets(rois, deltas, frame="hbox"):
    """Inverse of :func:`encode_head_targets`; returns image-space quads."""
    r = as_rects(rois)
    if frame == "hbox":
        return vertices_from_midpoint(decode(external_hbox(rect_to_quad(r)), deltas))
    if frame == "rroi":
        anchor = np.concatenate([np.zeros(r.shape[:-1] + (2,)), r[..., 2:4]], axis=-1)
        local = vertices_from_midpoint(decode(anchor, deltas))
        c = np.cos(r[..., 4])[..., None]
        s = np.sin(r[..., 4])[..., None]
        return _rotate(local, c, s) + r[..., None, :2]
    raise ValueError(f"unknown target frame {frame!r}")


@dataclass
class AssignResult:
    """Per-anchor labels (1 positive, 0 negative, -1 ignore) and matched GT index (-1 if none)."""

    labels: np.ndarray
    matched_gt: np.ndarray
    max_iou: np.ndarray = field(repr=False)

    @property
    def positive(self):
        return np.flatnonzero(self.labels == POSITIVE)

    @property
    def negative(self):
        return np.flatnonzero(self.labels == NEGATIVE)


def assign_labels(anchors, gt_hboxes, pos_thr=0.7, neg_thr=0.3, min_pos_iou=0.3, tie_eps=1e-9):
    """Label anchors against the external rectangles of the ground truth.

    An anchor is positive if its best IoU exceeds ``pos_thr``, or if it is
    (one of) the best anchors of some GT and that IoU exceeds ``min_pos_iou``.
    Non-positive anchors with best IoU below ``neg_thr`` are negative; the
    rest are ignored.
    """
    anchors = as_hboxes(anchors).reshape(-1, 4)
    if len(anchors) == 0:
        raise ValueError("assign_labels needs at least one anchor")
    gt = as_hboxes(gt_hboxes).reshape(-1, 4)
    n = len(anchors)
    if len(gt) == 0:
        return AssignResult(np.zeros(n, dtype=np.int64), np.full(n, -1, dtype=np.int64), np.zeros(n))

    iou = pairwise_hbox_iou(anchors, gt)
    max_iou = iou.max(axis=1)
    argmax = iou.argmax(axis=1)
    labels = np.full(n, IGNORE, dtype=np.int64)
    matched = np.full(n, -1, dtype=np.int64)

    labels[max_iou < neg_thr] = NEGATIVE
    pos = max_iou > pos_thr
    labels[pos] = POSITIVE
    matched[pos] = argmax[pos]

    gt_best = iou.max(axis=0)
    for j in np.flatnonzero(gt_best > min_pos_iou):
        best = np.flatnonzero(iou[:, j] >= gt_best[j] - tie_eps)
        fresh = best[labels[best] != POSITIVE]
        labels[best] = POSITIVE
        matched[fresh] = j
    return AssignResult(labels, matched, max_iou)


def sample_minibatch(assign, n=256, seed=0, pos_fraction=0.5):
    """Draw up to ``n * pos_fraction`` positives and fill the rest with negatives.

    Returns sampled anchor indices, positives first, each group sorted.
    """
    if n <= 0:
        raise ValueError("sample size must be positive")
    pos = assign.positive
    neg = assign.negative
    if len(pos) == 0 and len(neg) == 0:
        raise ValueError("no positive or negative anchors to sample")
    rng = np.random.default_rng(seed)
    n_pos = min(int(n * pos_fraction), len(pos))
    n_neg = min(n - n_pos, len(neg))
    pos = np.sort(rng.choice(pos, size=n_pos, replace=False))
    neg = np.sort(rng.choice(neg, size=n_neg, replace=False))
    return np.concatenate([pos, neg]).astype(np.int64)
