"""Inference-time glue: patch tiling, proposal selection, detection NMS and merging."""
from dataclasses import dataclass

import numpy as np

from .evaluation import Detections, GtInstance
from .geometry import as_midpoints, external_hbox, vertices_from_midpoint
from .overlap import batched_nms, nms, score_order


@dataclass(frozen=True)
class TileScheme:
    patch: int = 1024
    stride: int = 824

    def __post_init__(self):
        if self.patch <= 0 or self.stride <= 0 or self.stride > self.patch:
            raise ValueError("need 0 < stride <= patch")


def _axis_offsets(size, patch, stride):
    offs = [0]
    while offs[-1] + patch < size:
        offs.append(offs[-1] + stride)
    offs[-1] = min(offs[-1], max(0, size - patch))
    return sorted(set(offs))


def tile_offsets(img_w, img_h, scheme=TileScheme()):
    """Top-left corners ``(ox, oy)`` of the patches covering an image.

    Offsets advance by ``scheme.stride``; the last one on each axis is pulled
    back so the patch ends at the image border.
    """
    if img_w <= 0 or img_h <= 0:
        raise ValueError("image size must be positive")
    xs = _axis_offsets(img_w, scheme.patch, scheme.stride)
    ys = _axis_offsets(img_h, scheme.patch, scheme.stride)
    return sorted((x, y) for x in xs for y in ys)


def clip_annotations_to_tile(gts, offset, patch):
    """Instances whose vertex centroid lies in the tile, shifted into tile coordinates."""
    ox, oy = offset
    shift = np.array([ox, oy], dtype=np.float64)
    out = []
    for g in gts:
        q = np.asarray(g.quad, dtype=np.float64)
        cx, cy = q.mean(axis=0)
        if ox <= cx < ox + patch and oy <= cy < oy + patch:
            out.append(GtInstance(q - shift, g.class_id, g.difficult))
    return out


@dataclass
class Proposals:
    boxes: np.ndarray   # (K, 6) midpoint boxes
    quads: np.ndarray   # (K, 4, 2)
    scores: np.ndarray  # (K,)
    levels: np.ndarray  # (K,) source pyramid level


def select_proposals(per_level, pre_nms=2000, nms_thr=0.8, max_num=1000):
    """Reduce per-level RPN outputs to the second-stage proposal set.

    For each level: keep the ``pre_nms`` best-scoring boxes, then run NMS at
    ``nms_thr`` on their external rectangles. Survivors of all levels are
    pooled and the ``max_num`` best are returned as quads.

    Args:
        per_level: sequence of ``(boxes (N, 6), scores (N,))``.
    """
    boxes, scores, levels = [], [], []
    for lvl, (b, s) in enumerate(per_level):
        b = as_midpoints(b).reshape(-1, 6)
        s = np.asarray(s, dtype=np.float64).reshape(-1)
        if len(b) != len(s):
            raise ValueError(f"level {lvl}: boxes and scores differ in length")
        top = score_order(s)[:pre_nms]
        b, s = b[top], s[top]
        hb = external_hbox(vertices_from_midpoint(b))
        keep = nms(hb, s, nms_thr, kind="hbox")
        boxes.append(b[keep])
        scores.append(s[keep])
        levels.append(np.full(len(keep), lvl, dtype=np.int64))
    if not boxes:
        return Proposals(np.zeros((0, 6)), np.zeros((0, 4, 2)), np.zeros(0), np.zeros(0, dtype=np.int64))
    boxes = np.concatenate(boxes)
    scores = np.concatenate(scores)
    levels = np.concatenate(levels)
    top = score_order(scores)[:max_num]
    return Proposals(boxes[top], vertices_from_midpoint(boxes[top]), scores[top], levels[top])


def postprocess_detections(dets, score_thr=0.05, nms_thr=0.1):
    """Drop detections scoring at or below ``score_thr``, then class-wise poly NMS."""
    keep = np.flatnonzero(np.asarray(dets.scores) > score_thr)
    dets = dets.subset(keep)
    if len(dets) == 0:
        return dets
    return dets.subset(batched_nms(dets.quads, dets.scores, dets.labels, nms_thr, kind="quad"))


def merge_patches(per_patch, offsets, nms_thr=0.1):
    """Shift per-patch detections into image space and run class-wise poly NMS."""
    if len(per_patch) != len(offsets):
        raise ValueError("need one offset per patch")
    quads, scores, labels = [], [], []
    for dets, (ox, oy) in zip(per_patch, offsets):
        quads.append(np.asarray(dets.quads, dtype=np.float64).reshape(-1, 4, 2) + np.array([ox, oy], float))
        scores.append(np.asarray(dets.scores, dtype=np.float64).reshape(-1))
        labels.append(np.asarray(dets.labels, dtype=np.int64).reshape(-1))
    if not quads:
        return Detections.empty()
    merged = Detections(np.concatenate(quads), np.concatenate(scores), np.concatenate(labels))
    if len(merged) == 0:
        return merged
    return merged.subset(batched_nms(merged.quads, merged.scores, merged.labels, nms_thr, kind="quad"))
