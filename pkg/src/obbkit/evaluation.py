"""VOC-style rotated detection evaluation and proposal recall."""
from dataclasses import dataclass

import numpy as np

from .geometry import as_quads
from .overlap import pairwise_quad_iou, score_order


@dataclass
class GtInstance:
    quad: np.ndarray
    class_id: int
    difficult: bool = False


@dataclass
class Annotations:
    """Ground truth of one image: ``(M, 4, 2)`` quads, labels and difficult flags."""

    quads: np.ndarray
    labels: np.ndarray
    difficult: np.ndarray

    @classmethod
    def from_instances(cls, instances):
        if not instances:
            return cls(np.zeros((0, 4, 2)), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=bool))
        return cls(np.stack([as_quads(g.quad) for g in instances]),
                   np.array([g.class_id for g in instances], dtype=np.int64),
                   np.array([bool(g.difficult) for g in instances]))


@dataclass
class Detections:
    """Detections of one image: ``(N, 4, 2)`` quads, scores and labels."""

    quads: np.ndarray
    scores: np.ndarray
    labels: np.ndarray

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 4, 2)), np.zeros(0), np.zeros(0, dtype=np.int64))

    def __len__(self):
        return len(self.scores)

    def subset(self, idx):
        return Detections(self.quads[idx], self.scores[idx], self.labels[idx])


@dataclass
class PrCurve:
    precisions: np.ndarray
    recalls: np.ndarray


def match_detections(det_quads, det_scores, gt_quads, gt_difficult=None, iou_thr=0.5):
    """Greedy TP/FP flags for single-class detections in one image.

    Detections are visited by descending score (ties by index). Each takes
    the highest-IoU unmatched non-difficult GT with IoU >= ``iou_thr`` (TP);
    failing that, a detection that reaches ``iou_thr`` on a difficult GT is
    ignored; anything else is an FP.

    Returns:
        ``(order, tp, fp)``: the visiting order and boolean flags aligned
        with it. Ignored detections have both flags False.
    """
    scores = np.asarray(det_scores, dtype=np.float64).reshape(-1)
    order = score_order(scores)
    n = len(scores)
    tp = np.zeros(n, dtype=bool)
    fp = np.zeros(n, dtype=bool)
    gt_quads = np.asarray(gt_quads, dtype=np.float64).reshape(-1, 4, 2)
    if gt_difficult is None:
        gt_difficult = np.zeros(len(gt_quads), dtype=bool)
    difficult = np.asarray(gt_difficult, dtype=bool).reshape(-1)
    if len(gt_quads) == 0:
        fp[:] = True
        return order, tp, fp
    if n == 0:
        return order, tp, fp
    iou = pairwise_quad_iou(np.asarray(det_quads, dtype=np.float64).reshape(-1, 4, 2)[order], gt_quads)
    taken = np.zeros(len(gt_quads), dtype=bool)
    for r in range(n):
        avail = np.where(~taken & ~difficult, iou[r], -1.0)
        j = int(np.argmax(avail))
        if avail[j] >= iou_thr:
            taken[j] = True
            tp[r] = True
        elif not np.any(difficult & (iou[r] >= iou_thr)):
            fp[r] = True
    return order, tp, fp


def pr_curve(tp, fp, n_pos):
    """Cumulative precision/recall over score-ordered TP/FP flags (ignored rows dropped)."""
    tp = np.asarray(tp, dtype=bool)
    fp = np.asarray(fp, dtype=bool)
    keep = tp | fp
    ctp = np.cumsum(tp[keep])
    cfp = np.cumsum(fp[keep])
    recalls = ctp / n_pos if n_pos > 0 else np.zeros(len(ctp))
    precisions = ctp / np.maximum(ctp + cfp, np.finfo(np.float64).eps)
    return PrCurve(precisions.astype(np.float64), recalls.astype(np.float64))


def average_precision(curve, metric="voc07"):
    """AP from a precision/recall curve.

    ``voc07`` averages the best precision at recall >= t for the eleven
    thresholds 0, 0.1, ..., 1. ``voc12`` integrates the monotone precision
    envelope over recall.
    """
    prec = np.asarray(curve.precisions, dtype=np.float64)
    rec = np.asarray(curve.recalls, dtype=np.float64)
    if prec.size == 0:
        return 0.0
    if metric == "voc07":
        ap = 0.0
        # k / 10 is exact at 0.3, 0.6, 0.7 where linspace/arange drift upward
        for t in np.arange(11) / 10.0:
            mask = rec >= t
            ap += prec[mask].max() if mask.any() else 0.0
        return float(ap / 11.0)
    if metric == "voc12":
        mrec = np.concatenate([[0.0], rec, [1.0]])
        mpre = np.concatenate([[0.0], prec, [0.0]])
        mpre = np.maximum.accumulate(mpre[::-1])[::-1]
        steps = np.flatnonzero(mrec[1:] != mrec[:-1])
        return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))
    raise ValueError(f"unknown AP metric {metric!r}")


def evaluate_map(detections, annotations, num_classes, metric="voc07", iou_thr=0.5):
    """Per-class AP and their mean over classes that have non-difficult GT.

    Args:
        detections: list of :class:`Detections`, one per image.
        annotations: list of :class:`Annotations`, aligned with ``detections``.

    Returns:
        ``(ap, mean_ap)`` where ``ap`` has NaN for classes without GT.
    """
    if len(detections) != len(annotations):
        raise ValueError("detections and annotations must cover the same images")
    ap = np.full(num_classes, np.nan)
    for cls in range(num_classes):
        scores, tps, fps = [], [], []
        n_pos = 0
        for det, ann in zip(detections, annotations):
            dm = np.asarray(det.labels) == cls
            gm = np.asarray(ann.labels) == cls
            n_pos += int(np.sum(~np.asarray(ann.difficult, dtype=bool)[gm]))
            if not dm.any():
                continue
            order, tp, fp = match_detections(det.quads[dm], det.scores[dm], ann.quads[gm],
                                             ann.difficult[gm], iou_thr)
            scores.append(det.scores[dm][order])
            tps.append(tp)
            fps.append(fp)
        if n_pos == 0:
            continue
        if not scores:
            ap[cls] = 0.0
            continue
        scores = np.concatenate(scores)
        glob = score_order(scores)
        curve = pr_curve(np.concatenate(tps)[glob], np.concatenate(fps)[glob], n_pos)
        ap[cls] = average_precision(curve, metric)
    valid = ~np.isnan(ap)
    mean_ap = float(ap[valid].mean()) if valid.any() else 0.0
    return ap, mean_ap


def proposal_recall(proposal_quads, proposal_scores, gt_quads, k, iou_thr=0.5, gt_difficult=None):
    """Fraction of non-difficult GT recovered by the top-``k`` proposals.

    Proposals are taken by descending score; each claims the highest-IoU
    unclaimed GT with IoU >= ``iou_thr``. NaN when there is no GT.
    """
    hit, total = recall_counts(proposal_quads, proposal_scores, gt_quads, k, iou_thr, gt_difficult)
    return hit / total if total else float("nan")


def recall_counts(proposal_quads, proposal_scores, gt_quads, k, iou_thr=0.5, gt_difficult=None):
    """``(n_matched, n_gt)`` behind :func:`proposal_recall`, for pooling over images."""
    if k <= 0:
        raise ValueError("k must be positive")
    gt = np.asarray(gt_quads, dtype=np.float64).reshape(-1, 4, 2)
    if gt_difficult is not None:
        gt = gt[~np.asarray(gt_difficult, dtype=bool)]
    if len(gt) == 0:
        return 0, 0
    top = score_order(proposal_scores)[:k]
    if len(top) == 0:
        return 0, len(gt)
    props = np.asarray(proposal_quads, dtype=np.float64).reshape(-1, 4, 2)[top]
    iou = pairwise_quad_iou(props, gt)
    taken = np.zeros(len(gt), dtype=bool)
    for r in range(len(props)):
        avail = np.where(taken, -1.0, iou[r])
        j = int(np.argmax(avail))
        if avail[j] >= iou_thr:
            taken[j] = True
    return int(taken.sum()), len(gt)
