"""IoU for axis-aligned boxes and convex quads, a raster oracle, and NMS."""
import numpy as np

from . import _kernels
from .geometry import (AREA_EPS, CONVEX_TOL, GeometryError, as_hboxes, as_quads, hbox_to_corners, quad_area,
                       signed_area)


def _prepare_quads(quads):
    """Counter-clockwise copies of ``quads`` plus their areas (0 if degenerate)."""
    q = np.ascontiguousarray(as_quads(quads), dtype=np.float64)
    shape = q.shape[:-2]
    ccw, area, convex = _kernels.orient_quads(q.reshape(-1, 4, 2), AREA_EPS, CONVEX_TOL)
    if not convex.all():
        raise GeometryError("quad IoU requires convex quads")
    return ccw.reshape(q.shape), area.reshape(shape)


def hbox_iou(a, b):
    """Element-wise IoU of ``(cx, cy, w, h)`` boxes with broadcasting."""
    ca = hbox_to_corners(a)
    cb = hbox_to_corners(b)
    lt = np.maximum(ca[..., :2], cb[..., :2])
    rb = np.minimum(ca[..., 2:], cb[..., 2:])
    wh = np.clip(rb - lt, 0.0, None)
    inter = wh[..., 0] * wh[..., 1]
    area_a = (ca[..., 2] - ca[..., 0]) * (ca[..., 3] - ca[..., 1])
    area_b = (cb[..., 2] - cb[..., 0]) * (cb[..., 3] - cb[..., 1])
    union = area_a + area_b - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        iou = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
    return iou if iou.ndim else float(iou)


def pairwise_hbox_iou(a, b):
    """``(N, M)`` IoU matrix between two sets of hboxes."""
    a = as_hboxes(a).reshape(-1, 4)
    b = as_hboxes(b).reshape(-1, 4)
    return hbox_iou(a[:, None, :], b[None, :, :])


def _broadcast_quads(a, b):
    qa = as_quads(a)
    qb = as_quads(b)
    shape = np.broadcast_shapes(qa.shape, qb.shape)
    qa = np.broadcast_to(qa, shape).reshape(-1, 4, 2)
    qb = np.broadcast_to(qb, shape).reshape(-1, 4, 2)
    return qa, qb, shape[:-2]


def quad_intersection_area(a, b):
    """Area of the intersection of convex quads (element-wise, broadcasting).

    Raises:
        GeometryError: if a non-degenerate quad is not convex.
    """
    qa, qb, shape = _broadcast_quads(a, b)
    qa, area_a = _prepare_quads(qa)
    qb, area_b = _prepare_quads(qb)
    out = _kernels.quad_inter_elementwise(qa, qb, area_a, area_b).reshape(shape)
    return out if out.ndim else float(out)


def quad_iou(a, b):
    """Exact IoU of convex quads via polygon clipping (element-wise).

    Degenerate (zero-area) quads have IoU 0 with everything.
    """
    qa, qb, shape = _broadcast_quads(a, b)
    qa, area_a = _prepare_quads(qa)
    qb, area_b = _prepare_quads(qb)
    out = _kernels.quad_iou_elementwise(qa, qb, area_a, area_b).reshape(shape)
    return out if out.ndim else float(out)


def pairwise_quad_iou(a, b):
    """``(N, M)`` quad IoU matrix."""
    qa, area_a = _prepare_quads(as_quads(a).reshape(-1, 4, 2))
    qb, area_b = _prepare_quads(as_quads(b).reshape(-1, 4, 2))
    return _kernels.quad_iou_matrix(qa, qb, area_a, area_b)


def _scanline_intervals(q, ys):
    """x-interval covered by convex quad ``q`` on each horizontal line ``ys``.

    Returns ``(lo, hi)``; rows that miss the quad get ``lo > hi``.
    """
    lo = np.full(ys.shape, np.inf)
    hi = np.full(ys.shape, -np.inf)
    for k in range(4):
        (x0, y0), (x1, y1) = q[k], q[(k + 1) % 4]
        if y0 == y1:
            on = ys == y0
            lo = np.where(on, np.minimum(lo, min(x0, x1)), lo)
            hi = np.where(on, np.maximum(hi, max(x0, x1)), hi)
            continue
        t = (ys - y0) / (y1 - y0)
        hit = (t >= 0.0) & (t <= 1.0)
        x = x0 + t * (x1 - x0)
        lo = np.where(hit, np.minimum(lo, x), lo)
        hi = np.where(hit, np.maximum(hi, x), hi)
    return lo, hi


def _lattice_count(lo, hi, x0, dx, n):
    """Number of lattice columns ``x0 + (k + 0.5) dx`` (0 <= k < n) in ``[lo, hi]``."""
    with np.errstate(invalid="ignore"):
        k_lo = np.ceil((lo - x0) / dx - 0.5)
        k_hi = np.floor((hi - x0) / dx - 0.5)
    k_lo = np.clip(np.nan_to_num(k_lo, nan=n, posinf=n, neginf=0), 0, n)
    k_hi = np.clip(np.nan_to_num(k_hi, nan=-1, posinf=n - 1, neginf=-1), -1, n - 1)
    return np.clip(k_hi - k_lo + 1, 0, None)


def _inside_convex(q, px, py):
    sa = signed_area(q)
    sign = 1.0 if sa >= 0 else -1.0
    inside = np.ones(px.shape, dtype=bool)
    for k in range(4):
        (x0, y0), (x1, y1) = q[k], q[(k + 1) % 4]
        cross = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
        inside &= sign * cross >= 0
    return inside


def rasterized_iou_oracle(a, b, grid_n=2000, method="scanline"):
    """Grid-sampled IoU of two convex quads, used as an independent check.

    Samples the ``grid_n x grid_n`` cell centres of the joint bounding box and
    counts those inside each quad and inside both. ``method="points"`` tests
    every lattice point individually; ``"scanline"`` counts the same points
    row by row from each quad's x-interval and is much faster.
    """
    if grid_n < 100:
        raise ValueError("grid_n must be >= 100")
    qa = as_quads(a)
    qb = as_quads(b)
    if quad_area(qa) <= AREA_EPS or quad_area(qb) <= AREA_EPS:
        return 0.0
    pts = np.concatenate([qa, qb])
    x0, y0 = pts.min(axis=0)
    x1, y1 = pts.max(axis=0)
    dx = (x1 - x0) / grid_n
    dy = (y1 - y0) / grid_n
    if method == "points":
        xs = x0 + (np.arange(grid_n) + 0.5) * dx
        ys = y0 + (np.arange(grid_n) + 0.5) * dy
        px, py = np.meshgrid(xs, ys)
        in_a = _inside_convex(qa, px, py)
        in_b = _inside_convex(qb, px, py)
        n_a, n_b, n_ab = in_a.sum(), in_b.sum(), (in_a & in_b).sum()
    elif method == "scanline":
        ys = y0 + (np.arange(grid_n) + 0.5) * dy
        lo_a, hi_a = _scanline_intervals(qa, ys)
        lo_b, hi_b = _scanline_intervals(qb, ys)
        n_a = _lattice_count(lo_a, hi_a, x0, dx, grid_n).sum()
        n_b = _lattice_count(lo_b, hi_b, x0, dx, grid_n).sum()
        n_ab = _lattice_count(np.maximum(lo_a, lo_b), np.minimum(hi_a, hi_b), x0, dx, grid_n).sum()
    else:
        raise ValueError(f"unknown method {method!r}")
    union = n_a + n_b - n_ab
    return float(n_ab / union) if union > 0 else 0.0


def score_order(scores):
    """Indices sorting ``scores`` descending, ties by ascending index."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    return np.argsort(-scores, kind="stable")


def nms(shapes, scores, iou_threshold, kind="quad"):
    """Greedy non-maximum suppression.

    Boxes are visited in descending score order (ties by input index); each
    kept box suppresses every later box whose IoU with it exceeds
    ``iou_threshold``.

    Args:
        shapes: ``(N, 4)`` hboxes when ``kind="hbox"``, ``(N, 4, 2)`` quads
            when ``kind="quad"``.
        scores: ``(N,)`` scores.
        iou_threshold: suppression threshold in ``[0, 1]``.
        kind: ``"hbox"`` or ``"quad"``.

    Returns:
        int64 array of kept indices in keep order.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError("iou_threshold must lie in [0, 1]")
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if scores.size == 0:
        return np.empty(0, dtype=np.int64)
    order = score_order(scores).astype(np.int64)
    if kind == "hbox":
        corners = np.ascontiguousarray(hbox_to_corners(np.asarray(shapes).reshape(-1, 4)))
        if len(corners) != len(scores):
            raise ValueError("shapes and scores differ in length")
        return _kernels.nms_hbox(corners, order, float(iou_threshold))
    if kind == "quad":
        q, area = _prepare_quads(as_quads(shapes).reshape(-1, 4, 2))
        if len(q) != len(scores):
            raise ValueError("shapes and scores differ in length")
        return _kernels.nms_quad(q, area, order, float(iou_threshold))
    raise ValueError(f"unknown NMS kind {kind!r}")


def batched_nms(shapes, scores, labels, iou_threshold, kind="quad"):
    """Class-wise NMS; returns kept indices sorted by score (ties by index)."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    shapes = np.asarray(shapes, dtype=np.float64)
    kept = []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        kept.append(idx[nms(shapes[idx], scores[idx], iou_threshold, kind)])
    if not kept:
        return np.empty(0, dtype=np.int64)
    kept = np.sort(np.concatenate(kept))
    return kept[score_order(scores[kept])]


def topk_by_score(scores, k):
    """Indices of the ``k`` highest scores, stable on ties."""
    if k < 0:
        raise ValueError("k must be non-negative")
    return score_order(scores)[:k]
