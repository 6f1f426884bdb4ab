"""Compiled inner loops: convex clipping, greedy NMS and rotated RoIAlign.

Everything here operates on plain float64/int64 arrays that the public
modules have already validated and normalised (quads counter-clockwise,
degenerate shapes flagged through a zero area).
"""
import math
import os

import numpy as np
from numba import config, njit, prange

if "NUMBA_THREADING_LAYER" not in os.environ:
    # prefer OpenMP; older system TBB builds are rejected by numba with a warning
    config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

# Sutherland-Hodgman emits at most two points per input edge.
_CLIP_BUF = 64


@njit(cache=True, inline="always")
def _clip_area(ax, ay, bx, by, sx, sy, tx, ty):
    """Area of the intersection of two CCW convex quads.

    ``ax, ay`` is the subject polygon, ``bx, by`` the clip polygon. The
    ``s``/``t`` arrays are scratch buffers of length ``_CLIP_BUF``.
    """
    n = 4
    for i in range(4):
        sx[i] = ax[i]
        sy[i] = ay[i]
    for k in range(4):
        x0 = bx[k]
        y0 = by[k]
        ex = bx[(k + 1) % 4] - x0
        ey = by[(k + 1) % 4] - y0
        m = 0
        px = sx[n - 1]
        py = sy[n - 1]
        dp = ex * (py - y0) - ey * (px - x0)
        for i in range(n):
            qx = sx[i]
            qy = sy[i]
            dq = ex * (qy - y0) - ey * (qx - x0)
            if (dp >= 0.0) != (dq >= 0.0):
                t = dp / (dp - dq)
                tx[m] = px + t * (qx - px)
                ty[m] = py + t * (qy - py)
                m += 1
            if dq >= 0.0:
                tx[m] = qx
                ty[m] = qy
                m += 1
            px = qx
            py = qy
            dp = dq
        if m < 3:
            return 0.0
        n = m
        for i in range(n):
            sx[i] = tx[i]
            sy[i] = ty[i]
    acc = 0.0
    for i in range(n):
        j = (i + 1) % n
        acc += sx[i] * sy[j] - sx[j] * sy[i]
    return max(0.5 * acc, 0.0)


@njit(cache=True)
def orient_quads(q, area_eps, convex_tol):
    """CCW copies, areas (0 when degenerate) and a per-quad convexity flag.

    Mirrors ``geometry.signed_area`` and ``geometry.is_convex`` in one pass.
    """
    n = q.shape[0]
    out = np.empty_like(q)
    area = np.zeros(n)
    convex = np.ones(n, dtype=np.bool_)
    for k in range(n):
        acc = 0.0
        for i in range(4):
            j = (i + 1) % 4
            acc += q[k, i, 0] * q[k, j, 1] - q[k, j, 0] * q[k, i, 1]
        sa = 0.5 * acc
        if abs(sa) <= area_eps:
            for i in range(4):
                out[k, i, 0] = q[k, i, 0]
                out[k, i, 1] = q[k, i, 1]
            continue
        all_pos = True
        all_neg = True
        for i in range(4):
            j = (i + 1) % 4
            l = (i + 2) % 4
            ex = q[k, j, 0] - q[k, i, 0]
            ey = q[k, j, 1] - q[k, i, 1]
            fx = q[k, l, 0] - q[k, j, 0]
            fy = q[k, l, 1] - q[k, j, 1]
            cross = ex * fy - ey * fx
            slack = convex_tol * math.sqrt(ex * ex + ey * ey) * math.sqrt(fx * fx + fy * fy)
            if cross < -slack:
                all_pos = False
            if cross > slack:
                all_neg = False
        convex[k] = all_pos or all_neg
        area[k] = abs(sa)
        for i in range(4):
            src = i if sa > 0.0 else 3 - i
            out[k, i, 0] = q[k, src, 0]
            out[k, i, 1] = q[k, src, 1]
    return out, area, convex


@njit(cache=True)
def quad_inter_elementwise(a, b, area_a, area_b):
    n = a.shape[0]
    out = np.zeros(n)
    sx = np.empty(_CLIP_BUF)
    sy = np.empty(_CLIP_BUF)
    tx = np.empty(_CLIP_BUF)
    ty = np.empty(_CLIP_BUF)
    for i in range(n):
        if area_a[i] > 0.0 and area_b[i] > 0.0:
            out[i] = _clip_area(a[i, :, 0], a[i, :, 1], b[i, :, 0], b[i, :, 1],
                                sx, sy, tx, ty)
    return out


@njit(cache=True)
def quad_iou_elementwise(a, b, area_a, area_b):
    inter = quad_inter_elementwise(a, b, area_a, area_b)
    out = np.zeros(a.shape[0])
    for i in range(a.shape[0]):
        union = area_a[i] + area_b[i] - inter[i]
        if union > 0.0:
            out[i] = min(max(inter[i] / union, 0.0), 1.0)
    return out


@njit(cache=True, parallel=True)
def quad_iou_matrix(a, b, area_a, area_b):
    n = a.shape[0]
    k = b.shape[0]
    out = np.zeros((n, k))
    for i in prange(n):
        sx = np.empty(_CLIP_BUF)
        sy = np.empty(_CLIP_BUF)
        tx = np.empty(_CLIP_BUF)
        ty = np.empty(_CLIP_BUF)
        if area_a[i] <= 0.0:
            continue
        for j in range(k):
            if area_b[j] <= 0.0:
                continue
            inter = _clip_area(a[i, :, 0], a[i, :, 1], b[j, :, 0], b[j, :, 1],
                               sx, sy, tx, ty)
            union = area_a[i] + area_b[j] - inter
            if union > 0.0:
                out[i, j] = min(max(inter / union, 0.0), 1.0)
    return out


@njit(cache=True, inline="always")
def _hbox_iou(b1, b2):
    # boxes as (x1, y1, x2, y2)
    iw = min(b1[2], b2[2]) - max(b1[0], b2[0])
    ih = min(b1[3], b2[3]) - max(b1[1], b2[1])
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = (b1[2] - b1[0]) * (b1[3] - b1[1]) + (b2[2] - b2[0]) * (b2[3] - b2[1]) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


@njit(cache=True)
def nms_hbox(corners, order, threshold):
    n = order.shape[0]
    suppressed = np.zeros(corners.shape[0], dtype=np.bool_)
    keep = np.empty(n, dtype=np.int64)
    nk = 0
    for ii in range(n):
        i = order[ii]
        if suppressed[i]:
            continue
        keep[nk] = i
        nk += 1
        for jj in range(ii + 1, n):
            j = order[jj]
            if not suppressed[j] and _hbox_iou(corners[i], corners[j]) > threshold:
                suppressed[j] = True
    return keep[:nk]


@njit(cache=True)
def nms_quad(quads, areas, order, threshold):
    n = order.shape[0]
    suppressed = np.zeros(quads.shape[0], dtype=np.bool_)
    keep = np.empty(n, dtype=np.int64)
    sx = np.empty(_CLIP_BUF)
    sy = np.empty(_CLIP_BUF)
    tx = np.empty(_CLIP_BUF)
    ty = np.empty(_CLIP_BUF)
    nk = 0
    for ii in range(n):
        i = order[ii]
        if suppressed[i]:
            continue
        keep[nk] = i
        nk += 1
        if areas[i] <= 0.0:
            continue
        for jj in range(ii + 1, n):
            j = order[jj]
            if suppressed[j] or areas[j] <= 0.0:
                continue
            inter = _clip_area(quads[i, :, 0], quads[i, :, 1], quads[j, :, 0], quads[j, :, 1],
                               sx, sy, tx, ty)
            union = areas[i] + areas[j] - inter
            if union > 0.0 and inter / union > threshold:
                suppressed[j] = True
    return keep[:nk]


@njit(cache=True, parallel=True)
def rroi_align_padded(padded, rois, m, s):
    """Pool ``rois`` from a zero-bordered (H+2, W+2, C) feature map.

    Returns an (N, m, m, C) array. The one-cell zero border makes every
    bilinear neighbour of a sample inside [-1, W) x [-1, H) addressable.
    """
    hp, wp, c = padded.shape
    h = hp - 2
    w = wp - 2
    n = rois.shape[0]
    out = np.zeros((n, m, m, c))
    inv_n = 1.0 / (s * s)
    for r in prange(n):
        xr = rois[r, 0]
        yr = rois[r, 1]
        wr = rois[r, 2]
        hr = rois[r, 3]
        cos_t = math.cos(rois[r, 4])
        sin_t = math.sin(rois[r, 4])
        bw = wr / m
        bh = hr / m
        for i in range(m):
            for j in range(m):
                acc = out[r, i, j]
                for iy in range(s):
                    v = -0.5 * hr + (i + (iy + 0.5) / s) * bh
                    for ix in range(s):
                        u = -0.5 * wr + (j + (ix + 0.5) / s) * bw
                        x = xr + u * cos_t - v * sin_t
                        y = yr + u * sin_t + v * cos_t
                        if not (x >= -1.0 and x < w and y >= -1.0 and y < h):
                            continue
                        x0 = math.floor(x)
                        y0 = math.floor(y)
                        fx = x - x0
                        fy = y - y0
                        px = int(x0) + 1
                        py = int(y0) + 1
                        f00 = padded[py, px]
                        f01 = padded[py, px + 1]
                        f10 = padded[py + 1, px]
                        f11 = padded[py + 1, px + 1]
                        for ch in range(c):
                            top = f00[ch] + fx * (f01[ch] - f00[ch])
                            bot = f10[ch] + fx * (f11[ch] - f10[ch])
                            acc[ch] += top + fy * (bot - top)
                for ch in range(c):
                    acc[ch] *= inv_n
    return out
