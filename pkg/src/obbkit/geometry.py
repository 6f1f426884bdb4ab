"""Box representations and the conversions between them.

Shapes used throughout the package (``...`` means any batch prefix):

* hbox      ``(..., 4)``  ``(cx, cy, w, h)``
* midpoint  ``(..., 6)``  ``(cx, cy, w, h, da, db)``; ``da`` shifts the top
  vertex along x from the top-side midpoint, ``db`` shifts the right vertex
  along y from the right-side midpoint.
* quad      ``(..., 4, 2)`` four ordered vertices
* rect      ``(..., 5)``  ``(cx, cy, w, h, theta)`` with ``w`` the longer side
  and ``theta`` in ``[-pi/2, pi/2)``.

All functions accept a single box or a batch and return the same layout.
"""
import math

import numpy as np

# pixel tolerance for the parallelogram / rectangle / tie-break predicates
GEOM_TOL = 1e-6
# areas at or below this are treated as degenerate
AREA_EPS = 1e-12
CONVEX_TOL = 1e-9


class GeometryError(ValueError):
    """Raised when a shape violates the preconditions of a conversion."""


def _as_float(a, last_shape, name):
    arr = np.asarray(a, dtype=np.float64)
    if arr.shape[arr.ndim - len(last_shape):] != last_shape:
        raise GeometryError(f"{name} must have trailing shape {last_shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"{name} contains non-finite values")
    return arr


def as_hboxes(a):
    return _as_float(a, (4,), "hbox")


def as_midpoints(a):
    return _as_float(a, (6,), "midpoint box")


def as_quads(a):
    arr = np.asarray(a, dtype=np.float64)
    if arr.shape[-1:] == (8,):
        arr = arr.reshape(arr.shape[:-1] + (4, 2))
    return _as_float(arr, (4, 2), "quad")


def as_rects(a):
    return _as_float(a, (5,), "rotated rect")


def signed_area(quads):
    """Shoelace signed area; positive for counter-clockwise order in a y-up frame."""
    q = as_quads(quads)
    x = q[..., 0]
    y = q[..., 1]
    return 0.5 * np.sum(x * np.roll(y, -1, axis=-1) - np.roll(x, -1, axis=-1) * y, axis=-1)


def quad_area(quads):
    return np.abs(signed_area(quads))


def is_degenerate(quads):
    """True where the quad encloses (numerically) zero area."""
    return quad_area(quads) <= AREA_EPS


def is_convex(quads, tol=CONVEX_TOL):
    """True where consecutive edge turns never change sign."""
    q = as_quads(quads)
    e = np.roll(q, -1, axis=-2) - q
    e_next = np.roll(e, -1, axis=-2)
    cross = e[..., 0] * e_next[..., 1] - e[..., 1] * e_next[..., 0]
    scale = np.linalg.norm(e, axis=-1) * np.linalg.norm(e_next, axis=-1)
    slack = tol * scale
    return np.all(cross >= -slack, axis=-1) | np.all(cross <= slack, axis=-1)


def vertices_from_midpoint(boxes):
    """Recover the four vertices ``v1..v4`` of midpoint-offset boxes.

    ``v1`` sits on the top side, ``v2`` on the right, ``v3`` on the bottom and
    ``v4`` on the left, so the result is always a parallelogram centred on
    ``(cx, cy)``. Zero-area outputs are legal; test them with
    :func:`is_degenerate`.
    """
    b = as_midpoints(boxes)
    cx, cy, w, h, da, db = np.moveaxis(b, -1, 0)
    if np.any(w <= 0) or np.any(h <= 0):
        raise GeometryError("midpoint box width and height must be positive")
    if np.any(np.abs(da) > 0.5 * w + GEOM_TOL) or np.any(np.abs(db) > 0.5 * h + GEOM_TOL):
        raise GeometryError("midpoint offsets must satisfy |da| <= w/2 and |db| <= h/2")
    out = np.empty(b.shape[:-1] + (4, 2))
    out[..., 0, 0] = cx + da
    out[..., 0, 1] = cy - 0.5 * h
    out[..., 1, 0] = cx + 0.5 * w
    out[..., 1, 1] = cy + db
    out[..., 2, 0] = cx - da
    out[..., 2, 1] = cy + 0.5 * h
    out[..., 3, 0] = cx - 0.5 * w
    out[..., 3, 1] = cy - db
    return out


def external_hbox(quads):
    """Tight axis-aligned ``(cx, cy, w, h)`` around each quad."""
    q = as_quads(quads)
    lo = q.min(axis=-2)
    hi = q.max(axis=-2)
    return np.concatenate([0.5 * (lo + hi), hi - lo], axis=-1)


def hbox_to_corners(hboxes):
    """``(cx, cy, w, h)`` -> ``(x1, y1, x2, y2)``."""
    b = as_hboxes(hboxes)
    half = 0.5 * b[..., 2:]
    return np.concatenate([b[..., :2] - half, b[..., :2] + half], axis=-1)


def hbox_to_quad(hboxes):
    x1, y1, x2, y2 = np.moveaxis(hbox_to_corners(hboxes), -1, 0)
    return np.stack([np.stack([x1, y1], -1), np.stack([x2, y1], -1),
                     np.stack([x2, y2], -1), np.stack([x1, y2], -1)], axis=-2)


def midpoint_from_quad(quads):
    """Midpoint-offset parameters of parallelogram-like quads.

    The quad's external rectangle gives ``(cx, cy, w, h)``. ``da`` is read off
    the vertex touching the top side and ``db`` off the vertex touching the
    right side. When a vertex touches a corner (axis-aligned input) the top
    vertex is the minimal-y one with ties going to minimal x, and the right
    vertex is the maximal-x one with ties going to minimal y.

    Raises:
        GeometryError: if any quad has zero area.
    """
    q = as_quads(quads)
    if np.any(is_degenerate(q)):
        raise GeometryError("cannot take the midpoint representation of a zero-area quad")
    hb = external_hbox(q)
    x = q[..., 0]
    y = q[..., 1]
    ymin = y.min(axis=-1, keepdims=True)
    xmax = x.max(axis=-1, keepdims=True)

    top_cand = y <= ymin + GEOM_TOL
    top_idx = np.argmin(np.where(top_cand, x, np.inf), axis=-1)
    right_cand = x >= xmax - GEOM_TOL
    right_idx = np.argmin(np.where(right_cand, y, np.inf), axis=-1)

    x_top = np.take_along_axis(x, top_idx[..., None], axis=-1)[..., 0]
    y_right = np.take_along_axis(y, right_idx[..., None], axis=-1)[..., 0]
    da = x_top - hb[..., 0]
    db = y_right - hb[..., 1]
    out = np.concatenate([hb, da[..., None], db[..., None]], axis=-1)

    # A single corner-contact vertex (e.g. da = w/2 on a non-rectangle) can be
    # picked as both top and right above; relabel those from the vertex cycle.
    bad = ~_reproduces(out, q)
    if np.any(bad):
        out[bad] = _midpoint_by_labeling(q[bad], hb[bad])
    return out


def _recon(b):
    cx, cy, w, h, da, db = np.moveaxis(b, -1, 0)
    return np.stack([np.stack([cx + da, cy - 0.5 * h], -1), np.stack([cx + 0.5 * w, cy + db], -1),
                     np.stack([cx - da, cy + 0.5 * h], -1), np.stack([cx - 0.5 * w, cy - db], -1)], axis=-2)


def _reproduces(b, q):
    scale = 1.0 + np.abs(q).max(axis=(-2, -1))
    best = np.full(q.shape[:-2], np.inf)
    r = _recon(b)
    for k in range(4):
        best = np.minimum(best, np.abs(np.roll(r, k, axis=-2) - q).max(axis=(-2, -1)))
        best = np.minimum(best, np.abs(np.roll(r[..., ::-1, :], k, axis=-2) - q).max(axis=(-2, -1)))
    return best <= GEOM_TOL * scale


def _midpoint_by_labeling(q, hb):
    """Best-fitting midpoint parameters over all eight cyclic labelings of ``q``."""
    best = np.full(len(q), np.inf)
    out = np.empty((len(q), 6))
    for flip in (False, True):
        qq = q[:, ::-1] if flip else q
        for k in range(4):
            lab = np.roll(qq, -k, axis=1)
            cand = np.concatenate([hb, lab[:, 0, :1] - hb[:, :1], lab[:, 1, 1:] - hb[:, 1:2]], axis=-1)
            err = np.abs(_recon(cand) - lab).max(axis=(-2, -1))
            better = err < best - 1e-15
            best = np.where(better, err, best)
            out[better] = cand[better]
    return out


def normalize_angle(theta):
    """Wrap an undirected line angle into ``[-pi/2, pi/2)``."""
    return np.mod(np.asarray(theta, dtype=np.float64) + 0.5 * math.pi, math.pi) - 0.5 * math.pi


def canonicalize_rect(rects):
    """Make ``w`` the longer side and ``theta`` lie in ``[-pi/2, pi/2)``.

    Squares (``|w - h| <= GEOM_TOL``) get ``theta`` in ``[-pi/2, 0)``.
    """
    r = as_rects(rects).copy()
    swap = r[..., 3] > r[..., 2] + GEOM_TOL
    w = np.where(swap, r[..., 3], r[..., 2])
    h = np.where(swap, r[..., 2], r[..., 3])
    theta = normalize_angle(np.where(swap, r[..., 4] + 0.5 * math.pi, r[..., 4]))
    square = np.abs(w - h) <= GEOM_TOL
    theta = np.where(square & (theta >= 0.0), theta - 0.5 * math.pi, theta)
    r[..., 2] = w
    r[..., 3] = h
    r[..., 4] = theta
    return r


def rect_to_quad(rects):
    """Corners of rotated rectangles.

    Corner order follows the local frame ``(-w/2,-h/2), (w/2,-h/2), (w/2,h/2),
    (-w/2,h/2)``, each rotated by ``theta`` about the centre.
    """
    r = as_rects(rects)
    cx, cy, w, h, t = np.moveaxis(r, -1, 0)
    c = np.cos(t)
    s = np.sin(t)
    u = np.array([-0.5, 0.5, 0.5, -0.5])
    v = np.array([-0.5, -0.5, 0.5, 0.5])
    lu = w[..., None] * u
    lv = h[..., None] * v
    x = cx[..., None] + lu * c[..., None] - lv * s[..., None]
    y = cy[..., None] + lu * s[..., None] + lv * c[..., None]
    return np.stack([x, y], axis=-1)


def is_parallelogram(quads, tol=GEOM_TOL):
    q = as_quads(quads)
    return np.all(np.abs((q[..., 0, :] + q[..., 2, :]) - (q[..., 1, :] + q[..., 3, :])) <= 2 * tol,
                  axis=-1)


def parallelogram_to_rect(quads):
    """Rectify parallelograms by stretching the shorter diagonal.

    The shorter diagonal is scaled about the centre to the length of the
    longer one; the four resulting points form a rectangle, returned as a
    canonical ``(cx, cy, w, h, theta)``.

    Raises:
        GeometryError: for non-parallelograms or a zero-length diagonal.
    """
    q = as_quads(quads)
    if not np.all(is_parallelogram(q)):
        raise GeometryError("quad is not a parallelogram (diagonal midpoints differ)")
    center = 0.25 * q.sum(axis=-2)
    d1 = 0.5 * (q[..., 2, :] - q[..., 0, :])
    d2 = 0.5 * (q[..., 3, :] - q[..., 1, :])
    l1 = np.linalg.norm(d1, axis=-1)
    l2 = np.linalg.norm(d2, axis=-1)
    if np.any(l1 <= GEOM_TOL) or np.any(l2 <= GEOM_TOL):
        raise GeometryError("parallelogram has a zero-length diagonal")
    half = np.maximum(l1, l2)[..., None]
    a = d1 / l1[..., None] * half
    b = d2 / l2[..., None] * half
    # rectangle corners c+a, c+b, c-a, c-b: sides b-a and -(a+b)
    s1 = b - a
    s2 = -(a + b)
    n1 = np.linalg.norm(s1, axis=-1)
    n2 = np.linalg.norm(s2, axis=-1)
    first = n1 >= n2
    long_side = np.where(first[..., None], s1, s2)
    w = np.maximum(n1, n2)
    h = np.minimum(n1, n2)
    theta = np.arctan2(long_side[..., 1], long_side[..., 0])
    rect = np.concatenate([center, w[..., None], h[..., None], theta[..., None]], axis=-1)
    return canonicalize_rect(rect)


def quads_equal_up_to_rotation(a, b, tol=GEOM_TOL):
    """True if ``b`` equals ``a`` under some cyclic relabelling of vertices."""
    a = as_quads(a)
    b = as_quads(b)
    best = np.full(np.broadcast_shapes(a.shape, b.shape)[:-2], np.inf)
    for k in range(4):
        err = np.abs(np.roll(b, k, axis=-2) - a).max(axis=(-2, -1))
        best = np.minimum(best, err)
    return best <= tol
