"""Rotated RoIAlign over strided feature maps.

Feature coordinates are continuous with cell ``(row i, col j)`` centred at
``(j, i)``. Bilinear taps that fall outside the map read zero.
"""
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import as_rects

VALID_STRIDES = (1, 2, 4, 8, 16, 32, 64)


@dataclass
class FeatureMap:
    """A ``(C, H, W)`` feature tensor sampled every ``stride`` image pixels."""

    data: np.ndarray
    stride: int = 1

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim == 2:
            self.data = self.data[None]
        if self.data.ndim != 3 or self.data.shape[0] < 1:
            raise ValueError(f"feature map must be (C, H, W), got {self.data.shape}")
        if self.stride not in VALID_STRIDES:
            raise ValueError(f"unsupported stride {self.stride}")
        self._padded = None

    @property
    def channels(self):
        return self.data.shape[0]

    @property
    def height(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]

    def padded_hwc(self):
        """Channel-last copy with a one-cell zero border, cached."""
        if self._padded is None:
            c, h, w = self.data.shape
            p = np.zeros((h + 2, w + 2, c))
            p[1:-1, 1:-1] = np.moveaxis(self.data, 0, -1)
            self._padded = p
        return self._padded


def project_rroi(rects, stride):
    """Map image-space rotated rects onto a feature map of the given stride.

    Sizes are divided by the stride; the centre is divided and floored.
    """
    if stride <= 0:
        raise ValueError("stride must be positive")
    r = as_rects(rects)
    out = r.copy()
    out[..., 0] = np.floor(r[..., 0] / stride)
    out[..., 1] = np.floor(r[..., 1] / stride)
    out[..., 2] = r[..., 2] / stride
    out[..., 3] = r[..., 3] / stride
    return out


def bilinear_sample(fmap, c, x, y):
    """Zero-padded bilinear read of channel ``c`` at feature coordinate ``(x, y)``."""
    data = fmap.data[c]
    h, w = data.shape
    x0 = int(np.floor(x))
    y0 = int(np.floor(y))
    fx = x - x0
    fy = y - y0
    total = 0.0
    for yy, wy in ((y0, 1.0 - fy), (y0 + 1, fy)):
        for xx, wx in ((x0, 1.0 - fx), (x0 + 1, fx)):
            if 0 <= yy < h and 0 <= xx < w:
                total += wy * wx * data[yy, xx]
    return float(total)


def sample_points(rroi, m=7, samples_per_bin_axis=2):
    """Feature-space sample locations, shape ``(m, m, s*s, 2)``.

    Bin ``(i, j)`` covers the ``i``-th slice along the RoI height and the
    ``j``-th along its width; samples sit at regular sub-bin centres.
    """
    xr, yr, wr, hr, theta = as_rects(rroi)
    s = samples_per_bin_axis
    frac = (np.arange(s) + 0.5) / s
    u = -0.5 * wr + (np.arange(m)[:, None] + frac[None, :]).reshape(-1) * (wr / m)
    v = -0.5 * hr + (np.arange(m)[:, None] + frac[None, :]).reshape(-1) * (hr / m)
    vv, uu = np.meshgrid(v, u, indexing="ij")
    x = xr + uu * np.cos(theta) - vv * np.sin(theta)
    y = yr + uu * np.sin(theta) + vv * np.cos(theta)
    pts = np.stack([x, y], axis=-1).reshape(m, s, m, s, 2)
    return pts.transpose(0, 2, 1, 3, 4).reshape(m, m, s * s, 2)


def rroi_align(fmap, rrois, m=7, samples_per_bin_axis=2):
    """Average-pool rotated RoIs into ``m x m`` bins.

    Args:
        fmap: :class:`FeatureMap`.
        rrois: ``(5,)`` or ``(N, 5)`` feature-space ``(x, y, w, h, theta)``.
        m: output bins per side.
        samples_per_bin_axis: sub-samples per bin along each local axis.

    Returns:
        ``(m, m, C)`` for a single RoI, else ``(N, m, m, C)``.
    """
    if m <= 0 or samples_per_bin_axis <= 0:
        raise ValueError("m and samples_per_bin_axis must be positive")
    r = as_rects(rrois)
    single = r.ndim == 1
    r = np.ascontiguousarray(r.reshape(-1, 5))
    if np.any(r[:, 2] <= 0) or np.any(r[:, 3] <= 0):
        raise ValueError("rotated RoI sizes must be positive")
    out = _kernels.rroi_align_padded(fmap.padded_hwc(), r, int(m), int(samples_per_bin_axis))
    return out[0] if single else out
