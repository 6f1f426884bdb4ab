import math

import numpy as np
import pytest

ACCEPTANCE_LINES = []


def record(criterion, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_rects(rng, n, center_range=100.0, size_range=(2.0, 60.0)):
    """``(n, 5)`` rotated rects with arbitrary angles (not canonicalised)."""
    cx = rng.uniform(-center_range, center_range, n)
    cy = rng.uniform(-center_range, center_range, n)
    w = rng.uniform(*size_range, n)
    h = rng.uniform(*size_range, n)
    t = rng.uniform(-math.pi, math.pi, n)
    return np.stack([cx, cy, w, h, t], axis=-1)


def random_convex_quads(rng, n, center=(0.0, 0.0), spread=1.0):
    """Convex quads: affine images of four points on a circle, one per quadrant.

    The angular jitter is kept below a quarter turn so consecutive vertices
    never coincide, which keeps the quads well away from slivers.
    """
    base = np.arange(4) * (math.pi / 2)
    ang = base + rng.uniform(-0.6, 0.6, (n, 4))
    pts = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    a = rng.uniform(0.5, 1.5, (n, 1, 1)) * np.eye(2) + rng.uniform(-0.3, 0.3, (n, 2, 2))
    pts = pts @ np.transpose(a, (0, 2, 1))
    shift = np.asarray(center) + rng.uniform(-spread, spread, (n, 1, 2))
    return pts + shift
