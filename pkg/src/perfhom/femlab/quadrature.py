"""Symmetric quadrature rules on triangles in barycentric coordinates."""
from __future__ import annotations

import math

import numpy as np

_S15 = math.sqrt(15.0)


def _orbit3(a, w):
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)], [w] * 3


def _rule(*orbits, centroid=None):
    pts, wts = [], []
    if centroid is not None:
        pts.append((1 / 3, 1 / 3, 1 / 3))
        wts.append(centroid)
    for a, w in orbits:
        p, q = _orbit3(a, w)
        pts += p
        wts += q
    return np.array(pts), np.array(wts)


# weights sum to one; multiply by the triangle area
RULES = {
    1: _rule(centroid=1.0),
    2: _rule((1 / 6, 1 / 3)),
    4: _rule((0.44594849091596488632, 0.22338158967801146570),
             (0.09157621350977074346, 1 / 3 - 0.22338158967801146570)),
    5: _rule(((6 + _S15) / 21, (155 + _S15) / 1200),
             ((6 - _S15) / 21, (155 - _S15) / 1200), centroid=9 / 40),
}


def triangle_rule(degree: int):
    """Smallest positive-weight rule exact for polynomials of ``degree``.

    Returns ``(barycentric points (q, 3), weights (q,))``.
    """
    for deg in sorted(RULES):
        if deg >= degree:
            return RULES[deg]
    raise ValueError(f"no triangle rule of degree {degree}")


def map_points(nodes: np.ndarray, triangles: np.ndarray, bary: np.ndarray) -> np.ndarray:
    """Physical quadrature points, shape (n_triangles, q, 2)."""
    corners = nodes[triangles]  # (T, 3, 2)
    return np.einsum("qk,tkd->tqd", bary, corners)
