"""Pure-numpy implementations of the O(N^2) inner loops.

These are the reference semantics; the Cython module `_native` mirrors them
exactly and is preferred at import time when available.  Everything is
chunked so memory stays bounded for the sample counts used by the library
(a few thousand points per curve).
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"

_CHUNK = 256


def gauss_linking_sum(p1, d1, p2, d2):
    """Sum of det(d1_i, d2_j, p1_i - p2_j) / |p1_i - p2_j|^3 over all pairs.

    The caller multiplies by quadrature weights / (4 pi).
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    total = 0.0
    for lo in range(0, p1.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, p1.shape[0])
        r = p1[lo:hi, None, :] - p2[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", r, r))
        cr = np.cross(d1[lo:hi, None, :], d2[None, :, :])
        det = np.einsum("ijk,ijk->ij", cr, r)
        total += float(np.sum(det / dist**3))
    return total


def _segment_intersections(a1, a2, b1, b2):
    """Vectorized proper-intersection test for segment arrays."""
    r = a2 - a1
    s = b2 - b1
    denom = r[:, 0] * s[:, 1] - r[:, 1] * s[:, 0]
    q = b1 - a1
    ok = np.abs(denom) > 1e-300
    t = np.empty_like(denom)
    u = np.empty_like(denom)
    t[ok] = (q[ok, 0] * s[ok, 1] - q[ok, 1] * s[ok, 0]) / denom[ok]
    u[ok] = (q[ok, 0] * r[ok, 1] - q[ok, 1] * r[ok, 0]) / denom[ok]
    hit = ok & (t > 0.0) & (t < 1.0) & (u > 0.0) & (u < 1.0)
    return hit, t, u


def polyline_crossings(pts_a, pts_b=None, min_index_gap=1):
    """Transversal intersections between 2D polylines.

    With one argument, finds self-intersections of the closed polyline
    ``pts_a`` (consecutive point rows; the closing segment is implied by
    passing it explicitly in the rows).  Returns an array of rows
    (i, j, t_i, t_j): segment indices and local parameters in (0, 1).
    """
    a = np.asarray(pts_a, dtype=float)
    self_mode = pts_b is None
    b = a if self_mode else np.asarray(pts_b, dtype=float)
    na = a.shape[0] - 1
    nb = b.shape[0] - 1
    a1, a2 = a[:-1], a[1:]
    b1, b2 = b[:-1], b[1:]
    min_ax = np.minimum(a1, a2)
    max_ax = np.maximum(a1, a2)
    min_bx = np.minimum(b1, b2)
    max_bx = np.maximum(b1, b2)
    rows = []
    for lo in range(0, na, _CHUNK):
        hi = min(lo + _CHUNK, na)
        bbox = (
            (min_ax[lo:hi, None, 0] <= max_bx[None, :, 0])
            & (max_ax[lo:hi, None, 0] >= min_bx[None, :, 0])
            & (min_ax[lo:hi, None, 1] <= max_bx[None, :, 1])
            & (max_ax[lo:hi, None, 1] >= min_bx[None, :, 1])
        )
        ii, jj = np.nonzero(bbox)
        ii = ii + lo
        if self_mode:
            gap = np.abs(ii - jj)
            gap = np.minimum(gap, na - gap)
            keep = (jj > ii) & (gap > min_index_gap)
            ii, jj = ii[keep], jj[keep]
        if ii.size == 0:
            continue
        hit, t, u = _segment_intersections(a1[ii], a2[ii], b1[jj], b2[jj])
        for k in np.nonzero(hit)[0]:
            rows.append((int(ii[k]), int(jj[k]), float(t[k]), float(u[k])))
    return np.array(rows, dtype=float).reshape(-1, 4)


def min_distance_excluding(points, params, period, excl_window):
    """Minimum pairwise distance, ignoring pairs of nearby curve parameters.

    ``params`` holds the curve parameter of each sample; pairs whose periodic
    parameter distance is below ``excl_window`` do not count (a strip is
    always 'close to itself' along a ruling).
    """
    pts = np.asarray(points, dtype=float)
    par = np.asarray(params, dtype=float)
    best = np.inf
    n = pts.shape[0]
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        d2 = np.sum((pts[lo:hi, None, :] - pts[None, :, :]) ** 2, axis=-1)
        dp = np.abs(par[lo:hi, None] - par[None, :])
        dp = np.minimum(dp, period - dp)
        d2[dp <= excl_window] = np.inf
        m = float(d2.min())
        if m < best:
            best = m
    return np.sqrt(best)


def min_distance_between(pts_a, pts_b):
    a = np.asarray(pts_a, dtype=float)
    b = np.asarray(pts_b, dtype=float)
    best = np.inf
    for lo in range(0, a.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, a.shape[0])
        d2 = np.sum((a[lo:hi, None, :] - b[None, :, :]) ** 2, axis=-1)
        best = min(best, float(d2.min()))
    return np.sqrt(best)
