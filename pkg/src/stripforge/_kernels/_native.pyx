# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Cython kernels mirroring numpy_impl (same signatures, same results)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs, sqrt

BACKEND = "native"


def gauss_linking_sum(p1, d1, p2, d2):
    cdef double[:, ::1] P1 = np.ascontiguousarray(p1, dtype=np.float64)
    cdef double[:, ::1] D1 = np.ascontiguousarray(d1, dtype=np.float64)
    cdef double[:, ::1] P2 = np.ascontiguousarray(p2, dtype=np.float64)
    cdef double[:, ::1] D2 = np.ascontiguousarray(d2, dtype=np.float64)
    cdef Py_ssize_t n = P1.shape[0], m = P2.shape[0], i, j
    cdef double total = 0.0
    cdef double rx, ry, rz, cx, cy, cz, dist, det
    for i in range(n):
        for j in range(m):
            rx = P1[i, 0] - P2[j, 0]
            ry = P1[i, 1] - P2[j, 1]
            rz = P1[i, 2] - P2[j, 2]
            cx = D1[i, 1] * D2[j, 2] - D1[i, 2] * D2[j, 1]
            cy = D1[i, 2] * D2[j, 0] - D1[i, 0] * D2[j, 2]
            cz = D1[i, 0] * D2[j, 1] - D1[i, 1] * D2[j, 0]
            det = cx * rx + cy * ry + cz * rz
            dist = sqrt(rx * rx + ry * ry + rz * rz)
            total += det / (dist * dist * dist)
    return total


def polyline_crossings(pts_a, pts_b=None, Py_ssize_t min_index_gap=1):
    cdef bint self_mode = pts_b is None
    cdef double[:, ::1] A = np.ascontiguousarray(pts_a, dtype=np.float64)
    cdef double[:, ::1] B = A if self_mode else np.ascontiguousarray(pts_b, dtype=np.float64)
    cdef Py_ssize_t na = A.shape[0] - 1, nb = B.shape[0] - 1, i, j, gap
    cdef double ax, ay, rx, ry, bx, by, sx, sy, qx, qy, denom, t, u
    cdef double alox, ahix, aloy, ahiy, blox, bhix, bloy, bhiy
    rows = []
    for i in range(na):
        ax = A[i, 0]; ay = A[i, 1]
        rx = A[i + 1, 0] - ax; ry = A[i + 1, 1] - ay
        alox = ax if rx > 0 else ax + rx; ahix = ax + rx if rx > 0 else ax
        aloy = ay if ry > 0 else ay + ry; ahiy = ay + ry if ry > 0 else ay
        for j in range(i + 1 if self_mode else 0, nb):
            if self_mode:
                gap = j - i
                if gap > na - gap:
                    gap = na - gap
                if gap <= min_index_gap:
                    continue
            bx = B[j, 0]; by = B[j, 1]
            sx = B[j + 1, 0] - bx; sy = B[j + 1, 1] - by
            blox = bx if sx > 0 else bx + sx; bhix = bx + sx if sx > 0 else bx
            bloy = by if sy > 0 else by + sy; bhiy = by + sy if sy > 0 else by
            if alox > bhix or ahix < blox or aloy > bhiy or ahiy < bloy:
                continue
            denom = rx * sy - ry * sx
            if fabs(denom) < 1e-300:
                continue
            qx = bx - ax; qy = by - ay
            t = (qx * sy - qy * sx) / denom
            u = (qx * ry - qy * rx) / denom
            if 0.0 < t < 1.0 and 0.0 < u < 1.0:
                rows.append((i, j, t, u))
    return np.array(rows, dtype=np.float64).reshape(-1, 4)


def min_distance_excluding(points, params, double period, double excl_window):
    cdef double[:, ::1] P = np.ascontiguousarray(points, dtype=np.float64)
    cdef double[::1] T = np.ascontiguousarray(params, dtype=np.float64)
    cdef Py_ssize_t n = P.shape[0], i, j
    cdef double best = INFINITY, d2, dp, dx, dy, dz
    for i in range(n):
        for j in range(i + 1, n):
            dp = fabs(T[i] - T[j])
            if period - dp < dp:
                dp = period - dp
            if dp <= excl_window:
                continue
            dx = P[i, 0] - P[j, 0]
            dy = P[i, 1] - P[j, 1]
            dz = P[i, 2] - P[j, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < best:
                best = d2
    return sqrt(best)


def min_distance_between(pts_a, pts_b):
    cdef double[:, ::1] A = np.ascontiguousarray(pts_a, dtype=np.float64)
    cdef double[:, ::1] B = np.ascontiguousarray(pts_b, dtype=np.float64)
    cdef Py_ssize_t n = A.shape[0], m = B.shape[0], i, j
    cdef double best = INFINITY, d2, dx, dy, dz
    for i in range(n):
        for j in range(m):
            dx = A[i, 0] - B[j, 0]
            dy = A[i, 1] - B[j, 1]
            dz = A[i, 2] - B[j, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < best:
                best = d2
    return sqrt(best)
