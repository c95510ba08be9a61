"""Analytic segment formulas used by piecewise curves.

A segment is an intrinsic generator curve (circle, lemniscate, spherical
sweep, torus chart line, polar step graph) placed in space by an affine
frame ``p -> M p + c``.  Segments evaluate jets on an *extended* local
domain, which is what lets the piecewise container blend neighbours across
junctions.  Optional flat bumps perturb planar generators out of plane (for
loop crossings) or torus generators along the surface normal (for knotted
bridge arcs).
"""

from __future__ import annotations

import numpy as np

from . import jets as J

TORUS_A = 2.0 / 3.0
TORUS_B = 1.0 / 3.0


class Segment:
    """Intrinsic generator + affine placement + optional bump perturbations."""

    def __init__(self, kind, params, matrix=None, offset=None, bumps=None, local_range=(0.0, 1.0)):
        self.kind = kind
        self.params = dict(params)
        self.matrix = np.eye(3) if matrix is None else np.asarray(matrix, dtype=float)
        self.offset = np.zeros(3) if offset is None else np.asarray(offset, dtype=float)
        self.bumps = [tuple(map(float, b)) for b in (bumps or [])]
        self.local_range = (float(local_range[0]), float(local_range[1]))

    # -- intrinsic generators ------------------------------------------------

    def _intrinsic(self, sj, order):
        kind = self.kind
        p = self.params
        if kind == "circle":
            s, c = J.jsin_cos(sj)
            z = J.constant(0.0, order, n=sj.shape[1])
            return np.stack([c, s, z], axis=-1), np.stack([z, z, z + _one(z)], axis=-1)
        if kind == "lemniscate":
            s, c = J.jsin_cos(sj)
            den = J.jmul(s, s)
            den[0] += 1.0
            x = J.jdiv(c, den)
            y = J.jdiv(J.jmul(c, s), den)
            z = J.constant(0.0, order, n=sj.shape[1])
            return np.stack([x, y, z], axis=-1), np.stack([z, z, z + _one(z)], axis=-1)
        if kind == "fourier2d":
            # planar trigonometric-polynomial base plus a left-normal offset
            # stepping between two values (used for jog connectors) and the
            # vertical normal for bumps.  The local jet is affine, so zero
            # padding to the higher order needed for the normal is exact.
            sj2 = np.zeros((order + 3,) + sj.shape[1:])
            sj2[: min(sj.shape[0], order + 3)] = sj[: order + 3]
            base = _fourier2d_jet(sj2, p, order + 2)
            db = J.jet_derivative(base, 1)
            that = J.jdiv(db, J.vnorm(db)[..., None])
            nhat = np.stack([-that[..., 1], that[..., 0], that[..., 2]], axis=-1)
            offs = J.constant(p["o0"], order, n=sj.shape[1])
            if p["o1"] != p["o0"]:
                arg = (sj - _shift(sj, p["sa"])) * (1.0 / (p["sb"] - p["sa"]))
                offs = offs + (p["o1"] - p["o0"]) * J.smooth_step(arg)
            out = base[: order + 1] + J.jmul(offs[..., None], nhat[: order + 1])
            z = J.constant(0.0, order, n=sj.shape[1])
            return out, np.stack([z, z, z + _one(z)], axis=-1)
        if kind == "sphere_sweep":
            # (sin phi cos chi, -cos phi, zsign sin phi sin chi): the twisting
            # arc generator; phi is affine in s, chi a flat step times pi.
            w = p["w"]
            phi = sj * (np.pi + 2.0 * w)
            phi[0] -= w
            arg = (sj - _shift(sj, p["sa"])) * (1.0 / (p["sb"] - p["sa"]))
            chi = np.pi * J.smooth_step(arg)
            sphi, cphi = J.jsin_cos(phi)
            schi, cchi = J.jsin_cos(chi)
            x = J.jmul(sphi, cchi)
            y = -cphi
            z = p["zsign"] * J.jmul(sphi, schi)
            return np.stack([x, y, z], axis=-1), None
        if kind == "torus_line":
            u = (p["u1"] - p["u0"]) * sj
            u[0] += p["u0"]
            v = (p["v1"] - p["v0"]) * sj
            v[0] += p["v0"]
            su, cu = J.jsin_cos(u)
            sv, cv = J.jsin_cos(v)
            wrad = TORUS_B * cv
            wrad[0] += TORUS_A
            x = J.jmul(wrad, cu)
            y = TORUS_B * sv
            z = p["zsign"] * J.jmul(wrad, su)
            nx = J.jmul(cv, cu)
            ny = sv
            nz = p["zsign"] * J.jmul(cv, su)
            return np.stack([x, y, z], axis=-1), np.stack([nx, ny, nz], axis=-1)
        raise ValueError(f"unknown segment kind {kind!r}")

    def jet_local(self, sj, order):
        base, normal = self._intrinsic(sj, order)
        if self.bumps:
            assert normal is not None, f"{self.kind} segments do not support bumps"
            total = J.constant(0.0, order, n=sj.shape[1])
            for bump in self.bumps:
                s0, s1, amp = bump[:3]
                ramp = bump[3] if len(bump) > 3 else 0.35 * (s1 - s0)
                up = J.smooth_step((sj - _shift(sj, s0)) * (1.0 / ramp))
                dn = J.smooth_step((_shift(sj, s1) - sj) * (1.0 / ramp))
                total = total + amp * J.jmul(up, dn)
            base = base + J.jmul(total[..., None], normal)
        out = np.einsum("ij,knj->kni", self.matrix, base)
        out[0] += self.offset
        return out

    def transformed(self, rot, shift=None):
        """New segment with the world placement composed with a rigid motion."""
        rot = np.asarray(rot, dtype=float)
        shift = np.zeros(3) if shift is None else np.asarray(shift, dtype=float)
        return Segment(
            self.kind,
            self.params,
            matrix=rot @ self.matrix,
            offset=rot @ self.offset + shift,
            bumps=self.bumps,
            local_range=self.local_range,
        )

    # geometry metadata used by ruling constructions
    @property
    def scale(self):
        return float(abs(np.linalg.det(self.matrix))) ** (1.0 / 3.0)


def _one(zlike):
    out = np.zeros_like(zlike)
    out[0] = 1.0
    return out


def _shift(sj, value):
    out = np.zeros_like(sj)
    out[0] = value
    return out


def _fourier2d_jet(sj, p, order):
    """Vector jet of the planar trig polynomial (z identically zero)."""
    a0 = np.asarray(p["a0"], dtype=float)
    acos = np.asarray(p["acos"], dtype=float).reshape(-1, 2)
    bsin = np.asarray(p["bsin"], dtype=float).reshape(-1, 2)
    n = sj.shape[1]
    out = np.zeros((order + 1, n, 3))
    out[0, :, 0] = a0[0]
    out[0, :, 1] = a0[1]
    sj = sj[: order + 1]
    for j in range(acos.shape[0]):
        s, c = J.jsin_cos((j + 1.0) * sj)
        out[..., 0] += np.asarray(c) * acos[j, 0] + np.asarray(s) * bsin[j, 0]
        out[..., 1] += np.asarray(c) * acos[j, 1] + np.asarray(s) * bsin[j, 1]
    return out


# -- constructors -----------------------------------------------------------


def circle_arc(center, radius, plane_u=None, plane_v=None, ang_range=(0.0, 2.0 * np.pi), bumps=None):
    """Circle of given radius in the plane spanned by (plane_u, plane_v)."""
    u1 = np.array([1.0, 0.0, 0.0]) if plane_u is None else np.asarray(plane_u, dtype=float)
    u2 = np.array([0.0, 1.0, 0.0]) if plane_v is None else np.asarray(plane_v, dtype=float)
    u3 = np.cross(u1, u2)  # bump direction stays the unit plane normal
    m = np.stack([radius * u1, radius * u2, u3], axis=1)
    return Segment(
        "circle", {}, matrix=m, offset=np.asarray(center, dtype=float), bumps=bumps,
        local_range=ang_range,
    )


def lemniscate_arc(s_range=(np.pi, 2.0 * np.pi), bumps=None, matrix=None, offset=None):
    return Segment("lemniscate", {}, matrix=matrix, offset=offset, bumps=bumps,
                   local_range=s_range)


def fourier2d_arc(a0, acos, bsin, s_range, o0=0.0, o1=0.0, sa=0.0, sb=1.0,
                  matrix=None, offset=None, bumps=None):
    return Segment(
        "fourier2d",
        {
            "a0": list(map(float, a0)),
            "acos": np.asarray(acos, dtype=float).tolist(),
            "bsin": np.asarray(bsin, dtype=float).tolist(),
            "o0": float(o0),
            "o1": float(o1),
            "sa": float(sa),
            "sb": float(sb),
        },
        matrix=matrix,
        offset=offset,
        bumps=bumps,
        local_range=s_range,
    )


def sphere_sweep(w, sa, sb, zsign, center, radius, xdir, ydir, zdir=None):
    """Twisting-arc generator on the sphere |p| = radius about ``center``."""
    x = np.asarray(xdir, dtype=float)
    y = np.asarray(ydir, dtype=float)
    z = np.cross(x, y) if zdir is None else np.asarray(zdir, dtype=float)
    m = radius * np.stack([x, y, z], axis=1)
    sstar = w / (np.pi + 2.0 * w)
    return Segment(
        "sphere_sweep",
        {"w": w, "sa": sa, "sb": sb, "zsign": float(zsign)},
        matrix=m,
        offset=center,
        local_range=(sstar, 1.0 - sstar),
    )


def torus_line(p0, p1, zsign=1.0, bumps=None, matrix=None, offset=None, local_range=(0.0, 1.0)):
    return Segment(
        "torus_line",
        {"u0": p0[0], "v0": p0[1], "u1": p1[0], "v1": p1[1], "zsign": float(zsign)},
        matrix=matrix,
        offset=offset,
        bumps=bumps,
        local_range=local_range,
    )


# -- serialization ----------------------------------------------------------


def segment_to_dict(seg):
    return {
        "kind": seg.kind,
        "params": seg.params,
        "matrix": seg.matrix.tolist(),
        "offset": seg.offset.tolist(),
        "bumps": [list(b) for b in seg.bumps],
        "local_range": list(seg.local_range),
    }


def segment_from_dict(d):
    return Segment(
        d["kind"],
        d["params"],
        matrix=d["matrix"],
        offset=d["offset"],
        bumps=d["bumps"],
        local_range=d["local_range"],
    )
