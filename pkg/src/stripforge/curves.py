"""Closed space curves with exact high-order derivatives, and their
Frenet/inflection analysis.

Three representations cover everything the library builds:

* ``FourierCurve`` -- per-coordinate trigonometric polynomials.
* ``RationalChartCurve`` -- rational curves on two overlapping charts
  (``t = tan(u/2)`` and ``s = -tan((u-pi)/2)``), used for closed rational
  fixtures whose interesting point sits at the parameter infinity.
* ``PiecewiseAnalyticCurve`` -- ordered analytic segments joined by convex
  C-infinity bump blends; junction windows always sit in exactly planar
  regions, so planarity there is preserved bit-for-bit.

All curves are 2*pi-periodic in the canonical parameter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import jets as J
from .errors import (
    DerivativeOrderExceeded,
    NonIsolatedZero,
    OrderUndetermined,
    RefitDegreeExceeded,
    UndefinedAtInflection,
)

TWO_PI = 2.0 * np.pi

# curvature-definedness tolerance, relative to curve diameter
KAPPA_TOL = 1e-9


class SpaceCurve:
    """Base class: a curve with jet evaluation (closed unless stated)."""

    derivative_order = 24
    periodic = True
    domain = (0.0, TWO_PI)

    @property
    def span(self):
        return self.domain[1] - self.domain[0]

    def jet(self, t, order):
        raise NotImplementedError

    def point(self, t):
        out = self.jet(t, 0)[0]
        return out[0] if np.isscalar(t) else out

    def velocity(self, t):
        out = J.derivatives_from_jet(self.jet(t, 1))[1]
        return out[0] if np.isscalar(t) else out

    def diameter(self):
        if not hasattr(self, "_diameter"):
            pts = self.point(np.linspace(self.domain[0], self.domain[1], 512, endpoint=False))
            self._diameter = float(np.ptp(pts, axis=0).max())
        return self._diameter


def evaluate(curve, t, k):
    """gamma^(k)(t), computed analytically through the jet machinery."""
    if k > curve.derivative_order:
        raise DerivativeOrderExceeded(f"order {k} > cap {curve.derivative_order}")
    scalar = np.isscalar(t)
    out = J.derivatives_from_jet(curve.jet(t, k))[k]
    return out[0] if scalar else out


class FourierCurve(SpaceCurve):
    """a0 + sum_j acos[j-1] cos(j t) + bsin[j-1] sin(j t), per coordinate."""

    kind = "fourier"

    def __init__(self, a0, acos, bsin):
        self.a0 = np.asarray(a0, dtype=float).reshape(3)
        self.acos = np.asarray(acos, dtype=float).reshape(-1, 3)
        self.bsin = np.asarray(bsin, dtype=float).reshape(-1, 3)
        assert self.acos.shape == self.bsin.shape

    @property
    def degree(self):
        return self.acos.shape[0]

    def jet(self, t, order):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        n = self.degree
        out = np.zeros((order + 1, t.size, 3))
        out[0] = self.a0
        if n == 0:
            return out
        freq = np.arange(1.0, n + 1.0)
        phase = freq[None, :] * t[:, None]  # (N, n)
        for k in range(order + 1):
            fk = freq**k / J._FACT[k]
            ck = np.cos(phase + k * np.pi / 2.0) * fk
            sk = np.sin(phase + k * np.pi / 2.0) * fk
            out[k] += ck @ self.acos + sk @ self.bsin
        return out

    def scaled_z(self, factor):
        a0 = self.a0.copy()
        acos = self.acos.copy()
        bsin = self.bsin.copy()
        a0[2] *= factor
        acos[:, 2] *= factor
        bsin[:, 2] *= factor
        return FourierCurve(a0, acos, bsin)

    def to_dict(self):
        return {
            "kind": self.kind,
            "a0": self.a0.tolist(),
            "acos": self.acos.tolist(),
            "bsin": self.bsin.tolist(),
        }

    @staticmethod
    def from_dict(d):
        return FourierCurve(d["a0"], d["acos"], d["bsin"])

    @staticmethod
    def from_samples(samples, degree):
        """Trigonometric interpolation coefficients from uniform samples."""
        samples = np.asarray(samples, dtype=float)
        m = samples.shape[0]
        spec = np.fft.rfft(samples, axis=0) / m
        nmax = min(degree, spec.shape[0] - 1)
        a0 = spec[0].real
        acos = 2.0 * spec[1 : nmax + 1].real
        bsin = -2.0 * spec[1 : nmax + 1].imag
        return FourierCurve(a0, acos, bsin)


class RationalChartCurve(SpaceCurve):
    """Closed rational curve given on two overlapping charts.

    Chart "t" covers the canonical parameter u away from u = pi via
    t = tan(u/2); chart "s" covers a neighbourhood of u = pi via
    s = -tan((u - pi)/2) = 1/t.  Numerators and denominators are polynomial
    coefficient lists in ascending powers.
    """

    kind = "rational"
    chart_switch = 1.6  # |wrapped u| above this uses the s-chart
    overlap = (1.2, 2.2)  # both charts valid here; agreement is tested

    def __init__(self, num_t, den_t, num_s, den_s):
        self.num_t = [np.asarray(c, dtype=float) for c in num_t]
        self.den_t = np.asarray(den_t, dtype=float)
        self.num_s = [np.asarray(c, dtype=float) for c in num_s]
        self.den_s = np.asarray(den_s, dtype=float)

    def _chart_jet(self, param_jet, nums, den):
        denj = J.jpolyval(den, param_jet)
        comps = [J.jdiv(J.jpolyval(c, param_jet), denj) for c in nums]
        return np.stack(comps, axis=-1)

    def jet(self, t, order):
        u = np.mod(np.atleast_1d(np.asarray(t, dtype=float)), TWO_PI)
        u = np.where(u > np.pi, u - TWO_PI, u)  # wrap to (-pi, pi]
        out = np.zeros((order + 1, u.size, 3))
        use_t = np.abs(u) <= self.chart_switch
        if np.any(use_t):
            uj = J.variable(u[use_t], order)
            out[:, use_t] = self._chart_jet(J.jtan(0.5 * uj), self.num_t, self.den_t)
        if np.any(~use_t):
            v = u[~use_t]
            v = np.where(v > 0, v - np.pi, v + np.pi)  # offset from the far point
            vj = J.variable(v, order)
            out[:, ~use_t] = self._chart_jet(-J.jtan(0.5 * vj), self.num_s, self.den_s)
        return out

    def to_dict(self):
        return {
            "kind": self.kind,
            "num_t": [c.tolist() for c in self.num_t],
            "den_t": self.den_t.tolist(),
            "num_s": [c.tolist() for c in self.num_s],
            "den_s": self.den_s.tolist(),
        }

    @staticmethod
    def from_dict(d):
        return RationalChartCurve(d["num_t"], d["den_t"], d["num_s"], d["den_s"])


class PiecewiseAnalyticCurve(SpaceCurve):
    """Analytic segments on consecutive global intervals, blended at joins.

    ``pieces`` is a list of (segment, g0, g1): the segment's local parameter
    range is mapped affinely from [g0, g1].  At the junction between
    consecutive pieces (cyclically) the curve is the convex combination
    (1-w) A + w B, with w a flat C-inf step over a window of half-width
    ``blend_halfwidths[j]`` centred on the junction.
    """

    kind = "piecewise"
    derivative_order = 16

    def __init__(self, pieces, blend_halfwidths, windows=None, meta=None, periodic=True):
        self.pieces = list(pieces)
        self.periodic = bool(periodic)
        end = TWO_PI if self.periodic else self.pieces[-1][2]
        self.domain = (0.0, float(end))
        self.breaks = np.array([g0 for (_, g0, _) in self.pieces] + [end])
        assert abs(self.pieces[0][1]) < 1e-12, "first piece must start at 0"
        for (_, _, g1), nxt in zip(self.pieces, self.pieces[1:]):
            assert abs(g1 - nxt[1]) < 1e-12, "pieces must tile the domain"
        assert abs(self.pieces[-1][2] - end) < 1e-12
        self.blend_halfwidths = np.asarray(blend_halfwidths, dtype=float)
        assert self.blend_halfwidths.size == len(self.pieces)
        if not self.periodic:
            assert self.blend_halfwidths[0] == 0.0, "open arcs have no wrap junction"
        n = len(self.pieces)
        for k in range(n):
            piece_span = self.breaks[k + 1] - self.breaks[k]
            assert piece_span > self.blend_halfwidths[k] + self.blend_halfwidths[(k + 1) % n]
        self.windows = windows or []
        self.meta = meta or {}

    def _piece_jet(self, idx, t, order):
        seg, g0, g1 = self.pieces[idx]
        s0, s1 = seg.local_range
        scale = (s1 - s0) / (g1 - g0)
        # always carry the affine slope: segment normals need first derivatives
        oeff = max(order, 1)
        sj = J.variable((np.asarray(t, dtype=float) - g0) * scale + s0, oeff)
        sj[1] = scale
        return seg.jet_local(sj, oeff)[: order + 1]

    def jet(self, t, order):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        t = np.mod(t, TWO_PI) if self.periodic else t
        n = len(self.pieces)
        out = np.zeros((order + 1, t.size, 3))
        idx = np.searchsorted(self.breaks, t, side="right") - 1
        idx = np.clip(idx, 0, n - 1)
        hw = self.blend_halfwidths  # hw[j] belongs to the junction at breaks[j]
        nxt = np.where(idx + 1 < n, idx + 1, 0)
        in_lo = (t - self.breaks[idx]) < hw[idx]
        in_hi = (self.breaks[idx + 1] - t) < np.where(
            (idx + 1 < n) | self.periodic, hw[nxt], -np.inf
        )
        pure = ~(in_lo | in_hi)
        for k in range(n):
            m = pure & (idx == k)
            if np.any(m):
                out[:, m] = self._piece_jet(k, t[m], order)
        for j in range(n):
            m = (in_lo & (idx == j)) | (in_hi & (nxt == j))
            if not np.any(m):
                continue
            base = self.breaks[j]
            delta = t[m] - base
            delta = np.where(delta > np.pi, delta - TWO_PI, delta)
            delta = np.where(delta < -np.pi, delta + TWO_PI, delta)
            prev = (j - 1) % n
            ja = self._piece_jet(prev, self.breaks[prev + 1] + delta, order)
            jb = self._piece_jet(j, base + delta, order)
            w = J.constant(0.0, order, n=int(m.sum()))
            w[0] = (delta + hw[j]) / (2.0 * hw[j])
            if order >= 1:
                w[1] = 1.0 / (2.0 * hw[j])
            w = J.smooth_step(w)[..., None]
            out[:, m] = ja + J.jmul(w, jb - ja)
        return out

    def window_mask(self, t, kinds):
        """Mask of parameters falling in annotation windows of given kinds."""
        t = np.asarray(t, dtype=float)
        if self.periodic:
            t = np.mod(t, TWO_PI)
        mask = np.zeros(t.shape, dtype=bool)
        for w in self.windows:
            if w["kind"] in kinds:
                t0, t1 = w["t0"], w["t1"]
                if t0 <= t1:
                    mask |= (t >= t0) & (t <= t1)
                else:
                    mask |= (t >= t0) | (t <= t1)
        return mask

    def to_dict(self):
        from . import segments

        return {
            "kind": self.kind,
            "pieces": [
                {"segment": segments.segment_to_dict(seg), "g0": g0, "g1": g1}
                for seg, g0, g1 in self.pieces
            ],
            "blend_halfwidths": self.blend_halfwidths.tolist(),
            "windows": self.windows,
            "meta": {k: v for k, v in self.meta.items() if _jsonable(v)},
        }

    @staticmethod
    def from_dict(d):
        from . import segments

        pieces = [
            (segments.segment_from_dict(p["segment"]), p["g0"], p["g1"]) for p in d["pieces"]
        ]
        return PiecewiseAnalyticCurve(
            pieces, d["blend_halfwidths"], windows=d.get("windows"), meta=d.get("meta")
        )


def _jsonable(v):
    return isinstance(v, (int, float, str, bool, list, dict, type(None)))


def curve_to_dict(curve):
    return curve.to_dict()


def curve_from_dict(d):
    return {
        "fourier": FourierCurve,
        "rational": RationalChartCurve,
        "piecewise": PiecewiseAnalyticCurve,
    }[d["kind"]].from_dict(d)


# --------------------------------------------------------------------------
# Frenet data and curvature/torsion/inflection analysis
# --------------------------------------------------------------------------


@dataclass
class FrenetData:
    t_param: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    binormal: np.ndarray
    kappa: np.ndarray
    tau: np.ndarray
    defined: np.ndarray  # False where the frame degenerates (inflections)


@dataclass
class InflectionReport:
    location: float
    order_n: int
    order_m: int | None  # None encodes an identically-planar (infinite) order
    leading_vector: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def is_generic(self):
        return self.order_n == 1


def _gamma_derivs(curve, t, upto):
    return J.derivatives_from_jet(curve.jet(t, upto))


def curvature(curve, t):
    scalar = np.isscalar(t)
    d = _gamma_derivs(curve, t, 2)
    v = np.cross(d[1], d[2])
    out = np.linalg.norm(v, axis=-1) / np.linalg.norm(d[1], axis=-1) ** 3
    return float(out[0]) if scalar else out


def torsion(curve, t):
    scalar = np.isscalar(t)
    d = _gamma_derivs(curve, t, 3)
    v = np.cross(d[1], d[2])
    vv = np.einsum("...i,...i->...", v, v)
    kap = np.sqrt(vv) / np.linalg.norm(d[1], axis=-1) ** 3
    if np.any(kap * curve.diameter() < KAPPA_TOL):
        raise UndefinedAtInflection("torsion requested at a curvature zero")
    out = np.einsum("...i,...i->...", v, d[3]) / vv
    return float(out[0]) if scalar else out


def frenet_frame(curve, t):
    d = _gamma_derivs(curve, t, 3)
    speed = np.linalg.norm(d[1], axis=-1, keepdims=True)
    tang = d[1] / speed
    v = np.cross(d[1], d[2])
    vn = np.linalg.norm(v, axis=-1)
    kappa = vn / speed[..., 0] ** 3
    defined = kappa * curve.diameter() > KAPPA_TOL
    normal = np.zeros_like(tang)
    binormal = np.zeros_like(tang)
    tau = np.zeros_like(kappa)
    if np.any(defined):
        nraw = np.cross(v[defined], d[1][defined])
        normal[defined] = nraw / np.linalg.norm(nraw, axis=-1, keepdims=True)
        binormal[defined] = np.cross(tang[defined], normal[defined])
        det = np.einsum("...i,...i->...", v[defined], d[3][defined])
        tau[defined] = det / vn[defined] ** 2
    return FrenetData(np.atleast_1d(t), tang, normal, binormal, kappa, tau, defined)


def _cross_norm2_and_slope(curve, t):
    """|gamma' x gamma''|^2 and its t-derivative, both exact."""
    jet = curve.jet(t, 3)
    v = J.vcross(J.jet_derivative(jet, 1), J.jet_derivative(jet, 2))
    f = J.vdot(v, v)
    return f[0], f[1]


def find_inflections(curve, tol=1e-7, samples=4096):
    """Isolated zeros of |gamma' x gamma''| over the domain, bisection-polished."""
    lo, hi = curve.domain
    ts = np.linspace(lo, hi, samples, endpoint=False)
    if not curve.periodic:
        ts = ts[1:]
    f, fdot = _cross_norm2_and_slope(curve, ts)
    dia = curve.diameter()
    d = _gamma_derivs(curve, ts, 1)
    speed6 = np.linalg.norm(d[1], axis=-1) ** 6
    kap2 = f / speed6 * dia**2  # (kappa * diameter)^2, dimensionless
    run = 0
    wrapped = np.concatenate([kap2, kap2[: samples // 32]]) if curve.periodic else kap2
    for val in wrapped:
        run = run + 1 if val < (KAPPA_TOL * 10.0) ** 2 else 0
        if run > samples // 64:
            raise NonIsolatedZero("curvature vanishes on an interval")
    low = kap2 < 1e-4
    locs = []
    nscan = ts.size if curve.periodic else ts.size - 1
    for i in range(nscan):
        ii = (i + 1) % ts.size
        if fdot[i] < 0.0 <= fdot[ii] and (low[i] or low[ii]):
            a, b = ts[i], ts[i] + (hi - lo) / samples
            for _ in range(80):
                mid = 0.5 * (a + b)
                _, fd_mid = _cross_norm2_and_slope(curve, np.array([mid]))
                if fd_mid[0] < 0.0:
                    a = mid
                else:
                    b = mid
            t0 = 0.5 * (a + b)
            fv, _ = _cross_norm2_and_slope(curve, np.array([t0]))
            d1 = _gamma_derivs(curve, np.array([t0]), 1)
            kap = np.sqrt(max(fv[0], 0.0)) / np.linalg.norm(d1[1][0]) ** 3
            if kap * dia < tol:
                locs.append(t0 % TWO_PI if curve.periodic else t0)
    reports = []
    for t0 in sorted(locs):
        n_ord, m_ord, cvec = inflection_orders(curve, t0, with_vector=True)
        reports.append(InflectionReport(t0, n_ord, m_ord, cvec))
    return reports


def inflection_orders(curve, t0, with_vector=False, rank_tol=1e-8, max_order=None):
    """Leading vanishing orders (N, M) of gamma' x gamma'' and det(g',g'',g''').

    Exact jet coefficients decide; a two-sided log-log slope fit
    cross-checks.  M is None when the torsion numerator vanishes identically
    (locally planar curve), which downstream code reads as M = infinity.
    """
    kmax = max_order or min(curve.derivative_order, 16)
    jet = curve.jet(np.array([t0]), kmax)
    g1 = J.jet_derivative(jet, 1)
    g2 = J.jet_derivative(jet, 2)
    g3 = J.jet_derivative(jet, 3)
    v = J.vcross(g1, g2)[:, 0, :]  # Taylor coefficients of the cross product
    delta = J.vdot(J.vcross(g1, g2), g3)[:, 0]
    # cancellation-aware detection: coefficient k of a convolution carries
    # roundoff noise proportional to the factor-magnitude envelopes, even
    # where a factor coefficient itself is a computed zero; coefficients
    # below ~50x that propagated-noise estimate are treated as vanished
    eps = 3e-15
    m1 = np.linalg.norm(g1[:, 0, :], axis=-1)
    m2 = np.linalg.norm(g2[:, 0, :], axis=-1)
    m3 = np.linalg.norm(g3[:, 0, :], axis=-1)
    vnorms = np.linalg.norm(v, axis=-1)
    kv = vnorms.size
    junk_v = eps * (np.cumsum(m1)[:kv] * m2.max() + np.cumsum(m2)[:kv] * m1.max())
    n_ord = next((k for k, vn in enumerate(vnorms) if vn > 50.0 * junk_v[k]), None)
    if n_ord is None:
        raise OrderUndetermined("cross product vanishes to all computed orders")
    if n_ord == 0:
        raise OrderUndetermined("not an inflection point")
    kd = delta.size
    junk_d = (
        eps * (np.cumsum(vnorms)[:kd] * m3.max() + np.cumsum(m3)[:kd] * vnorms.max())
        + np.cumsum(junk_v)[:kd] * m3.max()
    )
    m_ord = next((k for k, dv in enumerate(np.abs(delta)) if dv > 50.0 * junk_d[k]), None)
    slope = _loglog_slope(curve, t0, which="cross")
    if abs(slope - n_ord) > 0.35:
        raise OrderUndetermined(f"N: jets say {n_ord}, slope fit says {slope:.2f}")
    if m_ord is not None:
        slope_m = _loglog_slope(curve, t0, which="delta")
        if abs(slope_m - m_ord) > 0.35:
            raise OrderUndetermined(f"M: jets say {m_ord}, slope fit says {slope_m:.2f}")
    if with_vector:
        return n_ord, m_ord, v[n_ord] * J._FACT[n_ord]
    return n_ord, m_ord


def _loglog_slope(curve, t0, which):
    eps = np.geomspace(3e-4, 3e-2, 7)
    offsets = np.concatenate([t0 + eps, t0 - eps])
    d = _gamma_derivs(curve, offsets, 3)
    v = np.cross(d[1], d[2])
    if which == "cross":
        vals = np.linalg.norm(v, axis=-1)
    else:
        vals = np.abs(np.einsum("...i,...i->...", v, d[3]))
    x = np.log(np.concatenate([eps, eps]))
    y = np.log(vals + 1e-300)
    return float(np.polyfit(x, y, 1)[0])


def _spectral_arclength(curve, m):
    """Closed-form antiderivative of the speed from its Fourier series."""
    ts = np.linspace(0.0, TWO_PI, m, endpoint=False)
    speed = np.linalg.norm(_gamma_derivs(curve, ts, 1)[1], axis=-1)
    spec = np.fft.rfft(speed) / m
    c0 = spec[0].real
    ak = 2.0 * spec[1:].real
    bk = -2.0 * spec[1:].imag
    k = np.arange(1, spec.size)

    def cum(t):
        t = np.asarray(t, dtype=float)
        kt = np.outer(t, k)
        return c0 * t + (np.sin(kt) @ (ak / k)) - ((np.cos(kt) - 1.0) @ (bk / k))

    return cum, c0 * TWO_PI


def arclength_reparam(curve, samples=4096, degree_cap=2048, tol=1e-6):
    """Constant-speed Fourier refit; the speed becomes length/(2 pi)."""
    m = max(int(samples), 1024)
    while True:
        cum, total = _spectral_arclength(curve, m)
        targets = np.arange(m) * total / m
        tg = targets * TWO_PI / total
        for _ in range(40):  # Newton on the spectral arclength map
            sp = np.linalg.norm(_gamma_derivs(curve, tg, 1)[1], axis=-1)
            step = (cum(tg) - targets) / sp
            tg -= step
            if np.max(np.abs(step)) < 1e-14:
                break
        refit = FourierCurve.from_samples(curve.point(tg), degree=m // 2 - 1)
        check = np.linspace(0.0, TWO_PI, 1024, endpoint=False)
        sp = np.linalg.norm(_gamma_derivs(refit, check, 1)[1], axis=-1)
        err = np.max(np.abs(1.0 - sp * TWO_PI / total))
        if err < tol:
            keep = max(
                np.nonzero(
                    np.linalg.norm(refit.acos, axis=1) + np.linalg.norm(refit.bsin, axis=1)
                    > 1e-14 * max(1.0, curve.diameter())
                )[0],
                default=0,
            )
            refit = FourierCurve(refit.a0, refit.acos[: keep + 1], refit.bsin[: keep + 1])
            refit.total_length = total
            return refit
        if m // 2 - 1 >= degree_cap:
            raise RefitDegreeExceeded(f"speed error {err:.2e} at degree cap {degree_cap}")
        m *= 2


def curve_length(curve, samples=8192):
    lo, hi = curve.domain
    ts = np.linspace(lo, hi, samples, endpoint=not curve.periodic)
    speed = np.linalg.norm(_gamma_derivs(curve, ts, 1)[1], axis=-1)
    if curve.periodic:
        return float(np.mean(speed) * (hi - lo))
    return float(np.trapezoid(speed, ts) if hasattr(np, "trapezoid") else np.trapz(speed, ts))
