"""Ruled strips: classification residuals, the Randrup-Rogen gate, umbilic
and perpendicular-ruling loci, and the asymptotic-completion certificate.

All residuals are evaluated in arclength-normalized form (unit tangent, unit
ruling, d/ds derivatives), which makes them invariant under the curve's
parametrization without an explicit refit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jets as J
from ._kernels import min_distance_excluding
from .curves import find_inflections
from .errors import (
    EmbeddingFailed,
    MoebiusWithoutUmbilic,
    NoSignChange,
    NotGenericInflection,
    Rho0Zero,
    RulingTangent,
)

CLASS_TOL = 1e-6


@dataclass
class RuledStrip:
    centerline: object
    ruling: object
    halfwidth: float
    class_claim: str = "generic"

    def surface(self, t, u):
        """F(t, u) = gamma(t) + u * unit ruling."""
        g = self.centerline.point(t)
        xi = self.ruling.unit_jet(np.atleast_1d(t), 0)[0]
        return g + np.asarray(u)[..., None] * xi


@dataclass
class StripClassReport:
    developable_residual: float
    principal_residuals: tuple
    rectifying_residual: float
    ruling_length_variation: float
    is_moebius: bool
    passes: dict

    def to_dict(self):
        return {
            "developable_residual": self.developable_residual,
            "principal_residuals": list(self.principal_residuals),
            "rectifying_residual": self.rectifying_residual,
            "ruling_length_variation": self.ruling_length_variation,
            "is_moebius": self.is_moebius,
            "passes": dict(self.passes),
        }


@dataclass
class GateReport:
    admissible: bool
    per_inflection: list  # rows (t0, N, M-or-None, ratio, nonorientable_if_built)
    anti_periodic_ruling: bool

    def to_dict(self):
        return {
            "admissible": self.admissible,
            "per_inflection": [
                {
                    "t0": r[0],
                    "N": r[1],
                    "M": r[2],
                    "ratio": r[3],
                    "nonorientable_if_built": r[4],
                }
                for r in self.per_inflection
            ],
            "anti_periodic_ruling": self.anti_periodic_ruling,
        }


@dataclass
class CompletionReport:
    rho0: float
    rho0_raw: float
    lambda_sup: float
    metric_margin: float
    umbilic_locus: list
    weakly_complete_certified: bool
    grid_shape: tuple

    def to_dict(self):
        return {
            "rho0": self.rho0,
            "rho0_raw": self.rho0_raw,
            "lambda_sup": self.lambda_sup,
            "metric_margin": self.metric_margin,
            "umbilic_locus": list(self.umbilic_locus),
            "weakly_complete_certified": self.weakly_complete_certified,
            "grid_shape": list(self.grid_shape),
        }


def _strip_samples(curve, samples):
    lo, hi = curve.domain
    return np.linspace(lo, hi, samples, endpoint=not curve.periodic)


def _normalized_data(strip, samples=4096):
    """Unit tangent/ruling and their d/ds derivatives on a sample grid."""
    curve = strip.centerline
    ts = _strip_samples(curve, samples)
    d = J.derivatives_from_jet(curve.jet(ts, 2))
    g1, g2 = d[1], d[2]
    speed = np.linalg.norm(g1, axis=-1)
    tang = g1 / speed[:, None]
    # d2 gamma / ds2
    acc = (g2 * speed[:, None] ** 2 - g1 * np.einsum("ni,ni->n", g1, g2)[:, None]) / speed[
        :, None
    ] ** 4
    fj = strip.ruling.jet(ts, 1)
    xi_raw = fj[0]
    xi_len = np.linalg.norm(xi_raw, axis=-1)
    uj = J.jdiv(fj, J.vnorm(fj)[..., None])
    xi = uj[0]
    xi_ds = J.jet_derivative(uj, 1)[0] / speed[:, None]
    return ts, speed, tang, acc, xi, xi_ds, xi_len


def classify(strip, samples=4096, tol=CLASS_TOL):
    """Developable / principal / rectifying residuals at unit normalization."""
    ts, speed, tang, acc, xi, xi_ds, xi_len = _normalized_data(strip, samples)
    developable = float(
        np.abs(np.einsum("ni,ni->n", np.cross(tang, xi), xi_ds)).max()
    )
    principal_dot = float(np.abs(np.einsum("ni,ni->n", xi, tang)).max())
    principal_cross = float(np.linalg.norm(np.cross(xi_ds, tang), axis=-1).max())
    rectifying = float(np.abs(np.einsum("ni,ni->n", xi_ds, acc)).max())
    length_var = float(xi_len.max() - xi_len.min())
    passes = {
        "developable": developable < tol,
        "principal": developable < tol and principal_dot < tol and principal_cross < tol,
        "rectifying": developable < tol and rectifying < tol,
    }
    return StripClassReport(
        developable,
        (principal_dot, principal_cross),
        rectifying,
        length_var,
        bool(strip.ruling.anti_periodic),
        passes,
    )


def make_strip(centerline, ruling, halfwidth, class_claim="generic", samples=512, max_halvings=10):
    """Construct a strip, shrinking the half-width until the embedding check
    passes at the sampling resolution."""
    ts = _strip_samples(centerline, 2048)
    g1 = centerline.velocity(ts)
    xi = ruling.values(ts)
    cr = np.linalg.norm(np.cross(g1, xi), axis=-1)
    if cr.min() < 1e-10 * (np.linalg.norm(g1, axis=-1) * np.linalg.norm(xi, axis=-1)).max():
        raise RulingTangent("ruling parallel to the tangent somewhere")
    eps = float(halfwidth)
    for _ in range(max_halvings + 1):
        if _embedding_ok(centerline, ruling, eps, samples):
            return RuledStrip(centerline, ruling, eps, class_claim)
        eps *= 0.5
    raise EmbeddingFailed("no half-width passed the sampled embedding check")


def _embedding_ok(centerline, ruling, eps, samples):
    ts = _strip_samples(centerline, samples)
    g = centerline.point(ts)
    xi = ruling.unit_jet(ts, 0)[0]
    offsets = np.linspace(-eps, eps, 5)
    pts = (g[None, :, :] + offsets[:, None, None] * xi[None, :, :]).reshape(-1, 3)
    params = np.tile(ts, offsets.size)
    span = centerline.span
    spacing = np.linalg.norm(np.diff(g, axis=0), axis=-1)
    h_res = float(np.median(spacing))
    excl = 3.1 * span / samples
    dmin = min_distance_excluding(pts, params, span if centerline.periodic else 1e9, excl)
    return dmin > 0.75 * h_res


def randrup_rogen_gate(curve, inflections=None):
    """M/N >= 3 at every inflection; odd N makes the built strip Mobius."""
    if inflections is None:
        inflections = find_inflections(curve)
    rows = []
    admissible = True
    for r in inflections:
        ratio = float("inf") if r.order_m is None else r.order_m / r.order_n
        ok = ratio >= 3.0
        admissible &= ok
        rows.append((float(r.location), r.order_n, r.order_m, ratio, r.order_n % 2 == 1))
    total_n = sum(r.order_n for r in inflections)
    return GateReport(admissible, rows, total_n % 2 == 1)


def generic_inflection_test(curve, t0, tol=1e-6):
    """True iff det(gamma', gamma''', gamma'''') vanishes at a generic
    inflection (equivalent to torsion order M >= 3)."""
    from .curves import inflection_orders

    n_ord, _ = inflection_orders(curve, t0)
    if n_ord != 1:
        raise NotGenericInflection(f"N = {n_ord} at t0 = {t0}")
    d = J.derivatives_from_jet(curve.jet(np.array([t0]), 4))
    det = float(np.linalg.det(np.stack([d[1][0], d[3][0], d[4][0]])))
    scale = (
        np.linalg.norm(d[1][0]) * np.linalg.norm(d[3][0]) * np.linalg.norm(d[4][0]) + 1e-300
    )
    return abs(det) < tol * scale


def umbilic_locus(strip, samples=4096, tol=1e-12):
    """Parameters where the strip normal is stationary (both principal
    curvatures vanish).  Mobius strips must produce at least one."""
    curve = strip.centerline
    ts = _strip_samples(curve, samples)
    h0, h1 = _nu_ds2_and_slope(strip, ts)
    dia = curve.diameter()
    vals = h0 * dia**2
    locs = []
    nscan = ts.size if curve.periodic else ts.size - 1
    for i in range(nscan):
        ii = (i + 1) % ts.size
        if h1[i] < 0.0 <= h1[ii] and min(vals[i], vals[ii]) < 1e-4:
            a, b = ts[i], ts[i] + curve.span / samples
            for _ in range(70):
                mid = 0.5 * (a + b)
                _, hm = _nu_ds2_and_slope(strip, np.array([mid]))
                if hm[0] < 0.0:
                    a = mid
                else:
                    b = mid
            t0 = 0.5 * (a + b)
            hv, _ = _nu_ds2_and_slope(strip, np.array([t0]))
            if hv[0] * dia**2 < tol:
                locs.append(float(t0 % curve.span if curve.periodic else t0))
    locs = sorted(locs)
    if strip.ruling.anti_periodic and not locs:
        raise MoebiusWithoutUmbilic("Mobius strip produced an empty umbilic locus")
    return locs


def _nu_ds2_and_slope(strip, t):
    curve = strip.centerline
    gjet = curve.jet(t, 3)
    g1 = J.jet_derivative(gjet, 1)
    fj = strip.ruling.jet(t, 2)
    k = min(g1.shape[0], fj.shape[0])
    nu_raw = J.vcross(g1[:k], fj[:k])
    nu = J.jdiv(nu_raw, J.vnorm(nu_raw)[..., None])
    nu_d = J.jet_derivative(nu, 1)
    speed = J.vnorm(g1)[: nu_d.shape[0]]
    nu_ds = J.jdiv(nu_d, speed[..., None])
    h = J.vdot(nu_ds, nu_ds)
    return h[0], h[1]


def perpendicular_ruling_point(strip, samples=4096, tol=1e-9):
    """A parameter where the ruling is orthogonal to the tangent.

    Anti-periodic rulings change the sign of g = xi . tangent over one
    period, so a zero must exist; g identically zero (principal strips) is a
    legal degenerate answer."""
    curve = strip.centerline
    ts = _strip_samples(curve, samples)
    tang = curve.velocity(ts)
    tang /= np.linalg.norm(tang, axis=-1, keepdims=True)
    g = np.einsum("ni,ni->n", strip.ruling.unit_jet(ts, 0)[0], tang)
    if np.abs(g).max() < tol:
        return float(ts[0])
    sign_change = None
    for i in range(ts.size if curve.periodic else ts.size - 1):
        ii = (i + 1) % ts.size
        if g[i] == 0.0:
            return float(ts[i])
        if g[i] * g[ii] < 0.0:
            sign_change = (ts[i], ts[i] + curve.span / samples)
            break
    if sign_change is None:
        raise NoSignChange("ruling-tangent product never changes sign")
    a, b = sign_change

    def gval(t):
        tt = np.array([t])
        tg = curve.velocity(tt)[0]
        tg /= np.linalg.norm(tg)
        return float(np.dot(strip.ruling.unit_jet(tt, 0)[0][0], tg))

    ga = gval(a)
    for _ in range(80):
        mid = 0.5 * (a + b)
        gm = gval(mid)
        if gm == 0.0:
            return float(mid)
        if (gm < 0) == (ga < 0):
            a, ga = mid, gm
        else:
            b = mid
    t0 = 0.5 * (a + b)
    if abs(gval(t0)) > 1e-8:
        raise NoSignChange(f"bisection stalled, |g| = {abs(gval(t0)):.2e}")
    return float(t0)


def completion_certificate(strip, u_range=(-5.0, 5.0), grid=(512, 41)):
    """Certificate for weak completeness of the asymptotic completion.

    On twisting windows |d nu/ds| stays above rho0 > 0; elsewhere the ruling
    is vertical and lambda vanishes, so (1 + u lambda)^2 + |nu'|^2 >= rho0^2
    pointwise gives ds#^2 >= du^2 + rho0^2 ds^2.  rho0 is capped below 1,
    matching the planar-window bound.
    """
    curve = strip.centerline
    nt, nu_count = grid
    ts = _strip_samples(curve, nt)
    h0, _ = _nu_ds2_and_slope(strip, ts)
    nu_speed = np.sqrt(np.maximum(h0, 0.0))
    twist_mask = curve.window_mask(ts, {"twist"}) if hasattr(curve, "window_mask") else None
    if twist_mask is None or not twist_mask.any():
        raise Rho0Zero("strip lacks twisting-window annotations")
    rho0_raw = float(nu_speed[twist_mask].min())
    if rho0_raw <= 1e-9:
        raise Rho0Zero("normal speed vanishes inside a twisting window")
    rho0 = min(rho0_raw, 1.0 - 1e-9)
    # lambda from xi' = lambda gamma' (parallel ruling), arclength-normalized
    d = J.derivatives_from_jet(curve.jet(ts, 1))
    speed = np.linalg.norm(d[1], axis=-1)
    tang = d[1] / speed[:, None]
    fj = strip.ruling.unit_jet(ts, 1)
    xi_ds = J.jet_derivative(fj, 1)[0] / speed[:, None]
    lam = np.einsum("ni,ni->n", xi_ds, tang)
    us = np.linspace(u_range[0], u_range[1], nu_count)
    form = (1.0 + us[None, :] * lam[:, None]) ** 2 + (nu_speed**2)[:, None]
    margin = float((form - rho0**2).min())
    umbs = umbilic_locus(strip)
    return CompletionReport(
        rho0,
        rho0_raw,
        float(np.abs(lam).max()),
        margin,
        umbs,
        bool(margin >= 0.0),
        (nt, nu_count),
    )
