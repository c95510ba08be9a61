"""Constructions: twisting arcs, circles with twist inserts, knot-diagram
compilation, S-arcs, loops, torus bridge arcs, and the closed admissible
centerlines, together with the piecewise rulings that make them strips.

Everything is assembled from the analytic segments in
:mod:`stripforge.segments`, glued by flat C-inf blends whose windows sit in
exactly planar regions.  The source figures fix only the contracts
(inflection census, twist quanta, clearances), so the concrete profiles here
are this library's own and every constructor re-verifies its contract.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import jets as J
from . import segments as seg
from .curves import TWO_PI, PiecewiseAnalyticCurve, find_inflections
from .errors import (
    ConditionViolated,
    GateFailed,
    InsertOverlap,
    NegativeRadicand,
    NonTransversalCrossing,
    OutsideOmega,
    SelfIntersectionUnresolved,
    SmoothnessMismatch,
)
from .fields import CROSSING_SIGN, CallableField, E3, VectorField, tangent_jet
from .strips import classify, make_strip, randrup_rogen_gate

TORUS_A = seg.TORUS_A
TORUS_B = seg.TORUS_B

# gadget profile: equator margin half-angle, chi-step window, ruling markers
GADGET_W = 0.5
GADGET_CHI = (0.30, 0.70)
GADGET_MARKERS = (0.22, 0.78)
# world side a leftward arc lifts to (calibrated so the leftward quantum,
# conormal twist against the vertical reference, is +1/2 turn)
UP_FOR_LEFT = -1.0

_SSTAR = GADGET_W / (np.pi + 2.0 * GADGET_W)

_trapz = np.trapezoid if hasattr(np, "trapezoid") else np.trapz


def _hand_sign(hand):
    if hand not in ("left", "right"):
        raise ValueError(f"hand must be 'left' or 'right', got {hand!r}")
    return 1.0 if hand == "left" else -1.0


def _gadget_segment(center, xdir, ydir, radius, world_up):
    """Twisting-arc segment lifting to the requested side of the base plane,
    regardless of the in-plane frame handedness."""
    zdir = np.cross(xdir, ydir)
    zsign = world_up * float(np.sign(zdir @ E3))
    g = seg.sphere_sweep(
        GADGET_W, GADGET_CHI[0], GADGET_CHI[1], zsign, center, radius, xdir, ydir
    )
    return g


# --------------------------------------------------------------------------
# twisting arcs
# --------------------------------------------------------------------------


def twisting_arc(hand):
    """Open hemisphere arc over the unit disc with planar equatorial margins.

    Leftward arcs carry a conormal twist of +1/2 turn against the vertical
    reference framing, rightward arcs -1/2.
    """
    world_up = UP_FOR_LEFT * _hand_sign(hand)
    g = _gadget_segment(
        np.zeros(3), np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]), 1.0, world_up
    )
    g.local_range = (0.0, 1.0)  # keep both margins inside the open arc
    span = np.pi + 2.0 * GADGET_W
    return PiecewiseAnalyticCurve(
        [(g, 0.0, span)],
        [0.0],
        windows=[
            {
                "t0": GADGET_CHI[0] * span,
                "t1": GADGET_CHI[1] * span,
                "kind": "twist",
                "seg": 0,
                "marker_in": GADGET_MARKERS[0] * span,
                "marker_out": GADGET_MARKERS[1] * span,
                "center": [0.0, 0.0, 0.0],
                "radius": 1.0,
            }
        ],
        meta={"kind": "twisting_arc", "hand": hand},
        periodic=False,
    )


def gadget_conormal_field(curve, center, radius):
    """Unit conormal (sphere outward normal x tangent) along a curve lying on
    the sphere of the given center/radius."""
    center = np.asarray(center, dtype=float)

    def fn(t, order):
        gjet = curve.jet(t, order + 1)
        th = tangent_jet(curve, t, order)
        nrm = (gjet[: order + 1] - J.constant(center, order, n=t.size)) / radius
        return J.vcross(nrm, th[: order + 1])

    return CallableField(curve, fn, periodicity=1.0)


# --------------------------------------------------------------------------
# generic planar-base assembly (circles and knot diagrams alike)
# --------------------------------------------------------------------------


@dataclass
class BuildLog:
    kind: str
    params: dict
    windows: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)

    def to_dict(self):
        return {"kind": self.kind, "params": self.params, "windows": self.windows,
                "checks": self.checks}


def _segment_arclength(s, n=512):
    lo, hi = s.local_range
    ts = np.linspace(lo, hi, n)
    sj = J.variable(ts, 1)
    if hi != lo:
        sj[1] = 1.0
    pts = s.jet_local(sj, 1)
    speed = np.linalg.norm(pts[1], axis=-1)
    return abs(float(_trapz(speed, ts)))


class _Base2D:
    """Planar trig-polynomial base curve for graft assemblies."""

    def __init__(self, a0, acos, bsin):
        self.a0 = np.asarray(a0, dtype=float)
        self.acos = np.asarray(acos, dtype=float).reshape(-1, 2)
        self.bsin = np.asarray(bsin, dtype=float).reshape(-1, 2)

    def eval(self, th, order=0):
        th = np.atleast_1d(np.asarray(th, dtype=float))
        sj = J.variable(th, max(order, 1))
        jet = seg._fourier2d_jet(
            sj, {"a0": self.a0, "acos": self.acos, "bsin": self.bsin}, max(order, 1)
        )
        return jet

    def point(self, th):
        return self.eval(th, 0)[0][:, :2]

    def frame(self, th):
        jet = self.eval(th, 1)
        d = jet[1][:, :2]
        sp = np.linalg.norm(d, axis=-1, keepdims=True)
        tang = d / sp
        nrm = np.stack([-tang[:, 1], tang[:, 0]], axis=1)
        return jet[0][:, :2], tang, nrm, sp[:, 0]

    def curvature(self, th):
        jet = self.eval(th, 2)
        d1 = jet[1][:, :2]
        d2 = 2.0 * jet[2][:, :2]
        sp = np.linalg.norm(d1, axis=-1)
        return (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / sp**3

    def arc_segment(self, s_range, o0=0.0, o1=0.0, sa=0.0, sb=1.0):
        return seg.fourier2d_arc(self.a0, self.acos, self.bsin, s_range,
                                 o0=o0, o1=o1, sa=sa, sb=sb)


def _arc_offset_param(base, theta, dist, side):
    """Base parameter on the given side of theta at chord distance dist."""
    sp0 = base.frame(np.array([theta]))[3][0]
    th = theta + side * dist / sp0
    c = base.point(np.array([theta]))[0]
    for _ in range(30):
        p = base.point(np.array([th]))[0]
        sp = base.frame(np.array([th]))[3][0]
        f = np.linalg.norm(p - c) - dist
        th -= side * f / sp
        if abs(f) < 1e-12:
            break
    return th


def _graft_assembly(base, events, log):
    """Closed curve: a planar base with twisting-arc gadgets swept in.

    Each gadget is centred on the base curve; the strand leaves the base r
    behind the centre, turns onto the equatorial margin inside the junction
    blend, sweeps over the hemisphere, and rejoins the base r ahead.  For a
    crossing event the centre is the crossing point itself, so the pole
    passes right above the other strand.
    """
    events = sorted(events, key=lambda e: e["theta"])
    n = len(events)
    tagged = []
    for k, ev in enumerate(events):
        th = ev["theta"]
        p, tang, nrm, _ = base.frame(np.array([th]))
        p, tang, nrm = p[0], tang[0], nrm[0]
        r = ev["radius"]
        center = np.array([p[0], p[1], 0.0])
        xdir = np.array([-nrm[0], -nrm[1], 0.0])  # bulge to the right of travel
        ydir = np.array([tang[0], tang[1], 0.0])
        gadget = _gadget_segment(center, xdir, ydir, r, ev["world_up"])
        th_out = _arc_offset_param(base, th, r, +1.0)
        nxt = events[(k + 1) % n]
        th_next = nxt["theta"] + (TWO_PI if k + 1 == n else 0.0)
        th_next_in = _arc_offset_param(base, th_next, nxt["radius"], -1.0)
        tagged.append(("gadget", gadget, center, r, dict(ev)))
        tagged.append(("conn", base.arc_segment((th_out, th_next_in)), None, None, None))
    return _assemble_ring(tagged, log)


def _assemble_ring(tagged, log):
    lengths = np.array([_segment_arclength(p[1]) for p in tagged])
    spans = lengths / lengths.sum() * TWO_PI
    breaks = np.concatenate([[0.0], np.cumsum(spans)])
    breaks[-1] = TWO_PI
    pieces = []
    windows = []
    blend_hw = np.zeros(len(tagged))
    for k, (tag, s, center, radius, ev) in enumerate(tagged):
        g0, g1 = breaks[k], breaks[k + 1]
        pieces.append((s, g0, g1))
        lo, hi = s.local_range
        span = hi - lo
        if tag == "gadget":
            windows.append(
                {
                    "t0": g0 + (GADGET_CHI[0] - lo) / span * (g1 - g0),
                    "t1": g0 + (GADGET_CHI[1] - lo) / span * (g1 - g0),
                    "kind": "twist",
                    "seg": k,
                    "marker_in": g0 + (GADGET_MARKERS[0] - lo) / span * (g1 - g0),
                    "marker_out": g0 + (GADGET_MARKERS[1] - lo) / span * (g1 - g0),
                    "center": list(map(float, center)),
                    "radius": float(radius),
                    "event": {kk: vv for kk, vv in (ev or {}).items() if kk != "center"},
                }
            )
        elif tag in ("bridge", "loop"):
            frac_in = (ev or {}).get("marker_in_frac", 0.18)
            frac_out = (ev or {}).get("marker_out_frac", 0.82)
            windows.append(
                {
                    "t0": g0,
                    "t1": g1,
                    "kind": tag,
                    "seg": k,
                    "marker_in": g0 + frac_in * (g1 - g0),
                    "marker_out": g0 + frac_out * (g1 - g0),
                }
            )
        blend_hw[k] = 0.09 * min(spans[k], spans[k - 1])
    curve = PiecewiseAnalyticCurve(pieces, blend_hw, windows=_merge_windows(windows),
                                   meta={"log": log.to_dict()})
    _verify_assembly(curve, log)
    return curve


def _merge_windows(windows):
    """Fuse windows of consecutive pieces (multi-piece bridges and loops) so
    ruling markers always sit in the planar outer margins."""
    merged = []
    for w in sorted(windows, key=lambda w: w["t0"]):
        if (
            merged
            and merged[-1]["kind"] == w["kind"]
            and w["seg"] == merged[-1]["seg_end"] + 1
        ):
            merged[-1]["t1"] = w["t1"]
            merged[-1]["marker_out"] = w["marker_out"]
            merged[-1]["seg_end"] = w["seg"]
        else:
            w = dict(w)
            w["seg_end"] = w["seg"]
            merged.append(w)
    return merged


def _verify_assembly(curve, log, samples=4096):
    ts = np.linspace(0.0, TWO_PI, samples, endpoint=False)
    d = J.derivatives_from_jet(curve.jet(ts, 2))
    speed = np.linalg.norm(d[1], axis=-1)
    if speed.min() < 0.05 * speed.mean():
        raise SmoothnessMismatch(f"speed dips to {speed.min():.3e} vs mean {speed.mean():.3e}")
    vert = np.abs(d[1][:, 2]) / speed
    if vert.max() > 0.9999:
        raise SmoothnessMismatch("tangent nearly vertical; vertical framing breaks")
    log.checks["min_speed_ratio"] = float(speed.min() / speed.mean())
    log.checks["max_vertical_tangent"] = float(vert.max())


# --------------------------------------------------------------------------
# circle with twist inserts
# --------------------------------------------------------------------------


def circle_with_twists(m, hand, base_radius=1.5):
    """Planar circle with 2m+1 same-hand twisting arcs grafted on."""
    if m < 0:
        raise ValueError("m must be >= 0")
    n_ins = 2 * m + 1
    spacing = TWO_PI * base_radius / n_ins
    r = min(0.15, spacing / 10.0)
    world_up = UP_FOR_LEFT * _hand_sign(hand)
    base = _Base2D([0.0, 0.0], [[base_radius, 0.0]], [[0.0, base_radius]])
    gap = TWO_PI / n_ins
    if gap * base_radius < 6.0 * r:
        raise InsertOverlap(f"{n_ins} inserts of radius {r} do not fit the circle")
    events = [
        {"theta": gap * (i + 0.5), "world_up": world_up, "radius": r, "kind": "insert",
         "hand": hand}
        for i in range(n_ins)
    ]
    log = BuildLog("circle_with_twists",
                   {"m": m, "hand": hand, "radius": r, "base_radius": base_radius})
    return _graft_assembly(base, events, log)


# --------------------------------------------------------------------------
# knot diagrams
# --------------------------------------------------------------------------


@dataclass
class KnotDiagram:
    """Closed planar polyline with signed over/under crossings."""

    name: str
    points: np.ndarray
    crossings: list  # dicts with t_over, t_under (smooth parameter) and sign
    smooth: tuple | None = None  # (a0, acos, bsin) trig-polynomial model

    @staticmethod
    def from_json(text):
        d = json.loads(text) if isinstance(text, str) else text
        dia = KnotDiagram(
            d.get("name", "custom"),
            np.asarray(d["points"], dtype=float),
            [dict(c) for c in d.get("crossings", [])],
        )
        return _smooth_polyline_diagram(dia)

    def to_json(self):
        return json.dumps(
            {
                "name": self.name,
                "points": np.asarray(self.points).tolist(),
                "crossings": [
                    {k: (int(v) if k in ("over", "under", "sign") else v)
                     for k, v in c.items()}
                    for c in self.crossings
                ],
            }
        )

    @property
    def writhe(self):
        return int(sum(c["sign"] for c in self.crossings))


def _diagram_crossings(base, npts=2048):
    """Self-crossing parameters of the smooth base (signs need z data)."""
    from ._kernels import polyline_crossings

    th = np.linspace(0.0, TWO_PI, npts, endpoint=False)
    pts = base.point(th)
    poly = np.vstack([pts, pts[:1]])
    hits = polyline_crossings(poly, None, min_index_gap=2)
    out = []
    h = TWO_PI / npts
    for i, jj, s, u in hits:
        t1, t2 = th[int(i)] + s * h, th[int(jj)] + u * h
        t1, t2 = _refine_planar_crossing(base, t1, t2)
        out.append((t1, t2))
    return out


def _refine_planar_crossing(base, t1, t2, iters=14):
    for _ in range(iters):
        j1 = base.eval(np.array([t1]), 1)
        j2 = base.eval(np.array([t2]), 1)
        r = (j1[0][0] - j2[0][0])[:2]
        jac = np.stack([j1[1][0][:2], -j2[1][0][:2]], axis=1)
        step = np.linalg.solve(jac, r)
        t1, t2 = t1 - step[0], t2 - step[1]
        if np.linalg.norm(r) < 1e-13:
            break
    return float(t1), float(t2)


def builtin_diagram(name):
    """Built-in diagrams: unknot, 3_1, mirror_3_1."""
    if name in ("unknot", "0_1"):
        base = _Base2D([0.0, 0.0], [[1.5, 0.0]], [[0.0, 1.5]])
        th = np.linspace(0.0, TWO_PI, 256, endpoint=False)
        return KnotDiagram("unknot", base.point(th), [],
                           ([0.0, 0.0], [[1.5, 0.0]], [[0.0, 1.5]]))
    if name in ("3_1", "mirror_3_1"):
        zsign = -1.0 if name == "3_1" else 1.0
        scale = 2.2  # room for the gadget jogs around each crossing
        a0 = [0.0, 0.0]
        acos = [[0.0, scale], [0.0, -2.0 * scale]]
        bsin = [[scale, 0.0], [2.0 * scale, 0.0]]
        base = _Base2D(a0, acos, bsin)
        zf = lambda t: zsign * np.sin(3.0 * t)
        crossings = []
        for t1, t2 in _diagram_crossings(base):
            over, under = (t1, t2) if zf(t1) > zf(t2) else (t2, t1)
            d_o = base.frame(np.array([over]))[1][0]
            d_u = base.frame(np.array([under]))[1][0]
            sign = int(CROSSING_SIGN * np.sign(np.cross(d_o, d_u)))
            crossings.append({"t_over": over, "t_under": under, "sign": sign})
        th = np.linspace(0.0, TWO_PI, 512, endpoint=False)
        return KnotDiagram(name, base.point(th), crossings, (a0, acos, bsin))
    raise KeyError(f"unknown built-in diagram {name!r}")


def _smooth_polyline_diagram(dia, degree=16):
    """Fit a trig polynomial through a polyline diagram and recompute its
    crossing data on the smooth model."""
    pts = np.asarray(dia.points, dtype=float)
    closed = np.vstack([pts, pts[:1]])
    sl = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(closed, axis=0), axis=1))])
    total = sl[-1]
    th = np.linspace(0.0, total, 512, endpoint=False)
    resampled = np.stack(
        [np.interp(th, sl, closed[:, 0]), np.interp(th, sl, closed[:, 1])], axis=1
    )
    spec = np.fft.rfft(resampled, axis=0) / resampled.shape[0]
    nmax = min(degree, spec.shape[0] - 1)
    a0 = spec[0].real
    acos = 2.0 * spec[1 : nmax + 1].real
    bsin = -2.0 * spec[1 : nmax + 1].imag
    base = _Base2D(a0, acos, bsin)
    # carry over the over/under flags by matching crossing positions
    crossings = []
    for t1, t2 in _diagram_crossings(base):
        q = base.point(np.array([t1]))[0]
        best = None
        for c in dia.crossings:
            i, jj = c["over"], c["under"]
            mid = 0.5 * (pts[i % len(pts)] + pts[(i + 1) % len(pts)])
            dd = np.linalg.norm(mid - q)
            if best is None or dd < best[0]:
                best = (dd, c)
        if best is None:
            raise NonTransversalCrossing("polyline diagram lacks crossing flags")
        cflag = best[1]
        i_seg = cflag["over"] % len(pts)
        mid_over = 0.5 * (pts[i_seg] + pts[(i_seg + 1) % len(pts)])
        d1 = np.linalg.norm(base.point(np.array([t1]))[0] - mid_over)
        d2 = np.linalg.norm(base.point(np.array([t2]))[0] - mid_over)
        over, under = (t1, t2) if d1 <= d2 else (t2, t1)
        d_o = base.frame(np.array([over]))[1][0]
        d_u = base.frame(np.array([under]))[1][0]
        sign = int(CROSSING_SIGN * np.sign(np.cross(d_o, d_u)))
        crossings.append({"t_over": over, "t_under": under, "sign": sign})
    return KnotDiagram(dia.name, pts, crossings, (a0.tolist(), acos.tolist(), bsin.tolist()))


def compile_diagram(diagram, m, hand, gadget_radius=None):
    """Closed space curve realizing the diagram's knot with 2m+1 twist inserts.

    Each crossing gets a hemisphere gadget carrying the over strand above the
    under strand, immediately followed by an opposite-side gadget so the pair
    contributes no net twist; 2m+1 same-hand inserts are placed on free
    stretches.
    """
    if isinstance(diagram, str):
        diagram = builtin_diagram(diagram)
    if not diagram.crossings:
        return circle_with_twists(m, hand)
    if diagram.smooth is None:
        diagram = _smooth_polyline_diagram(diagram)
    base = _Base2D(*diagram.smooth)
    kappa = base.curvature(np.linspace(0.0, TWO_PI, 1024, endpoint=False))
    speed = base.frame(np.linspace(0.0, TWO_PI, 1024, endpoint=False))[3]
    r = gadget_radius or min(0.15, 0.25 / max(1e-9, np.abs(kappa).max()))
    events = []
    for c in diagram.crossings:
        ev = _crossing_event(base, c, r)
        events.append(ev)
        # compensating gadget: same strand, just downstream, opposite side
        comp_theta = ev["theta"] + 4.5 * r / speed.mean()
        events.append(
            {"theta": comp_theta, "world_up": -ev["world_up"], "radius": r,
             "kind": "compensator"}
        )
    events.extend(_insert_events(base, events, 2 * m + 1, hand, r, speed.mean()))
    log = BuildLog(
        "compile_diagram",
        {"name": diagram.name, "m": m, "hand": hand, "radius": r,
         "writhe": diagram.writhe},
    )
    curve = _graft_assembly(base, events, log)
    curve.meta["diagram_writhe"] = diagram.writhe
    return curve


def _crossing_event(base, crossing, r):
    """Gadget event carrying the over strand above the under strand.

    The gadget is centred at the crossing, its sweep axis along the over
    strand, so the under strand threads the disc near the footprint's waist,
    well away from the equatorial margins; that needs a reasonably
    transversal crossing.
    """
    t_over, t_under = crossing["t_over"], crossing["t_under"]
    d_o = base.frame(np.array([t_over]))[1][0]
    d_u = base.frame(np.array([t_under]))[1][0]
    angle = abs(float(np.cross(d_o, d_u)))
    if angle < 0.6:
        raise NonTransversalCrossing(
            f"crossing at theta={t_over:.3f} too grazing (|sin| = {angle:.2f})"
        )
    return {
        "theta": float(t_over),
        "world_up": 1.0,
        "radius": r,
        "kind": "crossing",
        "t_under": float(t_under),
    }


def _insert_events(base, existing, count, hand, r, mean_speed):
    world_up = UP_FOR_LEFT * _hand_sign(hand)
    taken = sorted(e["theta"] % TWO_PI for e in existing)
    margin = 6.0 * r / mean_speed
    out = []
    candidates = np.linspace(0.0, TWO_PI, 512, endpoint=False)
    pts = base.point(np.linspace(0.0, TWO_PI, 2048, endpoint=False))
    for th in candidates:
        if len(out) == count:
            break
        all_taken = taken + [e["theta"] % TWO_PI for e in out]
        if all_taken:
            gaps = [min(abs(th - t), TWO_PI - abs(th - t)) for t in all_taken]
            if min(gaps) < margin:
                continue
        # the insert disc must be clear of the other strands
        p, tang, nrm, _ = base.frame(np.array([th]))
        center = p[0] + r * nrm[0]
        d = np.linalg.norm(pts - center, axis=1)
        near_param = np.abs(np.linspace(0.0, TWO_PI, 2048, endpoint=False) - th)
        near_param = np.minimum(near_param, TWO_PI - near_param)
        if d[near_param > 0.4].min() < 2.2 * r:
            continue
        out.append({"theta": float(th), "world_up": world_up, "radius": r,
                    "kind": "insert", "hand": hand})
    if len(out) < count:
        raise InsertOverlap(f"could only place {len(out)} of {count} twist inserts")
    return out


# --------------------------------------------------------------------------
# S-arc, loops
# --------------------------------------------------------------------------

S_ARC_MARGIN = 0.35  # angular extent of the osculating-circle margins

# loops are cartesian limacons rho (cos s + cos 2s + 1, sin s + sin 2s):
# strictly one-signed curvature with a built-in transversal node.  A loop
# always rejoins the base *behind* where it left, so the outgoing strand
# re-runs a short stretch of the base floated at +-LOOP_DZ before descending
LOOP_RHO = 0.12
LOOP_EPS = 0.045
LOOP_DZ = 0.02

_LOOP_ANCHORS = [np.pi + 0.42, TWO_PI - 0.42, np.pi + 0.95, TWO_PI - 0.95]


def _lemniscate_frame(t):
    tt = np.atleast_1d(t)
    sj = J.variable(tt, 2)
    lem = seg.lemniscate_arc()
    jet = lem.jet_local(sj, 2)
    p = jet[0][:, :2]
    d1 = jet[1][:, :2]
    d2 = 2.0 * jet[2][:, :2]
    sp = np.linalg.norm(d1, axis=-1)
    tang = d1 / sp[:, None]
    kappa = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / sp**3
    return p, tang, kappa


def _loop_segment(anchor, bump_sign):
    """Limacon loop grafted tangentially at a lemniscate anchor.

    Entry is the downstream trimmed end, exit the upstream one; the exit
    half (with the second node passage) is floated at the bump height, and
    the caller floats the re-run base stretch to match before descending.
    """
    p, tang, kappa = _lemniscate_frame(anchor)
    p, tang, kap = p[0], tang[0], kappa[0]
    nrm = np.array([-tang[1], tang[0]])
    s_m = -np.sign(kap) if kap != 0 else 1.0
    xdir = np.array([s_m * nrm[0], s_m * nrm[1], 0.0])
    ydir = np.array([tang[0], tang[1], 0.0])
    mat = np.stack([xdir, ydir, np.array([0.0, 0.0, 1.0])], axis=1)
    rho = LOOP_RHO
    a0 = [rho, 0.0]
    acos = [[rho, 0.0], [rho, 0.0]]
    bsin = [[0.0, rho], [0.0, rho]]
    anchor_local = np.array([3.0 * rho, 0.0, 0.0])
    offset = np.concatenate([p, [0.0]]) - mat @ anchor_local
    # float the exit half: plateau from past the first node passage through
    # the segment end (the outgoing base stretch continues at this height)
    bumps = [(2.0 * np.pi / 3.0 + 0.55, TWO_PI - LOOP_EPS + 0.75, bump_sign * LOOP_DZ, 0.5)]
    s_seg = seg.fourier2d_arc(a0, acos, bsin, (LOOP_EPS, TWO_PI - LOOP_EPS),
                              matrix=mat, offset=offset, bumps=bumps)
    ends_local = np.array(
        [
            rho * np.array([np.cos(e) + np.cos(2 * e) + 1.0, np.sin(e) + np.sin(2 * e), 0.0])
            for e in (LOOP_EPS, TWO_PI - LOOP_EPS)
        ]
    )
    ends = (mat @ ends_local.T).T + offset
    return s_seg, s_m, ends[0][:2], ends[1][:2]


def _loop_crossing_sign(s_m, bump_sign):
    """Projected sign of the loop's node crossing (exit half floats)."""
    d = lambda s: np.array(
        [-np.sin(s) - 2.0 * np.sin(2.0 * s), np.cos(s) + 2.0 * np.cos(2.0 * s)]
    )
    d_entry, d_exit = d(2.0 * np.pi / 3.0), d(4.0 * np.pi / 3.0)
    d_o, d_u = (d_exit, d_entry) if bump_sign > 0 else (d_entry, d_exit)
    return CROSSING_SIGN * np.sign(np.cross(d_o, d_u)) * (-s_m)


def _nearest_lemniscate_param(q, guess):
    """Lemniscate parameter whose point is closest to the planar point q."""
    t = guess
    lem = seg.lemniscate_arc()
    for _ in range(30):
        sj = J.variable(np.array([t]), 3)
        jet = lem.jet_local(sj, 3)
        d = J.derivatives_from_jet(jet)
        rel = d[0][0][:2] - q[:2]
        g = float(rel @ d[1][0][:2])
        h = float(d[1][0][:2] @ d[1][0][:2] + rel @ d[2][0][:2])
        t -= g / h
        if abs(g) < 1e-14:
            break
    return t


def s_arc():
    """The lemniscate branch with C-inf contact margins on its two
    osculating circles (radius 1/3 at (-2/3, 0) and (2/3, 0))."""
    tagged = _s_arc_pieces(0)
    return _open_arc(tagged, meta={"kind": "s_arc"})


def _s_arc_pieces(m):
    """Tagged pieces of the (possibly looped) S-arc, A to B."""
    if abs(m) > len(_LOOP_ANCHORS):
        raise InsertOverlap(f"no room for {abs(m)} loops on the S-arc")
    anchors = sorted(_LOOP_ANCHORS[: abs(m)])
    cl = seg.circle_arc([-TORUS_A, 0.0, 0.0], TORUS_B,
                        ang_range=(np.pi + S_ARC_MARGIN, np.pi))
    cr = seg.circle_arc([TORUS_A, 0.0, 0.0], TORUS_B, ang_range=(0.0, S_ARC_MARGIN))
    tagged = [("margin", cl, None, None, None)]
    prev_cut = np.pi
    for anchor in anchors:
        bump_sign = float(np.sign(m))
        loop_seg, s_m, entry_pt, exit_pt = _loop_segment(anchor, bump_sign)
        if _loop_crossing_sign(s_m, bump_sign) != np.sign(m):
            bump_sign = -bump_sign
            loop_seg, s_m, entry_pt, exit_pt = _loop_segment(anchor, bump_sign)
        t_entry = _nearest_lemniscate_param(entry_pt, anchor + 0.05)
        t_exit = _nearest_lemniscate_param(exit_pt, anchor - 0.05)
        assert t_exit < anchor < t_entry, "loop graft points out of order"
        tagged.append(("lem", seg.lemniscate_arc((prev_cut, t_entry)), None, None, None))
        # the outgoing base stretch re-runs (t_exit, t_entry) floated at the
        # bump height, passing over the incoming strand, then descends
        out_bumps = [(t_exit - 0.4, t_entry + 0.25, bump_sign * LOOP_DZ, 0.18)]
        tagged.append(("loop", loop_seg, None, None, {"anchor": anchor}))
        tagged.append(
            ("loop", seg.lemniscate_arc((t_exit, t_entry + 0.32), bumps=out_bumps),
             None, None, {"anchor": anchor, "flight": True})
        )
        prev_cut = t_entry + 0.32
    tagged.append(("lem", seg.lemniscate_arc((prev_cut, TWO_PI)), None, None, None))
    tagged.append(("margin", cr, None, None, None))
    return tagged


def _open_arc(tagged, meta=None):
    lengths = np.array([_segment_arclength(p[1]) for p in tagged])
    breaks = np.concatenate([[0.0], np.cumsum(lengths)])
    n = len(tagged)
    caps = np.full(n + 1, np.inf)
    pieces = []
    windows = []
    for k, (tag, s, _, _, ev) in enumerate(tagged):
        pieces.append((s, breaks[k], breaks[k + 1]))
        if tag in ("loop", "bridge"):
            windows.append(
                {"t0": breaks[k], "t1": breaks[k + 1], "kind": tag, "seg": k,
                 "marker_in": breaks[k] + 0.15 * lengths[k],
                 "marker_out": breaks[k] + 0.85 * lengths[k]}
            )
        if ev and "hw_in" in ev:
            caps[k] = min(caps[k], ev["hw_in"])
        if ev and "hw_out" in ev:
            caps[k + 1] = min(caps[k + 1], ev["hw_out"])
    blend_hw = np.zeros(n)
    for k in range(1, n):
        blend_hw[k] = min(0.09 * min(lengths[k], lengths[k - 1]), caps[k])
    return PiecewiseAnalyticCurve(pieces, blend_hw, windows=_merge_windows(windows),
                                  meta=meta or {}, periodic=False)


def looped_s_arc(m):
    """S-arc with |m| limacon loops; still exactly one (the original)
    inflection, embedded after the vertical crossing bumps."""
    tagged = _s_arc_pieces(m)
    arc = _open_arc(tagged, meta={"kind": "looped_s_arc", "m": m})
    _check_open_arc_embedded(arc)
    return arc


def _check_open_arc_embedded(arc, samples=2048):
    from ._kernels import min_distance_excluding

    lo, hi = arc.domain
    ts = np.linspace(lo, hi, samples)
    pts = arc.point(ts)
    spacing = np.linalg.norm(np.diff(pts, axis=0), axis=-1)
    dmin = min_distance_excluding(pts, ts, 1e9, 3.1 * (hi - lo) / samples)
    if dmin < 0.5 * np.median(spacing):
        raise SelfIntersectionUnresolved(
            f"open arc self-distance {dmin:.2e} below resolution"
        )


# --------------------------------------------------------------------------
# torus lift and bridge arcs
# --------------------------------------------------------------------------


def torus_lift(p):
    """Lift a point of the planar domain Omega onto the half-torus patch."""
    x, y = float(p[0]), float(p[1])
    in_rect = abs(x) <= TORUS_A and abs(y) <= TORUS_B
    in_left = (x + TORUS_A) ** 2 + y**2 <= TORUS_B**2 + 1e-15
    in_right = (x - TORUS_A) ** 2 + y**2 <= TORUS_B**2 + 1e-15
    if not (in_rect or in_left or in_right):
        raise OutsideOmega(f"({x}, {y}) outside the lift domain")
    rad = (TORUS_A + np.sqrt(TORUS_B**2 - y**2)) ** 2 - x**2
    if rad < -1e-14:
        raise NegativeRadicand(f"radicand {rad:.3e} at ({x}, {y})")
    return np.array([x, y, np.sqrt(max(rad, 0.0))])


BRIDGE_V = np.pi / 6.0  # tube angle of the chord endpoints (E and F)
BRIDGE_MARGIN_V = 0.35


def _bridge_tagged(k_diagram=None):
    """Bridge pieces from the B-side circle to the A-side circle.

    The chord runs diagonally in the chart, from (u, v) = (0, pi/6) to
    (pi, -pi/6); the end arcs then reach the lemniscate junction points with
    matching tangent senses.
    """
    p1 = seg.torus_line((0.0, 0.0), (0.0, BRIDGE_V))
    tail = seg.torus_line((np.pi, -BRIDGE_V), (np.pi, 0.0))
    if k_diagram is None:
        chord = [("bridge", seg.torus_line((0.0, BRIDGE_V), (np.pi, -BRIDGE_V)),
                  None, None, None)]
    else:
        chord = _k_chord_pieces(k_diagram)
    return [("bridge", p1, None, None, None)] + chord + [("bridge", tail, None, None, None)]


def bridge_arc():
    """Open bridge arc (no knotting)."""
    tagged = _bridge_tagged(None)
    arc = _open_arc(tagged, meta={"kind": "bridge_arc"})
    # annotate everything as one bridge window
    arc.windows = [{
        "t0": arc.domain[0], "t1": arc.domain[1], "kind": "bridge", "seg": 0,
        "marker_in": arc.domain[0] + 0.12 * arc.span,
        "marker_out": arc.domain[1] - 0.12 * arc.span,
    }]
    return arc


def _k_chord_pieces(diagram, v_low=-0.40 * np.pi, v_high=BRIDGE_V - 0.18):
    """Chart-polyline route through a knot diagram, radial bumps at crossings.

    The diagram is drawn in the chart rectangle; the route enters from
    (0, pi/6), traverses the full diagram, and leaves to (pi, -pi/6).  The
    two connector strands cross diagram strands passing over them (radially
    outward), which leaves the knot type untouched.
    """
    if isinstance(diagram, str):
        diagram = builtin_diagram(diagram)
    if diagram.smooth is None:
        diagram = _smooth_polyline_diagram(diagram)
    base = _Base2D(*diagram.smooth)
    th = np.linspace(0.0, TWO_PI, 160, endpoint=False)
    pts = base.point(th)
    # scale the diagram into the chart window
    umin, umax = 0.75, np.pi - 0.75
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    su = (umax - umin) / (hi[0] - lo[0])
    sv = (v_high - 0.25 - (v_low + 0.1)) / (hi[1] - lo[1])
    s = min(su, sv)
    cu = 0.5 * (umin + umax) - s * 0.5 * (hi[0] + lo[0])
    cv = 0.5 * (v_low + 0.1 + v_high - 0.25) - s * 0.5 * (hi[1] + lo[1])
    chart_pts = np.stack([s * pts[:, 0] + cu, s * pts[:, 1] + cv], axis=1)
    # waypoint route: entry from F down to the diagram, around it, out to E
    entry = np.array([0.0, BRIDGE_V])
    exit_ = np.array([np.pi, -BRIDGE_V])
    route = [entry, np.array([chart_pts[0, 0], BRIDGE_V - 0.06])]
    route += [q for q in chart_pts]
    route += [np.array([chart_pts[0, 0] + 0.12, chart_pts[0, 1] + 0.04])]
    route += [np.array([exit_[0] - 0.35, 0.5 * (chart_pts[-1, 1] + -BRIDGE_V)]), exit_]
    pieces = []
    for a, b in zip(route[:-1], route[1:]):
        pieces.append(("bridge", seg.torus_line(tuple(a), tuple(b)), None, None, None))
    return _resolve_chart_crossings(pieces, diagram, s)


def _resolve_chart_crossings(pieces, diagram, scale, delta=0.035):
    """Add radial over/under bumps wherever the chart route crosses itself."""
    from ._kernels import polyline_crossings

    # dense chart polyline with piece bookkeeping
    per = 48
    chain = []
    for idx, (_, s, _, _, _) in enumerate(pieces):
        ss = np.linspace(0.0, 1.0, per, endpoint=False)
        u = s.params["u0"] + (s.params["u1"] - s.params["u0"]) * ss
        v = s.params["v0"] + (s.params["v1"] - s.params["v0"]) * ss
        for k in range(per):
            chain.append((idx, ss[k], u[k], v[k]))
    arr = np.array([(c[2], c[3]) for c in chain] + [(chain[0][2], chain[0][3])])
    hits = polyline_crossings(arr, None, min_index_gap=2)
    bump_plan = {}
    for i, jj, t, u in hits:
        ia, ib = int(i), int(jj)
        pa, sa = chain[ia][0], chain[ia][1] + t / per
        pb, sb = chain[ib][0], chain[ib][1] + u / per
        # diagram-internal crossings follow the diagram's over/under flags;
        # connector strands always pass over
        first_is_over = _chart_over_first(pieces, diagram, pa, sa, pb, sb)
        for (pp, sloc, up) in ((pa, sa, first_is_over), (pb, sb, not first_is_over)):
            bump_plan.setdefault(pp, []).append(
                (max(sloc - 0.12, 0.0), min(sloc + 0.12, 1.0),
                 delta if up else -delta)
            )
    out = []
    for idx, (tag, s, a, b, ev) in enumerate(pieces):
        if idx in bump_plan:
            s = seg.torus_line(
                (s.params["u0"], s.params["v0"]),
                (s.params["u1"], s.params["v1"]),
                zsign=s.params["zsign"],
                bumps=bump_plan[idx],
            )
        out.append((tag, s, a, b, ev))
    return out


def _chart_over_first(pieces, diagram, pa, sa, pb, sb):
    """Decide over/under for a chart crossing: route connectors beat
    diagram strands; diagram-internal crossings use the diagram flags."""
    n_route_head = 2  # entry pieces before the diagram strands
    n = len(pieces)
    is_diag_a = n_route_head <= pa < n - 3
    is_diag_b = n_route_head <= pb < n - 3
    if not is_diag_a and is_diag_b:
        return True
    if is_diag_a and not is_diag_b:
        return False
    if not is_diag_a and not is_diag_b:
        return True  # connector over connector: first one wins, consistently
    # both strands in the diagram: match against the nearest flagged crossing
    ta = (pa - n_route_head + sa) / max(1, (n - 3 - n_route_head)) * TWO_PI
    tb = (pb - n_route_head + sb) / max(1, (n - 3 - n_route_head)) * TWO_PI
    best = None
    for c in diagram.crossings:
        d = min(_circ_dist(ta, c["t_over"]) + _circ_dist(tb, c["t_under"]),
                _circ_dist(tb, c["t_over"]) + _circ_dist(ta, c["t_under"]))
        if best is None or d < best[0]:
            flips = _circ_dist(ta, c["t_over"]) + _circ_dist(tb, c["t_under"]) > \
                _circ_dist(tb, c["t_over"]) + _circ_dist(ta, c["t_under"])
            best = (d, not flips)
    if best is None:
        return True
    return best[1]


def _circ_dist(a, b):
    d = abs(a - b) % TWO_PI
    return min(d, TWO_PI - d)


def k_bridge_arc(diagram):
    """Bridge arc routed through a knot diagram on the torus patch."""
    tagged = _bridge_tagged(diagram)
    arc = _open_arc(tagged, meta={"kind": "k_bridge_arc"})
    arc.windows = [{
        "t0": arc.domain[0], "t1": arc.domain[1], "kind": "bridge", "seg": 0,
        "marker_in": arc.domain[0] + 0.06 * arc.span,
        "marker_out": arc.domain[1] - 0.06 * arc.span,
    }]
    return arc


# --------------------------------------------------------------------------
# admissible closed centerlines (S-arc + bridge)
# --------------------------------------------------------------------------


def assemble_admissible_centerline(m=0, diagram=None):
    """Closed curve c0 (or c_K): looped S-arc plus (knotted) bridge arc,
    rotated so the unique generic inflection sits at t = 0 with the tangent
    along x."""
    s_tagged = _s_arc_pieces(m)
    inner = s_tagged[1:-1]  # drop the margin circles; the bridge supplies them
    bridge = _bridge_tagged(diagram)
    # split the lemniscate piece containing the node so the cycle starts there
    node = 3.0 * np.pi / 2.0
    k_split = next(
        i
        for i, p in enumerate(inner)
        if p[0] == "lem" and p[1].local_range[0] < node < p[1].local_range[1]
    )
    lo, hi = inner[k_split][1].local_range
    head = ("lem", seg.lemniscate_arc((node, hi)), None, None, None)
    tail = ("lem", seg.lemniscate_arc((lo, node)), None, None, None)
    tagged = [head] + inner[k_split + 1 :] + bridge + inner[:k_split] + [tail]
    rot = np.array(
        [
            [np.cos(np.pi / 4), -np.sin(np.pi / 4), 0.0],
            [np.sin(np.pi / 4), np.cos(np.pi / 4), 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    tagged = [(tag, s.transformed(rot), a, b, ev) for (tag, s, a, b, ev) in tagged]
    log = BuildLog("admissible_centerline",
                   {"m": m, "knot": getattr(diagram, "name", None) if diagram is not None
                    else (diagram if isinstance(diagram, str) else None)})
    curve = _assemble_ring(tagged, log)
    _verify_admissible_conditions(curve)
    return curve


def _verify_admissible_conditions(curve, tol=1e-8):
    d = J.derivatives_from_jet(curve.jet(np.array([0.0]), 4))
    scale = np.linalg.norm(d[1][0])
    if abs(d[1][0][0]) < 0.1 * scale:
        raise ConditionViolated(2, f"x'(0) = {d[1][0][0]:.3e} too small")
    if abs(d[1][0][1]) > tol * scale or abs(d[2][0][1]) > tol * scale:
        raise ConditionViolated(2, "y'(0) or y''(0) nonzero")
    if abs(d[3][0][1]) < 1e-6 * scale:
        raise ConditionViolated(2, "y'''(0) vanishes")
    zmax = max(abs(d[k][0][2]) for k in (1, 2, 3, 4))
    if zmax > tol * scale:
        raise ConditionViolated(3, f"z-derivatives at 0 reach {zmax:.3e}")
    infl = find_inflections(curve)
    if len(infl) != 1:
        raise ConditionViolated(1, f"{len(infl)} inflections found (need exactly 1)")
    gap = min(infl[0].location, TWO_PI - infl[0].location)
    if gap > 1e-6:
        raise ConditionViolated(1, f"inflection at {infl[0].location:.2e}, not at 0")
    gate = randrup_rogen_gate(curve, infl)
    if not gate.admissible:
        raise GateFailed("Randrup-Rogen gate fails on the assembled centerline")
    curve.meta["inflection"] = {
        "t0": float(infl[0].location),
        "N": infl[0].order_n,
        "M": infl[0].order_m,
    }


# --------------------------------------------------------------------------
# strip rulings over forge centerlines
# --------------------------------------------------------------------------


class RulingWindowsField(VectorField):
    """Piecewise strip ruling: vertical on planar stretches, the sphere
    conormal or the Frenet Darboux direction on the marked windows, with
    signs chained for continuity at the window markers."""

    def __init__(self, curve, flavor):
        super().__init__(curve, periodicity=1.0, normal=(flavor == "principal"))
        self.flavor = flavor
        regions = []  # (t0, t1, kind, payload)
        markers = sorted(curve.windows, key=lambda w: w["marker_in"])
        prev = 0.0
        for w in markers:
            if w["kind"] == "twist" and flavor == "principal":
                kind, payload = "conormal", (np.array(w["center"]), w["radius"])
            else:
                kind, payload = "frenet", None
            regions.append((prev, w["marker_in"], "planar", None))
            regions.append((w["marker_in"], w["marker_out"], kind, payload))
            prev = w["marker_out"]
        regions.append((prev, TWO_PI, "planar", None))
        self.regions = [r for r in regions if r[1] > r[0] + 1e-12]
        self._signs = self._chain_signs()
        self.periodicity = self._signs[-1] * self._signs[0] * self._end_sign()

    def _raw_jet(self, kind, payload, t, order):
        curve = self.base
        if kind == "planar":
            return J.constant(E3, order, n=t.size)
        if kind == "conormal":
            center, radius = payload
            gjet = curve.jet(t, order + 1)
            th = tangent_jet(curve, t, order)
            nrm = (gjet[: order + 1] - J.constant(center, order, n=t.size)) / radius
            return J.vcross(nrm, th[: order + 1])
        # frenet: normalized Darboux direction (tau/kappa) T + B
        gjet = curve.jet(t, order + 3)
        g1 = J.jet_derivative(gjet, 1)
        g2 = J.jet_derivative(gjet, 2)
        g3 = J.jet_derivative(gjet, 3)
        v = J.vcross(g1, g2)
        delta = J.vdot(v, g3)
        speed = J.vnorm(g1)
        that = J.jdiv(g1, speed[..., None])
        vmag = J.vnorm(v)
        bhat = J.jdiv(v, vmag[..., None])
        coef = J.jdiv(J.jmul(delta, J.jmul(speed, J.jmul(speed, speed))),
                      J.jmul(vmag, J.jmul(vmag, vmag)))
        return (J.jmul(coef[..., None], that[: order + 1]) + bhat[: order + 1])[: order + 1]

    def _chain_signs(self):
        signs = [1.0]
        for k in range(1, len(self.regions)):
            t_m = np.array([self.regions[k][0]])
            a = self._raw_jet(self.regions[k - 1][2], self.regions[k - 1][3], t_m, 0)[0, 0]
            b = self._raw_jet(self.regions[k][2], self.regions[k][3], t_m, 0)[0, 0]
            agree = float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
            if abs(agree) < 0.99:
                raise SmoothnessMismatch(
                    f"ruling mismatch {agree:+.3f} at window marker t = {t_m[0]:.4f}"
                )
            signs.append(signs[-1] * (1.0 if agree > 0 else -1.0))
        return signs

    def _end_sign(self):
        t_end = np.array([TWO_PI - 1e-9])
        t_start = np.array([1e-9])
        a = self._raw_jet(self.regions[-1][2], self.regions[-1][3], t_end, 0)[0, 0]
        b = self._raw_jet(self.regions[0][2], self.regions[0][3], t_start, 0)[0, 0]
        return 1.0 if float(np.dot(a, b)) > 0 else -1.0

    def jet(self, t, order):
        t = np.mod(np.atleast_1d(np.asarray(t, dtype=float)), TWO_PI)
        out = np.zeros((order + 1, t.size, 3))
        starts = np.array([r[0] for r in self.regions])
        idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(self.regions) - 1)
        for k, (t0, t1, kind, payload) in enumerate(self.regions):
            m = idx == k
            if np.any(m):
                out[:, m] = self._signs[k] * self._raw_jet(kind, payload, t[m], order)
        return out

    def to_dict(self):
        return {"kind": "forge_ruling", "flavor": self.flavor}


def build_mobius(centerline, flavor, halfwidth=None):
    """Strip with anti-periodic ruling over a forge centerline.

    principal: vertical field on planar windows, sphere conormal on twisting
    windows (the ruling is then parallel, hence principal).  rectifying: the
    extended Darboux direction, built window-wise.
    """
    if flavor not in ("principal", "rectifying"):
        raise ValueError(f"unknown flavor {flavor!r}")
    if flavor == "principal":
        kinds = {w["kind"] for w in centerline.windows}
        if kinds - {"twist"}:
            raise GateFailed(
                "principal flavor needs a centerline whose nonplanar windows are "
                f"all twisting arcs (got {sorted(kinds)})"
            )
    else:
        infl = find_inflections(centerline)
        gate = randrup_rogen_gate(centerline, infl)
        if not gate.admissible:
            raise GateFailed("Randrup-Rogen gate fails; no rectifying extension")
    ruling = RulingWindowsField(centerline, flavor)
    if not ruling.anti_periodic:
        raise SmoothnessMismatch("ruling came back periodic; strip would be an annulus")
    eps = halfwidth if halfwidth is not None else 0.05 * centerline.diameter()
    strip = make_strip(centerline, ruling, eps, class_claim=flavor)
    report = classify(strip)
    if not report.passes[flavor]:
        raise SmoothnessMismatch(
            f"built strip fails its {flavor} claim: {report.to_dict()}"
        )
    strip.class_report = report
    return strip
