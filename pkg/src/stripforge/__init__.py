"""stripforge: developable Mobius strips with certified invariants."""

from .curves import (
    FourierCurve,
    FrenetData,
    InflectionReport,
    PiecewiseAnalyticCurve,
    RationalChartCurve,
    SpaceCurve,
    arclength_reparam,
    curvature,
    curve_from_dict,
    curve_to_dict,
    evaluate,
    find_inflections,
    frenet_frame,
    inflection_orders,
    torsion,
)

__version__ = "0.1.0"

__all__ = [
    "FourierCurve",
    "FrenetData",
    "InflectionReport",
    "PiecewiseAnalyticCurve",
    "RationalChartCurve",
    "SpaceCurve",
    "arclength_reparam",
    "curvature",
    "curve_from_dict",
    "curve_to_dict",
    "evaluate",
    "find_inflections",
    "frenet_frame",
    "inflection_orders",
    "torsion",
    "__version__",
]
