"""Truncated Taylor-series ("jet") arithmetic.

Every curve, field and residual in this package is evaluated through
fixed-order jets, so derivatives of any order are exact up to roundoff
instead of finite-differenced.  A jet is an ndarray whose leading axis
indexes the Taylor coefficient: ``jet[k] = f^(k)(t0) / k!``.  Scalar jets
over a batch of N base points have shape (K+1, N); vector jets (K+1, N, 3).

All operations are vectorized over the batch axis; the loops below run only
over the jet order K, which is small (<= ~24).
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "variable",
    "constant",
    "jmul",
    "jdiv",
    "jsqrt",
    "jexp",
    "jsin_cos",
    "jtan",
    "jpolyval",
    "jet_derivative",
    "derivatives_from_jet",
    "vcross",
    "vdot",
    "vnorm",
    "shifted_jdiv",
    "flat_step",
    "smooth_step",
    "smooth_bump",
]

_FACT = np.array([math.factorial(k) for k in range(40)], dtype=float)


def variable(t, order):
    """Jet of the identity map at the points ``t``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros((order + 1,) + t.shape)
    out[0] = t
    if order >= 1:
        out[1] = 1.0
    return out


def constant(value, order, n=None):
    value = np.asarray(value, dtype=float)
    shape = (order + 1,) + ((n,) if n is not None else ()) + value.shape
    out = np.zeros(shape)
    out[0] = value
    return out


def jmul(a, b):
    """Cauchy product of two jets, truncated to the shorter order."""
    k = min(a.shape[0], b.shape[0])
    out = np.zeros(np.broadcast_shapes(a[:k].shape, b[:k].shape))
    for i in range(k):
        for j in range(k - i):
            out[i + j] += a[i] * b[j]
    return out


def jdiv(a, b):
    k = min(a.shape[0], b.shape[0])
    shape = np.broadcast_shapes(a[:k].shape, b[:k].shape)
    out = np.zeros(shape)
    aa = np.broadcast_to(a[:k], shape)
    out[0] = aa[0] / b[0]
    for i in range(1, k):
        acc = aa[i].copy()
        for j in range(i):
            acc -= out[j] * b[i - j]
        out[i] = acc / b[0]
    return out


def jsqrt(a):
    k = a.shape[0]
    out = np.zeros_like(a)
    out[0] = np.sqrt(a[0])
    for i in range(1, k):
        acc = a[i].copy()
        for j in range(1, i):
            acc -= out[j] * out[i - j]
        out[i] = acc / (2.0 * out[0])
    return out


def jexp(a):
    k = a.shape[0]
    out = np.zeros_like(a)
    out[0] = np.exp(a[0])
    for i in range(1, k):
        acc = np.zeros_like(out[0])
        for j in range(1, i + 1):
            acc += j * a[j] * out[i - j]
        out[i] = acc / i
    return out


def jsin_cos(a):
    """Jets of sin(f) and cos(f) for a jet f, via the joint recurrence."""
    k = a.shape[0]
    s = np.zeros_like(a)
    c = np.zeros_like(a)
    s[0] = np.sin(a[0])
    c[0] = np.cos(a[0])
    for i in range(1, k):
        sa = np.zeros_like(s[0])
        ca = np.zeros_like(c[0])
        for j in range(1, i + 1):
            sa += j * a[j] * c[i - j]
            ca += j * a[j] * s[i - j]
        s[i] = sa / i
        c[i] = -ca / i
    return s, c


def jtan(a):
    s, c = jsin_cos(a)
    return jdiv(s, c)


def jpolyval(coeffs, a):
    """Evaluate a polynomial (coeffs[i] multiplies x**i) on the jet ``a``."""
    out = np.zeros_like(a)
    for ci in reversed(coeffs):
        out = jmul(out, a)
        out[0] += ci
    return out


def jet_derivative(a, m=1):
    """Jet of f^(m) from the jet of f (order drops by m)."""
    out = a
    for _ in range(m):
        k = out.shape[0]
        nxt = np.zeros((k - 1,) + out.shape[1:])
        for i in range(k - 1):
            nxt[i] = (i + 1) * out[i + 1]
        out = nxt
    return out


def derivatives_from_jet(a):
    """Convert Taylor coefficients to derivative values f^(k)."""
    k = a.shape[0]
    fact = _FACT[:k].reshape((k,) + (1,) * (a.ndim - 1))
    return a * fact


def vcross(a, b):
    k = min(a.shape[0], b.shape[0])
    out = np.zeros(np.broadcast_shapes(a[:k].shape, b[:k].shape))
    for i in range(k):
        for j in range(k - i):
            out[i + j] += np.cross(a[i], b[j])
    return out


def vdot(a, b):
    k = min(a.shape[0], b.shape[0])
    shape = np.broadcast_shapes(a[:k].shape, b[:k].shape)[:-1]
    out = np.zeros(shape)
    for i in range(k):
        for j in range(k - i):
            out[i + j] += np.einsum("...i,...i->...", a[i], b[j])
    return out


def vnorm(a):
    return jsqrt(vdot(a, a))


def taylor_shift(jet, delta):
    """Re-centre a single-point jet at an offset delta inside its radius."""
    k = jet.shape[0]
    out = np.zeros_like(jet)
    binom = np.zeros((k, k))
    for j in range(k):
        binom[j, j] = 1.0
        for i in range(j - 1, -1, -1):
            binom[j, i] = binom[j, i + 1] * (i + 1) / (j - i)
    powers = delta ** np.arange(k)
    for i in range(k):
        for j in range(i, k):
            out[i] += binom[j, i] * powers[j - i] * jet[j]
    return out


def shifted_jdiv(num, den, shift, tol=1e-7):
    """Divide jets after cancelling a common zero of order ``shift``.

    Both ``num`` and ``den`` must vanish to order ``shift`` at the base
    point; the leading coefficients are checked against ``tol`` relative to
    the first retained one and then dropped.
    """
    scale_n = np.max(np.abs(num[shift])) + 1e-300
    scale_d = np.max(np.abs(den[shift])) + 1e-300
    for i in range(shift):
        if np.max(np.abs(num[i])) > tol * scale_n * 10:
            raise ValueError(f"numerator coefficient {i} above cancellation tolerance")
        if np.max(np.abs(den[i])) > tol * scale_d * 10:
            raise ValueError(f"denominator coefficient {i} above cancellation tolerance")
    return jdiv(num[shift:], den[shift:])


# --- C-infinity bump primitives -------------------------------------------
#
# flat_step is exp(-1/x) continued by zero; smooth_step is the standard
# partition-of-unity step, identically 0 for x <= 0 and 1 for x >= 1 with all
# derivatives vanishing at both ends.  1/745 is where exp(-1/x) underflows.

_X_FLAT = 1.0 / 745.0


def flat_step(xjet):
    active = xjet[0] > _X_FLAT
    out = np.zeros_like(xjet)
    if not np.any(active):
        return out
    xa = xjet[:, active]
    inv = jdiv(constant(-1.0, xjet.shape[0] - 1, n=int(active.sum())), xa)
    out[:, active] = jexp(inv)
    return out


def smooth_step(xjet):
    """Jet of the flat C-inf step 0 -> 1 over [0, 1]."""
    x0 = xjet[0]
    out = np.zeros_like(xjet)
    hi = x0 >= 1.0 - _X_FLAT
    out[0][hi] = 1.0
    mid = (~hi) & (x0 > _X_FLAT)
    if np.any(mid):
        xm = xjet[:, mid]
        one_minus = -xm
        one_minus[0] += 1.0
        a = flat_step(xm)
        b = flat_step(one_minus)
        out[:, mid] = jdiv(a, a + b)
    return out


def smooth_bump(xjet):
    """Flat plateau bump on [0, 1]: ramps over the outer 35%, exactly 1 on
    the middle 30%."""
    a = smooth_step(xjet / 0.35)
    rev = -xjet
    rev[0] += 1.0
    b = smooth_step(rev / 0.35)
    return jmul(a, b)
