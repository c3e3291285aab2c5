"""Gauss–Legendre rules: plain, composite and on disks."""
from __future__ import annotations

import math

import numpy as np
from numpy.polynomial.legendre import leggauss


def gauss_legendre(n: int, a: float = -0.5, b: float = 0.5):
    """``n``-point Gauss–Legendre nodes and weights on ``[a, b]``."""
    x, w = leggauss(int(n))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def composite_gl(a: float, b: float, breaks, npp: int = 8):
    """Composite rule with panels split at ``breaks`` inside ``(a, b)``."""
    pts = [a] + [c for c in sorted(breaks) if a < c < b] + [b]
    xs, ws = [], []
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi - lo <= 0:
            continue
        x, w = gauss_legendre(npp, lo, hi)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def periodic_panels(a: float, b: float, period: float, npp: int = 8):
    """Composite rule with breakpoints at integer multiples of period/2.

    Aligning panels with half periods keeps jump sets of ``step``/``frac``
    coefficients (at half and whole periods) on panel boundaries.
    """
    half = 0.5 * period
    k0 = math.floor(a / half) + 1
    k1 = math.ceil(b / half) - 1
    n_breaks = k1 - k0 + 1
    if n_breaks > 5e7:
        raise MemoryError("too many panels")
    breaks = half * np.arange(k0, k1 + 1)
    # drop slivers produced by round-off next to the end points
    tol = 1e-12 * max(1.0, abs(b - a))
    breaks = breaks[(breaks > a + tol) & (breaks < b - tol)]
    pts = np.concatenate([[a], breaks, [b]])
    x, w = leggauss(int(npp))
    lo, hi = pts[:-1, None], pts[1:, None]
    half_len = 0.5 * (hi - lo)
    xs = lo + half_len * (x[None, :] + 1.0)
    ws = half_len * w[None, :]
    return xs.ravel(), ws.ravel()


def tensor_rule(rule_u, rule_v):
    """Tensor product of two 1D rules, returned as (points (n,2), weights)."""
    (xu, wu), (xv, wv) = rule_u, rule_v
    uu, vv = np.meshgrid(xu, xv, indexing="ij")
    return np.stack([uu.ravel(), vv.ravel()], axis=1), np.outer(wu, wv).ravel()


def disk_rule(radius: float, n_r: int, n_theta: int, center=(0.0, 0.0),
              radial=None):
    """Polar rule on a disk: Gauss radial (weight r) times uniform angle."""
    if radial is None:
        r, wr = gauss_legendre(n_r, 0.0, radius)
    else:
        r, wr = radial
    th = (np.arange(n_theta) + 0.5) * (2.0 * np.pi / n_theta)
    wt = np.full(n_theta, 2.0 * np.pi / n_theta)
    rr, tt = np.meshgrid(r, th, indexing="ij")
    pts = np.stack([center[0] + rr * np.cos(tt),
                    center[1] + rr * np.sin(tt)], axis=-1).reshape(-1, 2)
    return pts, (np.outer(wr * r, wt)).ravel()


def legendre_on_interval(deg: int, t):
    """Values and t-derivatives of P_j(2t), j = 0..deg, on I = (-1/2, 1/2).

    Returns arrays of shape (deg+1,) + t.shape.
    """
    t = np.asarray(t, dtype=float)
    s = 2.0 * t
    vals = np.zeros((deg + 1,) + t.shape)
    ders = np.zeros_like(vals)
    vals[0] = 1.0
    if deg >= 1:
        vals[1] = s
        ders[1] = 1.0
    for j in range(1, deg):
        vals[j + 1] = ((2 * j + 1) * s * vals[j] - j * vals[j - 1]) / (j + 1)
        # P'_{j+1} = P'_{j-1} + (2j+1) P_j
        ders[j + 1] = ders[j - 1] + (2 * j + 1) * vals[j]
    return vals, 2.0 * ders
