"""Mandel storage of symmetric tensors.

Component order is (11, 22, 33, 23, 13, 12) in 3D and (11, 22, 12) on the
tangent plane, with a factor sqrt(2) on mixed components so that the
Frobenius product of symmetric matrices equals the Euclidean product of
their Mandel vectors.
"""
from __future__ import annotations

import numpy as np

SQ2 = np.sqrt(2.0)
PAIRS3 = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))
PAIRS2 = ((0, 0), (1, 1), (0, 1))
WEIGHTS3 = np.array([1.0, 1.0, 1.0, SQ2, SQ2, SQ2])
WEIGHTS2 = np.array([1.0, 1.0, SQ2])
# tangential and eliminated slots of a 6-vector written in an adapted frame
# (third axis along the normal)
TANGENTIAL = np.array([0, 1, 5])
ELIMINATED = np.array([2, 3, 4])


def to_mandel(a):
    """Mandel 6-vector of ``sym(a)`` for arrays of shape (..., 3, 3)."""
    a = np.asarray(a)
    s = 0.5 * (a + np.swapaxes(a, -1, -2))
    return np.stack([s[..., i, j] for i, j in PAIRS3], axis=-1) * WEIGHTS3


def from_mandel(v):
    """Symmetric (..., 3, 3) matrix from a Mandel 6-vector."""
    v = np.asarray(v)
    out = np.zeros(v.shape[:-1] + (3, 3), dtype=v.dtype)
    for k, (i, j) in enumerate(PAIRS3):
        c = v[..., k] / WEIGHTS3[k]
        out[..., i, j] = c
        out[..., j, i] = c
    return out


def to_mandel2(a):
    """Mandel 3-vector of ``sym(a)`` for (..., 2, 2) arrays."""
    a = np.asarray(a)
    s = 0.5 * (a + np.swapaxes(a, -1, -2))
    return np.stack([s[..., i, j] for i, j in PAIRS2], axis=-1) * WEIGHTS2


def from_mandel2(v):
    """Symmetric (..., 2, 2) matrix from a Mandel 3-vector."""
    v = np.asarray(v)
    out = np.zeros(v.shape[:-1] + (2, 2), dtype=v.dtype)
    for k, (i, j) in enumerate(PAIRS2):
        c = v[..., k] / WEIGHTS2[k]
        out[..., i, j] = c
        out[..., j, i] = c
    return out


def embed2(v2):
    """Place tangential Mandel 3-vectors into the 6-slot layout."""
    v2 = np.asarray(v2)
    out = np.zeros(v2.shape[:-1] + (6,), dtype=v2.dtype)
    out[..., TANGENTIAL] = v2
    return out


def congruence(d):
    """Mandel matrix of ``G -> d^T G d``.

    Parameters
    ----------
    d : ndarray, shape (..., 3, 3)

    Returns
    -------
    ndarray, shape (..., 6, 6)
        ``L`` with ``to_mandel(d.T @ G @ d) == L @ to_mandel(G)``.
    """
    d = np.asarray(d, dtype=float)
    basis = from_mandel(np.eye(6))            # (6, 3, 3)
    dt = np.swapaxes(d, -1, -2)
    cols = [to_mandel(dt @ basis[k] @ d) for k in range(6)]
    return np.stack(cols, axis=-1)


def congruence2(d):
    """2D analogue of :func:`congruence` for (..., 2, 2) maps."""
    d = np.asarray(d, dtype=float)
    basis = from_mandel2(np.eye(3))
    dt = np.swapaxes(d, -1, -2)
    cols = [to_mandel2(dt @ basis[k] @ d) for k in range(3)]
    return np.stack(cols, axis=-1)


def isotropic_quadratic(mu, lam):
    """Mandel matrix of ``G -> mu |sym G|^2 + lam/2 (tr G)^2``."""
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    shape = np.broadcast_shapes(mu.shape, lam.shape)
    out = np.zeros(shape + (6, 6))
    idx = np.arange(6)
    out[..., idx, idx] = mu[..., None]
    out[..., :3, :3] += 0.5 * lam[..., None, None]
    return out
