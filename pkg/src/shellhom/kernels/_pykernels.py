"""Reference numpy implementations of the hot kernels."""
from __future__ import annotations

import numpy as np

_MANDEL_W = np.array([1.0, 1.0, 1.0, np.sqrt(2.0), np.sqrt(2.0), np.sqrt(2.0)])


def svk_energy(F, mu, lam):
    """SVK density ``mu |E|^2 + lam/2 (tr E)^2`` with E = (F^T F - I)/2.

    Parameters
    ----------
    F : ndarray, shape (n, 3, 3)
    mu, lam : ndarray, shape (n,)
    """
    F = np.ascontiguousarray(F, dtype=float)
    C = np.einsum("nki,nkj->nij", F, F)
    E = 0.5 * (C - np.eye(3))
    tr = np.trace(E, axis1=1, axis2=2)
    return mu * np.einsum("nij,nij->n", E, E) + 0.5 * lam * tr * tr


def quad_form(Q, v):
    """Batched ``v_n^T Q_n v_n`` for (n, m, m) and (n, m)."""
    return np.einsum("ni,nij,nj->n", v, Q, v)


def schur(Q, keep, elim):
    """Batched Schur complement eliminating the ``elim`` slots.

    Returns (Q_kk - Q_ke Q_ee^{-1} Q_ek, ok) where ``ok`` flags nodes whose
    eliminated block admits a Cholesky factorization.
    """
    Q = np.asarray(Q, dtype=float)
    keep = np.asarray(keep)
    elim = np.asarray(elim)
    qkk = Q[:, keep[:, None], keep[None, :]]
    qke = Q[:, keep[:, None], elim[None, :]]
    qee = Q[:, elim[:, None], elim[None, :]]
    ok = np.ones(Q.shape[0], dtype=bool)
    try:
        L = np.linalg.cholesky(qee)
    except np.linalg.LinAlgError:
        ev = np.linalg.eigvalsh(qee)
        ok = ev[:, 0] > 0
        qee = np.where(ok[:, None, None], qee, np.eye(len(elim)))
        L = np.linalg.cholesky(qee)
    x = np.linalg.solve(L, np.swapaxes(qke, 1, 2))
    out = qkk - np.einsum("nki,nkj->nij", x, x)
    return 0.5 * (out + np.swapaxes(out, 1, 2)), ok
