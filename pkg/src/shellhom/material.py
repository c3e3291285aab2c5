"""Stored-energy densities with periodic coefficient fields.

Densities are functions ``W(x, y, z, t, F)`` of the slow variable ``x``
(chart parameters), the two fast cell variables ``y, z`` in ``[0, 1)^2``,
the thickness variable ``t`` in ``I = (-1/2, 1/2)`` and the deformation
gradient ``F``.  Every solver path uses only the quadratic density

    Q(G) = lim_{s -> 0} W(I + s G) / s^2,

stored as a symmetric 6x6 Mandel matrix (``Q(G) = m(G)^T Q m(G)``).  For
the isotropic St Venant–Kirchhoff density this gives
``Q(G) = mu |sym G|^2 + lam/2 (tr G)^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.spatial.transform import Rotation

from . import kernels
from .errors import ConfigError, NonQuadraticResidual
from .expr import CoeffExpr, parse_coeff
from .mandel import from_mandel, isotropic_quadratic, to_mandel

FD_LADDER = (1e-3, 5e-4, 2.5e-4)
ORTHO_KEYS = ("c11", "c22", "c33", "c12", "c13", "c23", "c44", "c55", "c66")
KINDS = ("svk", "svk-ortho", "quadratic", "plugin")


def _env(x, y, z, t):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    t = np.asarray(t, dtype=float)
    return {"x1": x[..., 0], "x2": x[..., 1], "y1": y[..., 0], "y2": y[..., 1],
            "z1": z[..., 0], "z2": z[..., 1], "t": t}


def _point_shape(x, y, z, t):
    return np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1],
                               np.shape(z)[:-1], np.shape(t))


class Material:
    """Multiscale hyperelastic density.

    Parameters
    ----------
    kind : {"svk", "svk-ortho", "quadratic", "plugin"}
        ``svk`` uses Lamé fields ``mu`` and ``lambda``; ``svk-ortho`` the nine
        orthotropic constants ``c11 .. c66`` (Voigt, engineering shears);
        ``quadratic`` the upper triangle ``qIJ`` (I <= J) of a Mandel matrix
        acting on the Green strain.  ``plugin`` wraps a callable
        ``energy_fn(x, y, z, t, F)``.
    coeffs : mapping of str to expression text
    alpha, beta, rho : float
        Declared growth constants and growth radius.
    """

    def __init__(self, kind: str = "svk", coeffs: Mapping[str, object] | None = None,
                 alpha: float = 0.4, beta: float = 4.0, rho: float = 0.2,
                 energy_fn: Callable | None = None, depends=("x", "y", "z", "t")):
        if kind not in KINDS:
            raise ConfigError(f"unknown material kind {kind!r}")
        self.kind = kind
        self.alpha, self.beta, self.rho = float(alpha), float(beta), float(rho)
        self.energy_fn = energy_fn
        coeffs = dict(coeffs or {})
        if kind == "svk":
            coeffs.setdefault("mu", "1")
            coeffs.setdefault("lambda", "1")
            unknown = set(coeffs) - {"mu", "lambda"}
        elif kind == "svk-ortho":
            missing = set(ORTHO_KEYS) - set(coeffs)
            if missing:
                raise ConfigError(f"orthotropic material misses {sorted(missing)}")
            unknown = set(coeffs) - set(ORTHO_KEYS)
        elif kind == "quadratic":
            keys = {f"q{i}{j}" for i in range(1, 7) for j in range(i, 7)}
            unknown = set(coeffs) - keys
            for k in keys:
                coeffs.setdefault(k, "0")
        else:
            if energy_fn is None:
                raise ConfigError("plugin material needs energy_fn")
            unknown = set()
        if unknown:
            raise ConfigError(f"unknown coefficient keys {sorted(unknown)}")
        self.coeffs: dict[str, CoeffExpr] = {k: parse_coeff(v)
                                             for k, v in coeffs.items()}
        self._plugin_depends = tuple(depends)

    # dependence flags ---------------------------------------------------
    def _depends(self, *names):
        if self.kind == "plugin":
            return any(n[0] in self._plugin_depends for n in names)
        return any(e.depends_on(*names) for e in self.coeffs.values())

    @property
    def depends_on_t(self):
        return self._depends("t")

    @property
    def depends_on_x(self):
        return self._depends("x1", "x2")

    @property
    def depends_on_y(self):
        return self._depends("y1", "y2")

    @property
    def depends_on_z(self):
        return self._depends("z1", "z2")

    @property
    def has_analytic_q(self):
        return self.kind != "plugin"

    def coefficient_values(self, x, y, z, t):
        env = _env(x, y, z, t)
        shape = _point_shape(x, y, z, t)
        return {k: np.broadcast_to(e(env), shape) for k, e in self.coeffs.items()}

    # quadratic form -----------------------------------------------------
    def quadratic_matrix(self, x, y, z, t):
        """Mandel matrix of Q at broadcast points, shape (..., 6, 6)."""
        if self.kind == "plugin":
            return _fd_quadratic(self, x, y, z, t)[0]
        c = self.coefficient_values(x, y, z, t)
        if self.kind == "svk":
            return isotropic_quadratic(c["mu"], c["lambda"])
        shape = _point_shape(x, y, z, t)
        out = np.zeros(shape + (6, 6))
        if self.kind == "svk-ortho":
            # Voigt stiffness (engineering shear) -> Mandel, halved for Q
            nb = [["c11", "c12", "c13"], ["c12", "c22", "c23"],
                  ["c13", "c23", "c33"]]
            for i in range(3):
                for j in range(3):
                    out[..., i, j] = 0.5 * c[nb[i][j]]
            out[..., 3, 3] = c["c44"]
            out[..., 4, 4] = c["c55"]
            out[..., 5, 5] = c["c66"]
        else:
            for i in range(6):
                for j in range(i, 6):
                    v = c[f"q{i + 1}{j + 1}"]
                    out[..., i, j] = v
                    out[..., j, i] = v
        return out

    def energy(self, x, y, z, t, F):
        """W at broadcast points; F has shape (..., 3, 3)."""
        F = np.asarray(F, dtype=float)
        if self.kind == "plugin":
            return np.asarray(self.energy_fn(x, y, z, t, F), dtype=float)
        shape = np.broadcast_shapes(_point_shape(x, y, z, t), F.shape[:-2])
        Fb = np.broadcast_to(F, shape + (3, 3)).reshape(-1, 3, 3)
        if self.kind == "svk":
            c = self.coefficient_values(x, y, z, t)
            mu = np.broadcast_to(c["mu"], shape).ravel()
            lam = np.broadcast_to(c["lambda"], shape).ravel()
            return kernels.svk_energy(Fb, mu, lam).reshape(shape)
        Q = np.broadcast_to(self.quadratic_matrix(x, y, z, t), shape + (6, 6))
        C = np.einsum("nki,nkj->nij", Fb, Fb)
        E = to_mandel(0.5 * (C - np.eye(3)))
        return kernels.quad_form(Q.reshape(-1, 6, 6), E).reshape(shape)

    def describe(self):
        d = {"kind": self.kind, "alpha": self.alpha, "beta": self.beta,
             "rho": self.rho}
        d.update({k: e.text for k, e in self.coeffs.items()})
        return d


def material_from_config(section: Mapping) -> Material:
    """Material from a ``[material]`` table."""
    sec = dict(section)
    kind = str(sec.pop("kind", "svk"))
    alpha = float(sec.pop("alpha", 0.4))
    beta = float(sec.pop("beta", 4.0))
    rho = float(sec.pop("rho", 0.2))
    coeffs = {k: str(v) if not isinstance(v, str) else v for k, v in sec.items()}
    return Material(kind, coeffs, alpha, beta, rho)


def evaluate_W(M: Material, x, y, z, t, F):
    """Energy density ``W(x, y, z, t, F)``; scalar for scalar points."""
    out = M.energy(x, y, z, t, F)
    return float(out) if np.ndim(out) == 0 else out


# --- quadratic extraction --------------------------------------------------

@dataclass
class QuadraticDensity:
    """Quadratic density at one point.

    ``matrix`` is the finite-difference Mandel matrix; ``analytic`` and
    ``discrepancy`` are filled for densities with a closed form.
    """
    tags: dict
    matrix: np.ndarray
    analytic: np.ndarray | None = None
    discrepancy: float | None = None
    correction: float = field(default=0.0)

    def __call__(self, G):
        m = to_mandel(np.asarray(G, dtype=float))
        return float(m @ self.matrix @ m)

    @property
    def eigenvalues(self):
        return np.linalg.eigvalsh(self.matrix)


def _fd_quadratic(M, x, y, z, t, ladder=FD_LADDER):
    """Polarised Richardson extraction of Q at broadcast points.

    Returns the matrix and the size of the last Richardson correction.
    """
    shape = _point_shape(x, y, z, t)
    basis = from_mandel(np.eye(6))
    dirs, index = [], []
    for k in range(6):
        dirs.append(basis[k])
        index.append((k, k, 0))
        for l in range(k + 1, 6):
            dirs.append(basis[k] + basis[l])
            dirs.append(basis[k] - basis[l])
            index.append((k, l, 1))
    dirs = np.array(dirs)                               # (36, 3, 3)
    xe = np.asarray(x)[..., None, :]
    ye = np.asarray(y)[..., None, :]
    ze = np.asarray(z)[..., None, :]
    te = np.asarray(t)[..., None]
    vals = []
    for s in ladder:
        F = np.eye(3) + s * dirs
        vals.append(M.energy(xe, ye, ze, te, F) / s**2)
    a0, a1, a2 = (np.broadcast_to(v, shape + (len(dirs),)) for v in vals)
    r1a = 2 * a1 - a0
    r1b = 2 * a2 - a1
    r2 = (4 * r1b - r1a) / 3
    corr = np.abs(r2 - r1b)
    Q = np.zeros(shape + (6, 6))
    cmax = np.zeros(shape)
    j = 0
    for k, l, kind in index:
        if kind == 0:
            Q[..., k, k] = r2[..., j]
            cmax = np.maximum(cmax, corr[..., j])
            j += 1
        else:
            v = 0.25 * (r2[..., j] - r2[..., j + 1])
            Q[..., k, l] = v
            Q[..., l, k] = v
            cmax = np.maximum(cmax, np.maximum(corr[..., j], corr[..., j + 1]))
            j += 2
    return Q, cmax


def extract_Q(M: Material, x, y, z, t) -> QuadraticDensity:
    """Quadratic density at one point by FD polarisation.

    Raises
    ------
    NonQuadraticResidual
        When the last Richardson correction exceeds 1e-4 of the matrix norm.
    """
    x, y, z = (np.asarray(a, dtype=float).reshape(2) for a in (x, y, z))
    t = float(t)
    Q, corr = _fd_quadratic(M, x, y, z, t)
    nrm = np.linalg.norm(Q)
    if not np.isfinite(nrm) or float(corr) > 1e-4 * max(nrm, 1e-300):
        raise NonQuadraticResidual(
            f"Richardson correction {float(corr):.3e} vs |Q| {nrm:.3e}")
    tags = {"x": x.tolist(), "y": y.tolist(), "z": z.tolist(), "t": t}
    qd = QuadraticDensity(tags, Q, correction=float(corr))
    if M.has_analytic_q:
        A = M.quadratic_matrix(x, y, z, t)
        qd.analytic = A
        qd.discrepancy = float(np.max(np.abs(A - Q)))
    return qd


# --- axiom verification ----------------------------------------------------

def dist_so3(F):
    """Frobenius distance of F (det > 0) to SO(3) via the polar factor."""
    F = np.asarray(F, dtype=float)
    u, s, vt = np.linalg.svd(F)
    d = np.sign(np.linalg.det(u @ vt))
    s = s.copy()
    s[..., -1] *= d
    return np.sqrt(np.sum((s - 1.0) ** 2, axis=-1))


def _sample_points(rng, n):
    x = rng.random((n, 2))
    y = rng.random((n, 2))
    z = rng.random((n, 2))
    t = rng.random(n) - 0.5
    return x, y, z, t


def verify_material_axioms(M: Material, n_samples: int = 200, seed: int = 0,
                           radius: float | None = None) -> dict:
    """Sample-based check of the density axioms.

    Returns a report with one entry per axiom (``pass``, ``worst`` sample,
    ``margin``) and the sampled growth ratios ``alpha_hat``, ``beta_hat`` of
    ``W / dist^2(F, SO(3))`` on ``0 < dist <= radius`` (default ``rho``).
    """
    rng = np.random.default_rng(seed)
    radius = M.rho if radius is None else radius
    x, y, z, t = _sample_points(rng, n_samples)
    R = Rotation.random(n_samples, random_state=rng).as_matrix()
    report: dict = {}

    # W(I) = 0
    w_id = M.energy(x, y, z, t, np.eye(3))
    i = int(np.argmax(np.abs(w_id)))
    report["identity"] = {"pass": bool(np.max(np.abs(w_id)) <= 1e-12),
                          "worst": {"x": x[i].tolist(), "y": y[i].tolist()},
                          "margin": float(1e-12 - np.max(np.abs(w_id)))}

    # frame indifference on random F near SO(3)
    A = rng.normal(size=(n_samples, 3, 3))
    F = np.eye(3) + 0.3 * A / np.linalg.norm(A, axis=(1, 2))[:, None, None]
    w = M.energy(x, y, z, t, F)
    wr = M.energy(x, y, z, t, R @ F)
    dev = np.abs(wr - w) / (1 + np.abs(w))
    i = int(np.argmax(dev))
    report["frame_indifference"] = {"pass": bool(dev[i] <= 1e-12),
                                    "worst": {"F": F[i].tolist()},
                                    "margin": float(1e-12 - dev[i])}

    # growth on F = R U, U symmetric positive with |U - I| = d in (0, radius]
    B = rng.normal(size=(n_samples, 3, 3))
    B = 0.5 * (B + np.swapaxes(B, 1, 2))
    B /= np.linalg.norm(B, axis=(1, 2))[:, None, None]
    d = radius * np.sqrt(rng.random(n_samples)) + 1e-9
    d = np.minimum(d, radius)
    U = np.eye(3) + d[:, None, None] * B
    ok = np.linalg.eigvalsh(U)[:, 0] > 0
    Fg = (R @ U)[ok]
    dist = dist_so3(Fg)
    ratio = M.energy(x[ok], y[ok], z[ok], t[ok], Fg) / dist**2
    a_hat, b_hat = float(np.min(ratio)), float(np.max(ratio))
    report["growth_lower"] = {"pass": bool(a_hat >= M.alpha),
                              "worst": {"F": Fg[int(np.argmin(ratio))].tolist()},
                              "margin": a_hat - M.alpha}
    report["growth_upper"] = {"pass": bool(b_hat <= M.beta),
                              "worst": {"F": Fg[int(np.argmax(ratio))].tolist()},
                              "margin": M.beta - b_hat}

    # periodicity in y and z of every coefficient field
    worst, where = 0.0, None
    shifts = [np.array(s, dtype=float) for s in ((1, 0), (0, 1), (1, 1), (-2, 3))]
    if M.kind == "plugin":
        F0 = np.broadcast_to(F, (n_samples, 3, 3))
        base = M.energy(x, y, z, t, F0)
        for s in shifts:
            for dy, dz in ((s, 0 * s), (0 * s, s)):
                dev = np.max(np.abs(M.energy(x, y + dy, z + dz, t, F0) - base))
                if dev > worst:
                    worst, where = float(dev), {"shift": s.tolist()}
    else:
        for name, e in M.coeffs.items():
            base = e(_env(x, y, z, t))
            for s in shifts:
                for dy, dz in ((s, 0 * s), (0 * s, s)):
                    dev = float(np.max(np.abs(e(_env(x, y + dy, z + dz, t)) - base)))
                    if dev > worst:
                        worst, where = dev, {"coefficient": name,
                                             "shift": s.tolist()}
    report["periodicity"] = {"pass": worst <= 1e-10, "worst": where,
                             "margin": 1e-10 - worst}

    # positive definiteness of Q
    if M.has_analytic_q:
        Q = M.quadratic_matrix(x, y, z, t)
        ev = np.linalg.eigvalsh(Q)[:, 0]
        i = int(np.argmin(ev))
        report["positivity"] = {"pass": bool(ev[i] > 0),
                                "worst": {"x": x[i].tolist(), "y": y[i].tolist(),
                                          "z": z[i].tolist(), "t": float(t[i])},
                                "margin": float(ev[i])}
    report["alpha_hat"] = a_hat
    report["beta_hat"] = b_hat
    report["pass"] = all(v["pass"] for v in report.values()
                         if isinstance(v, dict))
    return report
