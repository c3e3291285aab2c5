"""Numerical experiments for three-scale pairings and recovery sequences.

Fast variables are ``y = p / eps`` and ``z = p / eps^2`` with ``p`` the chart
parameters.  Thin-shell points are written ``Xi(p, s) = xi(p) + s n(p)``
with ``s = h t`` and ``t`` in ``I = (-1/2, 1/2)``.

Recovery deformations are built in closed form from user profiles and
differentiated analytically (chain rule through the fast variables), so
the energy quadrature needs no finite differences.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .cellform import RegimeParams, parallel_map
from .errors import (CostGuardExceeded, MissingProfile, NonZeroMeanRho,
                     UnderResolved, WrongRegimeProfile)
from .expr import CoeffExpr, parse_coeff
from .geometry import (Disk, Immersion, SurfacePatch, check_thickness_factor,
                       frames_from_jet, immersion_jet, relative_weingarten_batch,
                       scaled_gradient_from_jet)
from .mandel import to_mandel
from .material import Material
from .quadrature import gauss_legendre, periodic_panels, tensor_rule
from .relaxation import frame_quadratic

MIN_POINTS_PER_PERIOD = 8
CHUNK = 100_000

REGIME_PROFILES = {"finite": ("zeta", "rho", "eta"),
                   "inf": ("zeta", "rho", "eta", "c"),
                   "zero": ("zeta", "phi", "eta", "mu")}
ARITY = {"zeta": 2, "rho": 1, "phi": 1, "eta": 3, "mu": 3, "c": 3}
# variables each profile may not use, per regime
FORBIDDEN = {
    "finite": {"zeta": ("z1", "z2"), "rho": ("z1", "z2")},
    "inf": {"zeta": ("z1", "z2"), "rho": ("z1", "z2"),
            "c": ("y1", "y2", "z1", "z2")},
    "zero": {"zeta": ("t", "z1", "z2"), "phi": ("t", "z1", "z2"),
             "mu": ("z1", "z2")},
}


def default_hs(n=5, h0=0.1):
    """Geometric thickness sequence ``h0 2^-k``."""
    return [h0 * 0.5 ** k for k in range(n)]


# --- quadrature on the thin shell ------------------------------------------

def fast_axes(exprs: Sequence[CoeffExpr]):
    """Fastest scale present per chart axis: 'z', 'y' or None."""
    out = [None, None]
    for e in exprs:
        for a in range(2):
            if e.depends_on(f"z{a + 1}"):
                out[a] = "z"
            elif e.depends_on(f"y{a + 1}") and out[a] is None:
                out[a] = "y"
    return out


def fast_vars(P, eps):
    """Cell coordinates ``(p/eps mod 1, p/eps^2 mod 1)``.

    Coefficients are Y-periodic, so reducing to the unit cell changes no
    value and keeps arguments of size one.
    """
    return np.mod(P / eps, 1.0), np.mod(P / eps**2, 1.0)


def _period(scale, eps):
    return {None: None, "y": eps, "z": eps * eps}[scale]


@dataclass
class ShellRule:
    """Tensor rule on ``omega x I``: points ``P``, thickness ``T`` and
    weights for ``dt dp`` (multiply by ``sqrt det g`` for ``dvol``)."""
    axes: tuple
    t: tuple

    @property
    def size(self):
        return len(self.axes[0][0]) * len(self.axes[1][0]) * len(self.t[0])

    def chunks(self, size=CHUNK):
        (xu, wu), (xv, wv) = self.axes
        tt, wt = self.t
        nv, nt = len(xv), len(tt)
        per_u = max(1, size // (nv * nt))
        for s in range(0, len(xu), per_u):
            u = xu[s:s + per_u]
            uu, vv, TT = np.meshgrid(u, xv, tt, indexing="ij")
            w = (wu[s:s + per_u, None, None] * wv[None, :, None]
                 * wt[None, None, :])
            P = np.stack([uu.ravel(), vv.ravel()], axis=1)
            yield P, TT.ravel(), w.ravel()


def shell_rule(S: SurfacePatch, scales, eps, n_slow=16, npp=8, n_t=8,
               cost_guard=1e8, polar_points=None) -> ShellRule:
    """Quadrature resolving the fast scales on each chart axis.

    Fast axes get Gauss panels of half a period (``2 npp`` points per
    period) aligned with multiples of half the period, so jumps of
    ``step``/``frac`` coefficients at half and whole periods fall on panel
    boundaries.
    """
    if 2 * npp < MIN_POINTS_PER_PERIOD and any(scales):
        raise UnderResolved(f"{2 * npp} points per period < "
                            f"{MIN_POINTS_PER_PERIOD}")
    dom = S.domain
    t_rule = gauss_legendre(n_t)
    periods = [_period(s, eps) for s in scales]
    if isinstance(dom, Disk):
        fast = [p for p in periods if p]
        if fast:
            per = min(fast)
            radial = periodic_panels(0.0, dom.radius, per, npp)
            n_th = max(n_slow, int(math.ceil(2 * npp * 2 * np.pi * dom.radius
                                              / per)))
        else:
            radial = gauss_legendre(n_slow, 0.0, dom.radius)
            n_th = max(n_slow, 2 * n_slow)
        est = len(radial[0]) * n_th * n_t
        if est > cost_guard:
            raise CostGuardExceeded(f"{est:.3g} evaluations > {cost_guard:.3g}")
        return _PolarRule(dom, radial, n_th, t_rule)
    lo_hi = ((dom.u0, dom.u1), (dom.v0, dom.v1))
    est = n_t
    for a in range(2):
        if periods[a]:
            est *= max(1.0, (lo_hi[a][1] - lo_hi[a][0]) / periods[a]) * 2 * npp
        else:
            est *= n_slow
    if est > cost_guard:
        raise CostGuardExceeded(f"{est:.3g} evaluations > {cost_guard:.3g}")
    axes = []
    for a in range(2):
        lo, hi = lo_hi[a]
        if periods[a]:
            axes.append(periodic_panels(lo, hi, periods[a], npp))
        else:
            axes.append(gauss_legendre(n_slow, lo, hi))
    return ShellRule(tuple(axes), t_rule)


class _PolarRule(ShellRule):
    def __init__(self, dom, radial, n_theta, t_rule):
        self.dom = dom
        self.radial = radial
        self.n_theta = n_theta
        self.t = t_rule

    @property
    def size(self):
        return len(self.radial[0]) * self.n_theta * len(self.t[0])

    def chunks(self, size=CHUNK):
        r, wr = self.radial
        th = (np.arange(self.n_theta) + 0.5) * (2 * np.pi / self.n_theta)
        wth = 2 * np.pi / self.n_theta
        tt, wt = self.t
        per = max(1, size // (self.n_theta * len(tt)))
        for s in range(0, len(r), per):
            rr, TH, TT = np.meshgrid(r[s:s + per], th, tt, indexing="ij")
            w = (wr[s:s + per, None, None] * r[s:s + per, None, None] * wth
                 * wt[None, None, :]) * np.ones_like(rr)
            P = np.stack([self.dom.cx + rr.ravel() * np.cos(TH.ravel()),
                          self.dom.cy + rr.ravel() * np.sin(TH.ravel())], axis=1)
            yield P, TT.ravel(), w.ravel()


def cell_rule(n_panels=4, npp=8):
    """Composite Gauss rule on [0, 1] with breaks at multiples of 1/n."""
    return periodic_panels(0.0, 1.0, 2.0 / n_panels, npp)


# --- three-scale pairings --------------------------------------------------

@dataclass
class ThreeScaleExperiment:
    """Pairing of an oscillating sequence with a test function.

    ``f``, ``phi`` and ``limit`` are expressions in ``x1, x2, t, y1, y2,
    z1, z2``; in ``f`` and ``phi`` the fast variables are evaluated at
    ``p/eps`` and ``p/eps^2``.  ``rho`` (osc-Z pairing only) is an
    expression in ``z1, z2`` with zero cell mean.
    """
    surface: SurfacePatch
    f: str
    phi: str
    limit: str
    regime: RegimeParams = field(default_factory=lambda: RegimeParams(0.0))
    hs: Sequence[float] = field(default_factory=default_hs)
    rho: str | None = None
    npp: int = 8
    n_slow: int = 16
    n_t: int = 4
    cost_guard: float = 1e8

    def __post_init__(self):
        self.fe = parse_coeff(self.f)
        self.phie = parse_coeff(self.phi)
        self.lime = parse_coeff(self.limit)
        self.rhoe = parse_coeff(self.rho) if self.rho is not None else None


def _env(P, T, Y, Z):
    return {"x1": P[:, 0], "x2": P[:, 1], "t": T, "y1": Y[:, 0], "y2": Y[:, 1],
            "z1": Z[:, 0], "z2": Z[:, 1]}


def _det_factor(fr, T):
    k = fr.principal_curvatures
    return (1 + T * k[:, 0]) * (1 + T * k[:, 1])


def _pairing_lhs(E: ThreeScaleExperiment, h, test):
    """Shell-side integral and its flat pull-back at one thickness."""
    eps = float(E.regime.eps(h))
    exprs = [E.fe] + list(test)
    rule = shell_rule(E.surface, fast_axes(exprs), eps, E.n_slow, E.npp,
                      E.n_t, E.cost_guard)
    shell, flat = 0.0, 0.0
    for P, T, w in rule.chunks():
        fr = E.surface.frames_at(P, check_domain=False)
        env = _env(P, T, *fast_vars(P, eps))
        val = E.fe(env)
        for e in test:
            val = val * e(env)
        dv = np.sqrt(np.linalg.det(fr.metric))
        shell += float(np.sum(w * val * dv * _det_factor(fr, T)))
        J = E.surface.shell_jacobian(fr, T)
        flat += float(np.sum(w * val * np.abs(np.linalg.det(J))))
    return shell, flat, rule.size


def _cell_integral(E: ThreeScaleExperiment, integrand_exprs, n_cell=4):
    """``int_S int_I int_Y int_Y prod(exprs) dz dy dt dx`` on S^1."""
    S = E.surface
    yr = cell_rule(n_cell)
    used = set().union(*(e.free_variables for e in integrand_exprs))
    rules = []
    for v in ("y1", "y2", "z1", "z2"):
        rules.append(yr if v in used else (np.zeros(1), np.ones(1)))
    t, wt = gauss_legendre(E.n_t)
    fr = S.node_frames
    total = 0.0
    grids = np.meshgrid(*(r[0] for r in rules), indexing="ij")
    wcell = np.einsum("a,b,c,d->abcd", *(r[1] for r in rules)).ravel()
    Yc = np.stack([g.ravel() for g in grids], axis=1)
    for i, p in enumerate(S.nodes):
        for tk, wk in zip(t, wt):
            n = len(Yc)
            P = np.broadcast_to(p, (n, 2))
            T = np.full(n, tk)
            env = _env(P, T, Yc[:, :2], Yc[:, 2:])
            val = np.ones(n)
            for e in integrand_exprs:
                val = val * e(env)
            det = (1 + tk * fr[i].principal_curvatures).prod()
            total += S.dvol[i] * wk * det * float(np.sum(wcell * val))
    return total


def three_scale_pairing(E: ThreeScaleExperiment, strong=False):
    """Rows ``(h, lhs, rhs, gap, flat_lhs, flat_diff)``.

    With ``strong`` the squared norms ``|f^h|^2`` and ``|f|^2`` are compared
    instead (the test function is ignored).
    """
    E.regime.check_eps_law(E.hs) if len(E.hs) > 1 else None
    if strong:
        rhs = _cell_integral(E, [E.lime, E.lime])
        test = [E.fe]
    else:
        rhs = _cell_integral(E, [E.lime, E.phie])
        test = [E.phie]

    def row(h):
        lhs, flat, _ = _pairing_lhs(E, h, test)
        return [h, lhs, rhs, abs(lhs - rhs), flat, abs(lhs - flat)]
    return parallel_map(row, list(E.hs))


def osc_z_pairing(E: ThreeScaleExperiment):
    """Pairing against ``phi(x, y) rho(z)`` with zero-mean ``rho``."""
    if E.rhoe is None:
        raise NonZeroMeanRho("osc-Z pairing needs a rho factor")
    zr = cell_rule(4)
    zz = tensor_rule(zr, zr)
    mean = float(np.sum(zz[1] * E.rhoe(z1=zz[0][:, 0], z2=zz[0][:, 1])))
    if abs(mean) > 1e-8:
        raise NonZeroMeanRho(f"cell mean of rho is {mean:.3e}")
    for e in (E.phie,):
        if e.depends_on("z1", "z2"):
            raise ValueError("phi must not depend on z in the osc-Z pairing")
    rhs = _cell_integral(E, [E.lime, E.phie, E.rhoe])

    def row(h):
        lhs, flat, _ = _pairing_lhs(E, h, [E.phie, E.rhoe])
        return [h, lhs, rhs, abs(lhs - rhs), flat, abs(lhs - flat)]
    return parallel_map(row, list(E.hs))


# --- recovery sequences ----------------------------------------------------

@dataclass
class RecoveryConfig:
    """Inputs of a recovery-sequence experiment.

    Parameters
    ----------
    w : three expressions in ``x1, x2`` or None
        Displacement of the mid-surface.
    profiles : mapping
        ``zeta`` (2), ``rho`` (1) / ``phi`` (1), ``eta`` (3), ``mu`` (3) /
        ``c`` (3) expressions in ``x1, x2, t, y1, y2, z1, z2`` with ``t``
        the rescaled thickness; absent profiles are zero.
    """
    surface: SurfacePatch
    immersion: Immersion
    material: Material
    regime: RegimeParams
    w: Sequence[str] | None = None
    profiles: Mapping[str, Sequence[str]] = field(default_factory=dict)
    hs: Sequence[float] = field(default_factory=default_hs)
    npp: int = 8
    n_slow: int = 16
    n_t: int = 8
    n_cell: int = 4
    cost_guard: float = 1e8
    require_convex: bool = False
    check_means: bool = True

    def __post_init__(self):
        kind = self.regime.kind
        allowed = REGIME_PROFILES[kind]
        prof = {}
        for name, comps in dict(self.profiles).items():
            if name not in ARITY:
                raise WrongRegimeProfile(f"unknown profile {name!r}")
            if name not in allowed:
                raise WrongRegimeProfile(
                    f"profile {name!r} not in the {kind} regime space")
            comps = [comps] if isinstance(comps, (str, int, float)) else list(comps)
            if len(comps) != ARITY[name]:
                raise MissingProfile(f"{name} needs {ARITY[name]} components, "
                                     f"got {len(comps)}")
            exprs = [parse_coeff(c) for c in comps]
            bad = FORBIDDEN[kind].get(name, ())
            for e in exprs:
                if e.depends_on(*bad):
                    raise WrongRegimeProfile(
                        f"{name} must not depend on {', '.join(bad)} here")
            prof[name] = exprs
        for name in allowed:
            prof.setdefault(name, [parse_coeff("0")] * ARITY[name])
        self.exprs = prof
        if self.w is None:
            self.w_exprs = [parse_coeff("0")] * 3
        else:
            if len(self.w) != 3:
                raise MissingProfile("w needs three components")
            self.w_exprs = [parse_coeff(c) for c in self.w]
            for e in self.w_exprs:
                if e.depends_on("t", "y1", "y2", "z1", "z2"):
                    raise WrongRegimeProfile("w depends on x1, x2 only")
        if self.require_convex:
            self.surface.require_convex()
        if self.check_means:
            self.mean_defects = check_profile_means(self)

    def all_exprs(self):
        out = list(self.material.coeffs.values())
        for v in self.exprs.values():
            out.extend(v)
        return out


def check_profile_means(RC: RecoveryConfig, tol=1e-8, n=64, n_x=3):
    """Verify the zero-mean conditions of the regime space.

    Returns the largest defect per profile; raises WrongRegimeProfile when a
    defect exceeds ``tol``.
    """
    kind = RC.regime.kind
    g = (np.arange(n) + 0.5) / n
    a, b = np.meshgrid(g, g, indexing="ij")
    cell = np.stack([a.ravel(), b.ravel()], axis=1)
    t, wt = gauss_legendre(8)
    rng = np.random.default_rng(1)
    nodes = RC.surface.nodes[rng.choice(len(RC.surface.nodes),
                                        size=min(n_x, len(RC.surface.nodes)),
                                        replace=False)]
    ys = cell[rng.choice(len(cell), size=3, replace=False)]
    defects = {}

    def env(p, tv, Y, Z):
        m = max(len(np.atleast_1d(tv)), len(Y), len(Z))
        return {"x1": np.full(m, p[0]), "x2": np.full(m, p[1]),
                "t": np.broadcast_to(tv, (m,)), "y1": Y[:, 0], "y2": Y[:, 1],
                "z1": Z[:, 0], "z2": Z[:, 1]}

    zero2 = np.zeros((1, 2))
    for p in nodes:
        for name in ("zeta", "rho", "phi"):
            if name not in RC.exprs:
                continue
            for e in RC.exprs[name]:
                if kind == "finite":
                    # mean over I x Y
                    vals = [np.mean(e(env(p, tk, cell, zero2))) for tk in t]
                    d = abs(float(np.dot(wt, vals)))
                else:
                    d = max(abs(float(np.mean(e(env(p, tk, cell, zero2)))))
                            for tk in t)
                defects[name] = max(defects.get(name, 0.0), d)
        for e in RC.exprs.get("eta", []):
            for tk in t[::3]:
                for Y in ys:
                    d = abs(float(np.mean(e(env(p, tk, np.broadcast_to(Y, (len(cell), 2)),
                                                cell)))))
                    defects["eta"] = max(defects.get("eta", 0.0), d)
    for name, d in defects.items():
        if d > tol:
            raise WrongRegimeProfile(f"profile {name} violates its zero-mean "
                                     f"condition (defect {d:.3e})")
    return defects


class _Field:
    """Expression with cached partials for chain-rule evaluation."""

    def __init__(self, e: CoeffExpr):
        self.e = e
        self.zero = e.is_constant and float(e({})) == 0.0
        self.d = {v: e.diff(v) for v in ("x1", "x2", "y1", "y2", "z1", "z2", "t")}

    def jet(self, env, eps, h):
        """Value and gradient w.r.t. (p1, p2, s)."""
        if self.zero:
            n = len(env["x1"])
            return np.zeros(n), np.zeros((n, 3))
        d = self.d
        val = self.e(env)
        g = np.empty(val.shape + (3,))
        for a in range(2):
            k = str(a + 1)
            g[:, a] = (d["x" + k](env) + d["y" + k](env) / eps
                       + d["z" + k](env) / eps**2)
        g[:, 2] = d["t"](env) / h
        return val, g


def _sv(a, ga, v, gv):
    """Jet of scalar times vector."""
    return a[:, None] * v, ga[:, None, :] * v[:, :, None] + a[:, None, None] * gv


class RecoverySequence:
    """Recovery deformation at one thickness ``h``.

    ``jet(P, T)`` returns values ``(n, 3)`` and derivatives ``(n, 3, 3)``
    with respect to ``(p1, p2, t)`` of ``y(p, t) = u^h(Xi(p, h t))``.
    """

    def __init__(self, RC: RecoveryConfig, h: float):
        self.RC = RC
        self.h = float(h)
        self.eps = float(RC.regime.eps(h))
        self.fields = {k: [_Field(e) for e in v] for k, v in RC.exprs.items()}
        self.w = [_Field(e) for e in RC.w_exprs]
        self.w_zero = all(f.zero for f in self.w)
        self._gl = gauss_legendre(12, 0.0, 1.0)

    # building blocks ---------------------------------------------------
    def _base(self, P):
        S, u = self.RC.surface, self.RC.immersion
        x, d1, d2 = S.jet(P)
        fr = frames_from_jet(P, x, d1, d2)
        ij = immersion_jet(S, u, P, fr)
        # derivatives of sigma^a = g^{ab} d_b u
        dg = (np.einsum("nkca,nkb->nabc", d2, d1)
              + np.einsum("nka,nkbc->nabc", d1, d2))          # d_c g_ab
        gi = np.linalg.inv(fr.metric)
        dgi = -np.einsum("nai,nijc,njb->nabc", gi, dg, gi)
        dsig = (np.einsum("nkb,nabc->nkac", ij.du, dgi)
                + np.einsum("nab,nkbc->nkac", gi, ij.ddu))
        dsig = np.concatenate([dsig, np.zeros(dsig.shape[:-1] + (1,))], axis=-1)
        return fr, ij, dsig

    def _w_jets(self, P):
        n = len(P)
        env = {"x1": P[:, 0], "x2": P[:, 1]}
        val = np.zeros((n, 3))
        d1 = np.zeros((n, 3, 2))
        d2 = np.zeros((n, 3, 2, 2))
        for i, f in enumerate(self.w):
            if f.zero:
                continue
            val[:, i] = f.e(env)
            for a in range(2):
                fa = f.d["x" + str(a + 1)]
                d1[:, i, a] = fa(env)
                for b in range(2):
                    d2[:, i, a, b] = fa.diff("x" + str(b + 1))(env)
        return val, d1, d2

    def _integral(self, f: _Field, P, T, Y):
        """Jet of ``int_0^T f(p, tau, Y) dtau`` w.r.t. (p1, p2, s)."""
        n = len(P)
        if f.zero:
            return np.zeros(n), np.zeros((n, 3))
        xs, ws = self._gl
        val = np.zeros(n)
        grad = np.zeros((n, 3))
        for xk, wk in zip(xs, ws):
            tau = T * xk
            env = {"x1": P[:, 0], "x2": P[:, 1], "t": tau, "y1": Y[:, 0],
                   "y2": Y[:, 1], "z1": 0 * tau, "z2": 0 * tau}
            val += wk * T * f.e(env)
            for a in range(2):
                k = str(a + 1)
                grad[:, a] += wk * T * (f.d["x" + k](env)
                                        + f.d["y" + k](env) / self.eps)
        env = {"x1": P[:, 0], "x2": P[:, 1], "t": T, "y1": Y[:, 0],
               "y2": Y[:, 1], "z1": 0 * T, "z2": 0 * T}
        grad[:, 2] = f.e(env) / self.h
        return val, grad

    # evaluation --------------------------------------------------------
    def jet(self, P, T, base=None):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        T = np.atleast_1d(np.asarray(T, dtype=float))
        h, eps = self.h, self.eps
        s = h * T
        n = len(P)
        fr, ij, dsig = base if base is not None else self._base(P)
        zero3 = np.zeros((n, 3, 1))
        nu, dnu = ij.nu, np.concatenate([ij.dnu, zero3], axis=-1)
        sig = ij.sigma                                        # (n, 3, 2)
        val = ij.value.copy()
        grad = np.concatenate([ij.du, zero3], axis=-1)
        # s nu
        val += s[:, None] * nu
        grad[:, :, :2] += s[:, None, None] * ij.dnu
        grad[:, :, 2] += nu
        # h (w + s mu_L), mu_L = -sum_a (nu . d_a w) sigma^a
        if not self.w_zero:
            wv, dw, ddw = self._w_jets(P)
            val += h * wv
            grad[:, :, :2] += h * dw
            a = np.einsum("nk,nka->na", nu, dw)
            da = (np.einsum("nkc,nka->nac", ij.dnu, dw)
                  + np.einsum("nk,nkac->nac", nu, ddw))
            da = np.concatenate([da, np.zeros((n, 2, 1))], axis=-1)
            mu_v = -np.einsum("na,nka->nk", a, sig)
            mu_g = -(np.einsum("nac,nka->nkc", da, sig)
                     + np.einsum("na,nkac->nkc", a, dsig))
            val += h * s[:, None] * mu_v
            grad += h * s[:, None, None] * mu_g
            grad[:, :, 2] += h * mu_v
        env = _env(P, T, *fast_vars(P, eps))
        kind = self.RC.regime.kind
        F = self.fields
        sigma_jets = [(sig[:, :, a], dsig[:, :, a, :]) for a in range(2)]

        def add_vec(coef, cg, vec, vg):
            nonlocal val, grad
            v, g = _sv(coef, cg, vec, vg)
            val += v
            grad += g

        # zeta
        for a in range(2):
            c, g = F["zeta"][a].jet(env, eps, h)
            add_vec(h * eps * c, h * eps * g, *sigma_jets[a])
        # eta
        for a in range(2):
            c, g = F["eta"][a].jet(env, eps, h)
            add_vec(h * eps**2 * c, h * eps**2 * g, *sigma_jets[a])
        c, g = F["eta"][2].jet(env, eps, h)
        add_vec(h * eps**2 * c, h * eps**2 * g, nu, dnu)
        if kind in ("finite", "inf"):
            k = 1.0 if kind == "finite" else 2.0
            c, g = F["rho"][0].jet(env, eps, h)
            add_vec(k * h * eps * c, k * h * eps * g, nu, dnu)
        if kind == "inf":
            Y0 = np.zeros((n, 2))
            for a in range(2):
                c, g = self._integral(F["c"][a], P, T, Y0)
                add_vec(2 * h * h * c, 2 * h * h * g, *sigma_jets[a])
            c, g = self._integral(F["c"][2], P, T, Y0)
            add_vec(h * h * c, h * h * g, nu, dnu)
        if kind == "zero":
            phi = F["phi"][0]
            c, g = phi.jet(env, eps, h)
            add_vec(eps**2 * c, eps**2 * g, nu, dnu)
            if not phi.zero:
                # - s eps d_{y_a} phi sigma^a
                for a in range(2):
                    fa = _Field(phi.d["y" + str(a + 1)])
                    c, g = fa.jet(env, eps, h)
                    g = s[:, None] * g
                    g[:, 2] += c
                    add_vec(-eps * s * c, -eps * g, *sigma_jets[a])
            Y = fast_vars(P, eps)[0]
            for a in range(2):
                c, g = self._integral(F["mu"][a], P, T, Y)
                add_vec(2 * h * h * c, 2 * h * h * g, *sigma_jets[a])
            c, g = self._integral(F["mu"][2], P, T, Y)
            add_vec(h * h * c, h * h * g, nu, dnu)
        D = grad.copy()
        D[:, :, 2] *= h                                      # d/dt = h d/ds
        return val, D

    def value(self, P, T):
        return self.jet(P, T)[0]

    def scaled_gradient(self, P, T, base=None):
        base = base if base is not None else self._base(P)
        fr = base[0]
        check_thickness_factor(fr, self.h, T)
        _, D = self.jet(P, T, base)
        return scaled_gradient_from_jet(fr, D, self.h, T), base

    def ambient_gradient(self, P, T):
        """Gradient of ``u^h`` at ``Xi(p, h t)`` from the (p, s) chart."""
        base = self._base(P)
        fr = base[0]
        _, D = self.jet(P, T, base)
        D = D.copy()
        D[:, :, 2] /= self.h
        J = self.RC.surface.shell_jacobian(fr, self.h * T)
        return np.linalg.solve(np.swapaxes(J, 1, 2), np.swapaxes(D, 1, 2)) \
            .swapaxes(1, 2)


def build_recovery(RC: RecoveryConfig, h: float) -> RecoverySequence:
    """Recovery deformation ``y^h`` for one thickness."""
    return RecoverySequence(RC, h)


# --- limit strains ---------------------------------------------------------

def _displacement_strain(seq: RecoverySequence, P, ij):
    if seq.w_zero:
        return np.zeros((len(P), 2, 2))
    _, dw, _ = seq._w_jets(P)
    b = np.einsum("nka,nkb->nab", ij.du, dw)
    return 0.5 * (b + np.swapaxes(b, 1, 2))


def limit_strain(RC: RecoveryConfig, P, T, Y, Z, frames=None, q=None, B=None):
    """Dual-frame coefficients of ``B + t S^r_u + U(t, y, z)``.

    Returns (n, 3, 3).
    """
    n = len(P)
    kind = RC.regime.kind
    g1 = RC.regime.gamma1
    env = _env(P, T, Y, Z)
    E = RC.exprs
    G = np.zeros((n, 3, 3))
    G[:, :2, :2] = B + T[:, None, None] * q

    def d(e, v):
        return e.diff(v)(env)

    ys, zs = ("y1", "y2"), ("z1", "z2")
    for a in range(2):
        for b in range(2):
            G[:, a, b] += 0.5 * (d(E["zeta"][a], ys[b]) + d(E["zeta"][b], ys[a]))
            G[:, a, b] += 0.5 * (d(E["eta"][a], zs[b]) + d(E["eta"][b], zs[a]))
        G[:, a, 2] += 0.5 * d(E["eta"][2], zs[a])
    if kind == "finite":
        for a in range(2):
            G[:, a, 2] += 0.5 * d(E["rho"][0], ys[a]) \
                + d(E["zeta"][a], "t") / (2 * g1)
        G[:, 2, 2] += d(E["rho"][0], "t") / g1
    elif kind == "inf":
        for a in range(2):
            G[:, a, 2] += d(E["rho"][0], ys[a]) + E["c"][a](env)
        G[:, 2, 2] += E["c"][2](env)
    else:
        for a in range(2):
            for b in range(2):
                G[:, a, b] -= T * E["phi"][0].diff(ys[a]).diff(ys[b])(env)
            G[:, a, 2] += E["mu"][a](env)
        G[:, 2, 2] += E["mu"][2](env)
    G[:, 2, :2] = G[:, :2, 2]
    return G


def limit_value(RC: RecoveryConfig) -> float:
    """``int_S int_I int_Y int_Y Q(B + t S^r_u + U) dz dy dt dvol``.

    The slow variable gets at least ``n_slow`` nodes per axis, as in the
    shell rule, so both sides of the limsup see the same resolution.
    """
    S = RC.surface.refined(RC.n_slow)
    seq = RecoverySequence(RC, 0.5)
    fr_all = S.node_frames
    q_all = relative_weingarten_batch(S, RC.immersion, S.nodes)
    ij_all = immersion_jet(S, RC.immersion, S.nodes, fr_all)
    B_all = _displacement_strain(seq, S.nodes, ij_all)
    used = set()
    for e in RC.all_exprs():
        used |= e.free_variables
    cr = cell_rule(RC.n_cell, RC.npp)
    rules = [cr if v in used else (np.zeros(1), np.ones(1))
             for v in ("y1", "y2", "z1", "z2")]
    grids = np.meshgrid(*(r[0] for r in rules), indexing="ij")
    wcell = np.einsum("a,b,c,d->abcd", *(r[1] for r in rules)).ravel()
    Yc = np.stack([g.ravel() for g in grids], axis=1)
    t, wt = gauss_legendre(RC.n_t)
    m = len(Yc)
    TT = np.repeat(t, m)
    WW = np.repeat(wt, m) * np.tile(wcell, len(t))
    YY = np.tile(Yc, (len(t), 1))
    total = 0.0
    for i, p in enumerate(S.nodes):
        P = np.broadcast_to(p, (len(TT), 2))
        G = limit_strain(RC, P, TT, YY[:, :2], YY[:, 2:], q=q_all[i],
                         B=B_all[i])
        Q = RC.material.quadratic_matrix(P, YY[:, :2], YY[:, 2:], TT)
        Qc = frame_quadratic(Q, fr_all.coframe[i])
        v = to_mandel(G)
        total += S.dvol[i] * float(np.sum(WW * np.einsum("ni,nij,nj->n", v, Qc, v)))
    return total


# --- energies along the h sequence -------------------------------------------

def _rule_for(RC: RecoveryConfig, h):
    eps = float(RC.regime.eps(h))
    return shell_rule(RC.surface, fast_axes(RC.all_exprs()), eps, RC.n_slow,
                      RC.npp, RC.n_t, RC.cost_guard), eps


def shell_energies(RC: RecoveryConfig, h):
    """``I^h`` and ``J^h`` of the recovery deformation at thickness ``h``."""
    seq = RecoverySequence(RC, h)
    rule, eps = _rule_for(RC, h)
    Ih = Jh = 0.0
    for P, T, w in rule.chunks():
        Gh, base = seq.scaled_gradient(P, T)
        fr = base[0]
        W = RC.material.energy(P, *fast_vars(P, eps), T, Gh)
        dv = w * np.sqrt(np.linalg.det(fr.metric))
        Ih += float(np.sum(W * dv))
        Jh += float(np.sum(W * dv * _det_factor(fr, h * T)))
    return Ih, Jh


def limsup_check(RC: RecoveryConfig):
    """Rows ``(h, h^-2 I^h, limit, gap, |J^h - I^h| / (h I^h))``."""
    RC.regime.check_eps_law(RC.hs) if len(RC.hs) > 1 else None
    lim = limit_value(RC)

    def row(h):
        Ih, Jh = shell_energies(RC, h)
        ratio = abs(Jh - Ih) / (h * Ih) if Ih > 0 else 0.0
        return [h, Ih / h**2, lim, Ih / h**2 - lim, ratio]
    return parallel_map(row, list(RC.hs))


def strain_expansion_check(RC: RecoveryConfig, hs=None):
    """Rows ``(h, |sym(R^T grad_h y) - I - h(B + t S^r + U)|_L2 / h)``."""
    hs = list(RC.hs if hs is None else hs)

    def row(h):
        seq = RecoverySequence(RC, h)
        rule, eps = _rule_for(RC, h)
        acc = 0.0
        for P, T, w in rule.chunks():
            Gh, base = seq.scaled_gradient(P, T)
            fr, ij, _ = base
            R = np.einsum("nka,nja->nkj", ij.du, fr.dual) \
                + ij.nu[:, :, None] * fr.normal[:, None, :]
            A = np.einsum("nki,nkj->nij", R, Gh)
            A = 0.5 * (A + np.swapaxes(A, 1, 2)) - np.eye(3)
            q = relative_weingarten_batch(RC.surface, RC.immersion, P)
            B = _displacement_strain(seq, P, ij)
            Gc = limit_strain(RC, P, T, *fast_vars(P, eps), q=q, B=B)
            Ga = np.einsum("nai,nab,nbj->nij", fr.coframe, Gc, fr.coframe)
            r = A - h * Ga
            dv = w * np.sqrt(np.linalg.det(fr.metric))
            acc += float(np.sum(dv * np.einsum("nij,nij->n", r, r)))
        return [h, math.sqrt(acc) / h]
    return parallel_map(row, hs)


def observed_order(hs, errs):
    """Least-squares slope of ``log|err|`` against ``log h``."""
    hs = np.log(np.asarray(hs, dtype=float))
    e = np.log(np.abs(np.asarray(errs, dtype=float)))
    return float(np.polyfit(hs, e, 1)[0])
