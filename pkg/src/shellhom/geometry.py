"""Mid-surface charts, frames, Weingarten maps and the shell maps.

Conventions
-----------
* The unit normal is ``n = (d1 xi x d2 xi) / |d1 xi x d2 xi|``.
* The Weingarten map is the differential of the normal, ``S = dn``, stored
  as a 3x3 matrix with ``S tau_a = d_a n`` and ``S n = 0``.  With the graph
  charts used for the sphere and ellipsoid presets ``n`` points away from
  the centre, so caps have positive principal curvatures (S = T_S / R on a
  sphere of radius R).
* Second fundamental form coefficients are ``II_ab = tau_a . d_b n``; the
  relative Weingarten map of an immersion is reported by its coefficients in
  the basis ``tau^a (x) tau^b``.
* Points of the thick shell are ``Xi(p, t) = xi(p) + t n(p)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (DegenerateChart, DegenerateImmersion, NonPositiveCurvature,
                     OutOfDomain, SingularFactor, StepTooLarge)
from .expr import parse_chart
from .quadrature import disk_rule, gauss_legendre, tensor_rule

_DEGENERACY_TOL = 1e-12


# --- domains ---------------------------------------------------------------

@dataclass(frozen=True)
class Rectangle:
    u0: float
    u1: float
    v0: float
    v1: float

    @property
    def area(self):
        return (self.u1 - self.u0) * (self.v1 - self.v0)

    def contains(self, p, tol=1e-12):
        p = np.atleast_2d(p)
        return np.all((p[:, 0] >= self.u0 - tol) & (p[:, 0] <= self.u1 + tol)
                      & (p[:, 1] >= self.v0 - tol) & (p[:, 1] <= self.v1 + tol))

    def rule(self, n_u, n_v):
        return tensor_rule(gauss_legendre(n_u, self.u0, self.u1),
                           gauss_legendre(n_v, self.v0, self.v1))


@dataclass(frozen=True)
class Disk:
    cx: float
    cy: float
    radius: float

    @property
    def area(self):
        return np.pi * self.radius ** 2

    def contains(self, p, tol=1e-12):
        p = np.atleast_2d(p)
        r = np.hypot(p[:, 0] - self.cx, p[:, 1] - self.cy)
        return np.all(r <= self.radius * (1 + tol) + tol)

    def rule(self, n_r, n_theta):
        return disk_rule(self.radius, n_r, n_theta, (self.cx, self.cy))


# --- charts ----------------------------------------------------------------

def _fd_jet(f, P, h1=1e-5, h2=1e-3):
    """Finite-difference jet of a vector map with one Richardson level."""
    P = np.asarray(P, dtype=float)
    val = f(P)
    e = np.eye(2)

    def d1(h):
        return np.stack([(f(P + h * e[a]) - f(P - h * e[a])) / (2 * h)
                         for a in range(2)], axis=-1)

    def d2(h):
        out = np.empty(val.shape + (2, 2))
        for a in range(2):
            out[..., a, a] = (f(P + h * e[a]) - 2 * val + f(P - h * e[a])) / h**2
        mix = (f(P + h * (e[0] + e[1])) - f(P + h * (e[0] - e[1]))
               - f(P - h * (e[0] - e[1])) + f(P - h * (e[0] + e[1]))) / (4 * h**2)
        out[..., 0, 1] = mix
        out[..., 1, 0] = mix
        return out

    first = (4 * d1(h1 / 2) - d1(h1)) / 3
    second = (4 * d2(h2 / 2) - d2(h2)) / 3
    return val, first, second


class Chart:
    """Map ``xi : omega -> R^3`` with two derivative orders."""

    exact = True

    def jet(self, P):
        """Return ``(xi, dxi, ddxi)`` of shapes (n,3), (n,3,2), (n,3,2,2)."""
        raise NotImplementedError

    def __call__(self, P):
        return self.jet(P)[0]


class FlatChart(Chart):
    def jet(self, P):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        n = len(P)
        x = np.zeros((n, 3))
        x[:, :2] = P
        d1 = np.zeros((n, 3, 2))
        d1[:, 0, 0] = 1.0
        d1[:, 1, 1] = 1.0
        return x, d1, np.zeros((n, 3, 2, 2))


class GraphChart(Chart):
    """Graph ``(u, v, c sqrt(1 - u^2/a^2 - v^2/b^2))`` of an ellipsoid cap."""

    def __init__(self, a, b, c):
        self.a, self.b, self.c = float(a), float(b), float(c)

    def jet(self, P):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        u, v = P[:, 0], P[:, 1]
        a2, b2, c = self.a ** 2, self.b ** 2, self.c
        q = 1.0 - u * u / a2 - v * v / b2
        if np.any(q <= 0):
            raise DegenerateChart("graph chart evaluated outside its disk")
        s = np.sqrt(q)
        z = c * s
        zu = -c * u / (a2 * s)
        zv = -c * v / (b2 * s)
        zuu = -c / (a2 * s) - c * u * u / (a2 * a2 * s ** 3)
        zvv = -c / (b2 * s) - c * v * v / (b2 * b2 * s ** 3)
        zuv = -c * u * v / (a2 * b2 * s ** 3)
        n = len(P)
        x = np.stack([u, v, z], axis=1)
        d1 = np.zeros((n, 3, 2))
        d1[:, 0, 0] = 1.0
        d1[:, 1, 1] = 1.0
        d1[:, 2, 0] = zu
        d1[:, 2, 1] = zv
        d2 = np.zeros((n, 3, 2, 2))
        d2[:, 2, 0, 0] = zuu
        d2[:, 2, 1, 1] = zvv
        d2[:, 2, 0, 1] = zuv
        d2[:, 2, 1, 0] = zuv
        return x, d1, d2


class CylinderChart(Chart):
    """Arc-length chart ``(R sin(u/R), v, R cos(u/R))``."""

    def __init__(self, R):
        self.R = float(R)

    def jet(self, P):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        R = self.R
        a = P[:, 0] / R
        n = len(P)
        x = np.stack([R * np.sin(a), P[:, 1], R * np.cos(a)], axis=1)
        d1 = np.zeros((n, 3, 2))
        d1[:, 0, 0] = np.cos(a)
        d1[:, 2, 0] = -np.sin(a)
        d1[:, 1, 1] = 1.0
        d2 = np.zeros((n, 3, 2, 2))
        d2[:, 0, 0, 0] = -np.sin(a) / R
        d2[:, 2, 0, 0] = -np.cos(a) / R
        return x, d1, d2


class ExprChart(Chart):
    """Chart given by three expressions in ``u, v``; FD derivatives."""

    exact = False

    def __init__(self, texts):
        if len(texts) != 3:
            raise ValueError("expression chart needs three components")
        self.texts = tuple(texts)
        self.exprs = tuple(parse_chart(t) for t in texts)

    def _value(self, P):
        return np.stack([e(u=P[..., 0], v=P[..., 1]) for e in self.exprs],
                        axis=-1)

    def jet(self, P):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        return _fd_jet(self._value, P)


class RotatedChart(Chart):
    """``xi(Rot(theta) p)``: same surface, rotated parameter frame."""

    def __init__(self, base: Chart, theta: float):
        self.base = base
        self.theta = float(theta)
        c, s = np.cos(theta), np.sin(theta)
        self.rot = np.array([[c, -s], [s, c]])
        self.exact = base.exact

    def jet(self, P):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        x, d1, d2 = self.base.jet(P @ self.rot.T)
        r = self.rot
        return (x, d1 @ r,
                np.einsum("nkab,ac,bd->nkcd", d2, r, r))


# --- frames ----------------------------------------------------------------

@dataclass
class Frame:
    """Moving frame at one or several surface points.

    All fields carry an optional leading batch axis.  ``tau`` and ``dual``
    store the vectors as columns; ``coframe`` stores ``tau^1, tau^2, n`` as
    rows so that coefficient matrices map to ambient ones by congruence.
    """
    param: np.ndarray
    point: np.ndarray
    tau: np.ndarray
    dual: np.ndarray
    normal: np.ndarray
    proj: np.ndarray
    metric: np.ndarray
    gauss: np.ndarray
    shape: np.ndarray
    dn: np.ndarray
    second: np.ndarray
    coframe: np.ndarray = field(repr=False)

    def __getitem__(self, i):
        return Frame(**{k: getattr(self, k)[i]
                        for k in self.__dataclass_fields__})

    def __len__(self):
        return len(self.point) if self.point.ndim == 2 else 1

    @property
    def principal_curvatures(self):
        """Eigenvalues of the shape operator on the tangent plane."""
        A = np.linalg.solve(self.metric, self.second)
        return np.sort(np.linalg.eigvals(A).real, axis=-1)


def frames_from_jet(P, x, d1, d2) -> Frame:
    """Assemble batched frames from chart jets."""
    t1, t2 = d1[..., 0], d1[..., 1]
    c = np.cross(t1, t2)
    cn = np.linalg.norm(c, axis=-1)
    scale = np.linalg.norm(t1, axis=-1) * np.linalg.norm(t2, axis=-1)
    bad = ~(cn > _DEGENERACY_TOL * np.maximum(scale, 1e-300))
    if np.any(bad):
        i = int(np.argmax(bad))
        raise DegenerateChart(f"chart is not an immersion at p={P[i].tolist()}")
    n = c / cn[:, None]
    g = np.einsum("nka,nkb->nab", d1, d1)
    if np.any(np.linalg.eigvalsh(g)[:, 0] <= 0):
        raise DegenerateChart("metric not positive definite")
    ginv = np.linalg.inv(g)
    dual = np.einsum("nkb,nba->nka", d1, ginv)
    # derivative of the normalized cross product
    dc = np.stack([np.cross(d2[..., 0, b], t2) + np.cross(t1, d2[..., 1, b])
                   for b in range(2)], axis=-1)
    dn = (dc - n[:, :, None] * np.einsum("nk,nkb->nb", n, dc)[:, None, :]) \
        / cn[:, None, None]
    second = np.einsum("nka,nkb->nab", d1, dn)
    second = 0.5 * (second + np.swapaxes(second, 1, 2))
    shape = np.einsum("nib,njb->nij", dn, dual)
    proj = np.eye(3) - n[:, :, None] * n[:, None, :]
    gauss = np.linalg.det(second) / np.linalg.det(g)
    coframe = np.concatenate([np.swapaxes(dual, 1, 2), n[:, None, :]], axis=1)
    return Frame(param=np.asarray(P, dtype=float), point=x, tau=d1.copy(),
                 dual=dual, normal=n, proj=proj, metric=g, gauss=gauss,
                 shape=shape, dn=dn, second=second, coframe=coframe)


# --- surface patch ---------------------------------------------------------

class SurfacePatch:
    """Chart, parameter domain and quadrature of a mid-surface.

    Parameters
    ----------
    chart : Chart
    domain : Rectangle or Disk
    counts : tuple of int
        Quadrature nodes per axis (radial and angular on disks).
    preset : str
        Tag of the generating preset.
    params : dict
        Preset parameters.
    """

    def __init__(self, chart: Chart, domain, counts=(8, 8), preset="expr",
                 params=None, spec=""):
        if min(counts) < 2:
            raise ValueError("need at least 2 quadrature nodes per axis")
        self.chart = chart
        self.domain = domain
        self.counts = tuple(int(c) for c in counts)
        self.preset = preset
        self.params = dict(params or {})
        self.spec = spec
        self.nodes, self.weights = domain.rule(*self.counts)
        self.node_frames = self.frames_at(self.nodes, check_domain=False)
        self.dvol = self.weights * np.sqrt(np.linalg.det(self.node_frames.metric))
        self.convex = bool(np.all(self.node_frames.gauss > 0))

    # evaluation ---------------------------------------------------------
    def jet(self, P):
        return self.chart.jet(np.atleast_2d(P))

    def frames_at(self, P, check_domain=True) -> Frame:
        P = np.atleast_2d(np.asarray(P, dtype=float))
        if check_domain and not self.domain.contains(P):
            raise OutOfDomain(f"point outside parameter domain: {P.tolist()}")
        return frames_from_jet(P, *self.chart.jet(P))

    def frame_at(self, p) -> Frame:
        return self.frames_at(np.asarray(p, dtype=float).reshape(1, 2))[0]

    @property
    def area(self):
        return float(np.sum(self.dvol))

    def require_convex(self):
        if not self.convex:
            k = float(np.min(self.node_frames.gauss))
            raise NonPositiveCurvature(f"min Gauss curvature {k:.3e} <= 0")

    def shell_point(self, P, t):
        """``Xi(p, t) = xi(p) + t n(p)`` for arrays of points."""
        fr = self.frames_at(P, check_domain=False)
        return fr.point + np.asarray(t)[..., None] * fr.normal

    def shell_jacobian(self, fr: Frame, t):
        """Columns ``d_a Xi = tau_a + t d_a n`` and ``d_t Xi = n``."""
        t = np.asarray(t, dtype=float)
        cols = fr.tau + t[..., None, None] * fr.dn
        return np.concatenate([cols, fr.normal[..., :, None]], axis=-1)

    def project(self, X, p0, tol=1e-15, maxit=50):
        """Closest-point coordinates ``(p, t)`` with ``Xi(p, t) = X``.

        Newton iteration started from the parameter guess ``p0``.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        p = np.array(np.broadcast_to(p0, (len(X), 2)), dtype=float)
        fr = self.frames_at(p, check_domain=False)
        t = np.einsum("nk,nk->n", X - fr.point, fr.normal)
        for _ in range(maxit):
            fr = self.frames_at(p, check_domain=False)
            r = fr.point + t[:, None] * fr.normal - X
            J = self.shell_jacobian(fr, t)
            d = np.linalg.solve(J, -r[..., None])[..., 0]
            p = p + d[:, :2]
            t = t + d[:, 2]
            if np.max(np.abs(d)) < tol * (1 + np.max(np.abs(p))):
                break
        return p, t

    def refined(self, n):
        """Same surface with at least ``n`` quadrature nodes per axis."""
        counts = tuple(max(c, int(n)) for c in self.counts)
        if counts == self.counts:
            return self
        return SurfacePatch(self.chart, self.domain, counts, self.preset,
                            self.params, self.spec)

    def reparametrized(self, theta):
        """Same surface with the parameter plane rotated by ``theta``.

        Only disks centred at the origin are invariant under rotation.
        """
        if not isinstance(self.domain, Disk) or self.domain.cx or self.domain.cy:
            raise ValueError("rotation needs a disk domain centred at 0")
        return SurfacePatch(RotatedChart(self.chart, -theta), self.domain,
                            self.counts, self.preset, self.params, self.spec)


def _parse_params(body):
    out = {}
    for item in filter(None, (s.strip() for s in body.split(","))):
        if "=" not in item:
            raise ValueError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = float(v)
    return out


def build_surface(spec: str, quadrature=(8, 8), domain=None) -> SurfacePatch:
    """Build a surface from a preset or expression spec string.

    Parameters
    ----------
    spec : str
        ``flat:Lx=1,Ly=1``, ``sphere:R=2,cap=30``,
        ``ellipsoid:a=1,b=1,c=2,cap=30``, ``cyl:R=1,arc=60,L=1`` or
        ``expr:<x(u,v)>;<y(u,v)>;<z(u,v)>`` (unit square unless ``domain``
        is given).  Cap and arc angles are in degrees.
    quadrature : int or (int, int)
        Nodes per axis.
    domain : Rectangle or Disk, optional
        Overrides the preset domain.
    """
    if isinstance(quadrature, int):
        quadrature = (quadrature, quadrature)
    name, _, body = spec.partition(":")
    name = name.strip().lower()
    if name == "expr":
        parts = [s.strip() for s in body.split(";")]
        chart = ExprChart(parts)
        dom = domain or Rectangle(0.0, 1.0, 0.0, 1.0)
        return SurfacePatch(chart, dom, quadrature, "expr", {"x": parts[0],
                            "y": parts[1], "z": parts[2]}, spec)
    prm = _parse_params(body)
    if name == "flat":
        Lx, Ly = prm.get("Lx", 1.0), prm.get("Ly", 1.0)
        chart, dom = FlatChart(), Rectangle(0.0, Lx, 0.0, Ly)
        prm = {"Lx": Lx, "Ly": Ly}
    elif name == "sphere":
        R, cap = prm.get("R", 1.0), prm.get("cap", 30.0)
        chart = GraphChart(R, R, R)
        dom = Disk(0.0, 0.0, R * np.sin(np.radians(cap)))
        prm = {"R": R, "cap": cap}
    elif name == "ellipsoid":
        a, b, c = prm.get("a", 1.0), prm.get("b", 1.0), prm.get("c", 1.0)
        cap = prm.get("cap", 30.0)
        chart = GraphChart(a, b, c)
        dom = Disk(0.0, 0.0, min(a, b) * np.sin(np.radians(cap)))
        prm = {"a": a, "b": b, "c": c, "cap": cap}
    elif name == "cyl":
        R, arc, L = prm.get("R", 1.0), prm.get("arc", 60.0), prm.get("L", 1.0)
        half = 0.5 * R * np.radians(arc)
        chart, dom = CylinderChart(R), Rectangle(-half, half, 0.0, L)
        prm = {"R": R, "arc": arc, "L": L}
    else:
        raise ValueError(f"unknown surface preset {name!r}")
    if not (0 < np.radians(prm.get("cap", 1.0)) < np.pi / 2):
        raise ValueError("cap angle must lie in (0, 90) degrees")
    return SurfacePatch(chart, domain or dom, quadrature, name, prm, spec)


# --- immersions ------------------------------------------------------------

class Immersion:
    """Deformation ``u`` of the mid-surface, evaluated through the chart."""

    exact = True
    tag = "immersion"

    def jet(self, surface: SurfacePatch, P):
        """Return ``(u, du, ddu)`` in parameter coordinates."""
        raise NotImplementedError

    def then_rigid(self, R, c):
        return RigidAfter(self, R, c)


class AmbientImmersion(Immersion):
    """``u = U o xi`` for an ambient map ``U`` with analytic jets."""

    def __init__(self, tag, fn: Callable, params=None):
        self.tag = tag
        self.fn = fn
        self.params = dict(params or {})

    def jet(self, surface, P):
        x, d1, d2 = surface.jet(P)
        U, J, H = self.fn(x)
        du = np.einsum("nij,nja->nia", J, d1)
        ddu = (np.einsum("nijk,nja,nkb->niab", H, d1, d1)
               + np.einsum("nij,njab->niab", J, d2))
        return U, du, ddu


class RigidAfter(Immersion):
    def __init__(self, base: Immersion, R, c):
        self.base = base
        self.R = np.asarray(R, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.exact = base.exact
        self.tag = f"rigid*{base.tag}"

    def jet(self, surface, P):
        u, du, ddu = self.base.jet(surface, P)
        R = self.R
        return (u @ R.T + self.c, np.einsum("ij,njb->nib", R, du),
                np.einsum("ij,njab->niab", R, ddu))


class ExprImmersion(Immersion):
    """Immersion written as expressions in the chart parameters ``u, v``."""

    exact = False
    tag = "expr"

    def __init__(self, texts):
        self.texts = tuple(texts)
        self.exprs = tuple(parse_chart(t) for t in texts)

    def jet(self, surface, P):
        P = np.atleast_2d(np.asarray(P, dtype=float))

        def f(Q):
            return np.stack([e(u=Q[..., 0], v=Q[..., 1]) for e in self.exprs],
                            axis=-1)
        return _fd_jet(f, P)


def _linear(A, c):
    A = np.asarray(A, dtype=float)
    c = np.asarray(c, dtype=float)

    def fn(X):
        n = len(X)
        return (X @ A.T + c, np.broadcast_to(A, (n, 3, 3)),
                np.zeros((n, 3, 3, 3)))
    return fn


def _roll(R):
    def fn(X):
        a = X[:, 0] / R
        r = R + X[:, 2]
        sa, ca = np.sin(a), np.cos(a)
        n = len(X)
        U = np.stack([r * sa, X[:, 1], r * ca - R], axis=1)
        J = np.zeros((n, 3, 3))
        J[:, 0, 0] = r / R * ca
        J[:, 0, 2] = sa
        J[:, 1, 1] = 1.0
        J[:, 2, 0] = -r / R * sa
        J[:, 2, 2] = ca
        H = np.zeros((n, 3, 3, 3))
        H[:, 0, 0, 0] = -r / R**2 * sa
        H[:, 0, 0, 2] = H[:, 0, 2, 0] = ca / R
        H[:, 2, 0, 0] = -r / R**2 * ca
        H[:, 2, 0, 2] = H[:, 2, 2, 0] = -sa / R
        return U, J, H
    return fn


def rotation_matrix(axis, angle):
    """Rodrigues rotation about ``axis``."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K


def identity_immersion():
    return AmbientImmersion("id", _linear(np.eye(3), np.zeros(3)))


def rigid_immersion(R, c):
    return AmbientImmersion("rigid", _linear(R, c), {"R": R, "c": c})


def reflection_immersion():
    """Reflection across the plane x3 = 0."""
    return AmbientImmersion("reflect", _linear(np.diag([1.0, 1.0, -1.0]),
                                               np.zeros(3)))


def scaled_immersion(s):
    return AmbientImmersion("scale", _linear(s * np.eye(3), np.zeros(3)),
                            {"s": s})


def roll_immersion(R):
    """Cylindrical roll about an axis parallel to e2 (isometric on x3 = 0)."""
    return AmbientImmersion("roll", _roll(float(R)), {"R": float(R)})


def build_immersion(spec: str) -> Immersion:
    """Immersion from ``id``, ``reflect``, ``scale:s=1.1``, ``roll:R=1``,
    ``rigid:axis=0,0,1,angle=0.3,c=0,0,0`` or ``expr:<a>;<b>;<c>``."""
    name, _, body = spec.partition(":")
    name = name.strip().lower()
    if name == "id":
        return identity_immersion()
    if name == "reflect":
        return reflection_immersion()
    if name == "expr":
        return ExprImmersion([s.strip() for s in body.split(";")])
    if name == "rigid":
        vals = {}
        key = None
        for tok in body.split(","):
            if "=" in tok:
                key, tok = tok.split("=", 1)
                vals[key.strip()] = []
            vals[key.strip()].append(float(tok))
        R = rotation_matrix(vals.get("axis", [0, 0, 1]), vals.get("angle", [0])[0])
        return rigid_immersion(R, vals.get("c", [0, 0, 0]))
    prm = _parse_params(body)
    if name == "scale":
        return scaled_immersion(prm.get("s", 1.0))
    if name == "roll":
        return roll_immersion(prm.get("R", 1.0))
    raise ValueError(f"unknown immersion {name!r}")


@dataclass
class ImmersionJet:
    """Deformed tangent vectors, normal and co-vectors at points."""
    value: np.ndarray
    du: np.ndarray
    ddu: np.ndarray
    nu: np.ndarray
    dnu: np.ndarray
    metric: np.ndarray
    sigma: np.ndarray      # columns sigma^a = g^{ab} d_b u (g of the surface)


def immersion_jet(surface: SurfacePatch, u: Immersion, P, fr: Frame = None):
    P = np.atleast_2d(np.asarray(P, dtype=float))
    fr = fr if fr is not None else surface.frames_at(P, check_domain=False)
    val, du, ddu = u.jet(surface, P)
    c = np.cross(du[..., 0], du[..., 1])
    cn = np.linalg.norm(c, axis=-1)
    if np.any(cn < _DEGENERACY_TOL):
        raise DegenerateImmersion("deformation gradient drops rank")
    nu = c / cn[:, None]
    dc = np.stack([np.cross(ddu[..., 0, b], du[..., 1])
                   + np.cross(du[..., 0], ddu[..., 1, b]) for b in range(2)],
                  axis=-1)
    dnu = (dc - nu[:, :, None] * np.einsum("nk,nkb->nb", nu, dc)[:, None, :]) \
        / cn[:, None, None]
    gu = np.einsum("nka,nkb->nab", du, du)
    sigma = np.einsum("nkb,nba->nka", du, np.linalg.inv(fr.metric))
    return ImmersionJet(val, du, ddu, nu, dnu, gu, sigma)


def isometry_violation(surface: SurfacePatch, u: Immersion, P=None):
    """Largest spectral-norm deviation of the pulled-back metric."""
    P = surface.nodes if P is None else np.atleast_2d(P)
    fr = surface.frames_at(P, check_domain=False)
    _, du, _ = u.jet(surface, P)
    gu = np.einsum("nka,nkb->nab", du, du)
    return float(np.max(np.linalg.norm(gu - fr.metric, ord=2, axis=(1, 2))))


def relative_weingarten_batch(surface: SurfacePatch, u: Immersion, P):
    """Coefficients ``q_ab`` of the relative Weingarten map at points ``P``.

    ``q = sym(g g_u^{-1} II_u) - II_S``; for isometric ``u`` this is
    ``II_u - II_S`` with ``II_u[a, b] = d_a u . d_b nu``.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    fr = surface.frames_at(P, check_domain=False)
    ij = immersion_jet(surface, u, P, fr)
    IIu = np.einsum("nka,nkb->nab", ij.du, ij.dnu)
    A = fr.metric @ np.linalg.solve(ij.metric, IIu)
    q = 0.5 * (A + np.swapaxes(A, 1, 2)) - fr.second
    return q


def relative_weingarten(surface: SurfacePatch, u: Immersion, p):
    """Relative Weingarten coefficients (2x2, basis tau^a (.) tau^b) at p."""
    p = np.asarray(p, dtype=float).reshape(1, 2)
    if not surface.domain.contains(p):
        raise OutOfDomain(f"point outside parameter domain: {p.tolist()}")
    return relative_weingarten_batch(surface, u, p)[0]


# --- shell maps ------------------------------------------------------------

def theta_formula(fr: Frame, h, t):
    """Closed form of the differential of Theta^h at ``x + t n``."""
    S, T, n = fr.shape, fr.proj, fr.normal
    A = T + (np.outer(n, n) + t * S) / h
    return A @ np.linalg.inv(np.eye(3) + t * S)


@dataclass
class ShellResidualReport:
    theta_residual: float
    dpi_residual: float
    dpi_ratio: float
    dpi_ratio_literal: float
    dt_residual: float
    step: float
    theta_fd: np.ndarray
    theta_exact: np.ndarray


def shell_identity_residuals(S: SurfacePatch, h: float, p, t: float,
                             step: float | None = None,
                             dpi_step: float = 1e-6) -> ShellResidualReport:
    """FD residuals of the shell-map differentials at ``X = xi(p) + t n(p)``.

    ``theta_residual`` compares the FD differential of Theta^h with its
    closed form; ``dpi_ratio`` is ``|d pi_FD - (T_S - t S)| / t^2`` which
    stays bounded as ``t -> 0``.  ``dpi_ratio_literal`` uses ``I - t S T_S``
    as reference, which differs from ``d pi`` by ``n (x) n`` and therefore
    blows up like ``1/t^2``.

    Parameters
    ----------
    h : float
        Thickness in (0, 1].
    t : float
        Signed distance from the mid-surface, ``|t| < h/2``.
    step : float, optional
        FD step for Theta^h, default ``1e-6 h``.
    """
    if not (0 < h <= 1):
        raise ValueError("h must lie in (0, 1]")
    if abs(t) >= h / 2:
        raise ValueError("need |t| < h/2")
    step = 1e-6 * h if step is None else step
    if step > 0.05 * h:
        raise StepTooLarge(f"FD step {step:g} not small against h={h:g}")
    p = np.asarray(p, dtype=float).reshape(1, 2)
    fr = S.frame_at(p[0])
    X0 = fr.point + t * fr.normal
    E = np.eye(3)

    def theta(X):
        q, s = S.project(X, p)
        f = S.frames_at(q, check_domain=False)
        return f.point + (s / h)[:, None] * f.normal

    def pi_t(X):
        q, s = S.project(X, p)
        return S.frames_at(q, check_domain=False).point, s

    Xp = np.concatenate([X0 + step * E, X0 - step * E])
    th = theta(Xp)
    dtheta = ((th[:3] - th[3:]) / (2 * step)).T
    exact = theta_formula(fr, h, t)
    res = float(np.linalg.norm(dtheta - exact, 2))

    Xq = np.concatenate([X0 + dpi_step * E, X0 - dpi_step * E])
    pts, ts = pi_t(Xq)
    dpi = ((pts[:3] - pts[3:]) / (2 * dpi_step)).T
    dt = (ts[:3] - ts[3:]) / (2 * dpi_step)
    ref = fr.proj - t * fr.shape
    lit = np.eye(3) - t * fr.shape @ fr.proj
    dpi_res = float(np.linalg.norm(dpi - ref, 2))
    return ShellResidualReport(
        theta_residual=res, dpi_residual=dpi_res,
        dpi_ratio=dpi_res / t**2 if t else float("nan"),
        dpi_ratio_literal=float(np.linalg.norm(dpi - lit, 2)) / t**2
        if t else float("nan"),
        dt_residual=float(np.linalg.norm(dt - fr.normal)), step=step,
        theta_fd=dtheta, theta_exact=exact)


def check_thickness_factor(fr: Frame, h, t):
    """Raise SingularFactor unless all eigenvalues of I + h t S lie in
    (1/2, 3/2)."""
    k = fr.principal_curvatures
    lam = 1.0 + np.asarray(h * t)[..., None] * k
    if np.any((lam <= 0.5) | (lam >= 1.5)):
        raise SingularFactor("I + h t S leaves (1/2, 3/2); reduce h")


def scaled_gradient(S: SurfacePatch, y: Callable, h: float, p, t, dy=None,
                    fd_step: float = 1e-6):
    """Scaled gradient ``grad y (T_S + (n(x)n + h t S)/h)(I + h t S)^{-1}``.

    Parameters
    ----------
    y : callable
        ``y(P, T) -> (n, 3)`` on the unit-thickness shell, in chart
        coordinates (``P`` parameter points, ``T`` thickness in I).
    dy : callable, optional
        ``dy(P, T) -> (n, 3, 3)`` with columns ``d_p1 y, d_p2 y, d_t y``;
        central differences of ``y`` otherwise.
    p, t : array_like
        One point ``(2,), scalar`` or batches ``(n, 2), (n,)``.

    Returns
    -------
    ndarray, shape (3, 3) or (n, 3, 3)
    """
    single = np.ndim(p) == 1
    P = np.atleast_2d(np.asarray(p, dtype=float))
    T = np.atleast_1d(np.asarray(t, dtype=float))
    fr = S.frames_at(P, check_domain=False)
    check_thickness_factor(fr, h, T)
    if dy is not None:
        D = dy(P, T)
    else:
        e = np.eye(2)
        cols = [(y(P + fd_step * e[a], T) - y(P - fd_step * e[a], T))
                / (2 * fd_step) for a in range(2)]
        cols.append((y(P, T + fd_step) - y(P, T - fd_step)) / (2 * fd_step))
        D = np.stack(cols, axis=-1)
    out = scaled_gradient_from_jet(fr, D, h, T)
    return out[0] if single else out


def scaled_gradient_from_jet(fr: Frame, D, h, T):
    """Same as :func:`scaled_gradient` from parameter derivatives ``D``."""
    J1 = np.concatenate([fr.tau + T[:, None, None] * fr.dn,
                         fr.normal[:, :, None]], axis=-1)
    grad = np.linalg.solve(np.swapaxes(J1, 1, 2), np.swapaxes(D, 1, 2))
    grad = np.swapaxes(grad, 1, 2)
    n = fr.normal
    nn = n[:, :, None] * n[:, None, :]
    hts = (h * T)[:, None, None] * fr.shape
    A = fr.proj + nn / h + T[:, None, None] * fr.shape
    return grad @ A @ np.linalg.inv(np.eye(3) + hts)
