"""Cell problems for the effective bending forms.

For a load ``q`` (symmetric tangential tensor, dual-frame coefficients) the
effective form is

    Q_eff(q) = min  sum_i w_i  mean_{y, z}  Q_i(y, z; p + t_i q + U(t_i, y, z))

over an offset ``p`` and relaxation fields ``U`` from the regime's space,
where ``t_i, w_i`` is the Gauss rule on ``I`` and the cell means are taken
on the sampling grids.  The pipeline is

1. eliminate the z-fields per (t, y) node by a dense Schur complement,
2. for ``gamma1 = 0`` relax the shear/normal entries pointwise,
3. solve the remaining coupled system by preconditioned CG,
4. recover the 3x3 matrix by polarisation over six loads.

Steps 1 and 2 are exact eliminations of the discrete problem.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (CGNoConvergence, IndefiniteSystem, InvalidEpsLaw,
                     MaterialNotThicknessHomogeneous)
from .geometry import SurfacePatch
from .mandel import SQ2
from .material import Material
from .relaxation import (SpectralBasis, def_y_symbol, def_z_symbol,
                         frame_quadratic, hess_y_symbol, relax_normal_matrix,
                         wavenumbers)

INF = math.inf
TANG6 = (0, 1, 5)

# polarisation loads: three unit Mandel vectors and their pairwise sums
LOADS = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0],
                  [1.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
_PAIRS = ((0, 1, 3), (0, 2, 4), (1, 2, 5))


# --- regimes ---------------------------------------------------------------

@dataclass(frozen=True)
class RegimeParams:
    """Scale regime: ``gamma1 = lim h/eps`` in {0} u (0, inf) u {inf}.

    ``eps_law`` is ``"auto"`` (``h/gamma1``, ``h^(2/3)`` or ``h/log(1/h)``
    according to the regime), ``"linear"``, ``"log"`` or ``"power:a"``.
    ``gamma2 = lim h/eps^2`` is always infinite.
    """
    gamma1: float
    eps_law: str = "auto"
    gamma2: float = INF

    def __post_init__(self):
        if not (self.gamma1 >= 0):
            raise ValueError("gamma1 must be >= 0")

    @property
    def kind(self):
        if self.gamma1 == 0:
            return "zero"
        if math.isinf(self.gamma1):
            return "inf"
        return "finite"

    @property
    def label(self):
        return "inf" if self.kind == "inf" else float(self.gamma1)

    def _law(self):
        law = self.eps_law
        if law == "auto":
            law = {"zero": "power:0.6666666666666666", "inf": "log",
                   "finite": "linear"}[self.kind]
        return law

    def eps(self, h):
        h = np.asarray(h, dtype=float)
        law = self._law()
        if law == "linear":
            if self.kind != "finite":
                raise InvalidEpsLaw("linear law needs a finite positive gamma1")
            return h / self.gamma1
        if law == "log":
            return h / np.log(1.0 / h)
        if law.startswith("power:"):
            return h ** float(law.split(":", 1)[1])
        raise InvalidEpsLaw(f"unknown eps law {law!r}")

    def check_eps_law(self, hs):
        """Check that ``h/eps`` and ``h/eps^2`` trend to the declared limits
        along the decreasing sequence ``hs``."""
        hs = np.sort(np.asarray(hs, dtype=float))[::-1]
        if len(hs) < 2 or np.any(hs <= 0) or np.any(hs >= 1):
            raise InvalidEpsLaw("need at least two thicknesses in (0, 1)")
        e = self.eps(hs)
        r1, r2 = hs / e, hs / e**2
        tol = 1e-9

        def grows(r):
            return np.all(np.diff(r) > tol * np.abs(r[:-1]))
        if not grows(r2):
            raise InvalidEpsLaw("h/eps^2 does not grow along the sequence")
        if self.kind == "finite" and not np.allclose(r1, self.gamma1, rtol=1e-12):
            raise InvalidEpsLaw("h/eps differs from gamma1")
        if self.kind == "zero" and not grows(-r1):
            raise InvalidEpsLaw("h/eps does not decrease to 0")
        if self.kind == "inf" and not grows(r1):
            raise InvalidEpsLaw("h/eps does not grow")
        return True


def regime(gamma1) -> RegimeParams:
    """Regime from a number or the strings ``'0'``, ``'inf'``."""
    if isinstance(gamma1, str):
        g = gamma1.strip().lower()
        gamma1 = INF if g in ("inf", "infinity", "+inf") else float(g)
    return RegimeParams(float(gamma1))


# --- results ---------------------------------------------------------------

@dataclass
class CellForm:
    """Effective 3x3 Mandel matrix with solve metadata."""
    x: list
    regime: RegimeParams
    matrix: np.ndarray
    p_star: np.ndarray
    values: np.ndarray
    discretization: dict
    solver: dict
    loads: np.ndarray = field(default_factory=lambda: LOADS.copy())

    def value(self, q):
        """Effective form at a 2x2 coefficient matrix ``q``."""
        q = np.asarray(q, dtype=float)
        v = np.array([q[0, 0], q[1, 1], SQ2 * 0.5 * (q[0, 1] + q[1, 0])])
        return float(v @ self.matrix @ v)

    @property
    def eigenvalues(self):
        return np.linalg.eigvalsh(self.matrix)

    def to_json(self):
        return {"x": [float(v) for v in self.x],
                "regime": {"gamma1": self.regime.label},
                "basis": "mandel-dual-frame",
                "matrix": self.matrix.tolist(),
                "p_star": self.p_star.tolist(),
                "values": self.values.tolist(),
                "discretization": self.discretization,
                "solver": self.solver}


# --- density sampling and z elimination --------------------------------------

def sample_density(x, S: SurfacePatch, M: Material, B: SpectralBasis):
    """Frame-coefficient Mandel matrices on the (t, y, z) grids.

    Axes on which the material does not depend are kept with length 1.
    Shape ``(T, Y, Y, Z, Z, 6, 6)``.
    """
    fr = S.frame_at(x)
    T = B.nt + 1 if M.depends_on_t else 1
    t = (B.t_nodes if M.depends_on_t else np.zeros(1)).reshape(T, 1, 1, 1, 1)
    yg = B.y_grid if M.depends_on_y else np.zeros((1, 1, 2))
    zg = B.z_grid if M.depends_on_z else np.zeros((1, 1, 2))
    y = yg[None, :, :, None, None, :]
    z = zg[None, None, None, :, :, :]
    xa = np.asarray(x, dtype=float).reshape(1, 1, 1, 1, 1, 2)
    Q = M.quadratic_matrix(xa, y, z, t)
    return frame_quadratic(Q, fr.coframe)


def require_positive(Qc, what="density"):
    """Raise IndefiniteSystem unless every sampled matrix is positive
    definite."""
    ev = np.linalg.eigvalsh(np.asarray(Qc).reshape((-1,) + Qc.shape[-2:]))[:, 0]
    if not np.all(ev > 0):
        raise IndefiniteSystem(f"{what} not positive definite "
                               f"(min eigenvalue {float(np.min(ev)):.3e})")


def _z_modes(B: SpectralBasis):
    k = wavenumbers(B.Mz)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    return np.stack([k1[B.z_active], k2[B.z_active]], axis=1)


def z_schur_blocks(Qc, B: SpectralBasis):
    """Dense z-cell blocks ``(Qbar, C, K)`` per node.

    ``Qc`` has shape (n, Mz, Mz, 6, 6).  The z-field energy is
    ``G^T Qbar G + 2 Re(eta^H C G) + eta^H K eta``.
    """
    Mz = B.Mz
    Qhat = np.fft.fft2(Qc, axes=(1, 2)) / Mz**2
    ks = _z_modes(B)
    i1 = 2j * np.pi * ks[:, 0]
    i2 = 2j * np.pi * ks[:, 1]
    Sz = def_z_symbol(i1, i2)                        # (na, 6, 3)
    na = len(ks)
    dk = (ks[:, None, :] - ks[None, :, :]) % Mz      # (na, na, 2)
    Qd = Qhat[:, dk[..., 0], dk[..., 1]]             # (n, na, na, 6, 6)
    K = np.einsum("api,nabpq,bqj->naibj", Sz.conj(), Qd, Sz)
    K = K.reshape(len(Qc), 3 * na, 3 * na)
    Qk = Qhat[:, ks[:, 0] % Mz, ks[:, 1] % Mz]       # (n, na, 6, 6)
    C = np.einsum("api,napq->naiq", Sz.conj(), Qk).reshape(len(Qc), 3 * na, 6)
    return Qhat[:, 0, 0].real, C, K


def z_eliminate(Qc, B: SpectralBasis, chunk: int = 64, force_dense=False):
    """Z-homogenised density ``Q_z = Qbar - Re(C^H K^{-1} C)`` per node.

    Input shape ``(T, Y, Y, Z, Z, 6, 6)``, output ``(T, Y, Y, 6, 6)``.
    Without z-dependence (or without z-modes) the z-fields vanish and the
    result is the plain z-average.
    """
    T, Y1, Y2, Z1, Z2 = Qc.shape[:5]
    if (Z1 == 1 and not force_dense) or B.nz == 0:
        return Qc.mean(axis=(3, 4))
    if Z1 == 1:
        Qc = np.broadcast_to(Qc, (T, Y1, Y2, B.Mz, B.Mz, 6, 6))
    flat = np.ascontiguousarray(Qc).reshape(-1, B.Mz, B.Mz, 6, 6)
    out = np.empty((len(flat), 6, 6))
    for s in range(0, len(flat), chunk):
        Qbar, C, K = z_schur_blocks(flat[s:s + chunk], B)
        X = np.linalg.solve(K, C)
        corr = np.einsum("nki,nkj->nij", C.conj(), X).real
        Qz = Qbar - corr
        out[s:s + chunk] = 0.5 * (Qz + np.swapaxes(Qz, 1, 2))
    return out.reshape(T, Y1, Y2, 6, 6)


def z_cell_solution(Qc_node, G, B: SpectralBasis):
    """Packed z-field coefficients ``(3, n_modes_z)`` minimising the z-cell
    energy for a constant strain ``G`` (Mandel 6-vector) at one node."""
    Qbar, C, K = z_schur_blocks(np.asarray(Qc_node)[None], B)
    eta = -np.linalg.solve(K[0], C[0] @ np.asarray(G, dtype=float))
    return eta.reshape(-1, 3).T


# --- generic Galerkin engine -----------------------------------------------

class CellSystem:
    """Quadratic cell energy in Fourier coefficients.

    Parameters
    ----------
    sym : ndarray (nT, M, M, d, nloc)
        Mandel strain symbol per thickness node and mode.
    Q : ndarray (nT, M, M, d, d)
        Density on the sampling grid (broadcastable).
    w : ndarray (nT,)
        Thickness weights.
    active : ndarray (M, M, nloc) of bool
    loads : ndarray (nl, nT, d)
        Constant strains per thickness node.
    """

    def __init__(self, sym, Q, w, active, loads):
        self.sym = sym
        self.symh = sym.conj()
        nT, M = sym.shape[0], sym.shape[1]
        self.M = M
        self.Q = np.broadcast_to(Q, (nT, M, M) + Q.shape[-2:])
        self.w = np.asarray(w, dtype=float)
        self.active = active
        self.loads = loads
        Qbar = self.Q.mean(axis=(1, 2))                          # (nT, d, d)
        self.Qbar = Qbar
        # exact per-mode diagonal blocks of the operator
        blocks = np.einsum("t,tyxdn,tde,tyxem->yxnm", self.w, self.symh, Qbar, sym)
        mask2 = active[..., :, None] & active[..., None, :]
        blocks = np.where(mask2, blocks, 0.0)
        eye = np.eye(blocks.shape[-1])
        blocks = blocks + np.where(active[..., :, None], 0.0, eye)
        try:
            self.prec = np.linalg.inv(blocks)
        except np.linalg.LinAlgError:
            raise IndefiniteSystem("singular mode block in the cell operator")
        QL = np.einsum("tde,lte->ltd", Qbar, loads)
        # b = -sum_i w_i S_i^H Qhat_i L_i ; Qhat via FFT of the sampled field
        Qhat = np.fft.fft2(self.Q, axes=(1, 2)) / M**2            # (nT,M,M,d,d)
        rhs = -np.einsum("t,tyxdn,tyxde,lte->lyxn", self.w, self.symh, Qhat, loads)
        self.b = np.where(active, rhs, 0.0)
        self.E0 = np.einsum("t,lte,ltd->l", self.w, loads, QL)
        self.ndof = int(active.sum())

    def fields(self, X):
        Y = np.einsum("tyxdn,lyxn->ltyxd", self.sym, X)
        return np.fft.ifft2(Y, axes=(2, 3)) * self.M**2

    def apply(self, X):
        f = self.fields(X) / self.M**2
        g = np.einsum("tyxde,ltyxe->ltyxd", self.Q, f)
        G = np.fft.fft2(g, axes=(2, 3))
        out = np.einsum("t,tyxdn,ltyxd->lyxn", self.w, self.symh, G)
        return np.where(self.active, out, 0.0)

    def precondition(self, R):
        return np.einsum("yxnm,lyxm->lyxn", self.prec, R)

    def energy(self, X):
        f = self.fields(X).real + self.loads[:, :, None, None, :]
        e = np.einsum("ltyxd,tyxde,ltyxe->lt", f, self.Q, f) / self.M**2
        return e @ self.w

    def solve(self, tol=1e-10, maxit=None):
        """Block-preconditioned CG on all loads at once."""
        b = self.b
        nl = b.shape[0]
        X = np.zeros_like(b)
        bn = np.sqrt(np.sum(np.abs(b) ** 2, axis=(1, 2, 3)))
        if self.ndof == 0 or np.all(bn == 0):
            return X, 0, 0.0
        maxit = maxit or 10 * self.ndof
        scale = np.where(bn > 0, bn, 1.0)
        R = b.copy()
        Z = self.precondition(R)
        P = Z.copy()
        rz = np.sum((R.conj() * Z).real, axis=(1, 2, 3))
        it = 0
        rel = np.sqrt(np.sum(np.abs(R) ** 2, axis=(1, 2, 3))) / scale
        while np.max(rel) > tol:
            if it >= maxit:
                raise CGNoConvergence(it, float(np.max(rel)))
            AP = self.apply(P)
            pap = np.sum((P.conj() * AP).real, axis=(1, 2, 3))
            live = rel > tol
            pn = np.sum(np.abs(P) ** 2, axis=(1, 2, 3))
            if np.any(live & (pap <= 0) & (pn > 0)):
                raise IndefiniteSystem("non-positive curvature in CG")
            alpha = np.where(live & (pap > 0), rz / np.where(pap > 0, pap, 1), 0.0)
            X = X + alpha[:, None, None, None] * P
            R = R - alpha[:, None, None, None] * AP
            Z = self.precondition(R)
            rz_new = np.sum((R.conj() * Z).real, axis=(1, 2, 3))
            beta = np.where(rz > 0, rz_new / np.where(rz > 0, rz, 1), 0.0)
            P = Z + beta[:, None, None, None] * P
            rz = rz_new
            it += 1
            rel = np.sqrt(np.sum(np.abs(R) ** 2, axis=(1, 2, 3))) / scale
        self.last_residual = R
        return X, it, float(np.max(rel))


# --- regime assembly ---------------------------------------------------------

def _k0_mask(M):
    m = np.zeros((M, M), dtype=bool)
    m[0, 0] = True
    return m


def _assemble(kind, gamma1, Qd, B: SpectralBasis, q_loads):
    """Symbols, active masks and loads for one regime.

    Returns (sym, active, loads, p_index).
    """
    M = B.My
    i1, i2 = B.symbols(M)
    t = B.t_nodes
    nT = len(t)
    ya = B.y_active
    k0 = _k0_mask(M)
    if kind == "zero":
        dy = def_y_symbol(i1, i2, layout=3)                   # (M,M,3,2)
        hs = hess_y_symbol(i1, i2, layout=3)                  # (M,M,3)
        sym = np.zeros((nT, M, M, 3, 6), dtype=complex)
        sym[..., 0:2] = dy[None]
        sym[..., 2] = -t[:, None, None, None] * hs[None]
        sym[..., 3:6] = np.eye(3)
        active = np.zeros((M, M, 6), dtype=bool)
        active[..., 0:3] = ya[..., None]
        active[..., 3:6] = k0[..., None]
        loads = t[None, :, None] * q_loads[:, None, :]
        return sym, active, loads, slice(3, 6)

    dy = def_y_symbol(i1, i2, layout=6)                       # (M,M,6,2)
    if kind == "finite":
        P, dP = B.legendre()                                  # (nP, nT)
        nP = P.shape[0]
        nloc = 3 * nP + 3
        sym = np.zeros((nT, M, M, 6, nloc), dtype=complex)
        for j in range(nP):
            Pj = P[j][:, None, None, None]
            dPj = dP[j][:, None, None]
            c1, c2, cr = j, nP + j, 2 * nP + j
            sym[..., c1] = Pj * dy[None, ..., 0]
            sym[..., c2] = Pj * dy[None, ..., 1]
            sym[..., 4, c1] += SQ2 / (2 * gamma1) * dPj
            sym[..., 3, c2] += SQ2 / (2 * gamma1) * dPj
            sym[..., 4, cr] = SQ2 / 2 * i1[None] * P[j][:, None, None]
            sym[..., 3, cr] = SQ2 / 2 * i2[None] * P[j][:, None, None]
            sym[..., 2, cr] = dPj / gamma1
        for a, s in enumerate(TANG6):
            sym[..., s, 3 * nP + a] = 1.0
        active = np.zeros((M, M, nloc), dtype=bool)
        for j in range(nP):
            m = ya.copy()
            if j > 0:
                m |= k0
            for c in (j, nP + j, 2 * nP + j):
                active[..., c] = m
        active[..., 3 * nP:] = k0[..., None]
        loads = np.zeros((len(q_loads), nT, 6))
        loads[..., TANG6] = t[None, :, None] * q_loads[:, None, :]
        return sym, active, loads, slice(3 * nP, 3 * nP + 3)

    # gamma1 = inf: independent fields per thickness node
    nloc = 6 * nT + 3
    sym = np.zeros((nT, M, M, 6, nloc), dtype=complex)
    active = np.zeros((M, M, nloc), dtype=bool)
    for i in range(nT):
        b = 6 * i
        sym[i, ..., b] = dy[..., 0]
        sym[i, ..., b + 1] = dy[..., 1]
        sym[i, ..., 4, b + 2] = SQ2 * i1
        sym[i, ..., 3, b + 2] = SQ2 * i2
        sym[i, ..., 4, b + 3] = SQ2
        sym[i, ..., 3, b + 4] = SQ2
        sym[i, ..., 2, b + 5] = 1.0
        active[..., b:b + 3] = ya[..., None]
        active[..., b + 3:b + 6] = k0[..., None]
    for a, s in enumerate(TANG6):
        sym[..., s, 6 * nT + a] = 1.0
    active[..., 6 * nT:] = k0[..., None]
    loads = np.zeros((len(q_loads), nT, 6))
    loads[..., TANG6] = t[None, :, None] * q_loads[:, None, :]
    return sym, active, loads, slice(6 * nT, 6 * nT + 3)


def _polarise(values):
    Mx = np.zeros((3, 3))
    for k in range(3):
        Mx[k, k] = values[k]
    for k, l, s in _PAIRS:
        Mx[k, l] = Mx[l, k] = 0.5 * (values[s] - values[k] - values[l])
    return Mx


def solve_with_density(Qd, kind, gamma1, B: SpectralBasis, q_loads=LOADS,
                       tol=1e-10):
    """Solve the regime system for a z-homogenised density ``Qd``.

    ``Qd`` has shape (T, Y, Y, d, d) with T in {1, nt+1}, Y in {1, My};
    ``d`` is 3 for ``kind == 'zero'`` (already normal-relaxed) and 6 else.
    Returns (values, p_star, iterations, residual, gap).
    """
    sym, active, loads, pidx = _assemble(kind, gamma1, Qd, B, q_loads)
    nT = sym.shape[0]
    Qfull = np.broadcast_to(Qd, (nT, B.My, B.My) + Qd.shape[-2:])
    system = CellSystem(sym, Qfull, B.t_weights, active, loads)
    X, iters, res = system.solve(tol=tol)
    values = system.energy(X)
    p_star = X[:, 0, 0, pidx].real
    if kind != "zero":
        p_star = p_star.copy()
    gap = 0.0
    if iters:
        rn = np.sqrt(np.sum(np.abs(system.last_residual) ** 2))
        gap = float(rn * np.sqrt(np.sum(np.abs(X) ** 2)))
    return values, p_star, iters, res, gap


def _discretization(B):
    return {"ny": B.ny, "nz": B.nz, "nt": B.nt,
            "grid_y": B.My, "grid_z": B.Mz,
            "t_nodes": [float(v) for v in B.t_nodes]}


def solve_cell_form(x, S: SurfacePatch, M: Material, R: RegimeParams,
                    B: SpectralBasis, tol: float = 1e-10,
                    q_loads=LOADS) -> CellForm:
    """Effective bending form at the parameter point ``x``."""
    Qc = sample_density(x, S, M, B)
    require_positive(Qc)
    Qz = z_eliminate(Qc, B)
    kind = R.kind
    Qd = relax_normal_matrix(Qz) if kind == "zero" else Qz
    values, p_star, iters, res, gap = solve_with_density(
        Qd, kind, R.gamma1, B, q_loads, tol)
    return CellForm(x=list(np.asarray(x, dtype=float)), regime=R,
                    matrix=_polarise(values), p_star=p_star, values=values,
                    discretization=_discretization(B),
                    solver={"iters": int(iters), "residual": float(res),
                            "gap": gap}, loads=np.asarray(q_loads))


def thickness_homogeneous_form(x, S: SurfacePatch, M: Material,
                               B: SpectralBasis, tol: float = 1e-10) -> CellForm:
    """Zero-regime form for thickness-independent materials.

    Solves ``(1/12) min_phi mean Q~(q + Hess phi)`` with the z-homogenised,
    normal-relaxed density.
    """
    if M.depends_on_t:
        raise MaterialNotThicknessHomogeneous(
            "coefficients depend on t; use solve_cell_form")
    Qc = sample_density(x, S, M, B)
    require_positive(Qc)
    Qt = relax_normal_matrix(z_eliminate(Qc, B))             # (1, Y, Y, 3, 3)
    My = B.My
    i1, i2 = B.symbols(My)
    sym = hess_y_symbol(i1, i2, layout=3)[None, ..., None]   # (1,M,M,3,1)
    active = B.y_active[..., None]
    loads = LOADS[:, None, :]
    system = CellSystem(sym, np.broadcast_to(Qt, (1, My, My, 3, 3)),
                        np.ones(1), active, loads)
    X, iters, res = system.solve(tol=tol)
    values = system.energy(X) / 12.0
    return CellForm(x=list(np.asarray(x, dtype=float)), regime=RegimeParams(0.0),
                    matrix=_polarise(values), p_star=np.zeros((6, 3)),
                    values=values, discretization=_discretization(B),
                    solver={"iters": int(iters), "residual": float(res),
                            "gap": 0.0})


# --- sweeps and parallel maps ------------------------------------------------

def thread_count():
    """Parallel width from ``SHELLHOM_THREADS`` (0 or unset means serial)."""
    try:
        return max(0, int(os.environ.get("SHELLHOM_THREADS", "0")))
    except ValueError:
        return 0


def parallel_map(fn, items):
    """Order-preserving map honouring ``SHELLHOM_THREADS``."""
    items = list(items)
    n = thread_count()
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


@dataclass
class SweepResult:
    gammas: list
    forms: list

    def rows(self):
        out = []
        for g, cf in zip(self.gammas, self.forms):
            m = cf.matrix
            out.append([g, m[0, 0], m[1, 1], m[2, 2], m[0, 1], m[0, 2], m[1, 2]])
        return out

    def trajectories(self):
        """Per-entry trajectories keyed by ``M11`` .. ``M23``."""
        names = ("M11", "M22", "M33", "M12", "M13", "M23")
        rows = self.rows()
        return {n: [r[i + 1] for r in rows] for i, n in enumerate(names)}

    def endpoint(self, which):
        for g, cf in zip(self.gammas, self.forms):
            if g == which:
                return cf
        raise KeyError(which)


def gamma_sweep(x, S: SurfacePatch, M: Material, grid, B: SpectralBasis,
                tol: float = 1e-10) -> SweepResult:
    """Effective forms along a gamma1 grid plus both endpoint regimes.

    Rows are ordered ``0``, the grid values, ``inf``.
    """
    grid = [float(g) for g in grid]
    if any(g <= 0 or not math.isfinite(g) for g in grid):
        raise ValueError("gamma1 grid must be positive and finite")
    if grid != sorted(grid):
        raise ValueError("gamma1 grid must be sorted")
    gammas = [0.0] + grid + [INF]

    def one(g):
        try:
            return solve_cell_form(x, S, M, RegimeParams(g), B, tol)
        except Exception as exc:  # tag the failing grid point
            exc.args = (f"gamma1={g}: {exc}",) + exc.args[1:]
            raise
    forms = parallel_map(one, gammas)
    labels = [g if math.isfinite(g) else "inf" for g in gammas]
    return SweepResult(labels, forms)
