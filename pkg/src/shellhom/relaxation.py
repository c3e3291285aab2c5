"""Normal relaxation and spectral cell operators.

Fields on the periodic cell are stored by complex Fourier coefficients
``f(y) = sum_k c_k exp(2 pi i k.y)``.  Only in-band modes ``|k|_inf <= N``
with ``k != 0`` are kept (zero-mean spaces); a :class:`SpectralBasis`
packs them into flat vectors and samples them on a uniform grid with
``2 (2N + 1)`` points per axis.

Symmetric-tensor results are given by coefficients in the dual frame,
``G = G_ab tau^a (x) tau^b`` (with ``tau^3 = n`` for 3x3 fields), in Mandel
order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import SingularNormalBlock
from .geometry import Frame
from .mandel import ELIMINATED, SQ2, TANGENTIAL, congruence
from .quadrature import gauss_legendre, legendre_on_interval


# --- normal relaxation -----------------------------------------------------

@dataclass
class RelaxedDensity:
    """Tangential form ``q -> min over normal/shear parts``.

    ``matrix`` acts on ``(q11, q22, sqrt2 q12)`` of coefficients in the dual
    frame.
    """
    tags: dict
    matrix: np.ndarray
    provenance: str = "normal-relaxed"

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        v = np.array([q[0, 0], q[1, 1], SQ2 * 0.5 * (q[0, 1] + q[1, 0])])
        return float(v @ self.matrix @ v)


def frame_quadratic(Q, coframe):
    """Express ambient Mandel matrices in frame coefficients.

    With ``L = congruence(coframe)``, ``Q_c = L^T Q L`` evaluates the form on
    coefficient matrices ``G_c`` of ``G = coframe^T G_c coframe``.
    """
    L = congruence(coframe)
    return np.swapaxes(L, -1, -2) @ Q @ L


def relax_normal_matrix(Qc):
    """Schur complement over the shear/normal slots of frame matrices.

    Parameters
    ----------
    Qc : ndarray, shape (..., 6, 6)
        Mandel matrices in an adapted frame (third axis normal).

    Returns
    -------
    ndarray, shape (..., 3, 3)
    """
    Qc = np.asarray(Qc, dtype=float)
    shape = Qc.shape[:-2]
    out, ok = kernels.schur(Qc.reshape(-1, 6, 6), TANGENTIAL, ELIMINATED)
    if not np.all(ok):
        raise SingularNormalBlock("normal block not positive definite")
    return out.reshape(shape + (3, 3))


def relax_normal(Q, F: Frame, provenance="normal-relaxed") -> RelaxedDensity:
    """Pointwise normal relaxation of a quadratic density at a frame.

    Parameters
    ----------
    Q : QuadraticDensity or ndarray (6, 6)
        Ambient Mandel matrix.
    F : Frame
    """
    mat = getattr(Q, "analytic", None)
    if mat is None:
        mat = getattr(Q, "matrix", Q)
    tags = dict(getattr(Q, "tags", {}))
    Qc = frame_quadratic(np.asarray(mat, dtype=float), F.coframe)
    return RelaxedDensity(tags, relax_normal_matrix(Qc), provenance)


# --- spectral basis --------------------------------------------------------

def wavenumbers(M):
    """Integer wavenumbers of an M-point FFT axis."""
    return np.fft.fftfreq(M, 1.0 / M).round().astype(int)


class SpectralBasis:
    """Truncated Fourier (y, z) and Legendre (t) bases with their grids.

    Parameters
    ----------
    ny, nz : int
        Mode bounds ``|k|_inf <= N`` (0 leaves only the constant).
    nt : int
        Legendre degree; the thickness rule has ``nt + 1`` Gauss nodes.
    grid_y, grid_z : int, optional
        Sampling points per axis, default ``2 (2N + 1)``.
    """

    def __init__(self, ny: int = 2, nz: int = 2, nt: int = 2,
                 grid_y: int | None = None, grid_z: int | None = None):
        if min(ny, nz) < 0 or nt < 1:
            raise ValueError("need ny, nz >= 0 and nt >= 1")
        self.ny, self.nz, self.nt = int(ny), int(nz), int(nt)
        self.My = int(grid_y or 2 * (2 * ny + 1))
        self.Mz = int(grid_z or 2 * (2 * nz + 1))
        if self.My < 2 * ny + 1 or self.Mz < 2 * nz + 1:
            raise ValueError("sampling grid too coarse for the mode band")
        self.t_nodes, self.t_weights = gauss_legendre(self.nt + 1)
        self.y_active = self._mask(self.My, self.ny)
        self.z_active = self._mask(self.Mz, self.nz)

    @staticmethod
    def _mask(M, N):
        k = wavenumbers(M)
        k1, k2 = np.meshgrid(k, k, indexing="ij")
        m = (np.abs(k1) <= N) & (np.abs(k2) <= N)
        m[0, 0] = False
        return m

    @staticmethod
    def grid(M):
        """Grid points ``(M, M, 2)`` of the unit cell."""
        s = np.arange(M) / M
        a, b = np.meshgrid(s, s, indexing="ij")
        return np.stack([a, b], axis=-1)

    @property
    def y_grid(self):
        return self.grid(self.My)

    @property
    def z_grid(self):
        return self.grid(self.Mz)

    @staticmethod
    def symbols(M):
        """``2 pi i k_1`` and ``2 pi i k_2`` on the (M, M) mode grid."""
        k = wavenumbers(M)
        k1, k2 = np.meshgrid(k, k, indexing="ij")
        return 2j * np.pi * k1, 2j * np.pi * k2

    def legendre(self, t=None):
        """Values and derivatives of ``P_j(2t)`` at the t-nodes (or ``t``)."""
        return legendre_on_interval(self.nt, self.t_nodes if t is None else t)

    # packing -----------------------------------------------------------
    def pack(self, coeffs, which="y"):
        mask = self.y_active if which == "y" else self.z_active
        return np.asarray(coeffs)[..., mask]

    def unpack(self, packed, which="y"):
        mask = self.y_active if which == "y" else self.z_active
        packed = np.asarray(packed)
        out = np.zeros(packed.shape[:-1] + mask.shape, dtype=complex)
        out[..., mask] = packed
        return out

    def coefficients_from_samples(self, f, which="y"):
        """Packed in-band coefficients of grid samples ``(..., M, M)``."""
        M = self.My if which == "y" else self.Mz
        c = np.fft.fft2(np.asarray(f, dtype=float), axes=(-2, -1)) / M**2
        return self.pack(c, which)

    def n_modes(self, which="y"):
        return int((self.y_active if which == "y" else self.z_active).sum())


def _to_grid(c_full, M):
    return (np.fft.ifft2(c_full, axes=(-2, -1)) * M**2).real


def _ambient(coef, F: Frame):
    """``sum G_ab e^a (x) e^b`` with ``e^a`` rows of the coframe."""
    d = F.coframe[:coef.shape[-1], :]
    return np.einsum("...ab,ai,bj->...ij", coef, d, d)


def apply_def_y(zeta, F: Frame | None, B: SpectralBasis, ambient=False):
    """Sampled ``sym grad_y zeta`` from packed coefficients ``(2, n_modes)``.

    Returns (My, My, 2, 2) dual-frame coefficients, or ambient (My, My, 3, 3)
    matrices when ``ambient`` is set.
    """
    z = B.unpack(zeta, "y")
    i1, i2 = B.symbols(B.My)
    d = np.empty((2, 2) + i1.shape, dtype=complex)
    d[0, 0] = i1 * z[0]
    d[1, 1] = i2 * z[1]
    d[0, 1] = d[1, 0] = 0.5 * (i2 * z[0] + i1 * z[1])
    g = np.moveaxis(_to_grid(d, B.My), (0, 1), (-2, -1))
    return _ambient(g, F) if ambient else g


def apply_hess_y(phi, F: Frame | None, B: SpectralBasis, ambient=False):
    """Sampled Hessian of ``phi`` from packed coefficients ``(n_modes,)``."""
    p = B.unpack(phi, "y")
    i1, i2 = B.symbols(B.My)
    d = np.empty((2, 2) + i1.shape, dtype=complex)
    d[0, 0] = i1 * i1 * p
    d[1, 1] = i2 * i2 * p
    d[0, 1] = d[1, 0] = i1 * i2 * p
    g = np.moveaxis(_to_grid(d, B.My), (0, 1), (-2, -1))
    return _ambient(g, F) if ambient else g


def apply_def_z(eta, F: Frame | None, B: SpectralBasis, ambient=False):
    """Sampled ``sym(grad_z eta | 0)`` from packed ``(3, n_modes_z)``.

    The third component enters only the mixed (a, 3) entries.
    """
    e = B.unpack(eta, "z")
    i1, i2 = B.symbols(B.Mz)
    d = np.zeros((3, 3) + i1.shape, dtype=complex)
    d[0, 0] = i1 * e[0]
    d[1, 1] = i2 * e[1]
    d[0, 1] = d[1, 0] = 0.5 * (i2 * e[0] + i1 * e[1])
    d[0, 2] = d[2, 0] = 0.5 * i1 * e[2]
    d[1, 2] = d[2, 1] = 0.5 * i2 * e[2]
    g = np.moveaxis(_to_grid(d, B.Mz), (0, 1), (-2, -1))
    return _ambient(g, F) if ambient else g


def spectral_norm2(coef_blocks):
    """Squared L2 cell norm from full Fourier coefficient blocks."""
    return float(np.sum(np.abs(coef_blocks) ** 2))


# --- Mandel symbols used by the cell problems ------------------------------

def def_y_symbol(i1, i2, layout=6):
    """Mandel symbol of ``zeta -> sym grad zeta`` (shape (..., layout, 2))."""
    s = np.zeros(i1.shape + (layout, 2), dtype=complex)
    sl = (0, 1, 5) if layout == 6 else (0, 1, 2)
    s[..., sl[0], 0] = i1
    s[..., sl[1], 1] = i2
    s[..., sl[2], 0] = SQ2 / 2 * i2
    s[..., sl[2], 1] = SQ2 / 2 * i1
    return s


def hess_y_symbol(i1, i2, layout=3):
    """Mandel symbol of ``phi -> Hess phi`` (shape (..., layout))."""
    s = np.zeros(i1.shape + (layout,), dtype=complex)
    sl = (0, 1, 5) if layout == 6 else (0, 1, 2)
    s[..., sl[0]] = i1 * i1
    s[..., sl[1]] = i2 * i2
    s[..., sl[2]] = SQ2 * i1 * i2
    return s


def def_z_symbol(i1, i2):
    """Mandel symbol of ``eta -> sym(grad_z eta | 0)`` (shape (..., 6, 3))."""
    s = np.zeros(i1.shape + (6, 3), dtype=complex)
    s[..., 0, 0] = i1
    s[..., 1, 1] = i2
    s[..., 5, 0] = SQ2 / 2 * i2
    s[..., 5, 1] = SQ2 / 2 * i1
    s[..., 4, 2] = SQ2 / 2 * i1
    s[..., 3, 2] = SQ2 / 2 * i2
    return s
