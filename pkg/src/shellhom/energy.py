"""Limit bending functional by surface quadrature."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cellform import CellForm, RegimeParams, parallel_map, solve_cell_form
from .errors import MissingCellForm, SizeMismatch
from .geometry import Immersion, SurfacePatch, isometry_violation, \
    relative_weingarten_batch
from .mandel import SQ2
from .material import Material
from .relaxation import SpectralBasis


def sym2_to_mandel(q):
    """(…, 2, 2) coefficient matrices to Mandel 3-vectors."""
    q = np.asarray(q, dtype=float)
    return np.stack([q[..., 0, 0], q[..., 1, 1],
                     SQ2 * 0.5 * (q[..., 0, 1] + q[..., 1, 0])], axis=-1)


@dataclass
class BendingState:
    """Immersion of a surface together with the effective forms at nodes.

    Parameters
    ----------
    surface : SurfacePatch
    immersion : Immersion
    cellforms : CellForm or sequence of CellForm
        One shared form (x-independent material) or one per node.
    w : sequence of str, optional
        Displacement expressions (kept for the recovery harness).
    iso_tol : float, optional
        Isometry tolerance; 1e-6 for analytic, 1e-4 for FD immersions.
    """
    surface: SurfacePatch
    immersion: Immersion
    cellforms: object = None
    w: Sequence[str] | None = None
    iso_tol: float | None = None
    q_nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.iso_tol is None:
            self.iso_tol = 1e-6 if self.immersion.exact else 1e-4
        q = relative_weingarten_batch(self.surface, self.immersion,
                                      self.surface.nodes)
        self.q_nodes = sym2_to_mandel(q)

    def matrices(self):
        n = len(self.surface.nodes)
        cf = self.cellforms
        if cf is None:
            raise MissingCellForm("no effective forms supplied")
        if isinstance(cf, CellForm):
            return np.broadcast_to(cf.matrix, (n, 3, 3))
        cf = list(cf)
        if len(cf) != n or any(c is None for c in cf):
            raise MissingCellForm(f"need {n} effective forms, got {len(cf)}")
        return np.stack([c.matrix for c in cf])


@dataclass
class EnergyResult:
    value: float
    finite: bool
    iso_violation: float
    nodes: int

    def to_json(self):
        return {"value": self.value if self.finite else "inf",
                "finite": self.finite, "iso_violation": self.iso_violation,
                "nodes": self.nodes}


def synthetic_energy(vectors, matrices, S: SurfacePatch) -> float:
    """``sum_nodes dvol v^T M v`` for node fields of Mandel data."""
    v = np.asarray(vectors, dtype=float)
    n = len(S.nodes)
    M = np.asarray(matrices, dtype=float)
    if M.ndim == 2:
        M = np.broadcast_to(M, (n, 3, 3))
    if v.shape != (n, 3) or M.shape != (n, 3, 3):
        raise SizeMismatch(f"expected ({n}, 3) and ({n}, 3, 3), got "
                           f"{v.shape} and {M.shape}")
    return float(np.sum(S.dvol * np.einsum("ni,nij,nj->n", v, M, v)))


def bending_energy(BS: BendingState) -> EnergyResult:
    """Limit functional, or the infinite branch for non-isometries."""
    n = len(BS.surface.nodes)
    viol = isometry_violation(BS.surface, BS.immersion)
    if viol > BS.iso_tol:
        return EnergyResult(math.inf, False, viol, n)
    val = synthetic_energy(BS.q_nodes, BS.matrices(), BS.surface)
    return EnergyResult(val, True, viol, n)


def cellforms_at_nodes(S: SurfacePatch, M: Material, R: RegimeParams,
                       B: SpectralBasis, tol=1e-10):
    """Effective forms for the surface quadrature nodes.

    Dual-frame coefficients depend on the metric, so a single shared solve
    is used only when the material ignores ``x`` and the metric is the same
    at every node; otherwise each node gets its own solve.
    """
    g = S.node_frames.metric
    if not M.depends_on_x and np.allclose(g, g[0], rtol=0, atol=1e-14):
        x0 = S.nodes[0]
        return solve_cell_form(x0, S, M, R, B, tol)
    return parallel_map(lambda x: solve_cell_form(x, S, M, R, B, tol),
                        list(S.nodes))
