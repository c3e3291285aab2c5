import numpy as np
import pytest

from oracles import (FROZEN, homogeneous_plate_value, laminate_fd, load_to_q,
                     monolithic_cell_values, svk_frame_Q)
from shellhom.cellform import (INF, LOADS, RegimeParams, gamma_sweep, regime,
                               solve_cell_form, thickness_homogeneous_form,
                               z_cell_solution, z_eliminate, sample_density)
from shellhom.errors import (IndefiniteSystem, InvalidEpsLaw,
                             MaterialNotThicknessHomogeneous)
from shellhom.geometry import build_surface
from shellhom.material import Material
from shellhom.relaxation import SpectralBasis

FLAT = build_surface("flat:Lx=1,Ly=1", 2)
SPHERE = build_surface("sphere:R=2,cap=30", 2)
X0 = [0.5, 0.5]
LAMINATE = Material("svk", {"mu": "1+step(frac(y1)-0.5)", "lambda": "0"})
REGIMES = [0.0, 1.0, INF]


def svk(mu=1.0, lam=1.0):
    return Material("svk", {"mu": str(mu), "lambda": str(lam)})


# --- regimes ---------------------------------------------------------------

def test_regime_kinds_and_laws():
    assert regime(0).kind == "zero"
    assert regime("inf").kind == "inf"
    assert regime(2.0).kind == "finite"
    hs = np.array([0.1, 0.05, 0.025])
    assert np.allclose(regime(2.0).eps(hs), hs / 2)
    assert np.allclose(regime(0).eps(hs), hs ** (2 / 3))
    assert np.allclose(regime("inf").eps(hs), hs / np.log(1 / hs))
    for g in (0.0, 2.0, INF):
        assert regime(g).check_eps_law(hs)


def test_invalid_eps_laws():
    hs = [0.1, 0.05]
    with pytest.raises(InvalidEpsLaw):
        RegimeParams(0.0, "linear").eps(0.1)
    # eps = h^(1/2) keeps h/eps^2 constant: no separation of the fine scale
    with pytest.raises(InvalidEpsLaw):
        RegimeParams(0.0, "power:0.5").check_eps_law(hs)
    with pytest.raises(InvalidEpsLaw):
        RegimeParams(INF, "power:0.9").check_eps_law(hs)
    with pytest.raises(InvalidEpsLaw):
        RegimeParams(1.0, "bogus").eps(0.1)
    with pytest.raises(ValueError):
        RegimeParams(-1.0)


# --- homogeneous material --------------------------------------------------

@pytest.mark.parametrize("g", REGIMES)
@pytest.mark.parametrize("surface", [FLAT, SPHERE], ids=["flat", "sphere"])
def test_homogeneous_identity(g, surface):
    mu, lam = 1.3, 0.7
    B = SpectralBasis(2, 2, 2)
    cf = solve_cell_form(X0 if surface is FLAT else [0.1, 0.2], surface,
                         svk(mu, lam), RegimeParams(g), B)
    # in dual-frame coefficients |q|^2 needs the metric; on the flat chart
    # and at an orthonormal comparison the closed form applies directly
    if surface is FLAT:
        for v, val in zip(LOADS, cf.values):
            ref = homogeneous_plate_value(mu, lam, load_to_q(v))
            assert val == pytest.approx(ref, rel=1e-8)
    assert np.allclose(cf.p_star, 0, atol=1e-10)


def test_homogeneous_sphere_matches_metric_form():
    mu, lam = 1.0, 1.0
    x = [0.3, -0.2]
    fr = SPHERE.frame_at(x)
    cf = solve_cell_form(x, SPHERE, svk(mu, lam), RegimeParams(1.0),
                         SpectralBasis(1, 1, 2))
    ginv = np.linalg.inv(fr.metric)
    rng = np.random.default_rng(0)
    for _ in range(5):
        q = rng.normal(size=(2, 2))
        q = q + q.T
        # |q|^2 and tr q of the ambient tensor q_ab tau^a tau^b
        A = ginv @ q
        ref = (mu * np.trace(A @ A) + lam * mu / (2 * mu + lam) * np.trace(A) ** 2) / 12
        assert cf.value(q) == pytest.approx(ref, rel=1e-8)


def test_thickness_homogeneous_shortcut():
    mu, lam = 1.0, 1.0
    cf = thickness_homogeneous_form(X0, FLAT, svk(mu, lam), SpectralBasis(2, 2, 2))
    assert cf.value(np.diag([1.0, 0.0])) == pytest.approx(FROZEN["plate_diag10"],
                                                          rel=1e-12)
    ref = solve_cell_form(X0, FLAT, LAMINATE, RegimeParams(0.0), SpectralBasis(4, 1, 2))
    short = thickness_homogeneous_form(X0, FLAT, LAMINATE, SpectralBasis(4, 1, 2))
    assert np.allclose(short.matrix, ref.matrix, rtol=1e-8)
    with pytest.raises(MaterialNotThicknessHomogeneous):
        thickness_homogeneous_form(X0, FLAT, Material("svk", {"mu": "1+t"}),
                                   SpectralBasis(1, 1, 2))


# --- oracle agreement ------------------------------------------------------

MIXED = Material("svk", {
    "mu": "1+0.3*cos(2*pi*y1)*sin(2*pi*z2)+0.2*t",
    "lambda": "1+0.5*cos(2*pi*z1)+0.2*sin(2*pi*y2)"})


def _mixed_Q():
    mu = lambda t, y, z: (1 + 0.3 * np.cos(2 * np.pi * y[:, 0])  # noqa: E731
                          * np.sin(2 * np.pi * z[:, 1]) + 0.2 * t)
    lam = lambda t, y, z: (1 + 0.5 * np.cos(2 * np.pi * z[:, 0])  # noqa: E731
                           + 0.2 * np.sin(2 * np.pi * y[:, 1]))
    return svk_frame_Q(mu, lam)


@pytest.mark.parametrize("g,kind", [(0.0, "zero"), (1.0, "finite"),
                                    (2.5, "finite"), (INF, "inf")])
def test_monolithic_oracle(g, kind):
    B = SpectralBasis(2, 2, 2, grid_y=6, grid_z=6)
    cf = solve_cell_form(X0, FLAT, MIXED, RegimeParams(g), B, tol=1e-13)
    ref = monolithic_cell_values(_mixed_Q(), kind, g, 2, 2, 2, 6, 6, LOADS)
    assert np.max(np.abs(cf.values - ref) / ref) <= 1e-8


def test_laminate_zero_regime_against_fd():
    fd = [laminate_fd(lambda y: 1 + (y >= 0.5), load_to_q(v)) for v in LOADS[:3]]
    assert fd[0] == pytest.approx(FROZEN["laminate_e11"], rel=1e-10)
    assert fd[1] == pytest.approx(FROZEN["laminate_e22"], rel=1e-10)
    errs = []
    for N in (4, 8, 16):
        cf = thickness_homogeneous_form(X0, FLAT, LAMINATE, SpectralBasis(N, 1, 1))
        errs.append(abs(cf.values[0] - fd[0]) / fd[0])
        assert cf.values[1] == pytest.approx(fd[1], rel=1e-12)
    # jump coefficients: first-order convergence in N
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 5e-3


def test_z_elimination_matches_single_node_solution():
    B = SpectralBasis(1, 2, 1)
    M = Material("svk", {"mu": "1+0.5*sin(2*pi*z1)", "lambda": "1+0.3*cos(2*pi*z2)"})
    Qc = sample_density(X0, FLAT, M, B)
    Qz = z_eliminate(Qc, B)[0, 0, 0]
    rng = np.random.default_rng(3)
    G = rng.normal(size=6)
    eta = z_cell_solution(Qc[0, 0, 0], G, B)
    assert eta.shape == (3, B.n_modes("z"))
    # the z-homogenised value is below the plain average
    assert G @ Qz @ G <= G @ Qc[0, 0, 0].mean(axis=(0, 1)) @ G + 1e-12


# --- structural properties -------------------------------------------------

def test_quadratic_homogeneity_and_polarisation():
    B = SpectralBasis(3, 1, 2)
    R = RegimeParams(1.0)
    cf = solve_cell_form(X0, FLAT, LAMINATE, R, B)
    scaled = solve_cell_form(X0, FLAT, LAMINATE, R, B, q_loads=2.0 * LOADS)
    assert np.allclose(scaled.values, 4 * cf.values, rtol=1e-9)
    rng = np.random.default_rng(1)
    loads = rng.normal(size=(6, 3))
    direct = solve_cell_form(X0, FLAT, LAMINATE, R, B, q_loads=loads)
    for v, val in zip(loads, direct.values):
        assert v @ cf.matrix @ v == pytest.approx(val, rel=1e-8)


def test_depends_on_symmetric_part_only():
    cf = solve_cell_form(X0, FLAT, LAMINATE, RegimeParams(1.0), SpectralBasis(2, 1, 2))
    q = np.array([[0.3, 1.0], [-0.4, 0.2]])
    assert cf.value(q) == pytest.approx(cf.value(0.5 * (q + q.T)), rel=1e-14)


@pytest.mark.parametrize("g", REGIMES)
def test_nested_bases_do_not_increase_values(g):
    prev = None
    for N in (2, 4, 8):
        cf = solve_cell_form(X0, FLAT, LAMINATE, RegimeParams(g), SpectralBasis(N, 1, 2))
        if prev is not None:
            assert np.all(cf.values <= prev + 1e-12)
        prev = cf.values


@pytest.mark.parametrize("g", REGIMES)
def test_forms_are_symmetric_positive(g):
    cf = solve_cell_form(X0, FLAT, LAMINATE, RegimeParams(g), SpectralBasis(2, 1, 2))
    assert np.allclose(cf.matrix, cf.matrix.T)
    assert cf.eigenvalues[0] > 0
    js = cf.to_json()
    assert js["basis"] == "mandel-dual-frame" and len(js["matrix"]) == 3


def test_indefinite_material_is_reported():
    with pytest.raises(IndefiniteSystem):
        solve_cell_form(X0, FLAT, svk(1.0, -1.0), RegimeParams(1.0),
                        SpectralBasis(1, 1, 1))


def test_gamma_sweep():
    B = SpectralBasis(2, 1, 2)
    sw = gamma_sweep(X0, FLAT, LAMINATE, [0.1, 1.0, 10.0], B)
    assert sw.gammas == [0.0, 0.1, 1.0, 10.0, "inf"]
    rows = sw.rows()
    assert len(rows) == 5 and len(rows[0]) == 7
    assert np.allclose(sw.endpoint(0.0).matrix,
                       solve_cell_form(X0, FLAT, LAMINATE, RegimeParams(0.0), B).matrix)
    m11 = sw.trajectories()["M11"]
    assert m11[0] <= min(m11) + 1e-12 or m11[-1] <= min(m11) + 1e-12
    with pytest.raises(ValueError):
        gamma_sweep(X0, FLAT, LAMINATE, [1.0, 0.5], B)
    with pytest.raises(ValueError):
        gamma_sweep(X0, FLAT, LAMINATE, [0.0, 1.0], B)
