import numpy as np
import pytest

from shellhom.cellform import RegimeParams
from shellhom.errors import (CostGuardExceeded, MissingProfile, NonZeroMeanRho,
                             UnderResolved, WrongRegimeProfile)
from shellhom.geometry import build_immersion, build_surface, immersion_jet
from shellhom.harness import (RecoveryConfig, ThreeScaleExperiment, build_recovery,
                              default_hs, fast_axes, fast_vars, limit_value,
                              limsup_check, observed_order, osc_z_pairing,
                              shell_rule, strain_expansion_check,
                              three_scale_pairing)
from shellhom.expr import parse_coeff
from shellhom.material import Material

FLAT = build_surface("flat:Lx=1,Ly=1", 4)
SPHERE = build_surface("sphere:R=2,cap=30", 4)
SVK = Material("svk", {"mu": "1", "lambda": "1"})
ZERO = RegimeParams(0.0)
ONE = RegimeParams(1.0)


def test_fast_variables_live_in_the_cell():
    P = np.array([[0.123, 0.987], [1e-3, 0.5]])
    Y, Z = fast_vars(P, 0.01)
    assert np.all((Y >= 0) & (Y < 1)) and np.all((Z >= 0) & (Z < 1))
    assert np.allclose(Y[0], [0.3, 0.7])
    assert fast_axes([parse_coeff("y1*z2"), parse_coeff("x1")]) == ["y", "z"]
    assert default_hs(3, 0.1) == [0.1, 0.05, 0.025]


def test_rule_guards():
    with pytest.raises(UnderResolved):
        shell_rule(FLAT, ["y", None], 0.1, npp=3)
    with pytest.raises(CostGuardExceeded):
        shell_rule(FLAT, ["z", "z"], 0.01, cost_guard=1e6)
    rule = shell_rule(FLAT, ["y", None], 0.1, n_slow=4, npp=4, n_t=2)
    w = np.concatenate([c[2] for c in rule.chunks(size=50)])
    assert w.sum() == pytest.approx(1.0, rel=1e-13)
    assert rule.size == len(w)


# --- pairings --------------------------------------------------------------

@pytest.mark.parametrize("S", [FLAT, build_surface("sphere:R=2,cap=30", 16)],
                         ids=["flat", "sphere"])
def test_constant_pairing_is_exact(S):
    E = ThreeScaleExperiment(S, "1", "1", "1", ZERO, hs=[0.1, 0.01])
    for h, lhs, rhs, gap, flat, diff in three_scale_pairing(E):
        assert gap <= 1e-12 * rhs
        assert diff <= 1e-12 * rhs
    if S is FLAT:
        assert rhs == pytest.approx(1.0, rel=1e-14)


def test_matched_oscillation():
    E = ThreeScaleExperiment(FLAT, "cos(2*pi*y1)", "cos(2*pi*y1)",
                             "cos(2*pi*y1)", ZERO, hs=[1e-2, 1e-3])
    rows = three_scale_pairing(E)
    assert rows[-1][2] == pytest.approx(0.5, rel=1e-12)
    assert rows[-1][3] <= 0.02 * 0.5
    assert all(r[5] <= 1e-8 for r in rows)
    strong = three_scale_pairing(E, strong=True)
    assert strong[-1][3] <= 0.02 * 0.5


def test_zero_mean_z_test_function():
    E = ThreeScaleExperiment(FLAT, "1+x1", "sin(2*pi*z2)", "1+x1", ZERO,
                             hs=[1e-2, 2.5e-3])
    rows = three_scale_pairing(E)
    assert abs(rows[0][2]) <= 1e-12
    # an incomplete last period leaves O(eps^2)
    lhs = [abs(r[1]) for r in rows]
    assert lhs[1] < lhs[0] and lhs[1] <= 1e-4


def test_osc_z_pairing():
    E = ThreeScaleExperiment(FLAT, "cos(2*pi*z1)", "1", "cos(2*pi*z1)", ZERO,
                             hs=[1e-2, 2.5e-3], rho="cos(2*pi*z1)")
    rows = osc_z_pairing(E)
    assert rows[0][2] == pytest.approx(0.5, rel=1e-12)
    assert rows[1][3] < rows[0][3] and rows[1][3] <= 1e-4
    assert all(r[5] <= 1e-8 for r in rows)
    E = ThreeScaleExperiment(FLAT, "cos(2*pi*z1)", "1", "cos(2*pi*z1)", ZERO,
                             hs=[1e-2, 2.5e-3], rho="cos(4*pi*z1)")
    rows = osc_z_pairing(E)
    assert abs(rows[0][2]) <= 1e-12
    assert abs(rows[1][1]) < abs(rows[0][1]) and abs(rows[1][1]) <= 1e-4
    E = ThreeScaleExperiment(FLAT, "1", "1", "1", ZERO, hs=[1e-2], rho="1")
    with pytest.raises(NonZeroMeanRho):
        osc_z_pairing(E)


# --- recovery sequences ----------------------------------------------------

def _rc(S=FLAT, u="id", R=ONE, **kw):
    return RecoveryConfig(S, build_immersion(u), SVK, R, **kw)


def test_profile_validation():
    with pytest.raises(WrongRegimeProfile):
        _rc(R=ZERO, profiles={"rho": ["sin(2*pi*y1)"]})
    with pytest.raises(WrongRegimeProfile):
        _rc(profiles={"zeta": ["sin(2*pi*z1)", "0"]})
    with pytest.raises(WrongRegimeProfile):
        _rc(profiles={"psi": ["0"]})
    with pytest.raises(MissingProfile):
        _rc(profiles={"zeta": ["sin(2*pi*y1)"]})
    with pytest.raises(WrongRegimeProfile):
        _rc(profiles={"zeta": ["1+sin(2*pi*y1)", "0"]})
    with pytest.raises(WrongRegimeProfile):
        _rc(w=["t", "0", "0"])
    with pytest.raises(MissingProfile):
        _rc(w=["0", "0"])
    rc = _rc(profiles={"zeta": ["sin(2*pi*y1)", "0"]})
    assert rc.mean_defects["zeta"] <= 1e-8


def test_leading_ansatz():
    rc = _rc(S=SPHERE, u="reflect")
    h = 0.05
    seq = build_recovery(rc, h)
    P, T = SPHERE.nodes[:6], np.linspace(-0.4, 0.4, 6)
    ij = immersion_jet(SPHERE, rc.immersion, P)
    assert np.allclose(seq.value(P, T), ij.value + (h * T)[:, None] * ij.nu,
                       atol=1e-14)


def test_single_zeta_mode_formula():
    prof = {"zeta": ["sin(2*pi*y1)*t", "cos(2*pi*y2)"]}
    rc = _rc(S=SPHERE, profiles=prof)
    base = _rc(S=SPHERE)
    h = 0.02
    eps = float(ONE.eps(h))
    P, T = SPHERE.nodes[::5], np.linspace(-0.45, 0.45, len(SPHERE.nodes[::5]))
    diff = build_recovery(rc, h).value(P, T) - build_recovery(base, h).value(P, T)
    Y = fast_vars(P, eps)[0]
    ij = immersion_jet(SPHERE, rc.immersion, P)
    z1 = np.sin(2 * np.pi * Y[:, 0]) * T
    z2 = np.cos(2 * np.pi * Y[:, 1])
    ref = h * eps * (z1[:, None] * ij.sigma[:, :, 0] + z2[:, None] * ij.sigma[:, :, 1])
    assert np.allclose(diff, ref, atol=1e-14)


@pytest.mark.parametrize("R,prof", [
    (ZERO, {"phi": ["cos(2*pi*y1)*sin(2*pi*y2)"]}),
    (ZERO, {"mu": ["t", "t*t", "cos(2*pi*y1)"], "eta": ["0", "0", "sin(2*pi*z1)"]}),
    (ONE, {"zeta": ["t*sin(2*pi*y1)", "0"], "rho": ["cos(2*pi*y2)"]}),
    (RegimeParams(float("inf")), {"c": ["t", "1", "t*t"], "rho": ["sin(2*pi*y1)"]}),
])
def test_jet_matches_fd(R, prof):
    rc = _rc(S=SPHERE, u="reflect", R=R, profiles=prof, w=["x1*x2", "0", "x1"])
    h = 0.05
    seq = build_recovery(rc, h)
    rng = np.random.default_rng(0)
    P = rng.uniform(-0.5, 0.5, size=(5, 2))
    T = rng.uniform(-0.4, 0.4, size=5)
    _, D = seq.jet(P, T)
    step = 1e-7
    e = np.eye(2)
    cols = [(seq.value(P + step * e[a], T) - seq.value(P - step * e[a], T))
            / (2 * step) for a in range(2)]
    cols.append((seq.value(P, T + step) - seq.value(P, T - step)) / (2 * step))
    fd = np.stack(cols, axis=-1)
    scale = 1 + np.max(np.abs(D))
    assert np.max(np.abs(D - fd)) <= 1e-6 * scale


def test_ambient_gradient_against_projection():
    rc = _rc(S=SPHERE, u="reflect", profiles={"zeta": ["0", "sin(2*pi*y2)"]})
    h = 0.1
    seq = build_recovery(rc, h)
    p, t = np.array([[0.2, 0.1]]), np.array([0.3])
    G = seq.ambient_gradient(p, t)[0]
    X0 = SPHERE.shell_point(p, h * t)[0]
    step = 1e-7
    cols = []
    for k in range(3):
        dX = np.eye(3)[k] * step
        vals = []
        for sgn in (1, -1):
            q, s = SPHERE.project(X0 + sgn * dX, p)
            vals.append(seq.value(q, s / h)[0])
        cols.append((vals[0] - vals[1]) / (2 * step))
    assert np.allclose(G, np.stack(cols, axis=1), atol=1e-5 * (1 + np.abs(G).max()))


# --- energies --------------------------------------------------------------

def test_rigid_recovery_has_vanishing_energy():
    rc = _rc(u="rigid:axis=0,0,1,angle=0.4,c=1,0,0", hs=[0.1, 0.05, 0.025],
             n_slow=4, n_t=4)
    assert limit_value(rc) == 0.0
    rows = limsup_check(rc)
    assert all(abs(r[1]) <= 1e-20 for r in rows)
    res = strain_expansion_check(rc)
    assert all(r[1] <= 1e-12 for r in res)


def test_curved_rigid_strain_residual_vanishes():
    rc = _rc(S=SPHERE, u="rigid:axis=1,0,0,angle=0.3,c=0,0,0",
             hs=[0.1, 0.05], n_slow=6, n_t=4)
    assert all(r[1] <= 1e-12 for r in strain_expansion_check(rc))


def test_strain_residual_converges_with_profiles():
    rc = _rc(S=build_surface("sphere:R=2,cap=5", 4),
             profiles={"zeta": ["t*sin(2*pi*y1)", "cos(2*pi*y2)"],
                       "rho": ["sin(2*pi*y1)*cos(2*pi*y2)"]},
             hs=[0.1, 0.05, 0.025], n_slow=6, n_t=4, npp=4)
    errs = [r[1] for r in strain_expansion_check(rc)]
    assert errs[0] >= 1.5 * errs[1] and errs[1] >= 1.5 * errs[2]


def test_plate_displacement_limit():
    rc = _rc(w=["0.1*sin(2*pi*x1)", "0", "0"], hs=[1e-2, 1e-3], n_slow=16, n_t=4)
    lim = limit_value(rc)
    # B_11 = 0.2 pi cos(2 pi x1), Q(B) = 1.5 B_11^2 for mu = lambda = 1
    assert lim == pytest.approx(1.5 * 0.02 * np.pi ** 2, rel=1e-10)
    rows = limsup_check(rc)
    assert abs(rows[-1][3]) <= 0.05 * lim
    assert abs(rows[-1][3]) < abs(rows[0][3])


def test_unrelaxed_limit_exceeds_relaxed_energy():
    # rolled plate, all profiles zero: Q(t q) without relaxation
    rc = _rc(u="roll:R=1", n_slow=4, n_t=6)
    lim = limit_value(rc)
    assert lim == pytest.approx(1.5 / 12, rel=1e-12)
    assert lim > 1 / 9


def test_observed_order():
    hs = np.array([0.1, 0.05, 0.025])
    assert observed_order(hs, 3 * hs ** 2) == pytest.approx(2.0, rel=1e-12)
