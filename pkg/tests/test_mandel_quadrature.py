import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from shellhom.mandel import (congruence, from_mandel, from_mandel2,
                             isotropic_quadratic, to_mandel, to_mandel2)
from shellhom.quadrature import (disk_rule, gauss_legendre, legendre_on_interval,
                                 periodic_panels)

mats = arrays(float, (3, 3), elements=st.floats(-5, 5))


@given(mats)
def test_mandel_roundtrip_and_norm(A):
    G = A + A.T
    v = to_mandel(G)
    assert np.allclose(from_mandel(v), G)
    assert np.dot(v, v) == pytest.approx(np.sum(G * G), rel=1e-12, abs=1e-12)


@given(arrays(float, (2, 2), elements=st.floats(-5, 5)))
def test_mandel2_roundtrip(A):
    G = A + A.T
    assert np.allclose(from_mandel2(to_mandel2(G)), G)


@given(arrays(float, (3, 3), elements=st.floats(-2, 2)), mats)
def test_congruence(d, A):
    G = A + A.T
    L = congruence(d)
    assert np.allclose(to_mandel(d.T @ G @ d), L @ to_mandel(G), atol=1e-9)


def test_isotropic_quadratic_e11():
    Q = isotropic_quadratic(1.0, 1.0)
    v = to_mandel(np.diag([1.0, 0, 0]))
    assert v @ Q @ v == pytest.approx(1.5)


def test_gauss_legendre_moments():
    t, w = gauss_legendre(3)
    assert np.sum(w) == pytest.approx(1.0)
    assert np.dot(w, t) == pytest.approx(0.0, abs=1e-15)
    assert np.dot(w, t**2) == pytest.approx(1 / 12)


def test_periodic_panels_align_with_half_periods():
    x, w = periodic_panels(0.0, 1.0, 0.1, 8)
    assert len(x) == 20 * 8
    assert np.sum(w) == pytest.approx(1.0)
    step = (x >= 0.05) & (x < 0.1)
    # a jump at half a period is integrated exactly
    f = (np.mod(x / 0.1, 1.0) >= 0.5).astype(float)
    assert np.dot(w, f) == pytest.approx(0.5, abs=1e-14)
    assert step.sum() == 8


def test_disk_rule_area_and_moment():
    p, w = disk_rule(0.7, 8, 16)
    assert np.sum(w) == pytest.approx(np.pi * 0.49)
    assert np.dot(w, p[:, 0] ** 2) == pytest.approx(np.pi * 0.7**4 / 4)


def test_legendre_on_interval():
    t = np.linspace(-0.5, 0.5, 5)
    P, dP = legendre_on_interval(2, t)
    assert np.allclose(P[1], 2 * t)
    assert np.allclose(dP[2], 3 * (2 * t) * 2)
