import math
import numpy as np
import pytest
from scipy.special import airy
from ftasep_toolkit.config import DECAY_LOG_TOL
from ftasep_toolkit.contours import (
    Contour, composite_gauss_legendre, ray_rule, auto_truncation, integrate1, integrate2,
    residue_at, residue_sum, choose_apex,
)
from ftasep_toolkit.kernels import airy_rule

def test_composite_gauss_legendre_exact_on_cubics():
    u, w = composite_gauss_legendre(5.0, 8, panels=4, ratio=1.7)
    assert abs(w.sum() - 5.0) < 1e-12
    assert abs(np.sum(w * u ** 3) - 5.0 ** 4 / 4) < 1e-9

def test_contour_angle_range():
    Contour(0.5, 2 * math.pi / 3)
    with pytest.raises(ValueError):
        Contour(0.5, math.pi)
    with pytest.raises(ValueError):
        ray_rule(0.0, n_nodes=2)

def test_airy_integral_on_ray():
    for x in (-3.0, -0.5, 0.0, 1.2, 4.0):
        rule = airy_rule(1.0, np.array([x]))
        val = integrate1(lambda z: np.exp(z ** 3 / 3 - x * z), rule)
        assert abs(val.imag) < 1e-12
        assert abs(val.real - airy(x)[0]) < 1e-10

def test_double_integral_factorizes():
    rule = airy_rule(1.0, np.array([0.3]))
    f = lambda z: np.exp(z ** 3 / 3 - 0.3 * z)
    two = integrate2(lambda z, w: f(z) * f(w), rule, rule)
    assert abs(two - integrate1(f, rule) ** 2) < 1e-12

def test_short_truncation_is_detected():
    rule = ray_rule(0.0, L=1.0)
    with pytest.raises(RuntimeError):
        integrate1(lambda z: np.exp(-z), rule)

def test_auto_truncation_pure_cubic():
    L = auto_truncation(1.0, 0.0)
    assert abs(L ** 3 / 3 - DECAY_LOG_TOL) < 1e-6
    assert auto_truncation(1.0, 5.0) > L
    with pytest.raises(ValueError):
        auto_truncation(0.0, 1.0)

def test_residue_double_pole():
    # Res_{z=1} e^{λz}/(z-1)² = λ e^λ
    lam = np.array([0.0, 0.5, 2.0])
    got = residue_at([(-1.0, 1.0, -2)], 1.0, lam)
    assert np.allclose(got, lam * np.exp(lam))

def test_residue_simple_poles_cancel():
    f = [(-1.0, 1.0, -1), (-2.0, 1.0, -1)]
    assert abs(residue_at(f, 1.0) - (-1.0)) < 1e-14
    assert abs(residue_at(f, 2.0) - 1.0) < 1e-14
    assert abs(residue_sum(f, [1.0, 2.0, 1.0])) < 1e-14
    # point régulier
    assert residue_at(f, 3.0) == 0

def test_choose_apex():
    assert choose_apex(0.0, 1.0) == 0.5
    assert choose_apex(0.0, 1.0, preferred=0.99) == 0.75
    assert choose_apex(0.0, math.inf) == 1.0
    assert choose_apex(-math.inf, 2.0, preferred=5.0) == 1.75
    with pytest.raises(ValueError):
        choose_apex(1.0, 1.0)
