import math
import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import airy
from ftasep_toolkit.cross_kernel import (
    CrossKernel, CrossKernelParams, SuKernel, r12_closed, r12_integral, airy_pole_integral,
    su_r22_closed, su_r22_quadrature, cross_kernel, su_kernel,
)
from ftasep_toolkit.distributions import cross_cdf, su_cdf, f_goe, f_gse
from ftasep_toolkit.kernels import KernelPoint, skew_defect

def test_params_validation():
    assert CrossKernelParams(0.5, (0.0, 0.3)).k == 2
    with pytest.raises(ValueError):
        CrossKernelParams(0.5, ())
    with pytest.raises(ValueError):
        CrossKernelParams(0.5, (0.3, 0.1))
    with pytest.raises(ValueError):
        CrossKernelParams(0.5, (-0.1,))
    with pytest.raises(ValueError):
        CrossKernelParams(float('nan'), (0.0,))

def test_representation_choice():
    assert CrossKernel(CrossKernelParams(2.0, (0.1,))).stable
    assert not CrossKernel(CrossKernelParams(0.5, (0.1,))).stable
    with pytest.raises(ValueError):
        CrossKernel(CrossKernelParams(-1.0, (0.1,)), stable=True)
    assert CrossKernel(CrossKernelParams(-1.0, (0.1,))).conj_rate == 1.25
    assert CrossKernel(CrossKernelParams(0.5, (0.1,))).conj_rate == 0.25

def test_r12_closed_form():
    for (ei, ej), (x, y) in [((0.2, 0.7), (0.3, -0.4)), ((0.0, 1.0), (-1.0, 0.5))]:
        want = r12_integral(ei, ej, x, y)
        got = float(r12_closed(ei, ej, x, y))
        assert abs(got - want) < 1e-8 * max(1.0, abs(want))
    with pytest.raises(ValueError):
        r12_closed(0.5, 0.5, 0.0, 0.0)

def test_airy_pole_integral():
    # (1/2iπ)∫ e^{Z³/3-xZ}/(Z-c) = ∫_0^∞ e^{cλ} Ai(x+λ) dλ
    for c in (-0.5, 0.5, 1.5):
        for x in (0.5, -1.0):
            want = quad(lambda l: math.exp(c * l) * airy(x + l)[0], 0.0, np.inf, limit=200)[0]
            got = airy_pole_integral(np.array([x]), c)[0]
            assert abs(got.imag) < 1e-10
            assert abs(got.real - want) < 1e-8

def test_su_r22_closed_form():
    for (ei, ej), (x, y) in [((0.3, 0.8), (0.1, -0.2)), ((0.5, 0.5), (1.0, 0.0)), ((1.2, 0.4), (-1.0, -2.0))]:
        assert abs(float(su_r22_closed(ei, ej, x, y)) - su_r22_quadrature(ei, ej, x, y)) < 1e-9
        # antisymétrie exacte
        assert abs(float(su_r22_closed(ei, ej, x, y)) + float(su_r22_closed(ej, ei, y, x))) < 1e-14

def test_su_kernel_requires_positive_eta():
    with pytest.raises(ValueError):
        SuKernel(CrossKernelParams(0.0, (0.0, 0.5)))

def test_kernels_are_skew():
    p, q = KernelPoint(1, 0.2), KernelPoint(2, -0.3)
    for varpi in (-0.7, 0.0, 0.5, 2.0):
        K = CrossKernel(CrossKernelParams(varpi, (0.0, 0.4)))
        assert skew_defect(K, p, q) < 1e-9
    S = SuKernel(CrossKernelParams(0.0, (0.2, 0.6)))
    assert skew_defect(S, p, q) < 1e-9
    M = su_kernel(CrossKernelParams(0.0, (0.3,)), KernelPoint(1, 0.5), KernelPoint(1, 0.5))
    assert abs(M[0, 0]) < 1e-10

def test_stable_and_unified_forms_agree():
    params = CrossKernelParams(1.5, (0.3,))
    p, q = KernelPoint(1, 0.2), KernelPoint(1, -0.4)
    a = cross_kernel(params, p, q, stable=True)
    b = cross_kernel(params, p, q, stable=False)
    assert np.max(np.abs(a - b)) < 1e-6

@pytest.mark.slow
def test_cross_at_origin_is_goe():
    for x in (-1.5, 0.0):
        assert abs(cross_cdf(x, 0.0, [0.0]) - f_goe(x)) < 1e-5

@pytest.mark.parametrize('varpi', [0.0, 0.5, 3.0, 8.0])
def test_odd_part_carries_the_diagonal_jump(varpi):
    K = CrossKernel(CrossKernelParams(varpi, (0.0,)))
    phi, g = K.odd_part(0, np.array([0.4]))
    assert phi.c == -0.25 and phi.decay == varpi and g[0] == 1.0
    dl = 1e-7
    _, _, K22 = K.blocks(0, np.array([0.4]), 0, np.array([0.4 - dl, 0.4 + dl]))
    smooth = K22[0] - phi(np.array([dl, -dl]))
    assert abs(smooth[0] - smooth[1]) < 1e-5
    assert CrossKernel(CrossKernelParams(varpi, (0.3,))).odd_part(0, np.array([0.4]))[0] is None

def test_su_odd_part_is_the_whole_diagonal_r22():
    S = SuKernel(CrossKernelParams(0.0, (0.05,)))
    xs = np.array([-0.5, 0.3])
    phi, g = S.odd_part(0, xs)
    got = g[0] * g[1] * phi(xs[0] - xs[1])
    assert abs(got - float(su_r22_closed(0.05, 0.05, xs[0], xs[1]))) < 1e-12

@pytest.mark.slow
@pytest.mark.parametrize('h', [-1.0, 0.0, 1.0])
def test_cross_degenerates_to_gse_for_large_varpi(h):
    assert abs(cross_cdf(h, 8.0, [0.0]) - f_gse(h)) < 1e-3

@pytest.mark.slow
@pytest.mark.parametrize('h', [-1.0, 0.0, 1.0])
def test_su_degenerates_to_gse_for_small_eta(h):
    assert abs(su_cdf(h, [0.05]) - f_gse(h)) < 2e-3
