import math
import numpy as np
import pytest
from scipy.integrate import quad
from ftasep_toolkit.distributions import finite_n_lpp_cdf, hypoexponential_cdf, rescaled_finite_n_cdf
from ftasep_toolkit.exp_kernel import ExpKernel, ExpKernelParams, exp_kernel
from ftasep_toolkit.kernels import KernelPoint, skew_defect
from ftasep_toolkit.pfaffian import QuadSpec

SPEC = QuadSpec(40)

def test_params_validation():
    assert ExpKernelParams(0.7, (1,), (1,)).branch == 'above'
    assert ExpKernelParams(0.5, (1,), (1,)).branch == 'half'
    assert ExpKernelParams(0.2, (1,), (1,)).branch == 'below'
    assert ExpKernelParams(1.0, (3, 5), (2, 1)).k == 2
    with pytest.raises(ValueError):
        ExpKernelParams(0.0, (1,), (1,))
    with pytest.raises(ValueError):
        ExpKernelParams(1.0, (2, 2), (2, 1))
    with pytest.raises(ValueError):
        ExpKernelParams(1.0, (2, 3), (1, 2))
    with pytest.raises(ValueError):
        ExpKernelParams(1.0, (1,), (2,))

def test_requires_positive_arguments():
    K = ExpKernel(ExpKernelParams(1.0, (2,), (2,)))
    with pytest.raises(ValueError):
        K(KernelPoint(1, -0.5), KernelPoint(1, 1.0))

@pytest.mark.parametrize('alpha', [0.3, 0.5, 0.6, 1.0, 1.5])
def test_single_cell_is_exponential(alpha):
    # H(1,1) = w_11 ~ Exp(α)
    p = ExpKernelParams(alpha, (1,), (1,))
    for h in (0.5, 2.0, 5.0):
        assert abs(finite_n_lpp_cdf(h, p, SPEC) - (1.0 - math.exp(-alpha * h))) < 1e-6

@pytest.mark.parametrize('alpha', [0.2, 0.3, 0.45, 0.5, 0.6, 1.0, 1.5])
def test_two_by_two_is_hypoexponential(alpha):
    # H(2,2) = w_11 + w_21 + w_22, taux (α, 1, α)
    p = ExpKernelParams(alpha, (2,), (2,))
    for h in (1.0, 3.0, 6.0):
        want = hypoexponential_cdf([alpha, 1.0, alpha], h)
        assert abs(finite_n_lpp_cdf(h, p, SPEC) - want) < 1e-5

@pytest.mark.parametrize('alpha', [0.3, 0.5, 1.0])
def test_three_by_three_cdf_is_a_distribution(alpha):
    p = ExpKernelParams(alpha, (3,), (3,))
    values = [finite_n_lpp_cdf(h, p, SPEC) for h in (1.0, 2.0, 4.0, 8.0, 16.0)]
    assert all(-1e-6 < v < 1.0 + 1e-6 for v in values)
    assert all(b > a for a, b in zip(values, values[1:]))

@pytest.mark.parametrize('alpha', [0.2, 0.45])
def test_conjugated_entries_stay_finite_at_far_nodes(alpha):
    K = ExpKernel(ExpKernelParams(alpha, (3,), (2,)))
    xs = np.array([1.0, 50.0, 870.0, 4725.0])
    for block in K.conjugated_blocks(0, xs, 0, xs, K.conj_rate):
        assert np.all(np.isfinite(block))
        assert np.max(np.abs(block[-1])) < 1e-12

@pytest.mark.parametrize('alpha', [0.7, 1.5])
def test_residue_evaluation_matches_ray_quadrature(alpha):
    p = ExpKernelParams(alpha, (2, 3), (2, 1))
    exact, rays = ExpKernel(p), ExpKernel(p, exact=False)
    xs, ys = np.array([0.8, 2.5]), np.array([1.2, 3.0])
    for i in range(2):
        for j in range(2):
            for a, b in zip(exact.blocks(i, xs, j, ys), rays.blocks(i, xs, j, ys)):
                assert np.max(np.abs(a - b)) < 1e-8

def test_below_diagonal_cell():
    # H(2,1) = w_11 + w_21, taux (α, 1)
    p = ExpKernelParams(1.5, (2,), (1,))
    for h in (0.7, 2.5):
        assert abs(finite_n_lpp_cdf(h, p, SPEC) - hypoexponential_cdf([1.5, 1.0], h)) < 1e-6

def test_two_point_law():
    # H(2,2) = S + w_22 et H(3,1) = S + w_31 avec S = w_11 + w_21
    al, h1, h2 = 1.5, 3.0, 4.0
    dens = lambda s: al / (1 - al) * (math.exp(-al * s) - math.exp(-s))
    f = lambda s: dens(s) * (1 - math.exp(-al * (h1 - s))) * (1 - math.exp(-(h2 - s)))
    want = quad(f, 0.0, min(h1, h2), epsabs=1e-13)[0]
    p = ExpKernelParams(al, (2, 3), (2, 1))
    assert abs(finite_n_lpp_cdf((h1, h2), p, SPEC) - want) < 1e-6

def test_threshold_checks():
    p = ExpKernelParams(1.0, (2,), (2,))
    with pytest.raises(ValueError):
        finite_n_lpp_cdf(0.0, p)
    with pytest.raises(ValueError):
        finite_n_lpp_cdf((1.0, 2.0), p)
    assert rescaled_finite_n_cdf(-50.0, 8, 1.0) == 0.0

def test_kernel_is_skew():
    p = ExpKernelParams(0.8, (3, 5), (3, 2))
    K = ExpKernel(p)
    assert skew_defect(K, KernelPoint(1, 1.5), KernelPoint(2, 4.0)) < 1e-9
    M = exp_kernel(p, KernelPoint(2, 2.0), KernelPoint(2, 2.0))
    assert abs(M[0, 0]) < 1e-9 and abs(M[1, 1]) < 1e-9
