import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import airy
from ftasep_toolkit.kernels import (
    KernelPoint, airy_kernel, airy_kernel_closed, airy_kernel_oracle, airy_ai, GoeKernel, GseKernel,
    goe_kernel, gse_kernel, conjugate_kernel, skew_defect, real_part,
)
from ftasep_toolkit.pfaffian import DomainDk, QuadSpec, fredholm_pf

PTS = [(-2.0, -1.5), (-0.3, 0.4), (0.0, 0.0), (1.0, 2.5), (3.0, -1.0)]

def _ai_tail(x):
    """∫_x^∞ Ai."""
    return quad(lambda s: airy(s)[0], x, np.inf, limit=200, epsabs=1e-14)[0]

def test_airy_kernel_matches_closed_form():
    for u, v in PTS:
        assert abs(airy_kernel(u, v) - float(airy_kernel_closed(u, v))) < 1e-9

def test_airy_kernel_vectorized_shape():
    K = airy_kernel(np.array([0.0, 1.0, 2.0]), np.array([-1.0, 0.5]))
    assert K.shape == (3, 2)
    assert abs(K[1, 1] - float(airy_kernel_closed(1.0, 0.5))) < 1e-9

def test_airy_kernel_oracle():
    assert abs(airy_kernel_oracle(0.5, 1.0) - float(airy_kernel_closed(0.5, 1.0))) < 1e-9
    assert abs(airy_ai(0.0) - 0.355028053887817) < 1e-12

def test_gse_blocks_closed_forms():
    # (z-w)/(z(z+w)) = 2/(z+w) - 1/z  =>  K12 = K_Ai/2 - (∫_x^∞ Ai)·Ai(y)/4
    for x, y in [(0.3, -0.5), (-1.0, 1.0), (2.0, 2.0)]:
        K = gse_kernel(x, y)
        want12 = 0.5 * float(airy_kernel_closed(x, y)) - 0.25 * _ai_tail(x) * airy(y)[0]
        assert abs(K[0, 1] - want12) < 1e-9
        # (z-w)/4 : K22 = (Ai'(x)Ai(y) - Ai(x)Ai'(y))/4
        want22 = 0.25 * (-airy(x)[1] * airy(y)[0] + airy(x)[0] * airy(y)[1])
        assert abs(K[1, 1] - want22) < 1e-9

def test_goe_k12_residue_shift():
    # (w-z)/(2w(z+w)) = 1/(z+w) - 1/(2w)  =>  K12 = K_Ai - Ai(x)·∫_y^∞Ai/2 + Ai(x)/2
    for x, y in [(0.2, -0.7), (1.5, 0.5)]:
        K = goe_kernel(x, y)
        ax = airy(x)[0]
        want = float(airy_kernel_closed(x, y)) - 0.5 * ax * _ai_tail(y) + 0.5 * ax
        assert abs(K[0, 1] - want) < 1e-9

def test_goe_k22_is_antisymmetric_with_jump():
    K = GoeKernel()
    for x, y in [(0.0, 1.0), (-1.5, 2.0)]:
        assert skew_defect(K, KernelPoint(1, x), KernelPoint(1, y)) < 1e-10
    # le saut de K22 vaut -1/2 quand x traverse y
    a = goe_kernel(0.5 + 1e-9, 0.5)[1, 1]
    b = goe_kernel(0.5 - 1e-9, 0.5)[1, 1]
    assert abs((a - b) + 0.5) < 1e-6
    assert GoeKernel(literal_signs=True).literal_signs

def test_gse_is_skew():
    K = GseKernel()
    assert skew_defect(K, KernelPoint(1, -0.5), KernelPoint(1, 1.25)) < 1e-10
    with pytest.raises(ValueError):
        K(KernelPoint(2, 0.0), KernelPoint(1, 0.0))
    with pytest.raises(ValueError):
        KernelPoint(0, 1.0)

def test_conjugation_preserves_pfaffian():
    K = GseKernel()
    dom = DomainDk((-1.0,))
    spec = QuadSpec(32)
    base = fredholm_pf(K, dom, spec, rate=0.0)
    assert abs(fredholm_pf(K, dom, spec, rate=0.2) - base) < 1e-7
    assert conjugate_kernel(K, 0.0) is K
    with pytest.raises(ValueError):
        conjugate_kernel(K, -0.1)

def test_real_part_rejects_complex_residue():
    assert np.array_equal(real_part(np.array([1.0 + 0j, 2.0 + 1e-15j])), np.array([1.0, 2.0]))
    with pytest.raises(RuntimeError):
        real_part(np.array([1.0 + 1e-3j]))

def test_gse_decay_envelope():
    xs = np.linspace(0.0, 6.0, 13)
    K11, K12, K22 = GseKernel().blocks(0, xs, 0, xs)
    S = xs[:, None] + xs[None, :]
    env11 = np.abs(K11) * np.exp(S)
    env12 = np.abs(K12) * np.exp(xs)[:, None]
    assert np.all(np.isfinite(env11)) and env11[-1, -2] < 1e-2 * env11.max()
    assert env12[-1].max() < env12.max()
    assert np.abs(K22).max() < 1.0
