"""Fonctions de répartition : Gaussienne, Tracy-Widom GUE/GOE/GSE, familles de
crossover et SU, lois exactes à n fini des temps de dernier passage.
"""
from __future__ import annotations
import math
import threading
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.special import erfc

from .config import EMPTY_THRESHOLD
from .cross_kernel import CrossKernel, CrossKernelParams, SuKernel
from .exp_kernel import ExpKernel, ExpKernelParams
from .kernels import GoeKernel, GseKernel, airy_ai, airy_kernel
from .pfaffian import DomainDk, QuadSpec, default_spec, fredholm_det, fredholm_pf
from .utils import rng_for, write_csv

Thresholds = Union[float, Sequence[float]]

FAMILIES = ("gaussian", "gue", "goe", "gse", "cross", "su", "finite_n")

def _thresholds(h: Thresholds) -> Tuple[float, ...]:
    if np.ndim(h) == 0:
        return (float(h),)
    return tuple(float(v) for v in h)

def _tw_domain(h: Thresholds) -> DomainDk:
    """Seuils >= EMPTY_THRESHOLD : composante vide (familles Tracy-Widom)."""
    return DomainDk(tuple(math.inf if v >= EMPTY_THRESHOLD else v for v in _thresholds(h)))

# ---- Lois à un point --------------------------------------------------

def gaussian_cdf(x: float) -> float:
    return float(0.5 * erfc(-float(x) / math.sqrt(2.0)))

def f_gue(x: float, spec: Optional[QuadSpec] = None) -> float:
    """F_GUE(x) = det(I - K_Ai) sur L²(x, ∞)."""
    if x >= EMPTY_THRESHOLD:
        return 1.0
    spec = spec or default_spec()
    return fredholm_det(lambda u, v: airy_kernel(u, v), float(x), spec)

def f_goe(x: float, spec: Optional[QuadSpec] = None) -> float:
    return fredholm_pf(GoeKernel(), _tw_domain(x), spec or default_spec())

def f_gse(x: float, spec: Optional[QuadSpec] = None) -> float:
    return fredholm_pf(GseKernel(), _tw_domain(x), spec or default_spec())

def f_goe_oracle(x: float, n_nodes: int = 64) -> float:
    """det(I - B_x) sur L²(0, ∞), B_x(u,v) = Ai((u+v)/2 + x)/2."""
    if x >= EMPTY_THRESHOLD:
        return 1.0
    return fredholm_det(lambda u, v: 0.5 * airy_ai(0.5 * (u + v) + x), 0.0, QuadSpec(n_nodes))

# ---- Lois multipoints -------------------------------------------------

def finite_n_lpp_cdf(thresholds: Thresholds, params: ExpKernelParams,
                     spec: Optional[QuadSpec] = None) -> float:
    """P(H(n_i, m_i) < h_i, i=1..k) = Pf(J - K^exp) sur D_k(h)."""
    h = _thresholds(thresholds)
    if len(h) != params.k:
        raise ValueError(f"{len(h)} seuils pour k={params.k} composantes")
    for i, v in enumerate(h):
        if not v > 0:
            raise ValueError(f"seuil h_{i + 1}={v} doit être > 0")
    return fredholm_pf(ExpKernel(params), DomainDk(h), spec or default_spec())

def cross_cdf(thresholds: Thresholds, varpi: float, eta: Sequence[float],
              spec: Optional[QuadSpec] = None, **kernel_kw) -> float:
    params = CrossKernelParams(float(varpi), tuple(float(e) for e in eta))
    dom = _tw_domain(thresholds)
    if dom.k != params.k:
        raise ValueError(f"{dom.k} seuils pour {params.k} valeurs de η")
    return fredholm_pf(CrossKernel(params, **kernel_kw), dom, spec or default_spec())

def su_cdf(thresholds: Thresholds, eta: Sequence[float], spec: Optional[QuadSpec] = None) -> float:
    params = CrossKernelParams(0.0, tuple(float(e) for e in eta))
    dom = _tw_domain(thresholds)
    if dom.k != params.k:
        raise ValueError(f"{dom.k} seuils pour {params.k} valeurs de η")
    return fredholm_pf(SuKernel(params), dom, spec or default_spec())

def rescaled_finite_n_cdf(x: float, n: int, alpha: float, spec: Optional[QuadSpec] = None) -> float:
    """P((H(n,n) - 4n)/(2^{4/3} n^{1/3}) < x) pour α >= 1/2."""
    h = 4.0 * n + 2.0 ** (4.0 / 3.0) * n ** (1.0 / 3.0) * x
    if h <= 0:
        return 0.0
    return finite_n_lpp_cdf(h, ExpKernelParams(alpha, (n,), (n,)), spec)

# ---- Oracles ----------------------------------------------------------

def hypoexponential_cdf(rates: Sequence[float], h: float) -> float:
    """P(E_1 + ... + E_r <= h), E_i ~ Exp(rates[i]) indépendantes.

    Taux distincts : somme en fractions partielles.  Taux répétés : loi
    phase-type, 1 - e₁ᵀ exp(T h) 1 avec T bidiagonale.
    """
    lam = np.asarray(rates, dtype=float)
    if lam.size == 0 or np.any(lam <= 0):
        raise ValueError(f"taux invalides: {list(rates)}")
    if h <= 0:
        return 0.0
    diffs = lam[:, None] - lam[None, :]
    np.fill_diagonal(diffs, 1.0)
    if np.min(np.abs(diffs)) > 1e-6 * np.max(lam):
        ratio = lam[None, :] / (lam[None, :] - lam[:, None] + np.eye(lam.size))
        np.fill_diagonal(ratio, 1.0)
        coef = np.prod(ratio, axis=1)
        return float(1.0 - np.sum(coef * np.exp(-lam * h)))
    T = np.diag(-lam) + np.diag(lam[:-1], 1)
    surv = scipy.linalg.expm(T * h)[0].sum()
    return float(1.0 - surv)

def gue_edge_samples(n: int, m: int, seed: int) -> np.ndarray:
    """(λ_max - 2√n)·n^{1/6} pour m matrices GUE n×n (E|H_ij|² = 1)."""
    if n < 2 or m < 1:
        raise ValueError(f"n={n}, m={m} invalides")
    out = np.empty(m)
    for r in range(m):
        rng = rng_for(seed, r)
        X = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
        H = (X + X.conj().T) / math.sqrt(2.0)
        top = scipy.linalg.eigh(H, eigvals_only=True, subset_by_index=[n - 1, n - 1])[0]
        out[r] = (top - 2.0 * math.sqrt(n)) * n ** (1.0 / 6.0)
    return out

# ---- Poignées mémorisées ----------------------------------------------

@dataclass
class CdfHandle:
    """Fonction de répartition paramétrée avec mémoïsation (seuils -> valeur).

    family : gaussian | gue | goe | gse | cross | su | finite_n
    params : {"varpi", "eta"} (cross), {"eta"} (su), ExpKernelParams (finite_n)
    """
    family: str
    params: Any = None
    spec: Optional[QuadSpec] = None
    _memo: Dict[Tuple[Tuple[float, ...], QuadSpec], float] = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"famille inconnue: {self.family}")
        if self.family == "cross" and not (isinstance(self.params, dict) and "varpi" in self.params
                                           and "eta" in self.params):
            raise ValueError("famille cross : params {'varpi', 'eta'} requis")
        if self.family == "su" and not (isinstance(self.params, dict) and "eta" in self.params):
            raise ValueError("famille su : params {'eta'} requis")
        if self.family == "finite_n" and not isinstance(self.params, ExpKernelParams):
            raise ValueError("famille finite_n : ExpKernelParams requis")

    @property
    def k(self) -> int:
        if self.family in ("cross", "su"):
            return len(self.params["eta"])
        if self.family == "finite_n":
            return self.params.k
        return 1

    def _spec(self) -> QuadSpec:
        return self.spec or default_spec()

    def with_spec(self, spec: QuadSpec) -> "CdfHandle":
        """Nouvelle poignée (cache vide) à une autre résolution."""
        return CdfHandle(self.family, self.params, spec)

    def _evaluate(self, h: Tuple[float, ...], spec: QuadSpec) -> float:
        fam = self.family
        if fam in ("gaussian", "gue", "goe", "gse") and len(h) != 1:
            raise ValueError(f"{fam}: un seul seuil attendu, reçu {len(h)}")
        if fam == "gaussian":
            return gaussian_cdf(h[0])
        if fam == "gue":
            return f_gue(h[0], spec)
        if fam == "goe":
            return f_goe(h[0], spec)
        if fam == "gse":
            return f_gse(h[0], spec)
        if fam == "cross":
            return cross_cdf(h, self.params["varpi"], self.params["eta"], spec)
        if fam == "su":
            return su_cdf(h, self.params["eta"], spec)
        return finite_n_lpp_cdf(h, self.params, spec)

    def __call__(self, thresholds: Thresholds) -> float:
        h = _thresholds(thresholds)
        spec = self._spec()
        key = (h, spec)
        with self._lock:
            if key in self._memo:
                return self._memo[key]
        val = self._evaluate(h, spec)
        with self._lock:
            self._memo[key] = val
        return val

    def cache_size(self) -> int:
        with self._lock:
            return len(self._memo)

    def tabulate(self, grid: Iterable[float], path: str) -> str:
        """CSV (x, F(x)) ; pour k > 1 le même seuil est appliqué à chaque composante."""
        rows = []
        for x in grid:
            rows.append((float(x), self([float(x)] * self.k)))
        return write_csv(path, ("x", "F"), rows)
