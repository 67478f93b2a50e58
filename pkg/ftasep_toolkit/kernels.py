"""Noyaux matriciels 2×2 anti-symétriques et noyau d'Airy.

Toutes les intégrales de contour sont évaluées de façon séparable :
sur des noeuds x_a, y_b et une règle de rayons (z_p), (w_q),

    ∫∫ g(z,w) e^{φ(z) - x z} e^{ψ(w) - y w}  ≈  E_x · G · E_yᵀ,

avec E_x[a,p] = ω_p e^{φ(z_p) - x_a z_p} / 2iπ et G[p,q] = g(z_p, w_q).
"""
from __future__ import annotations
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.special import airy

from .config import (
    RAY_ANGLE, RAY_NODES_PER_PANEL, RAY_PANELS, RAY_PANEL_RATIO, MAP_SCALE_AIRY, GOE_LITERAL_SIGNS,
    CONJ_RATE_DEFAULT, IMAG_TOL, EXP_CLIP,
)
from .contours import ray_rule, airy_ray_truncation, QuadratureRule, TWO_PI_I

Blocks = Tuple[np.ndarray, np.ndarray, np.ndarray]

@dataclass(frozen=True)
class KernelPoint:
    i: int      # composante, 1-based
    x: float

    def __post_init__(self):
        if self.i < 1:
            raise ValueError(f"indice de composante {self.i} < 1")

# ---- Outils de quadrature séparable ----------------------------------

@lru_cache(maxsize=256)
def cached_rule(apex: float, phi: float, n_nodes: int, L: float, resolve: Optional[float] = None) -> QuadratureRule:
    if resolve is None:
        return ray_rule(apex, phi, n_nodes, L)
    # premier panneau de largeur <= resolve
    need = math.log1p(L * (RAY_PANEL_RATIO - 1.0) / resolve) / math.log(RAY_PANEL_RATIO)
    return ray_rule(apex, phi, n_nodes, L, panels=max(RAY_PANELS, int(math.ceil(need))))

def airy_rule(apex: float, xs: np.ndarray, n_nodes: int = RAY_NODES_PER_PANEL,
              phi: float = RAY_ANGLE, sign: int = 1) -> QuadratureRule:
    xs = np.asarray(xs, dtype=float)
    L = airy_ray_truncation(apex, float(np.min(xs)), phi, sign, float(np.max(xs)))
    return cached_rule(float(apex), float(phi), int(n_nodes), round(L, 6))

def cubic_rows(rule: QuadratureRule, xs: np.ndarray, extra: Optional[Callable] = None,
               shift: float = 0.0, sign: int = 1) -> np.ndarray:
    """E[a,p] = ω_p·extra(z_p)·e^{sign((z_p+shift)³/3 - x_a (z_p+shift))} / 2iπ."""
    z = rule.nodes
    zz = z + shift
    phase = sign * (zz ** 3 / 3.0)[None, :] - sign * np.asarray(xs, dtype=float)[:, None] * zz[None, :]
    E = np.exp(np.minimum(phase.real, EXP_CLIP) + 1j * phase.imag)
    w = rule.weights if extra is None else rule.weights * extra(z)
    return E * w[None, :] / TWO_PI_I

def real_part(A, what: str = "noyau") -> np.ndarray:
    A = np.asarray(A)
    if np.iscomplexobj(A):
        scale = max(1.0, float(np.max(np.abs(A.real))) if A.size else 1.0)
        bad = float(np.max(np.abs(A.imag))) if A.size else 0.0
        if bad > IMAG_TOL * scale:
            raise RuntimeError(f"{what}: partie imaginaire résiduelle {bad:.2e}")
        return np.ascontiguousarray(A.real)
    return A

def sgn(d: np.ndarray) -> np.ndarray:
    return np.sign(d)

@dataclass(frozen=True)
class OddProfile:
    """Partie impaire φ(x - y) de K22 concentrée près de la diagonale.

    φ(d) = c·sgn(d)·e^{-decay·|d|} si ``spread`` est nul, c·d·e^{-d²/(4·spread)} sinon.
    """
    c: float
    decay: float = 0.0
    spread: float = 0.0

    def __post_init__(self):
        if self.decay < 0 or self.spread < 0:
            raise ValueError(f"profil impair invalide: {self}")

    @property
    def is_sign(self) -> bool:
        return self.decay == 0 and self.spread == 0

    def __call__(self, d) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        if self.spread > 0:
            return self.c * d * np.exp(-d * d / (4.0 * self.spread))
        return self.c * np.sign(d) * np.exp(-self.decay * np.abs(d))

# ---- Noyau d'Airy -----------------------------------------------------

def airy_kernel(u, v, n_nodes: int = RAY_NODES_PER_PANEL):
    """K_Ai(u, v) par double intégrale (z sur C_1^{π/3}, w sur C_{-1}^{2π/3}).

    Scalaires -> float ; tableaux 1-D -> matrice len(u)×len(v).
    """
    scalar = np.ndim(u) == 0 and np.ndim(v) == 0
    us = np.atleast_1d(np.asarray(u, dtype=float)).ravel()
    vs = np.atleast_1d(np.asarray(v, dtype=float)).ravel()
    rz = airy_rule(1.0, us, n_nodes)
    rw = airy_rule(-1.0, vs, n_nodes, phi=2 * math.pi / 3, sign=-1)
    Ez = cubic_rows(rz, us)
    Ew = cubic_rows(rw, vs, sign=-1)
    G = 1.0 / (rz.nodes[:, None] - rw.nodes[None, :])
    K = real_part(Ez @ G @ Ew.T, "airy_kernel")
    return float(K[0, 0]) if scalar else K

def airy_kernel_closed(u, v):
    """(Ai(u)Ai'(v) - Ai'(u)Ai(v))/(u - v), diagonale Ai'(u)² - u Ai(u)²."""
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    au, apu, _, _ = airy(u)
    av, apv, _, _ = airy(v)
    d = u - v
    close = np.abs(d) < 1e-8
    with np.errstate(divide="ignore", invalid="ignore"):
        off = (au * apv - apu * av) / np.where(close, 1.0, d)
    diag = apu ** 2 - u * au ** 2
    return np.where(close, diag, off)

def airy_kernel_oracle(u: float, v: float) -> float:
    """∫₀^∞ Ai(u+λ)Ai(v+λ) dλ par quadrature adaptative."""
    f = lambda lam: airy(u + lam)[0] * airy(v + lam)[0]
    val, _ = quad(f, 0.0, np.inf, limit=400, epsabs=1e-14, epsrel=1e-12)
    return float(val)

def airy_ai(x) -> np.ndarray:
    return airy(np.asarray(x, dtype=float))[0]

# ---- Noyaux matriciels -----------------------------------------------

class MatrixKernel:
    """Noyau 2×2 anti-symétrique sur {1..k}×R.

    Les sous-classes fournissent ``blocks(i, xi, j, xj) -> (K11, K12, K22)``
    (composantes 0-based) ; K21 est déduit de l'anti-symétrie.
    """
    name = "kernel"
    k = 1
    map_scale = MAP_SCALE_AIRY
    conj_rate = 0.0

    def blocks(self, i: int, xi: np.ndarray, j: int, xj: np.ndarray) -> Blocks:
        raise NotImplementedError

    def conjugated_blocks(self, i: int, xi: np.ndarray, j: int, xj: np.ndarray, rate: float) -> Blocks:
        """Blocs de e^{ε(x+y)}K11, e^{εx-εy}K12, e^{-ε(x+y)}K22."""
        b11, b12, b22 = self.blocks(i, xi, j, xj)
        X, Y = np.asarray(xi)[:, None], np.asarray(xj)[None, :]
        f = lambda arg: np.exp(np.minimum(arg, EXP_CLIP))
        return b11 * f(rate * (X + Y)), b12 * f(rate * (X - Y)), b22 * f(-rate * (X + Y))

    def odd_part(self, i: int, x: np.ndarray) -> Tuple[Optional[OddProfile], np.ndarray]:
        """(φ, g) tels que K22(i,x;i,y) - g(x)g(y)·φ(x-y) soit lisse près de x = y."""
        return None, np.ones(np.shape(x))

    def matrix(self, comp: np.ndarray, x: np.ndarray):
        comp = np.asarray(comp, dtype=int)
        x = np.asarray(x, dtype=float)
        M = x.size
        K11, K12, K22 = (np.zeros((M, M)) for _ in range(3))
        for i in np.unique(comp):
            rows = np.flatnonzero(comp == i)
            for j in np.unique(comp):
                cols = np.flatnonzero(comp == j)
                b11, b12, b22 = self.blocks(int(i), x[rows], int(j), x[cols])
                ix = np.ix_(rows, cols)
                K11[ix], K12[ix], K22[ix] = b11, b12, b22
        K21 = -K12.T
        return K11, K12, K21, K22

    def __call__(self, p: KernelPoint, q: KernelPoint) -> np.ndarray:
        for pt in (p, q):
            if pt.i > self.k:
                raise ValueError(f"composante {pt.i} > k={self.k}")
        a11, a12, a22 = self.blocks(p.i - 1, np.array([p.x]), q.i - 1, np.array([q.x]))
        _, b12, _ = self.blocks(q.i - 1, np.array([q.x]), p.i - 1, np.array([p.x]))
        return np.array([[a11[0, 0], a12[0, 0]], [-b12[0, 0], a22[0, 0]]])

class ConjugatedKernel(MatrixKernel):
    def __init__(self, base: MatrixKernel, rate: float):
        self.base, self.rate = base, float(rate)
        self.name = f"{base.name}~{rate:g}"
        self.k, self.map_scale = base.k, base.map_scale
        self.conj_rate = 0.0

    def blocks(self, i, xi, j, xj):
        return self.base.conjugated_blocks(i, xi, j, xj, self.rate)

    def odd_part(self, i, x):
        phi, g = self.base.odd_part(i, x)
        return phi, g * np.exp(-self.rate * np.asarray(x, dtype=float))

def conjugate_kernel(K: MatrixKernel, rate: float) -> MatrixKernel:
    """K'11 = e^{ε(x+y)}K11, K'12 = e^{εx-εy}K12, K'22 = e^{-ε(x+y)}K22 (Pf inchangé)."""
    if rate < 0:
        raise ValueError(f"taux de conjugaison négatif: {rate}")
    if rate == 0:
        return K
    return ConjugatedKernel(K, rate)

class AiryFamilyKernel(MatrixKernel):
    """Base des noyaux GOE/GSE : tous les contours en z, w sont C_1^{π/3}."""
    apex = 1.0

    def __init__(self, n_nodes: int = RAY_NODES_PER_PANEL):
        self.n_nodes = n_nodes

    def rows(self, xi, xj):
        rule = airy_rule(self.apex, np.concatenate([xi, xj]), self.n_nodes)
        return rule, cubic_rows(rule, xi), cubic_rows(rule, xj)

class GoeKernel(AiryFamilyKernel):
    name = "GOE"
    conj_rate = CONJ_RATE_DEFAULT

    def __init__(self, n_nodes: int = RAY_NODES_PER_PANEL, literal_signs: Optional[bool] = None):
        super().__init__(n_nodes)
        self.literal_signs = GOE_LITERAL_SIGNS if literal_signs is None else literal_signs

    def odd_part(self, i, x):
        return OddProfile(-0.25), np.ones(np.shape(x))

    def blocks(self, i, xi, j, xj):
        rule, Ex, Ey = self.rows(xi, xj)
        z, w = rule.nodes[:, None], rule.nodes[None, :]
        K11 = Ex @ ((z - w) / (z + w)) @ Ey.T
        # w déplacé de C_{-1/2} vers C_1 : le pôle w=0 rend +Ai(x)/2
        K12 = Ex @ ((w - z) / (2 * w * (z + w))) @ Ey.T + 0.5 * Ex.sum(axis=1)[:, None]
        D = Ex @ ((z - w) / (4 * z * w * (z + w))) @ Ey.T
        inv = 1.0 / rule.nodes
        Jx, Jy = Ex @ inv, Ey @ inv
        sign = 1.0 if self.literal_signs else -1.0
        K22 = D + sign * (Jx[:, None] - Jy[None, :]) / 4.0 - sgn(xi[:, None] - xj[None, :]) / 4.0
        return real_part(K11, "GOE K11"), real_part(K12, "GOE K12"), real_part(K22, "GOE K22")

class GseKernel(AiryFamilyKernel):
    name = "GSE"

    def blocks(self, i, xi, j, xj):
        rule, Ex, Ey = self.rows(xi, xj)
        z, w = rule.nodes[:, None], rule.nodes[None, :]
        base = (z - w) / (z + w)
        K11 = Ex @ (base / (4 * z * w)) @ Ey.T
        K12 = Ex @ (base / (4 * z)) @ Ey.T
        K22 = Ex @ (base / 4.0) @ Ey.T
        return real_part(K11, "GSE K11"), real_part(K12, "GSE K12"), real_part(K22, "GSE K22")

def goe_kernel(x: float, y: float, literal_signs: Optional[bool] = None) -> np.ndarray:
    return GoeKernel(literal_signs=literal_signs)(KernelPoint(1, x), KernelPoint(1, y))

def gse_kernel(x: float, y: float) -> np.ndarray:
    return GseKernel()(KernelPoint(1, x), KernelPoint(1, y))

def skew_defect(K: MatrixKernel, p: KernelPoint, q: KernelPoint) -> float:
    """max |K(p,q) + K(q,p)ᵀ| ; K21 évalué indépendamment (tests)."""
    return float(np.max(np.abs(K(p, q) + K(q, p).T)))
