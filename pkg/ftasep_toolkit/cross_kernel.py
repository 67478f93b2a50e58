"""Noyaux limites K^cross(ϖ, η) et K^SU(η).

Notations : A_k(u) = (ϖ+η_k)³/3 - u(ϖ+η_k),  B_k(u) = (η_k-ϖ)³/3 - u(η_k-ϖ).

R22^cross est évalué sous la forme limite du noyau à n fini :
  ϖ >= CROSS_STABLE_MIN_VARPI : D(c,c) + terme3 (contour d entre ±ϖ),
      c_z ∈ (η_i, η_i+ϖ), c_w ∈ (η_j, η_j+ϖ) ;
  sinon : I22 + t1 + t2 - e^{A_i(x)+B_j(y)}/4 - T/2, où t1, t2 ont leur contour
      à droite de η-ϖ et T son contour à droite de |ϖ|.
L'option ``include_exponential_terms`` ajoute (1/4)[e^{B_i+A_j} - e^{A_i+B_j}] (ϖ > 0).
"""
from __future__ import annotations
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.special import airy

from .config import (
    RAY_ANGLE, RAY_NODES_PER_PANEL, CROSS_R22_EXPONENTIAL_TERMS, CONJ_RATE_DEFAULT,
    CROSS_STABLE_MIN_VARPI, DECAY_LOG_TOL,
)
from .contours import Contour, measured_truncation, choose_apex
from .kernels import (
    MatrixKernel, KernelPoint, OddProfile, airy_rule, cached_rule, cubic_rows, real_part, EXP_CLIP,
)

ETA_FLAT = 1e-12     # η_i + η_j en dessous : terme 3 en forme close

@dataclass(frozen=True)
class CrossKernelParams:
    varpi: float
    eta: Tuple[float, ...]

    def __post_init__(self):
        if not math.isfinite(self.varpi):
            raise ValueError(f"ϖ={self.varpi} non fini")
        if not self.eta:
            raise ValueError("au moins un η requis")
        if any((not math.isfinite(e)) or e < 0 for e in self.eta):
            raise ValueError(f"η doit être >= 0: {self.eta}")
        if any(b < a for a, b in zip(self.eta, self.eta[1:])):
            raise ValueError(f"η doit être croissant: {self.eta}")

    @property
    def k(self) -> int:
        return len(self.eta)

def _exp(arg):
    arg = np.asarray(arg)
    return np.exp(np.minimum(np.real(arg), EXP_CLIP) + 1j * np.imag(arg)) if np.iscomplexobj(arg) \
        else np.exp(np.minimum(arg, EXP_CLIP))

def a_exp(varpi: float, eta: float, u):
    return (varpi + eta) ** 3 / 3.0 - np.asarray(u) * (varpi + eta)

def b_exp(varpi: float, eta: float, u):
    return (eta - varpi) ** 3 / 3.0 - np.asarray(u) * (eta - varpi)

# ---- R12 --------------------------------------------------------------

def r12_closed(eta_i: float, eta_j: float, X, Y) -> np.ndarray:
    d = eta_i - eta_j
    if d >= 0:
        raise ValueError(f"R12 requiert η_i < η_j (reçu {eta_i}, {eta_j})")
    X, Y = np.asarray(X, float), np.asarray(Y, float)
    arg = (-d ** 4 + 6 * (X + Y) * d * d + 3 * (X - Y) ** 2) / (12 * d)
    return -_exp(arg) / math.sqrt(4 * math.pi * (-d))

def r12_integral(eta_i: float, eta_j: float, x: float, y: float) -> float:
    """-∫_R e^{-λ(η_i-η_j)} Ai(x+λ)Ai(y+λ) dλ, par quadrature directe."""
    d = eta_i - eta_j
    if d >= 0:
        raise ValueError(f"R12 requiert η_i < η_j (reçu {eta_i}, {eta_j})")
    f = lambda lam: math.exp(-lam * d) * airy(x + lam)[0] * airy(y + lam)[0]
    lo = -(DECAY_LOG_TOL + 10.0) / (-d)
    val = 0.0
    edges = np.linspace(lo, 0.0, 41)
    for a, b in zip(edges[:-1], edges[1:]):
        val += quad(f, a, b, limit=200, epsabs=1e-15, epsrel=1e-12)[0]
    val += quad(f, 0.0, np.inf, limit=200, epsabs=1e-15, epsrel=1e-12)[0]
    return -float(val)

# ---- Intégrales simples à pôle ----------------------------------------

def airy_pole_integral(xs, c: float, n_nodes: int = RAY_NODES_PER_PANEL) -> np.ndarray:
    """(1/2iπ)∫_{C_r} e^{Z³/3 - xZ}/(Z - c) dZ avec r > c.

    Si c > 1 le contour passe à gauche de c (apex <= 1) et le résidu e^{c³/3 - xc}
    est rajouté explicitement.
    """
    xs = np.asarray(xs, float)
    if c < 1.0:
        apex, res = max(c, 0.0) + 0.5, None
    else:
        apex, res = min(1.0, c - 0.5), c
    rule = airy_rule(apex, xs, n_nodes)
    out = cubic_rows(rule, xs) @ (1.0 / (rule.nodes - c))
    if res is not None:
        out = out + _exp(res ** 3 / 3.0 - xs * res)
    return out

def quadratic_ray_integral(A: float, B0: float, deltas, varpi: float, apex: float,
                           n_nodes: int = RAY_NODES_PER_PANEL, phi: float = RAY_ANGLE) -> np.ndarray:
    """τ(Δ) = (1/2iπ)∫_{C_apex} z e^{A z² + (B0-Δ) z}/((ϖ+z)(ϖ-z)) dz, A > 0."""
    deltas = np.asarray(deltas, float)
    if deltas.size == 0:
        return np.zeros(0, dtype=complex)
    d_min = float(np.min(deltas))
    rat = lambda z: z / ((varpi + z) * (varpi - z))
    logm = lambda z: (A * z * z + (B0 - d_min) * z).real + np.log(np.abs(rat(z)))
    L = measured_truncation(logm, Contour(apex, phi))
    gap = min(abs(apex - varpi), abs(apex + varpi))
    rule = cached_rule(float(apex), float(phi), int(n_nodes), round(L, 3),
                       round(0.5 * gap, 12) if gap < 0.1 else None)
    z = rule.nodes
    phase = A * z * z + B0 * z
    E = _exp(phase[None, :] - deltas[:, None] * z[None, :])
    return E @ (rule.weights * rat(z)) / (2j * math.pi)

# ---- Noyau de crossover -----------------------------------------------

class CrossKernel(MatrixKernel):
    name = "cross"

    def __init__(self, params: CrossKernelParams, n_nodes: int = RAY_NODES_PER_PANEL,
                 include_exponential_terms: Optional[bool] = None, stable: Optional[bool] = None):
        self.params = params
        self.k = params.k
        self.n_nodes = n_nodes
        self.varpi = params.varpi
        self.exp_terms = CROSS_R22_EXPONENTIAL_TERMS if include_exponential_terms is None \
            else include_exponential_terms
        self.stable = (self.varpi >= CROSS_STABLE_MIN_VARPI) if stable is None else stable
        if self.stable and self.varpi <= 0:
            raise ValueError(f"représentation entre pôles impossible pour ϖ={self.varpi} <= 0")
        v = self.varpi
        if v < 0:
            self.conj_rate = abs(v) + CONJ_RATE_DEFAULT
        elif self.exp_terms and v > 0:
            self.conj_rate = v + CONJ_RATE_DEFAULT
        else:
            self.conj_rate = CONJ_RATE_DEFAULT

    def _eta(self, i):
        return self.params.eta[i]

    def odd_part(self, i, x):
        # η_i = 0 : R22(i,x;i,y) = -sgn(d)e^{-ϖ|d|}/4 + partie lisse, d = x - y
        if self._eta(i) >= ETA_FLAT:
            return None, np.ones(np.shape(x))
        return OddProfile(-0.25, decay=max(self.varpi, 0.0)), np.ones(np.shape(x))

    def blocks(self, i, xi, j, xj):
        xi, xj = np.asarray(xi, float), np.asarray(xj, float)
        ei, ej, v = self._eta(i), self._eta(j), self.varpi
        X, Y = xi[:, None] + 0 * xj[None, :], xj[None, :] + 0 * xi[:, None]
        allx = np.concatenate([xi, xj])
        # I11
        r1 = airy_rule(1.0, allx, self.n_nodes)
        z, w = r1.nodes[:, None], r1.nodes[None, :]
        G11 = (z + ei - w - ej) / (z + w + ei + ej) * (z + v + ei) / (z + ei) * (w + v + ej) / (w + ej)
        Ex, Ey = cubic_rows(r1, xi), cubic_rows(r1, xj)
        K11 = Ex @ G11 @ Ey.T
        # I12 : contour en w à droite du pôle ϖ+η_j quand celui-ci est proche de 0
        K12 = self._i12(i, j, xi, xj, Ex, r1)
        if i < j:
            K12 = K12 + r12_closed(ei, ej, X, Y)
        K22 = self._k22(i, j, xi, xj, X, Y)
        return real_part(K11, "K^cross 11"), real_part(K12, "K^cross 12"), real_part(K22, "K^cross 22")

    def _i12(self, i, j, xi, xj, Ex, rz):
        ei, ej, v = self._eta(i), self._eta(j), self.varpi
        a_z = 1.0
        pole = v + ej
        lo = ej - ei - a_z
        if pole > 1.0:
            a_w, shifted = choose_apex(max(lo, 0.0), pole, preferred=1.0), False
        else:
            base = max(pole, lo, 0.0)
            a_w, shifted = base + 0.5, True
        rw = airy_rule(a_w, xj, self.n_nodes)
        z, w = rz.nodes[:, None], rw.nodes[None, :]
        G12 = (z + ei - w + ej) / (2 * (z + ei) * (z + ei + w - ej)) * (z + v + ei) / (-w + v + ej)
        out = Ex @ G12 @ cubic_rows(rw, xj).T
        if shifted:
            s = Ex @ ((rz.nodes + ei - v) / (2 * (rz.nodes + ei)))
            out = out + s[:, None] * _exp(a_exp(v, ej, xj))[None, :]
        return out

    def _i22(self, i, j, xi, xj, cz: float, cw: float):
        ei, ej, v = self._eta(i), self._eta(j), self.varpi
        rz, rw = airy_rule(cz, xi, self.n_nodes), airy_rule(cw, xj, self.n_nodes)
        z, w = rz.nodes[:, None], rw.nodes[None, :]
        G = (z - ei - w + ej) / (4 * (z - ei + w - ej)) / ((z - v - ei) * (w - v - ej))
        return cubic_rows(rz, xi) @ G @ cubic_rows(rw, xj).T

    def _k22(self, i, j, xi, xj, X, Y):
        ei, ej, v = self._eta(i), self._eta(j), self.varpi
        if self.stable:
            half = min(0.5 * v, 1.0)
            D = self._i22(i, j, xi, xj, ei + half, ej + half)
            F = self._r22_between
        else:
            D = self._i22(i, j, xi, xj, max(ei, ei + v) + 0.5, max(ej, ej + v) + 0.5)
            F = self._r22_unified
        R = self._antisym(F, i, j, X, Y)
        if self.exp_terms and v > 0:
            R = R + self._antisym(self._rank_two, i, j, X, Y)
        return D + R

    # -- morceaux de R22 sur la région x - η_i > y - η_j (tableaux 1-D) --

    def _term3(self, i, j, x, y, apex: float, between: bool):
        """(1/2iπ)∫_{C_apex} z e^{Q(z)}/((ϖ+z)(ϖ-z)) dz, Q quadratique en z."""
        ei, ej, v = self._eta(i), self._eta(j), self.varpi
        A = ei + ej
        C = ei ** 3 / 3 + ej ** 3 / 3 - x * ei - y * ej
        dlt = x - y
        if A < ETA_FLAT:
            if between:
                # résidu du pôle à droite, en |ϖ|
                return 0.5 * _exp(C - dlt * abs(v))
            return np.zeros(x.shape, dtype=complex)
        tau = quadratic_ray_integral(A, ei * ei - ej * ej, dlt, v, apex, self.n_nodes)
        return _exp(C) * tau

    def _r22_between(self, i, j, x, y):
        return -0.5 * self._term3(i, j, x, y, 0.0, True)

    def _r22_unified(self, i, j, x, y):
        ei, ej, v = self._eta(i), self._eta(j), self.varpi
        t1 = -0.25 * _exp(a_exp(v, ej, y)) * airy_pole_integral(x, ei - v, self.n_nodes)
        t2 = 0.25 * _exp(a_exp(v, ei, x)) * airy_pole_integral(y, ej - v, self.n_nodes)
        ex = -0.25 * _exp(a_exp(v, ei, x) + b_exp(v, ej, y))
        T = self._term3(i, j, x, y, abs(v) + 0.5, False)
        return t1 + t2 + ex - 0.5 * T

    def _rank_two(self, i, j, x, y):
        ei, ej, v = self._eta(i), self._eta(j), self.varpi
        return 0.25 * (_exp(b_exp(v, ei, x) + a_exp(v, ej, y)) - _exp(a_exp(v, ei, x) + b_exp(v, ej, y)))

    def _antisym(self, F: Callable, i, j, X, Y):
        ei, ej = self._eta(i), self._eta(j)
        X, Y = np.asarray(X, float), np.asarray(Y, float)
        u, d = X - ei, Y - ej
        out = np.zeros(X.shape, dtype=complex)
        up, dn = u > d, u < d
        eq = ~(up | dn)
        if up.any():
            out[up] = F(i, j, X[up], Y[up])
        if dn.any():
            out[dn] = -F(j, i, Y[dn], X[dn])
        if eq.any():
            out[eq] = 0.5 * (F(i, j, X[eq], Y[eq]) - F(j, i, Y[eq], X[eq]))
        return out

# ---- Noyau symplectique-unitaire ---------------------------------------

def su_r22_closed(eta_i: float, eta_j: float, X, Y) -> np.ndarray:
    """-½(1/2iπ)∫_{C_0} z e^{Q(z)} dz, intégrale gaussienne exacte (A = η_i+η_j > 0)."""
    X, Y = np.asarray(X, float), np.asarray(Y, float)
    A = eta_i + eta_j
    B = eta_i ** 2 - eta_j ** 2 - (X - Y)
    C = eta_i ** 3 / 3 + eta_j ** 3 / 3 - X * eta_i - Y * eta_j
    return B * _exp(C - B * B / (4 * A)) / (8 * math.sqrt(math.pi) * A ** 1.5)

def su_r22_quadrature(eta_i: float, eta_j: float, x: float, y: float,
                      n_nodes: int = RAY_NODES_PER_PANEL) -> float:
    """Même quantité par quadrature sur C_0^{π/3} (oracle)."""
    A = eta_i + eta_j
    B = eta_i ** 2 - eta_j ** 2 - (x - y)
    C = eta_i ** 3 / 3 + eta_j ** 3 / 3 - x * eta_i - y * eta_j
    logm = lambda z: (A * z * z + B * z).real + np.log(np.abs(z) + 1e-300)
    L = measured_truncation(logm, Contour(0.0, RAY_ANGLE))
    rule = cached_rule(0.0, RAY_ANGLE, int(n_nodes), round(L, 3))
    z = rule.nodes
    val = np.sum(rule.weights * z * np.exp(A * z * z + B * z)) / (2j * math.pi)
    return float((-0.5 * math.exp(C) * val).real)

class SuKernel(MatrixKernel):
    name = "SU"
    conj_rate = 0.0

    def __init__(self, params: CrossKernelParams, n_nodes: int = RAY_NODES_PER_PANEL):
        if any(e <= 0 for e in params.eta):
            raise ValueError(f"K^SU requiert η > 0 (reçu {params.eta}); utiliser K^cross pour η = 0")
        self.params = params
        self.k = params.k
        self.n_nodes = n_nodes

    def odd_part(self, i, x):
        # R22(i,x;i,y) = e^{C}·(-d)e^{-d²/4A}/(8√π A^{3/2}), A = 2η_i : pic de largeur √(8η_i)
        e = self.params.eta[i]
        A = 2.0 * e
        g = np.exp(e ** 3 / 3.0 - e * np.asarray(x, dtype=float))
        return OddProfile(-1.0 / (8.0 * math.sqrt(math.pi) * A ** 1.5), spread=A), g

    def blocks(self, i, xi, j, xj):
        xi, xj = np.asarray(xi, float), np.asarray(xj, float)
        ei, ej = self.params.eta[i], self.params.eta[j]
        X, Y = xi[:, None] + 0 * xj[None, :], xj[None, :] + 0 * xi[:, None]
        allx = np.concatenate([xi, xj])
        r1 = airy_rule(1.0, allx, self.n_nodes)
        z, w = r1.nodes[:, None], r1.nodes[None, :]
        Ex, Ey = cubic_rows(r1, xi), cubic_rows(r1, xj)
        K11 = Ex @ ((z + ei - w - ej) / (4 * (z + ei) * (w + ej) * (z + w + ei + ej))) @ Ey.T
        a_w = max(ej - ei - 1.0, 0.0) + 0.5
        rw = airy_rule(a_w, xj, self.n_nodes)
        w = rw.nodes[None, :]
        K12 = Ex @ ((z + ei - w + ej) / (2 * (z + ei) * (z + w + ei - ej))) @ cubic_rows(rw, xj).T
        if i < j:
            K12 = K12 + r12_closed(ei, ej, X, Y)
        rz, rw = airy_rule(ei + 0.5, xi, self.n_nodes), airy_rule(ej + 0.5, xj, self.n_nodes)
        z, w = rz.nodes[:, None], rw.nodes[None, :]
        K22 = cubic_rows(rz, xi) @ ((z - ei - w + ej) / (z - ei + w - ej)) @ cubic_rows(rw, xj).T
        K22 = K22 + su_r22_closed(ei, ej, X, Y)
        return real_part(K11, "K^SU 11"), real_part(K12, "K^SU 12"), real_part(K22, "K^SU 22")

def cross_kernel(params: CrossKernelParams, p: KernelPoint, q: KernelPoint, **kw) -> np.ndarray:
    return CrossKernel(params, **kw)(p, q)

def su_kernel(params: CrossKernelParams, p: KernelPoint, q: KernelPoint, **kw) -> np.ndarray:
    return SuKernel(params, **kw)(p, q)
