"""Noyau K^exp des temps de dernier passage H(n_i, m_i) à n fini.

K = I + R.  Toutes les intégrandes sont rationnelles en z, w fois e^{-xz-yw} :
en refermant les contours à droite, chaque partie devient une somme finie de
résidus (pôles en 1/2 et en (2α-1)/2), calculée exactement.  Les parties I
sont des résidus doubles, obtenus par extraction de coefficients de Taylor.

La conjugaison e^{±εx} de la Fredholm est repliée dans les exposants avant
exponentiation : les termes en e^{(1-2α)x/2} (α < 1/2) ne débordent jamais.

``exact=False`` évalue les parties I par quadrature sur rayons (contrôle).
"""
from __future__ import annotations
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import comb

from .config import RAY_ANGLE, RAY_NODES_PER_PANEL, MAP_SCALE_EXP, CONJ_RATE_DEFAULT, EXP_CLIP
from .contours import Contour, measured_truncation, residue_sum, laurent_rows, choose_apex, TWO_PI_I
from .kernels import MatrixKernel, KernelPoint, OddProfile, cached_rule, real_part

HALF_TOL = 1e-12    # |α - 1/2| en dessous : branche α = 1/2

@dataclass(frozen=True)
class ExpKernelParams:
    alpha: float
    n: Tuple[int, ...]
    m: Tuple[int, ...]

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha={self.alpha} doit être > 0")
        if len(self.n) != len(self.m) or not self.n:
            raise ValueError(f"n={self.n} et m={self.m} de longueurs incompatibles")
        if any(b <= a for a, b in zip(self.n, self.n[1:])):
            raise ValueError(f"n doit être strictement croissant: {self.n}")
        if any(b >= a for a, b in zip(self.m, self.m[1:])):
            raise ValueError(f"m doit être strictement décroissant: {self.m}")
        for ni, mi in zip(self.n, self.m):
            if not (ni >= mi >= 1):
                raise ValueError(f"contrainte n_i >= m_i >= 1 violée: ({ni}, {mi})")

    @property
    def k(self) -> int:
        return len(self.n)

    @property
    def branch(self) -> str:
        if abs(self.alpha - 0.5) < HALF_TOL:
            return "half"
        return "above" if self.alpha > 0.5 else "below"

def _lin(c0: float, c1: float, e: int):
    return (complex(c0), complex(c1), int(e))

def _distinct(poles: Sequence[float]) -> List[float]:
    out: List[float] = []
    for p in poles:
        if all(abs(p - q) >= 1e-12 for q in out):
            out.append(p)
    return out

# ---- Résidus doubles ----------------------------------------------------

def pair_coefficients(z0: float, w0: float, kz: int, kw: int) -> np.ndarray:
    """C[a,b] = [s^a t^b] de (z-w)/(z+w) en z = z0+s, w = w0+t (a < kz, b < kw)."""
    S, d = z0 + w0, z0 - w0
    if abs(S) < 1e-12:
        raise ValueError(f"(z-w)/(z+w) singulier en ({z0}, {w0})")
    a, b = np.arange(kz)[:, None], np.arange(kw)[None, :]

    def inv(a, b):
        # [s^a t^b] de 1/(S+s+t)
        aa, bb = np.maximum(a, 0), np.maximum(b, 0)
        val = comb(aa + bb, aa) * (-1.0) ** (aa + bb) / S ** (aa + bb + 1)
        return np.where((a >= 0) & (b >= 0), val, 0.0)

    return d * inv(a, b) + inv(a - 1, b) - inv(a, b - 1)

def double_residue(fz, fw, z0: float, w0: float, xs: np.ndarray, ys: np.ndarray,
                   rate_x: float = 0.0, rate_y: float = 0.0) -> np.ndarray:
    """Res_{z=z0} Res_{w=w0} de (z-w)/(z+w)·fz(z)·fw(w)·e^{-xz-yw}·e^{rate_x x + rate_y y}.

    ``fz``, ``fw`` : listes de facteurs linéaires.  Résultat len(xs)×len(ys).
    """
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    Rz = laurent_rows(fz, z0, lam=-xs, offset=rate_x * xs)
    Rw = laurent_rows(fw, w0, lam=-ys, offset=rate_y * ys)
    if Rz.shape[-1] == 0 or Rw.shape[-1] == 0:
        return np.zeros((xs.size, ys.size), dtype=complex)
    C = pair_coefficients(z0, w0, Rz.shape[-1], Rw.shape[-1])
    return Rz @ C[::-1, ::-1] @ Rw.T

# ---- Noyau ----------------------------------------------------------------

class ExpKernel(MatrixKernel):
    name = "exp"

    def __init__(self, params: ExpKernelParams, exact: bool = True, n_nodes: int = RAY_NODES_PER_PANEL,
                 a_z: Optional[float] = None, a_w: Optional[float] = None,
                 b: Optional[float] = None, c11: float = 0.25, phi: float = RAY_ANGLE):
        self.params = params
        self.k = params.k
        self.exact = exact
        self.n_nodes, self.phi = n_nodes, phi
        al = params.alpha
        self.p = al - 0.5                    # (2α-1)/2
        # ε au milieu de l'intervalle admissible : (0, 1/2) si α >= 1/2, ((1-2α)/2, 1/2) sinon
        self.conj_rate = CONJ_RATE_DEFAULT if al >= 0.5 else (1.0 - al) / 2.0
        # décroissance conjuguée en e^{-x/4} (α >= 1/2) ou e^{-αx/2}
        self.map_scale = MAP_SCALE_EXP * max(1.0, 0.5 / al)
        self.c11 = c11
        self.a_z = 0.25 if a_z is None else a_z
        if not (0 < self.a_z < 0.5):
            raise ValueError(f"a_z={self.a_z} hors de (0, 1/2)")
        # quadrature : pour α <= 1/2 le contour en w passe à droite de (2α-1)/2
        self.shift_w = self.p <= 0
        lo = max(self.p, -self.a_z) if self.shift_w else -self.a_z
        hi = 0.5 if self.shift_w else min(self.p, 0.5)
        self.a_w = choose_apex(max(lo, 0.0), hi) if a_w is None else a_w
        if not (lo < self.a_w < hi):
            raise ValueError(f"a_w={self.a_w} hors de ({lo}, {hi})")
        hi_b = min(self.p, 0.5) if self.p > 0 else 0.5
        self.b = choose_apex(0.0, hi_b) if b is None else b
        if not (0 < self.b < hi_b):
            raise ValueError(f"b={self.b} hors de (0, {hi_b})")

    def odd_part(self, i, x):
        # R22(i,x;i,y) saute de -1/2 en x = y seulement quand n_i = m_i
        phi = OddProfile(-0.25) if self.params.n[i] == self.params.m[i] else None
        return phi, np.ones(np.shape(x))

    # -- facteurs rationnels par composante --

    def f11(self, i):
        """(1+2z)^n (2z+2α-1) / ((1-2z)^m · 2z)."""
        n, m, al = self.params.n[i], self.params.m[i], self.params.alpha
        return [_lin(1, 2, n), _lin(2 * al - 1, 2, 1), _lin(1, -2, -m), _lin(0, 2, -1)]

    def f22(self, i):
        """(1+2z)^m / ((1-2z)^n (2α-1-2z))."""
        n, m, al = self.params.n[i], self.params.m[i], self.params.alpha
        return [_lin(1, 2, m), _lin(1, -2, -n), _lin(2 * al - 1, -2, -1)]

    @staticmethod
    def _eval(factors, z):
        out = np.ones(np.shape(z), dtype=complex)
        for c0, c1, e in factors:
            out = out * (c0 + c1 * z) ** e
        return out

    # -- blocs --

    def blocks(self, i, xi, j, xj):
        return self.conjugated_blocks(i, xi, j, xj, 0.0)

    def conjugated_blocks(self, i, xi, j, xj, rate):
        xi, xj = np.asarray(xi, float), np.asarray(xj, float)
        x_min = float(min(xi.min(), xj.min()))
        if x_min <= 0:
            raise ValueError(f"K^exp requiert des arguments > 0 (min={x_min})")
        X, Y = np.broadcast_arrays(xi[:, None], xj[None, :])
        if self.exact:
            K11, K12, K22 = self._residue_parts(i, xi, j, xj, rate)
        else:
            K11, K12, K22 = self._ray_parts(i, xi, j, xj, x_min)
            if rate:
                f = lambda arg: np.exp(np.minimum(arg, EXP_CLIP))
                K11, K12, K22 = K11 * f(rate * (X + Y)), K12 * f(rate * (X - Y)), K22 * f(-rate * (X + Y))
        if i < j:
            K12 = K12 + self._r12(i, j, X, Y, rate)
        K22 = K22 + self._antisym(self._r22, i, j, X, Y, rate)
        return real_part(K11, "K^exp 11"), real_part(K12, "K^exp 12"), real_part(K22, "K^exp 22")

    def _residue_parts(self, i, xi, j, xj, rate):
        """Parties I par résidus doubles : contours refermés à droite, w puis z."""
        p = self.p
        K11 = double_residue(self.f11(i), self.f11(j), 0.5, 0.5, xi, xj, rate, rate)
        # w : pôles en (2α-1)/2 et 1/2 (a_w < (2α-1)/2) ; z : pôle en 1/2
        K12 = sum(double_residue(self.f11(i), self.f22(j), 0.5, w0, xi, xj, rate, -rate)
                  for w0 in _distinct([0.5, p]))
        poles = _distinct([0.5, p]) if self.params.branch == "above" else [0.5]
        K22 = sum(double_residue(self.f22(i), self.f22(j), z0, w0, xi, xj, -rate, -rate)
                  for z0 in poles for w0 in poles)
        return K11, K12, K22

    # -- quadrature sur rayons (contrôle) --

    def _rule(self, apex: float, P: Callable, x_min: float, poles: Sequence[float]):
        L = measured_truncation(lambda z: np.log(np.abs(P(z))) - x_min * z.real, Contour(apex, self.phi))
        gap = min(abs(apex - q) for q in poles) if poles else None
        resolve = 0.5 * gap if gap is not None and gap < 0.1 else None
        return cached_rule(float(apex), float(self.phi), int(self.n_nodes), round(L, 3),
                           None if resolve is None else round(resolve, 12))

    @staticmethod
    def _rows(rule, xs, P):
        z = rule.nodes
        w = rule.weights * P(z)
        return np.exp(-np.asarray(xs)[:, None] * z[None, :]) * w[None, :] / TWO_PI_I

    def _ray_parts(self, i, xi, j, xj, x_min):
        p = self.p
        Pi = lambda z: 2 * z * self._eval(self.f11(i), z)
        Pj = lambda z: 2 * z * self._eval(self.f11(j), z)
        rz = self._rule(self.c11, Pi, x_min, [0.0, 0.5])
        rw = self._rule(self.c11, Pj, x_min, [0.0, 0.5])
        z, w = rz.nodes[:, None], rw.nodes[None, :]
        K11 = self._rows(rz, xi, Pi) @ ((z - w) / (4 * z * w * (z + w))) @ self._rows(rw, xj, Pj).T
        Qj = lambda w: self._eval(self.f22(j), w)
        rz = self._rule(self.a_z, Pi, x_min, [0.0, 0.5])
        rw = self._rule(self.a_w, Qj, x_min, [p, 0.5, -self.a_z])
        z, w = rz.nodes[:, None], rw.nodes[None, :]
        K12 = self._rows(rz, xi, Pi) @ ((z - w) / (2 * z * (z + w))) @ self._rows(rw, xj, Qj).T
        if self.shift_w:
            K12 = K12 + self._i12_residue(i, j, xi[:, None], xj[None, :])
        Ri = lambda z: self._eval(self.f22(i), z)
        poles = [0.5, p] if p > 0 else [0.5]
        rz = self._rule(self.b, Ri, x_min, poles)
        rw = self._rule(self.b, Qj, x_min, poles)
        z, w = rz.nodes[:, None], rw.nodes[None, :]
        K22 = self._rows(rz, xi, Ri) @ ((z - w) / (z + w)) @ self._rows(rw, xj, Qj).T
        return K11, K12, K22

    def _i12_residue(self, i, j, X, Y):
        """Terme ajouté quand le contour en w franchit le pôle (2α-1)/2."""
        ni, mi = self.params.n[i], self.params.m[i]
        nj, mj = self.params.n[j], self.params.m[j]
        al, p = self.params.alpha, self.p
        cj = (2 * al) ** mj / (2 - 2 * al) ** nj
        X, Y = np.broadcast_arrays(X, Y)
        f = [_lin(-p, 1, 1), _lin(0, 1, -1), _lin(1, 2, ni), _lin(1, -2, -mi)]
        # (1/2iπ)∫_{C_{a_z}} (z-p)/z ... e^{-xz} dz = -Σ résidus à droite (pôle 1/2)
        s = -residue_sum(f, [0.5], lam=-X, log_scale=-p * Y)
        return 0.5 * cj * s

    # -- parties R (résidus exacts) --

    def _r12(self, i, j, X, Y, rate=0.0):
        ni, mi = self.params.n[i], self.params.m[i]
        nj, mj = self.params.n[j], self.params.m[j]
        D = np.abs(X - Y)
        f = [_lin(1, 2, ni - nj), _lin(1, -2, mj - mi)]
        return residue_sum(f, [0.5], lam=-D, log_scale=rate * (X - Y))

    def _r22(self, i, j, x, y, rate=0.0):
        """R22(i,x;j,y)·e^{-ε(x+y)} pour x > y (tableaux 1-D)."""
        br = self.params.branch
        off = -rate * (x + y)
        if br == "above":
            return self._core22(i, j, x - y, _distinct([0.5, self.p]), off)
        if br == "below":
            return self._r22_below(i, j, x, y, off)
        return self._r22_half(i, j, x, y, off)

    def _core22(self, i, j, d, poles, off):
        ni, mi = self.params.n[i], self.params.m[i]
        nj, mj = self.params.n[j], self.params.m[j]
        al = self.params.alpha
        f = [_lin(1, 2, mi - nj), _lin(1, -2, mj - ni), _lin(0, 2, 1),
             _lin(2 * al - 1, -2, -1), _lin(2 * al - 1, 2, -1)]
        # -(1/2iπ)∫ ... = +Σ résidus à droite
        return residue_sum(f, poles, lam=-d, log_scale=off)

    def _r22_below(self, i, j, x, y, off):
        al, q = self.params.alpha, 0.5 - self.params.alpha
        ni, mi = self.params.n[i], self.params.m[i]
        nj, mj = self.params.n[j], self.params.m[j]
        ci = (2 * al) ** mi / (2 - 2 * al) ** ni
        cj = (2 * al) ** mj / (2 - 2 * al) ** nj
        fi = [_lin(1, 2, mi), _lin(1, -2, -ni), _lin(2 * al - 1, 2, -1)]
        fj = [_lin(1, 2, mj), _lin(1, -2, -nj), _lin(2 * al - 1, 2, -1)]
        # contours entre ±(1-2α)/2 : pôles à droite en 1/2 et en (1-2α)/2
        A = 0.5 * cj * residue_sum(fi, [0.5, q], lam=-x, log_scale=q * y + off)
        B = -0.5 * ci * residue_sum(fj, [0.5, q], lam=-y, log_scale=q * x + off)
        C = self._core22(i, j, x - y, [0.5, q], off)
        return A + B + C

    def _r22_half(self, i, j, x, y, off):
        ni, mi = self.params.n[i], self.params.m[i]
        nj, mj = self.params.n[j], self.params.m[j]
        fi = [_lin(1, 2, mi), _lin(1, -2, -ni), _lin(0, 4, -1)]
        fj = [_lin(1, 2, mj), _lin(1, -2, -nj), _lin(0, 4, -1)]
        fc = [_lin(1, 2, mi - nj), _lin(1, -2, mj - ni), _lin(0, 2, -1)]
        t1 = residue_sum(fi, [0.5], lam=-x, log_scale=off)
        t2 = -residue_sum(fj, [0.5], lam=-y, log_scale=off)
        t3 = -residue_sum(fc, [0.5], lam=-(x - y), log_scale=off)
        return t1 + t2 + t3 - 0.25 * np.exp(np.maximum(off, -EXP_CLIP))

    @staticmethod
    def _antisym(F, i, j, X, Y, rate=0.0):
        X, Y = np.broadcast_arrays(np.asarray(X, float), np.asarray(Y, float))
        out = np.zeros(X.shape, dtype=complex)
        up, dn = X > Y, X < Y
        eq = ~(up | dn)
        if up.any():
            out[up] = F(i, j, X[up], Y[up], rate)
        if dn.any():
            out[dn] = -F(j, i, Y[dn], X[dn], rate)
        if eq.any():
            out[eq] = 0.5 * (F(i, j, X[eq], Y[eq], rate) - F(j, i, Y[eq], X[eq], rate))
        return out

def exp_kernel(params: ExpKernelParams, p: KernelPoint, q: KernelPoint, **kw) -> np.ndarray:
    return ExpKernel(params, **kw)(p, q)
