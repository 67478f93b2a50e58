"""Quadrature sur les contours C_a^φ et résidus exacts.

Un contour C_a^φ est la réunion de deux demi-droites issues de l'apex ``a``,
parcourue de a+∞e^{-iφ} vers a+∞e^{+iφ}.  La règle de quadrature est un
Gauss-Legendre composite sur des panneaux de largeur géométrique, le poids
de chaque noeud contient déjà le facteur de direction (+e^{iφ} sur la demi-droite
haute, -e^{-iφ} sur la demi-droite basse parcourue vers l'apex).
"""
from __future__ import annotations
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

from .config import (
    RAY_ANGLE, RAY_PANELS, RAY_PANEL_RATIO, RAY_NODES_PER_PANEL,
    DECAY_LOG_TOL, MIN_TRUNCATION, MAX_TRUNCATION, APEX_MARGIN, EXP_CLIP,
)

TWO_PI_I = 2j * math.pi

@dataclass(frozen=True)
class Contour:
    apex: complex
    phi: float = RAY_ANGLE

    def __post_init__(self):
        if not (0.0 < self.phi < math.pi):
            raise ValueError(f"angle φ={self.phi} hors de (0, π)")

    def point(self, u: np.ndarray, upper: bool = True) -> np.ndarray:
        d = np.exp(1j * self.phi) if upper else np.exp(-1j * self.phi)
        return self.apex + np.asarray(u) * d

@dataclass(frozen=True)
class QuadratureRule:
    contour: Contour
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)   # poids pour ∫ dz (direction incluse)
    length: float = 0.0
    upper_last: int = -1                      # indice du dernier noeud (bout haut)
    lower_last: int = 0                       # indice du dernier noeud (bout bas)

    @property
    def size(self) -> int:
        return int(self.nodes.shape[0])

    def end_indices(self) -> Tuple[int, int]:
        return self.lower_last, self.upper_last

def panel_edges(length: float, panels: int, ratio: float) -> np.ndarray:
    if ratio == 1.0:
        widths = np.full(panels, length / panels)
    else:
        w0 = length * (ratio - 1.0) / (ratio ** panels - 1.0)
        widths = w0 * ratio ** np.arange(panels)
    return np.concatenate([[0.0], np.cumsum(widths)])

def composite_gauss_legendre(length: float, n_nodes: int, panels: int = RAY_PANELS,
                             ratio: float = RAY_PANEL_RATIO) -> Tuple[np.ndarray, np.ndarray]:
    """Noeuds/poids réels sur [0, length], panneaux de largeur géométrique."""
    t, w = np.polynomial.legendre.leggauss(n_nodes)
    edges = panel_edges(length, panels, ratio)
    lo, hi = edges[:-1, None], edges[1:, None]
    u = (0.5 * (hi - lo) * t[None, :] + 0.5 * (hi + lo)).ravel()
    wu = (0.5 * (hi - lo) * w[None, :]).ravel()
    return u, wu

def ray_rule(a: complex, phi: float = RAY_ANGLE, n_nodes: int = RAY_NODES_PER_PANEL,
             L: float = 8.0, panels: int = RAY_PANELS, ratio: float = RAY_PANEL_RATIO) -> QuadratureRule:
    """Règle approchant ∫_{C_a^φ} f(z) dz (sans le facteur 1/2iπ)."""
    if n_nodes < 4:
        raise ValueError(f"n_nodes={n_nodes} < 4")
    if not (L > 0) or not np.isfinite(L):
        raise ValueError(f"longueur de troncature invalide: L={L}")
    if panels < 1 or ratio <= 0:
        raise ValueError(f"panneaux invalides: panels={panels}, ratio={ratio}")
    contour = Contour(complex(a), phi)
    u, wu = composite_gauss_legendre(L, n_nodes, panels, ratio)
    up, dn = np.exp(1j * phi), np.exp(-1j * phi)
    # demi-droite basse parcourue de l'infini vers l'apex, puis demi-droite haute
    nodes = np.concatenate([contour.apex + u[::-1] * dn, contour.apex + u * up])
    weights = np.concatenate([-dn * wu[::-1], up * wu])
    return QuadratureRule(contour, nodes, weights, float(L), upper_last=nodes.size - 1, lower_last=0)

def auto_truncation(c: float, s: float, q: float = 0.0, log_tol: float = DECAY_LOG_TOL) -> float:
    """Plus petit L tel que exp(-cL³/3 - qL² + |s|L) < e^{-log_tol}.

    ``q`` est le coefficient quadratique optionnel (positif s'il aide la décroissance).
    """
    if c <= 0:
        raise ValueError(f"coefficient cubique c={c} <= 0 : fournir L explicitement")
    s = abs(s)
    g = lambda L: c * L ** 3 / 3.0 + q * L * L - s * L - log_tol
    hi = max(MIN_TRUNCATION, 1.0)
    while g(hi) < 0:
        hi *= 2.0
        if hi > MAX_TRUNCATION:
            raise RuntimeError(f"troncature > {MAX_TRUNCATION} (c={c}, s={s}, q={q})")
    lo = 0.0 if g(0.0) < 0 else None
    if lo is None:
        return MIN_TRUNCATION
    return max(MIN_TRUNCATION, brentq(g, lo, hi, xtol=1e-10))

def airy_ray_truncation(apex: float, x_min: float, phi: float = RAY_ANGLE, sign: int = 1,
                        x_max: Optional[float] = None) -> float:
    """L pour les intégrandes e^{sign·(z³/3 - xz)} le long de C_apex^φ, x dans [x_min, x_max]."""
    # Re[sign·((a+u e^{iφ})³/3 - x(a+u e^{iφ}))] - valeur à l'apex
    #   = sign·(cos(3φ) u³/3 + a cos(2φ) u² + (a² - x) cos(φ) u)
    c = -sign * math.cos(3 * phi)
    q = -sign * apex * math.cos(2 * phi)
    slope = sign * math.cos(phi)
    x_ref = x_min if slope > 0 else (x_max if x_max is not None else x_min)
    s = max(0.0, (apex * apex - x_ref) * slope)
    return auto_truncation(c, s, q)

def measured_truncation(log_modulus: Callable[[np.ndarray], np.ndarray], contour: Contour,
                        log_tol: float = DECAY_LOG_TOL) -> float:
    """L mesuré numériquement : log|f| le long des deux demi-droites.

    Utilisé pour les intégrandes à n fini, où la décroissance n'est pas cubique.
    """
    def worst(u: float) -> float:
        z = np.array([contour.point(u, True), contour.point(u, False)])
        with np.errstate(divide="ignore"):
            return float(np.max(log_modulus(z)))
    ref = max(worst(u) for u in (0.0, 0.25, 0.5, 1.0))
    if not np.isfinite(ref):
        raise RuntimeError(f"intégrande nulle ou non finie près de l'apex {contour.apex}")
    L = MIN_TRUNCATION
    while worst(L) > ref - log_tol:
        L *= 1.5
        if L > MAX_TRUNCATION:
            raise RuntimeError(
                f"intégrande non décroissante sur C_{contour.apex}: augmenter L au-delà de {MAX_TRUNCATION}")
    return L

def _check_decay(vals: np.ndarray, rule: QuadratureRule, tol: float = 1e-12):
    mags = np.abs(vals)
    peak = float(np.max(mags)) if mags.size else 0.0
    if peak == 0.0 or not np.isfinite(peak):
        if not np.isfinite(peak):
            raise RuntimeError("intégrande non finie sur le contour")
        return
    i0, i1 = rule.end_indices()
    end = max(float(np.max(mags[..., i0])), float(np.max(mags[..., i1])))
    if end > tol * peak:
        raise RuntimeError(
            f"décroissance insuffisante aux extrémités ({end:.2e} vs pic {peak:.2e}) — augmenter L={rule.length}")

def integrate1(f: Callable[[np.ndarray], np.ndarray], rule: QuadratureRule,
               normalized: bool = True, check: bool = True) -> complex:
    """(1/2iπ)∫ f(z) dz le long du contour de ``rule``."""
    vals = np.asarray(f(rule.nodes), dtype=complex)
    if check:
        _check_decay(vals, rule)
    s = complex(np.sum(vals * rule.weights))
    return s / TWO_PI_I if normalized else s

def integrate2(f: Callable[[np.ndarray, np.ndarray], np.ndarray], rule_z: QuadratureRule,
               rule_w: QuadratureRule, normalized: bool = True) -> complex:
    """Somme tensorielle (1/2iπ)²∫∫ f(z,w) dz dw."""
    Z, W = rule_z.nodes[:, None], rule_w.nodes[None, :]
    vals = np.asarray(f(Z, W), dtype=complex)
    s = complex(rule_z.weights @ vals @ rule_w.weights)
    return s / TWO_PI_I ** 2 if normalized else s

# ---- Résidus exacts ---------------------------------------------------

LinearFactor = Tuple[complex, complex, int]   # (c0, c1, e) -> (c0 + c1 z)^e

def _series_power(A: complex, c1: complex, e: int, order: int) -> np.ndarray:
    """Taylor de (A + c1 t)^e à l'ordre ``order``."""
    j = np.arange(order - 1)
    ratios = (e - j) / (j + 1.0) * (c1 / A)
    return (A ** e) * np.concatenate([[1.0], np.cumprod(ratios)])

def laurent_rows(factors: Sequence[LinearFactor], pole: complex, lam=0.0, const: complex = 1.0,
                 offset=0.0, tol: float = 1e-12) -> np.ndarray:
    """Partie principale de const·e^{lam z + offset}·Π(c0+c1 z)^e en ``pole``.

    Renvoie R[..., j] = [t^j] de t^k·f(pole + t), j < k (k ordre du pôle) :
    le résidu est la dernière colonne.  L'exponentielle n'est formée qu'une
    fois, en lam·pole + offset ; en dessous de -EXP_CLIP l'entrée vaut 0.
    """
    lam = np.asarray(lam, dtype=complex)
    offset = np.broadcast_to(np.asarray(offset, dtype=complex), lam.shape)
    k = 0
    lead = complex(const)
    regular: List[Tuple[complex, complex, int]] = []
    for c0, c1, e in factors:
        A = c0 + c1 * pole
        if abs(A) < tol:
            k -= e
            lead *= c1 ** e
        else:
            regular.append((A, c1, e))
    if k <= 0:
        return np.zeros(lam.shape + (0,), dtype=complex)
    s = np.zeros(k, dtype=complex)
    s[0] = 1.0
    for A, c1, e in regular:
        s = np.convolve(s, _series_power(A, c1, e, k))[:k]
    j = np.arange(k)
    lam_pows = lam[..., None] ** j / np.exp(gammaln(j + 1))
    # coefficient t^r de s(t)·e^{lam t}
    poly = np.stack([lam_pows[..., :r + 1] @ s[r::-1] for r in range(k)], axis=-1)
    expo = lam * pole + offset
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        scale = np.exp(np.minimum(expo.real, EXP_CLIP) + 1j * expo.imag)
        out = lead * scale[..., None] * poly
    return np.where((expo.real < -EXP_CLIP)[..., None], 0.0, out)

def residue_at(factors: Sequence[LinearFactor], pole: complex, lam=0.0, const: complex = 1.0,
               log_scale=0.0, tol: float = 1e-12) -> np.ndarray:
    """Résidu en ``pole`` de const·e^{lam z + log_scale}·Π(c0+c1 z)^e, vectorisé en lam."""
    rows = laurent_rows(factors, pole, lam, const, log_scale, tol)
    if rows.shape[-1] == 0:
        return np.zeros(rows.shape[:-1], dtype=complex)
    return rows[..., -1]

def residue_sum(factors: Sequence[LinearFactor], poles: Iterable[complex], lam=0.0,
                const: complex = 1.0, log_scale=0.0) -> np.ndarray:
    """Somme des résidus aux pôles donnés (doublons ignorés)."""
    seen: List[complex] = []
    total = np.zeros(np.shape(lam), dtype=complex)
    for p in poles:
        if any(abs(p - q) < 1e-12 for q in seen):
            continue
        seen.append(p)
        total = total + residue_at(factors, p, lam, const, log_scale)
    return total

# ---- Choix des apex ---------------------------------------------------

def choose_apex(lo: float, hi: float, preferred: Optional[float] = None,
                margin: float = APEX_MARGIN) -> float:
    """Apex dans l'intervalle ouvert (lo, hi), bornes infinies acceptées.

    Sans préférence : milieu (ou bord fini ± 1).  Avec préférence : valeur
    ramenée à distance min(width/4, margin) des bords.
    """
    if not lo < hi:
        raise ValueError(f"aucun apex admissible dans ({lo}, {hi})")
    finite_lo, finite_hi = math.isfinite(lo), math.isfinite(hi)
    if finite_lo and finite_hi:
        gap = min(0.25 * (hi - lo), margin)
        if preferred is None:
            return 0.5 * (lo + hi)
        return min(max(preferred, lo + gap), hi - gap)
    if preferred is None:
        if finite_lo:
            return lo + 1.0
        if finite_hi:
            return hi - 1.0
        return 0.0
    if finite_lo:
        return max(preferred, lo + margin)
    if finite_hi:
        return min(preferred, hi - margin)
    return preferred
