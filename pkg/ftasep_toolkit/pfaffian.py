"""Pfaffiens denses et déterminants / Pfaffiens de Fredholm (Nyström).

Discrétisation : sur chaque composante [h_i, ∞) on pose x = h_i + s·u/(1-u),
u ∈ (0,1) aux noeuds de Gauss-Legendre.  Les blocs 2×2 sont pondérés par
√(w_a w_b) et entrelacés noeud par noeud (composante 1 croissante, puis 2, ...).
"""
from __future__ import annotations
import math
import itertools
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .config import (
    FREDHOLM_NODES, FREDHOLM_NODES_VERIFY, PIVOT_FLOOR, MAP_SCALE_AIRY,
)
from .kernels import OddProfile
from .utils import env_int, env_flag

EDGE_TOL = 1e-8          # entrée pondérée maximale tolérée au dernier noeud
ODD_GRADING = 1e-8       # premier panneau autour de u_a pour les profils impairs
ODD_PANEL_NODES = 32     # noeuds de Gauss-Legendre par panneau
SERIES_BATCH = 200_000   # taille des paquets de l'oracle par série

# ---- Algèbre ----------------------------------------------------------

@dataclass
class SkewMatrix:
    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"matrice non carrée: {a.shape}")
        if a.shape[0] % 2:
            raise ValueError(f"dimension impaire: {a.shape[0]}")
        self.data = 0.5 * (a - a.T)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

def pfaffian(A) -> float:
    """Pf(A) par élimination de Parlett-Reid (A = L T Lᵀ) avec pivot partiel."""
    S = A if isinstance(A, SkewMatrix) else SkewMatrix(A)
    a = S.data.copy()
    n = a.shape[0]
    if n == 0:
        return 1.0
    pf = 1.0
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.argmax(np.abs(a[k + 1:, k])))
        if kp != k + 1:
            a[[k + 1, kp], :] = a[[kp, k + 1], :]
            a[:, [k + 1, kp]] = a[:, [kp, k + 1]]
            pf = -pf
        piv = a[k, k + 1]
        if abs(piv) < PIVOT_FLOOR:
            return 0.0
        pf *= piv
        if k + 2 < n:
            tau = a[k, k + 2:] / piv
            col = a[k + 2:, k + 1].copy()
            a[k + 2:, k + 2:] += np.outer(tau, col) - np.outer(col, tau)
    return float(pf)

def _pf_expand(a: np.ndarray) -> np.ndarray:
    """Pfaffiens d'une pile (..., 2r, 2r) par développement sur la première ligne."""
    n = a.shape[-1]
    if n == 0:
        return np.ones(a.shape[:-2])
    if n == 2:
        return a[..., 0, 1]
    out = np.zeros(a.shape[:-2])
    rest = np.arange(1, n)
    for pos, j in enumerate(rest):
        keep = np.delete(rest, pos)
        sub = a[..., keep[:, None], keep[None, :]]
        out = out + (-1) ** pos * a[..., 0, j] * _pf_expand(sub)
    return out

# ---- Domaines et noeuds -----------------------------------------------

@dataclass(frozen=True)
class DomainDk:
    thresholds: Tuple[float, ...]

    def __post_init__(self):
        if len(self.thresholds) < 1:
            raise ValueError("domaine vide: au moins une composante requise")
        if any(math.isnan(h) for h in self.thresholds):
            raise ValueError(f"seuil NaN dans {self.thresholds}")

    @property
    def k(self) -> int:
        return len(self.thresholds)

@dataclass(frozen=True)
class QuadSpec:
    n_nodes: int = FREDHOLM_NODES
    scale: Optional[float] = None      # None -> échelle propre au noyau

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ValueError(f"n_nodes={self.n_nodes} < 2")

    def doubled(self) -> "QuadSpec":
        return replace(self, n_nodes=2 * self.n_nodes)

def default_spec(verify: Optional[bool] = None) -> QuadSpec:
    """Résolution par défaut, modifiable par KPZ_NODES / KPZ_VERIFY."""
    if verify is None:
        verify = env_flag("KPZ_VERIFY", False)
    base = FREDHOLM_NODES_VERIFY if verify else FREDHOLM_NODES
    return QuadSpec(n_nodes=env_int("KPZ_NODES", base))

@dataclass
class NodeSet:
    comp: np.ndarray = field(repr=False)   # indice de composante (0-based)
    x: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    last: List[int] = field(default_factory=list)   # dernier noeud de chaque composante
    wu: np.ndarray = field(default=None, repr=False)   # poids de Gauss-Legendre sur (0,1)
    dx: np.ndarray = field(default=None, repr=False)   # jacobien dx/du aux noeuds
    scale: float = MAP_SCALE_AIRY

    @property
    def size(self) -> int:
        return int(self.x.size)

def discretize(domain: DomainDk, n_nodes: int, scale: float = MAP_SCALE_AIRY) -> NodeSet:
    u, wu = np.polynomial.legendre.leggauss(n_nodes)
    u, wu = 0.5 * (u + 1.0), 0.5 * wu
    xs, ws, cs, last = [], [], [], []
    count = 0
    for i, h in enumerate(domain.thresholds):
        if math.isinf(h) and h > 0:
            continue   # composante vide
        if not math.isfinite(h):
            raise ValueError(f"seuil {h} non fini pour la composante {i + 1}")
        xs.append(h + scale * u / (1.0 - u))
        ws.append(scale * wu / (1.0 - u) ** 2)
        cs.append(np.full(n_nodes, i))
        count += n_nodes
        last.append(count - 1)
    if not xs:
        return NodeSet(np.zeros(0, int), np.zeros(0), np.zeros(0), [], np.zeros(0), np.zeros(0), scale)
    reps = len(xs)
    return NodeSet(np.concatenate(cs), np.concatenate(xs), np.concatenate(ws), last,
                   np.tile(wu, reps), np.tile(scale / (1.0 - u) ** 2, reps), scale)

@lru_cache(maxsize=16)
def sign_weights(n_nodes: int) -> np.ndarray:
    """P[a,b] = ∫_0^1 sgn(u_a - v) ℓ_b(v) dv aux noeuds de Gauss-Legendre de (0,1).

    ℓ_b est la base de Lagrange ; √(wu_a/wu_b)·P[a,b] est anti-symétrique.
    """
    t, w = np.polynomial.legendre.leggauss(n_nodes)
    V = np.polynomial.legendre.legvander(t, n_nodes)
    # ∫_{-1}^{τ} P_k = (P_{k+1}(τ) - P_{k-1}(τ))/(2k+1)
    inner = (V[:, 2:] - V[:, :-2]) @ V[:, 1:-1].T
    return (t[:, None] + inner) * (0.5 * w)[None, :]

def _graded_edges(c: float, delta: float) -> np.ndarray:
    """Bords de panneaux sur [0, 1], géométriques (raison 2) autour de c."""
    steps = delta * 2.0 ** np.arange(64)
    left = c - steps[steps < c]
    right = c + steps[steps < 1.0 - c]
    return np.unique(np.concatenate([[0.0], left, [c], right, [1.0]]))

@lru_cache(maxsize=64)
def odd_weights(profile: OddProfile, n_nodes: int, scale: float) -> np.ndarray:
    """P[a,b] = ∫_0^1 φ(x_a - x(v)) ℓ_b(v) dv avec x(v) = s·v/(1-v).

    Même convention que ``sign_weights`` (qui est le cas φ = sgn).  Chaque
    ligne est intégrée sur des panneaux resserrés autour de u_a, où φ saute ou
    varie sur une échelle bien plus courte que l'écart entre noeuds.
    """
    if profile.is_sign:
        return profile.c * sign_weights(n_nodes)
    t, w = np.polynomial.legendre.leggauss(n_nodes)
    u = 0.5 * (t + 1.0)
    # ℓ_b(τ) = w_b Σ_k (k + 1/2) P_k(t_b) P_k(τ)
    B = (np.arange(n_nodes) + 0.5)[:, None] * np.polynomial.legendre.legvander(t, n_nodes - 1).T * w[None, :]
    q, wq = np.polynomial.legendre.leggauss(max(ODD_PANEL_NODES, n_nodes // 2 + 2))
    xs = scale * u / (1.0 - u)
    P = np.empty((n_nodes, n_nodes))
    for a in range(n_nodes):
        edges = _graded_edges(float(u[a]), ODD_GRADING)
        lo, hi = edges[:-1, None], edges[1:, None]
        v = (lo + 0.5 * (hi - lo) * (q + 1.0)).ravel()
        wv = (0.5 * (hi - lo) * wq).ravel()
        with np.errstate(over="ignore", under="ignore"):
            f = profile(xs[a] - scale * v / (1.0 - v))
        L = np.polynomial.legendre.legvander(2.0 * v - 1.0, n_nodes - 1) @ B
        P[a] = (wv * f) @ L
    return P

# ---- Fredholm ---------------------------------------------------------

def _check_edges(M: np.ndarray, rows: Sequence[int], what: str):
    if not np.all(np.isfinite(M)):
        raise RuntimeError(f"{what}: entrées non finies dans la matrice discrétisée")
    for r in rows:
        edge = float(np.max(np.abs(M[r]))) if M.shape[1] else 0.0
        if edge > EDGE_TOL:
            raise RuntimeError(
                f"{what}: noyau non décroissant au dernier noeud (|K̂|={edge:.2e}); "
                "augmenter le taux de conjugaison ou l'échelle")

def fredholm_det(kernel: Callable[[np.ndarray, np.ndarray], np.ndarray], s: float,
                 spec: Optional[QuadSpec] = None) -> float:
    """det(I - K) sur L²(s, ∞) pour un noyau scalaire vectorisé."""
    spec = spec or QuadSpec()
    nodes = discretize(DomainDk((s,)), spec.n_nodes, spec.scale or MAP_SCALE_AIRY)
    if nodes.size == 0:
        return 1.0
    r = np.sqrt(nodes.w)
    Kh = r[:, None] * np.asarray(kernel(nodes.x[:, None], nodes.x[None, :]), dtype=float) * r[None, :]
    _check_edges(Kh, nodes.last, "fredholm_det")
    return float(scipy.linalg.det(np.eye(nodes.size) - Kh))

def _odd_correction(kernel, nodes: NodeSet) -> np.ndarray:
    """Remplace, dans K22, la partie g(x)g(y)·φ(x-y) pondérée √(w_a w_b) par son
    intégration produit sur l'interpolant de Lagrange de chaque composante."""
    M = nodes.size
    corr = np.zeros((M, M))
    odd = getattr(kernel, "odd_part", None)
    if odd is None or nodes.wu is None:
        return corr
    for i in np.unique(nodes.comp):
        idx = np.flatnonzero(nodes.comp == i)
        phi, g = odd(int(i), nodes.x[idx])
        if phi is None or phi.c == 0:
            continue
        x, w, wu, dx = nodes.x[idx], nodes.w[idx], nodes.wu[idx], nodes.dx[idx]
        P = odd_weights(phi, idx.size, float(nodes.scale))
        product = np.sqrt(np.outer(dx, dx)) * np.sqrt(wu[:, None] / wu[None, :]) * P
        naive = np.sqrt(np.outer(w, w)) * phi(x[:, None] - x[None, :])
        block = np.outer(g, g) * (product - naive)
        corr[np.ix_(idx, idx)] = 0.5 * (block - block.T)
    return corr

def assemble(kernel, nodes: NodeSet) -> np.ndarray:
    """Matrice 2M×2M pondérée √(w_a w_b)·K(p_a, p_b), lignes entrelacées.

    La partie impaire singulière de K22 (``odd_part`` du noyau) est intégrée
    par la règle produit ``odd_weights``.
    """
    M = nodes.size
    K11, K12, K21, K22 = kernel.matrix(nodes.comp, nodes.x)
    r = np.sqrt(nodes.w)
    W = r[:, None] * r[None, :]
    out = np.empty((2 * M, 2 * M))
    out[0::2, 0::2] = W * K11
    out[0::2, 1::2] = W * K12
    out[1::2, 0::2] = W * K21
    out[1::2, 1::2] = W * K22 + _odd_correction(kernel, nodes)
    return out

def j_matrix(M: int) -> np.ndarray:
    J = np.zeros((2 * M, 2 * M))
    idx = np.arange(M)
    J[2 * idx, 2 * idx + 1] = 1.0
    J[2 * idx + 1, 2 * idx] = -1.0
    return J

def fredholm_pf(kernel, domain: DomainDk, spec: Optional[QuadSpec] = None,
                rate: Optional[float] = None) -> float:
    """Pf(J - K) sur L²(D_k), après conjugaison de taux ``rate`` (défaut : celui du noyau)."""
    from .kernels import conjugate_kernel
    spec = spec or QuadSpec()
    scale = spec.scale if spec.scale is not None else getattr(kernel, "map_scale", MAP_SCALE_AIRY)
    eps = getattr(kernel, "conj_rate", 0.0) if rate is None else rate
    K = conjugate_kernel(kernel, eps) if eps else kernel
    nodes = discretize(domain, spec.n_nodes, scale)
    if nodes.size == 0:
        return 1.0
    Kh = assemble(K, nodes)
    rows = [r for last in nodes.last for r in (2 * last, 2 * last + 1)]
    _check_edges(Kh, rows, "fredholm_pf")
    return pfaffian(SkewMatrix(j_matrix(nodes.size) - Kh))

def pf_series_oracle(kernel, domain: DomainDk, max_order: int, n_nodes: int = 16,
                     scale: Optional[float] = None, terms: bool = False):
    """Série de Fredholm tronquée : 1 + Σ_{r≤max_order} (-1)^r/r! ∫ Pf[K(p_a, p_b)].

    Chaque intégrale r-dimensionnelle est une quadrature produit directe.
    """
    if max_order < 0 or max_order > 4:
        raise ValueError(f"ordre {max_order} hors de [0, 4]")
    scale = scale if scale is not None else getattr(kernel, "map_scale", MAP_SCALE_AIRY)
    nodes = discretize(domain, n_nodes, scale)
    values = [1.0]
    if max_order == 0 or nodes.size == 0:
        return (1.0, values) if terms else 1.0
    K11, K12, K21, K22 = kernel.matrix(nodes.comp, nodes.x)
    blocks = ((K11, K12), (K21, K22))
    for r in range(1, max_order + 1):
        total = 0.0
        tuples = itertools.product(range(nodes.size), repeat=r)
        while True:
            chunk = np.array(list(itertools.islice(tuples, SERIES_BATCH)), dtype=int)
            if chunk.size == 0:
                break
            A = np.empty((chunk.shape[0], 2 * r, 2 * r))
            for a in range(r):
                for b in range(r):
                    ia, ib = chunk[:, a], chunk[:, b]
                    for s in range(2):
                        for t in range(2):
                            A[:, 2 * a + s, 2 * b + t] = blocks[s][t][ia, ib]
            wprod = np.prod(nodes.w[chunk], axis=1)
            total += float(np.sum(wprod * _pf_expand(A)))
        values.append((-1) ** r * total / math.factorial(r))
    out = float(sum(values))
    return (out, values) if terms else out
