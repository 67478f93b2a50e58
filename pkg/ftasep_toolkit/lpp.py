"""Percolation de dernier passage exponentielle sur le demi-quadrant n >= m >= 1.

H(n,m) = w_{n,m} + max(H(n-1,m), H(n,m-1)), H(n,0) = 0 ; poids de taux α
sur la diagonale, 1 ailleurs.  Les cellules d'une même anti-diagonale
n + m = d sont indépendantes : la programmation dynamique avance diagonale par
diagonale, en bloc numpy.
"""
from __future__ import annotations
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import EXACT_TOL, LPP_MCAP_MARGIN
from .particles import Trajectory, CheckReport
from .utils import rng_for, write_csv

XI = 2.0 ** (2.0 / 3.0)
SIGMA_PROCESS = 2.0 ** (4.0 / 3.0)

@dataclass
class WeightGrid:
    """w[n, m] pour 1 <= m <= min(n, m_cap) ; NaN ailleurs (ou manquant)."""
    w: np.ndarray = field(repr=False)
    alpha: float = 1.0

    @property
    def n_max(self) -> int:
        return self.w.shape[0] - 1

    @property
    def m_cap(self) -> int:
        return self.w.shape[1] - 1

    def at(self, n: int, m: int) -> float:
        return float(self.w[n, m])

@dataclass
class LppGrid:
    H: np.ndarray = field(repr=False)       # -inf hors du triangle, NaN si manquant

    @property
    def n_max(self) -> int:
        return self.H.shape[0] - 1

    @property
    def m_cap(self) -> int:
        return self.H.shape[1] - 1

    def at(self, n: int, m: int) -> float:
        if not (1 <= m <= n <= self.n_max) or m > self.m_cap:
            raise ValueError(f"indices ({n},{m}) hors de la grille {self.n_max}×{self.m_cap}")
        return float(self.H[n, m])

def _diag_columns(d: int, n_max: int, m_cap: int) -> np.ndarray:
    lo, hi = max(1, d - n_max), min(m_cap, d // 2)
    return np.arange(lo, hi + 1) if hi >= lo else np.zeros(0, dtype=np.int64)

def sample_weights(n_max: int, alpha: float, seed: int, m_cap: Optional[int] = None,
                   rng: Optional[np.random.Generator] = None) -> WeightGrid:
    if n_max < 1:
        raise ValueError(f"n_max={n_max} < 1")
    if not alpha > 0:
        raise ValueError(f"alpha={alpha} doit être > 0")
    C = n_max if m_cap is None else min(int(m_cap), n_max)
    rng = rng or rng_for(seed, 0)
    w = rng.standard_exponential((n_max + 1, C + 1))
    nn, mm = np.indices(w.shape)
    w[(mm > nn) | (mm == 0) | (nn == 0)] = np.nan
    d = np.arange(1, C + 1)
    w[d, d] /= alpha
    return WeightGrid(w, float(alpha))

def passage_times(weights: WeightGrid) -> LppGrid:
    w = weights.w
    R, C = weights.n_max, weights.m_cap
    H = np.full(w.shape, -np.inf)
    H[:, 0] = 0.0
    for d in range(2, R + C + 1):
        ms = _diag_columns(d, R, C)
        if ms.size == 0:
            continue
        ns = d - ms
        H[ns, ms] = w[ns, ms] + np.maximum(H[ns - 1, ms], H[ns, ms - 1])
    return LppGrid(H)

def sample_passage_points(alpha: float, points: Sequence[Tuple[int, int]], seed: int,
                          rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """H aux points demandés, en ne gardant qu'une anti-diagonale en mémoire."""
    if not alpha > 0:
        raise ValueError(f"alpha={alpha} doit être > 0")
    pts = [(int(n), int(m)) for n, m in points]
    for n, m in pts:
        if not 1 <= m <= n:
            raise ValueError(f"point ({n},{m}) hors du demi-quadrant")
    if not pts:
        return np.zeros(0)
    R = max(n for n, _ in pts)
    C = max(m for _, m in pts)
    wanted: Dict[int, List[Tuple[int, int]]] = defaultdict(list)
    for k, (n, m) in enumerate(pts):
        wanted[n + m].append((k, m))
    out = np.empty(len(pts))
    rng = rng or rng_for(seed, 0)
    prev = np.full(C + 1, -np.inf)
    prev[0] = 0.0
    last_d = max(wanted)
    for d in range(2, last_d + 1):
        cur = np.full(C + 1, -np.inf)
        cur[0] = 0.0
        ms = _diag_columns(d, R, C)
        if ms.size:
            w = rng.standard_exponential(ms.size)
            if d % 2 == 0 and ms[-1] == d // 2:
                w[-1] /= alpha
            cur[ms] = w + np.maximum(prev[ms], prev[ms - 1])
        for k, m in wanted.get(d, ()):
            out[k] = cur[m]
        prev = cur
    return out

def export_grid(weights: WeightGrid, grid: LppGrid, path: str) -> str:
    rows = ((n, m, float(weights.w[n, m]), float(grid.H[n, m]))
            for n in range(1, grid.n_max + 1) for m in range(1, min(n, grid.m_cap) + 1))
    return write_csv(path, ("n", "m", "w", "H"), rows)

# ---- Lien avec le TASEP sur demi-droite -------------------------------

def weights_from_waiting_times(traj: Trajectory) -> WeightGrid:
    """w_{i,j} = (i-j+1)-ème temps d'attente de la j-ème particule injectée ; NaN si absent."""
    waits = traj.waits
    J = len(waits)
    if J == 0:
        return WeightGrid(np.full((2, 2), np.nan), traj.alpha)
    R = max(j + len(wj) for j, wj in enumerate(waits, start=1)) - 1
    w = np.full((R + 1, J + 1), np.nan)
    for j, wj in enumerate(waits, start=1):
        for r, val in enumerate(wj):
            w[j + r, j] = val
    return WeightGrid(w, traj.alpha)

def arrival_identity_check(traj: Trajectory, grid: LppGrid, tol: float = EXACT_TOL) -> CheckReport:
    """H(n+y-1, y) = instant d'arrivée de la y-ème particule au site n, pour tout (n,y) couvert."""
    rep = CheckReport(passed=True, checked=0)
    for y, arr in enumerate(traj.arrivals, start=1):
        for n, t_arr in enumerate(arr, start=1):
            i = n + y - 1
            if i > grid.n_max or y > grid.m_cap:
                rep.fail(f"(n={n}, y={y}) hors de la grille")
                continue
            h = grid.H[i, y]
            rep.checked += 1
            if not np.isfinite(h) or abs(h - t_arr) > tol:
                rep.fail(f"(n={n}, y={y}): H={h!r} != arrivée {t_arr!r}")
    return rep

def ftasep_positions_via_lpp(alpha: float, t: float, n_indices: Sequence[int], seed: int,
                             m_cap: Optional[int] = None,
                             rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, bool]:
    """x_n(t) = N_n(t) - n avec N_n(t) = #{y >= 1 : H(n+y-1, y) <= t}.

    La grille est limitée aux colonnes y <= m_cap ; ``truncated`` signale qu'un
    N_n a atteint cette limite.
    """
    if not t > 0:
        raise ValueError(f"t={t} doit être > 0")
    ns = np.asarray(list(n_indices), dtype=np.int64)
    if ns.size == 0 or np.any(ns < 1):
        raise ValueError(f"indices de particules invalides: {list(n_indices)}")
    C = int(m_cap) if m_cap is not None else int(math.ceil(LPP_MCAP_MARGIN * t / 4.0)) + 20
    R = int(ns.max()) + C - 1
    grid = passage_times(sample_weights(R, alpha, seed, m_cap=C, rng=rng))
    ys = np.arange(1, C + 1)
    N = np.count_nonzero(grid.H[ns[:, None] + ys[None, :] - 1, ys[None, :]] <= t, axis=1)
    return (N - ns).astype(np.int64), bool(np.any(N >= C))

# ---- Remises à l'échelle ----------------------------------------------

def rescale_diag(H_nn: float, n: int, alpha: float) -> float:
    if not alpha > 0:
        raise ValueError(f"alpha={alpha} doit être > 0")
    if n < 1:
        raise ValueError(f"n={n} < 1")
    if alpha >= 0.5:
        return (H_nn - 4.0 * n) / (2.0 ** (4.0 / 3.0) * n ** (1.0 / 3.0))
    sigma = math.sqrt(1.0 - 2.0 * alpha) / (alpha * (1.0 - alpha))
    return (H_nn - n / (alpha * (1.0 - alpha))) / (sigma * math.sqrt(n))

def offdiag_sigma(kappa: float) -> float:
    return (1.0 + math.sqrt(kappa)) ** (4.0 / 3.0) / kappa ** (1.0 / 6.0)

def rescale_offdiag(H_nm: float, n: int, kappa: float) -> float:
    if not 0.0 < kappa < 1.0:
        raise ValueError(f"kappa={kappa} hors de (0,1)")
    return (H_nm - (1.0 + math.sqrt(kappa)) ** 2 * n) / (offdiag_sigma(kappa) * n ** (1.0 / 3.0))

def round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))

def process_indices(n: int, eta: float) -> Tuple[int, int]:
    """(n + n^{2/3}ξη, n - n^{2/3}ξη) arrondis au plus proche (demi vers le haut)."""
    if eta < 0:
        raise ValueError(f"eta={eta} < 0")
    s = n ** (2.0 / 3.0) * XI * eta
    hi, lo = round_half_up(n + s), round_half_up(n - s)
    if lo < 1:
        raise ValueError(f"indice {lo} < 1 pour n={n}, eta={eta}")
    return hi, lo

def rescale_process(grid: LppGrid, n: int, eta: float) -> float:
    """H_n(η) = (H(n+n^{2/3}ξη, n-n^{2/3}ξη) - 4n + n^{1/3}ξ²η²)/(σ n^{1/3})."""
    hi, lo = process_indices(n, eta)
    if hi > grid.n_max or lo > grid.m_cap:
        raise ValueError(f"indices ({hi},{lo}) hors de la grille {grid.n_max}×{grid.m_cap}")
    return rescale_process_value(grid.H[hi, lo], n, eta)

def rescale_process_value(H: float, n: int, eta: float) -> float:
    n3 = n ** (1.0 / 3.0)
    return (H - 4.0 * n + n3 * XI ** 2 * eta ** 2) / (SIGMA_PROCESS * n3)
