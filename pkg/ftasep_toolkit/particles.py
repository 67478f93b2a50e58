"""Simulation à événements de FTASEP(α) et de TASEP sur demi-droite avec source.

Moteur : à chaque pas on tire un temps Exp(taux total) puis une transition
activée avec probabilité taux/total (équivalent en loi aux horloges indépendantes).
"""
from __future__ import annotations
import math
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple

import numpy as np

from .config import EXACT_TOL
from .utils import rng_for, write_csv, fmt

KIND_FTASEP = "ftasep"
KIND_INJECT = "inject"
KIND_BULK = "bulk"

@dataclass(frozen=True)
class ParticleState:
    positions: Tuple[int, ...]     # x_1 > x_2 > ...
    alpha: float = 1.0
    time: float = 0.0

    def __post_init__(self):
        xs = self.positions
        for i in range(len(xs) - 1):
            if xs[i] <= xs[i + 1]:
                raise ValueError(f"positions non strictement décroissantes à l'indice {i + 1}: {xs[i]} <= {xs[i + 1]}")
        if self.alpha <= 0:
            raise ValueError(f"alpha={self.alpha} doit être > 0")

    @property
    def size(self) -> int:
        return len(self.positions)

    def check_gaps(self):
        """Lève ValueError si un écart x_i - x_{i+1} sort de {1, 2}."""
        xs = self.positions
        for i in range(len(xs) - 1):
            d = xs[i] - xs[i + 1]
            if d not in (1, 2):
                raise ValueError(f"gap {d} at index {i + 1} outside {{1,2}}")

def step_state(n: int, alpha: float = 1.0) -> ParticleState:
    if n < 1:
        raise ValueError(f"n={n} < 1")
    return ParticleState(tuple(-i for i in range(1, n + 1)), alpha)

def gap_map(state: ParticleState) -> np.ndarray:
    """Φ : (x_i) -> g_i = x_i - x_{i+1} - 1 ∈ {0,1}."""
    state.check_gaps()
    xs = np.asarray(state.positions, dtype=np.int64)
    return (xs[:-1] - xs[1:] - 1).astype(np.int8)

def stationary_gap_init(p: float, size: int, seed: int, alpha: float = 1.0) -> ParticleState:
    """Écarts i.i.d. 1 + Bernoulli(p), premier particule en -1 ; densité 1/(1+p)."""
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        raise ValueError(f"p={p} hors de [0,1]")
    if size < 1:
        raise ValueError(f"size={size} < 1")
    rng = rng_for(seed, 0)
    gaps = 1 + (rng.random(size - 1) < p).astype(np.int64)
    xs = -1 - np.concatenate([[0], np.cumsum(gaps)])
    return ParticleState(tuple(int(v) for v in xs), alpha)

# ---- Trajectoires -----------------------------------------------------

@dataclass
class Trajectory:
    """Liste d'événements (temps, type, indice) et états initial/final.

    FTASEP : indice = numéro de particule (1-based).
    Demi-droite : inject -> numéro de la particule injectée, bulk -> site de départ.
    """
    alpha: float
    horizon: float
    times: np.ndarray = field(repr=False)
    kinds: List[str] = field(repr=False)
    index: np.ndarray = field(repr=False)
    initial: Optional[ParticleState] = None
    final: Optional[ParticleState] = None
    n_particles: int = 0
    # demi-droite
    x_max: int = 0
    truncated: bool = False
    waits: List[List[float]] = field(default_factory=list, repr=False)
    arrivals: List[List[float]] = field(default_factory=list, repr=False)

    @property
    def n_events(self) -> int:
        return int(self.times.size)

    def replay(self) -> Iterator[Tuple[float, str, int, np.ndarray]]:
        """États FTASEP successifs (après chaque événement), positions en tableau."""
        if self.initial is None:
            raise ValueError("replay() réservé aux trajectoires FTASEP")
        xs = np.asarray(self.initial.positions, dtype=np.int64).copy()
        for t, kind, k in zip(self.times, self.kinds, self.index):
            xs[int(k) - 1] += 1
            yield float(t), kind, int(k), xs

def export_trajectory(traj: Trajectory, path: str) -> str:
    rows = ((e, fmt(t), kind, int(k)) for e, (t, kind, k) in enumerate(zip(traj.times, traj.kinds, traj.index)))
    return write_csv(path, ("event_index", "time", "kind", "index"), rows)

# ---- FTASEP -----------------------------------------------------------

class _EnabledSet:
    """Ensemble d'entiers avec ajout/retrait O(1) et tirage uniforme."""

    def __init__(self, capacity: int):
        self.items: List[int] = []
        self.where = np.full(capacity + 2, -1, dtype=np.int64)

    def __len__(self):
        return len(self.items)

    def set(self, k: int, on: bool):
        pos = self.where[k]
        if on and pos < 0:
            self.where[k] = len(self.items)
            self.items.append(k)
        elif not on and pos >= 0:
            last = self.items.pop()
            if last != k:
                self.items[pos] = last
                self.where[last] = pos
            self.where[k] = -1

    def pick(self, u: float) -> int:
        return self.items[min(int(u * len(self.items)), len(self.items) - 1)]

def ftasep_simulate(alpha: float, init: ParticleState, horizon: float, seed: int,
                    n_particles: Optional[int] = None, max_events: Optional[int] = None) -> Trajectory:
    """Trajectoire exacte de FTASEP(α) sur [0, horizon].

    Les particules 1..n_particles bougent ; la particule n_particles+1 reste figée
    à sa position initiale (bord gauche). Particule 1 : taux α si x_1 - x_2 = 1.
    Particule i >= 2 : taux 1 si x_i - x_{i+1} = 1 et x_{i-1} - x_i = 2.
    """
    if alpha <= 0:
        raise ValueError(f"alpha={alpha} doit être > 0")
    if not horizon > 0:
        raise ValueError(f"horizon={horizon} doit être > 0")
    init.check_gaps()
    n = init.size - 1 if n_particles is None else int(n_particles)
    if n < 1:
        raise ValueError(f"n_particles={n} < 1")
    if init.size < n + 1:
        raise ValueError(f"état initial de taille {init.size} < n_particles+1={n + 1}")
    x = np.asarray(init.positions[:n + 1], dtype=np.int64).copy()
    rng = rng_for(seed, 0)

    def enabled(k: int) -> bool:          # k 0-based, k < n
        if x[k] - x[k + 1] != 1:
            return False
        return k == 0 or x[k - 1] - x[k] == 2

    bulk = _EnabledSet(n)
    for k in range(1, n):
        bulk.set(k, enabled(k))
    first_on = enabled(0)

    times: List[float] = []
    idx: List[int] = []
    t = 0.0
    while True:
        total = (alpha if first_on else 0.0) + len(bulk)
        if total <= 0:
            break
        t += rng.exponential(1.0 / total)
        if t > horizon:
            break
        u = rng.random() * total
        if first_on and u < alpha:
            k = 0
        else:
            k = bulk.pick((u - (alpha if first_on else 0.0)) / len(bulk))
        x[k] += 1
        times.append(t)
        idx.append(k + 1)
        for j in (k - 1, k, k + 1):
            if 0 <= j < n:
                if j == 0:
                    first_on = enabled(0)
                else:
                    bulk.set(j, enabled(j))
        if max_events is not None and len(times) >= max_events:
            break
    final = ParticleState(tuple(int(v) for v in x), alpha, min(t, horizon))
    return Trajectory(alpha=alpha, horizon=float(horizon), times=np.asarray(times),
                      kinds=[KIND_FTASEP] * len(times), index=np.asarray(idx, dtype=np.int64),
                      initial=ParticleState(tuple(int(v) for v in init.positions[:n + 1]), alpha),
                      final=final, n_particles=n)

def ftasep_positions_at(traj: Trajectory, t: float) -> np.ndarray:
    """Positions (x_1..x_{n+1}) à l'instant t <= horizon."""
    if t > traj.horizon + EXACT_TOL:
        raise ValueError(f"t={t} au-delà de l'horizon {traj.horizon}")
    xs = np.asarray(traj.initial.positions, dtype=np.int64).copy()
    m = int(np.searchsorted(traj.times, t, side="right"))
    np.add.at(xs, traj.index[:m] - 1, 1)
    return xs

# ---- TASEP sur demi-droite --------------------------------------------

def halfline_tasep_simulate(alpha: float, horizon: float, seed: int, x_max: int,
                            max_particles: Optional[int] = None) -> Trajectory:
    """TASEP sur {1..x_max} alimenté par une source de taux α au site 1.

    Pour chaque particule j on journalise ses temps d'attente (horloge démarrée
    quand le saut devient possible ; le premier est le délai d'injection) et ses
    temps d'arrivée aux sites 1, 2, ...  Une particule atteignant x_max marque
    la trajectoire comme tronquée.
    """
    if alpha <= 0:
        raise ValueError(f"alpha={alpha} doit être > 0")
    if not horizon > 0:
        raise ValueError(f"horizon={horizon} doit être > 0")
    if x_max < 2:
        raise ValueError(f"x_max={x_max} < 2")
    rng = rng_for(seed, 0)
    occ = np.zeros(x_max + 2, dtype=np.int64)      # label+1 de l'occupant, 0 si vide
    bulk = _EnabledSet(x_max)                       # sites x avec x occupé, x+1 vide
    waits: List[List[float]] = []
    arrivals: List[List[float]] = []
    enabled_since: List[float] = []                 # par particule
    source_since = 0.0
    times: List[float] = []
    kinds: List[str] = []
    idx: List[int] = []
    truncated = False
    t = 0.0

    def refresh(s: int, now: float):
        if 1 <= s < x_max:
            on = occ[s] > 0 and occ[s + 1] == 0
            was = bulk.where[s] >= 0
            bulk.set(s, on)
            if on and not was:
                enabled_since[occ[s] - 1] = now

    while True:
        src_on = occ[1] == 0 and (max_particles is None or len(waits) < max_particles)
        total = (alpha if src_on else 0.0) + len(bulk)
        if total <= 0:
            break
        t += rng.exponential(1.0 / total)
        if t > horizon:
            break
        u = rng.random() * total
        if src_on and u < alpha:
            j = len(waits)
            waits.append([t - source_since])
            arrivals.append([t])
            enabled_since.append(t)
            occ[1] = j + 1
            times.append(t); kinds.append(KIND_INJECT); idx.append(j + 1)
            refresh(1, t)
        else:
            s = bulk.pick((u - (alpha if src_on else 0.0)) / len(bulk))
            j = occ[s] - 1
            waits[j].append(t - enabled_since[j])
            arrivals[j].append(t)
            occ[s + 1], occ[s] = j + 1, 0
            times.append(t); kinds.append(KIND_BULK); idx.append(s)
            if s == 1:
                source_since = t
            refresh(s - 1, t)
            refresh(s, t)
            refresh(s + 1, t)
            if s + 1 >= x_max:
                truncated = True
    return Trajectory(alpha=alpha, horizon=float(horizon), times=np.asarray(times), kinds=kinds,
                      index=np.asarray(idx, dtype=np.int64), x_max=x_max, truncated=truncated,
                      waits=waits, arrivals=arrivals)

def current(traj: Trajectory, x: int, t: float) -> int:
    """N_x(t) : nombre de particules aux sites >= x à l'instant t."""
    if t > traj.horizon + EXACT_TOL:
        raise ValueError(f"t={t} au-delà de l'horizon {traj.horizon}")
    if x < 1:
        raise ValueError(f"site x={x} < 1")
    return sum(1 for arr in traj.arrivals if len(arr) >= x and arr[x - 1] <= t)

# ---- Couplage ---------------------------------------------------------

@dataclass
class CheckReport:
    passed: bool
    checked: int
    violations: int = 0
    first_violation: Optional[str] = None
    details: List[str] = field(default_factory=list, repr=False)

    def fail(self, msg: str, keep: int = 20):
        self.passed = False
        self.violations += 1
        if self.first_violation is None:
            self.first_violation = msg
        if len(self.details) < keep:
            self.details.append(msg)

def verify_coupling(traj: Trajectory) -> CheckReport:
    """Vérifie événement par événement que Φ envoie FTASEP sur TASEP demi-droite.

    (i) saut de la particule 1 <-> injection (g_1 : 0 -> 1) ;
    (ii) saut de la particule i+1 <-> saut du site i vers i+1 (g_i=1, g_{i+1}=0 avant) ;
    (iii) x_n(t) + n = N_n(t) à chaque instant d'événement (conditions initiales en escalier).
    """
    rep = CheckReport(passed=True, checked=0)
    if traj.initial is None:
        rep.fail("trajectoire sans état initial FTASEP")
        return rep
    x0 = np.asarray(traj.initial.positions, dtype=np.int64)
    try:
        g = gap_map(traj.initial).astype(np.int64)
    except ValueError as ex:
        rep.fail(f"état initial: {ex}")
        return rep
    step = bool(np.all(x0 == -np.arange(1, x0.size + 1)))
    n = traj.n_particles
    shifted = x0[:n] + np.arange(1, n + 1)
    for e, (t, kind, k) in enumerate(zip(traj.times, traj.kinds, traj.index)):
        rep.checked += 1
        k = int(k)
        if not 1 <= k <= n:
            rep.fail(f"événement {e}: particule {k} hors de 1..{n}")
            continue
        if k == 1:
            if g[0] != 0:
                rep.fail(f"événement {e} (t={t:.6g}): injection avec site 1 occupé")
            g[0] = 1
        else:
            i = k - 1        # site de départ (1-based) dans l'image
            if not (g[i - 1] == 1 and g[i] == 0):
                rep.fail(f"événement {e} (t={t:.6g}): saut {i}->{i + 1} illégal "
                         f"(g_{i}={g[i - 1]}, g_{i + 1}={g[i]})")
            g[i - 1], g[i] = 0, 1
        if np.any((g < 0) | (g > 1)):
            rep.fail(f"événement {e}: écart hors de {{0,1}}")
        shifted[k - 1] += 1
        if step:
            N = np.cumsum(g[::-1])[::-1][:n]
            if not np.array_equal(shifted, N):
                bad = int(np.flatnonzero(shifted != N)[0]) + 1
                rep.fail(f"événement {e}: x_{bad}+{bad}={shifted[bad - 1]} != N_{bad}={N[bad - 1]}")
    return rep
