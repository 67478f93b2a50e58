"""Grandeurs hydrodynamiques en forme close (flux, dérive, profil, positions LGN)."""
from __future__ import annotations
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.optimize import brentq

RHO0 = 2.0 / 3.0
PI0 = 0.25

@dataclass(frozen=True)
class HydroParams:
    rho: float
    kappa: float = 0.0
    pi: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho={self.rho} hors de [0,1]")
        if self.kappa < 0:
            raise ValueError(f"kappa={self.kappa} < 0")

def flux(rho: float) -> float:
    """j(ρ) = (1-ρ)(2ρ-1)/ρ pour ρ > 1/2, 0 dans la phase statique."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho={rho} hors de [0,1]")
    if rho <= 0.5:
        return 0.0
    return (1.0 - rho) * (2.0 * rho - 1.0) / rho

def flux_from_gap(p: float) -> float:
    """Courant de la mesure stationnaire à écarts Bernoulli(p) : ρ(1-p)p avec ρ = 1/(1+p)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} hors de [0,1]")
    return p * (1.0 - p) / (1.0 + p)

def drift(rho: float) -> float:
    return flux(rho) / rho if rho > 0 else 0.0

def drift_slope(rho: float) -> float:
    """d/dρ [j(ρ)/ρ] = (2 - 3ρ)/ρ³ sur (1/2, 1]."""
    if not 0.5 < rho <= 1.0:
        raise ValueError(f"rho={rho} hors de (1/2, 1]")
    return (2.0 - 3.0 * rho) / rho ** 3

def front_constants(numeric: bool = False) -> Tuple[float, float]:
    """(ρ₀, π₀) : maximiseur de la dérive j(ρ)/ρ et sa valeur."""
    if not numeric:
        return RHO0, PI0
    rho = brentq(drift_slope, 0.55, 0.99, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return float(rho), drift(rho)

def density_profile(x):
    """1 si x < -1, 1/√(2+x) sur [-1, 1/4], 0 si x > 1/4 (vectorisé)."""
    xa = np.asarray(x, dtype=float)
    with np.errstate(invalid="ignore"):
        mid = 1.0 / np.sqrt(np.maximum(2.0 + xa, 1e-300))
    out = np.where(xa < -1.0, 1.0, np.where(xa > PI0, 0.0, mid))
    return float(out) if np.ndim(x) == 0 else out

def lln_position(r: float) -> float:
    if not 0.0 < r < 1.0:
        raise ValueError(f"r={r} hors de (0,1)")
    return (1.0 - 6.0 * r + r * r) / 4.0

def kappa_of_pi(pi: float) -> float:
    if not -1.0 <= pi <= PI0:
        raise ValueError(f"pi={pi} hors de [-1, 1/4]")
    return 3.0 - 2.0 * math.sqrt(2.0 + pi)

def lln_state(r: float) -> HydroParams:
    """État macroscopique de la particule ⌊rt⌋ : position π, densité locale ρ, κ = r."""
    pi = lln_position(r)
    return HydroParams(rho=density_profile(pi), kappa=r, pi=pi)
