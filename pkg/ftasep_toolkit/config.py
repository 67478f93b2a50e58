from __future__ import annotations
import math

# ---- Quadrature de contour ------------------------------------------
RAY_ANGLE = math.pi / 3            # angle φ des demi-droites C_a^φ
RAY_PANELS = 8                     # panneaux géométriques par demi-droite
RAY_PANEL_RATIO = 1.7              # rapport de largeur entre panneaux successifs
RAY_NODES_PER_PANEL = 24           # noeuds Gauss-Legendre par panneau
DECAY_TOL = 1e-16                  # seuil de décroissance aux extrémités
DECAY_LOG_TOL = -math.log(DECAY_TOL)  # ≈ 36.84
MIN_TRUNCATION = 1.0               # L minimal quelle que soit la décroissance
MAX_TRUNCATION = 400.0             # au-delà on refuse (intégrande trop lente)

# ---- Discrétisation de Fredholm ---------------------------------------
FREDHOLM_NODES = 48                # noeuds par composante (défaut)
FREDHOLM_NODES_VERIFY = 96         # mode vérification
PIVOT_FLOOR = 1e-30                # pivot quasi nul -> Pf = 0
MAP_SCALE_AIRY = 1.0               # x = h + s·u/(1-u), familles Tracy-Widom
MAP_SCALE_EXP = 4.0                # noyaux exponentiels à n fini (décroissance e^{-x/2})
EMPTY_THRESHOLD = 40.0             # seuil traité comme +∞ (composante vide, F = 1)

# ---- Noyaux -----------------------------------------------------------
# Ajoute les deux termes exponentiels purs au R22 du noyau de crossover
CROSS_R22_EXPONENTIAL_TERMS = False
# Signes des intégrales simples de K22^GOE écrits littéralement (+x, -y)
GOE_LITERAL_SIGNS = False
CONJ_RATE_DEFAULT = 0.25           # conjugaison pour les noyaux à K22 borné
CROSS_STABLE_MIN_VARPI = 1.0       # en dessous : représentation à contours larges
APEX_MARGIN = 0.25                 # marge maximale aux bords d'une contrainte
IMAG_TOL = 1e-9                    # résidu imaginaire toléré sur une entrée réelle
EXP_CLIP = 700.0                   # exposant maximal avant exponentiation

# ---- Simulation -------------------------------------------------------
SAFETY_MARGIN = 2.0                # n_particles >= SAFETY_MARGIN * horizon
XMAX_FACTOR = 1.5                  # x_max par défaut = XMAX_FACTOR * horizon + 10
CSV_DIGITS = 12                    # chiffres significatifs des exports CSV
EXACT_TOL = 1e-9                   # tolérance des vérifications "exactes"
LPP_MCAP_MARGIN = 1.25             # colonnes gardées au-delà du N attendu

# ---- Harnais ----------------------------------------------------------
# Seuils KS : constantes de calibration (biais à t fini), pas des énoncés de théorème
KS_GATES = {
    "thm1.1": 0.08, "thm1.2": 0.08, "thm1.3": 0.08, "thm1.4": 0.1, "thm1.5": 0.1,
    "thm1.9": 0.08, "thm1.10": 0.08, "thm1.11": 0.1, "thm1.12": 0.1,
}
DENSITY_GATE = 0.03                # erreur sup du profil de densité
FLUX_REL_GATE = 0.02               # erreur relative sur le courant stationnaire
LLN_GATE = 0.01                    # écart de x_{⌊rt⌋}(t)/t à (1-6r+r²)/4
LLN_RATIOS = (0.1, 0.5)
ORIENTATION_TRIPWIRE = 0.3         # KS minimal attendu après inversion du signe des échantillons
# Terme η² de X_t(η) sans le facteur t^{1/3} (formule imprimée)
LITERAL_ETA_SQUARED = False
CALIBRATION_NOTE = (
    "Seuils KS calibrés empiriquement pour t=2000, M=2000 ; "
    "la vitesse de convergence vers les lois limites n'est pas quantifiée."
)

TAGS = (
    "thm1.1", "thm1.2", "thm1.3", "thm1.4", "thm1.5", "thm1.9", "thm1.10",
    "thm1.11", "thm1.12", "density", "flux", "couplings", "trichotomy",
)
