"""State, input, disturbance, and output vector layouts.

The plant state stacks 5 bioreactors (13 species each) followed by 10
settler layers (8 species each), for 145 entries total.  All helpers here
are plain integer bookkeeping so that every other module can address
vector slots by name instead of magic numbers.
"""

import numpy as np

# Reactor species order (per reactor, 13 entries)
R_SI, R_SS, R_XI, R_XS, R_XBH, R_XBA, R_XP, R_SO, R_SNO, R_SNH, R_SND, R_XND, R_SALK = range(13)

REACTOR_SPECIES = (
    "S_I", "S_S", "X_I", "X_S", "X_BH", "X_BA", "X_P",
    "S_O", "S_NO", "S_NH", "S_ND", "X_ND", "S_ALK",
)

# Settler species order (per layer, 8 entries)
L_XSS, L_SI, L_SS, L_SO, L_SNO, L_SNH, L_SND, L_SALK = range(8)

SETTLER_SPECIES = ("X_SS", "S_I", "S_S", "S_O", "S_NO", "S_NH", "S_ND", "S_ALK")

# Map settler soluble slot -> reactor species slot (X_SS has no counterpart)
SETTLER_SOLUBLE_TO_REACTOR = (R_SI, R_SS, R_SO, R_SNO, R_SNH, R_SND, R_SALK)

N_REACTORS = 5
N_LAYERS = 10
NX_REACTOR = N_REACTORS * 13          # 65
NX_SETTLER = N_LAYERS * 8             # 80
NX = NX_REACTOR + NX_SETTLER          # 145
NU = 13                               # Q_A, Q_R, Q_W, K_La(1..5), Q_EC(1..5)
NW = 14                               # Q_IN + 13 influent concentrations
NY = 13                               # S_O(1..5), S_NO(1..5), X_SS, S_NH, N_TOT at S(10)

# Input slots
U_QA, U_QR, U_QW = 0, 1, 2
U_KLA = slice(3, 8)
U_QEC = slice(8, 13)

U_NAMES = ("Q_A", "Q_R", "Q_W",
           "K_La_1", "K_La_2", "K_La_3", "K_La_4", "K_La_5",
           "Q_EC_1", "Q_EC_2", "Q_EC_3", "Q_EC_4", "Q_EC_5")

# Disturbance slots: w = (Q_IN, concentrations in reactor-species order)
W_QIN = 0
W_CONC = slice(1, 14)
W_NAMES = ("Q_IN",) + tuple(s + "_IN" for s in REACTOR_SPECIES)

# Influent components that are estimated by the MHE (the rest are pinned)
FREE_INFLUENT_SPECIES = (R_SI, R_SS, R_XI, R_XS, R_XBH, R_SNH, R_SND, R_XND)
PINNED_ZERO_SPECIES = (R_XBA, R_XP, R_SO, R_SNO)
PINNED_ALK_VALUE = 7.0

Y_NAMES = ("S_O_A1", "S_O_A2", "S_O_A3", "S_O_A4", "S_O_A5",
           "S_NO_A1", "S_NO_A2", "S_NO_A3", "S_NO_A4", "S_NO_A5",
           "X_SS_S10", "S_NH_S10", "N_TOT_S10")


def reactor(r, species):
    """Flat state index of `species` in reactor r (0-based, r=0..4)."""
    return 13 * r + species


def layer(l, species):
    """Flat state index of `species` in settler layer l (0-based, l=0 is the bottom)."""
    return NX_REACTOR + 8 * l + species


STATE_NAMES = tuple(
    f"{s}_A{r + 1}" for r in range(N_REACTORS) for s in REACTOR_SPECIES
) + tuple(
    f"{s}_S{l + 1}" for l in range(N_LAYERS) for s in SETTLER_SPECIES
)


def output_selector_rows():
    """Indices of the 12 pure-selector outputs (all but N_TOT, which is composite)."""
    rows = [reactor(r, R_SO) for r in range(5)]
    rows += [reactor(r, R_SNO) for r in range(5)]
    rows += [layer(9, L_XSS), layer(9, L_SNH)]
    return np.array(rows, dtype=np.intp)
