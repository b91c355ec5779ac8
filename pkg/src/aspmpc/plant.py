"""Plant model: reactor kinetics, settler dynamics, output map, composites.

Two flux variants coexist: the exact min/max/step settler expressions drive
the true-plant simulation, while `smoothed=True` selects the differentiable
soft forms used by every linearization.  Both share the same kernel.
"""

import numpy as np

from . import _kernels as K
from . import indices as ix
from .params import PlantParams

_DEFAULT = PlantParams()


class PlantModelError(ValueError):
    """Raised on physically inconsistent plant inputs."""


def _packed(params):
    return params.pack() if isinstance(params, PlantParams) else np.asarray(params)


def _check_inputs(x, u, w):
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u)) and np.all(np.isfinite(w))):
        raise PlantModelError("non-finite state")
    if u[ix.U_QA] < 0 or u[ix.U_QR] < 0 or u[ix.U_QW] < 0 or np.any(u[ix.U_QEC] < 0) or w[ix.W_QIN] < 0:
        raise PlantModelError("invalid flow")


def derivative(x, u, w, params=_DEFAULT, smoothed=False):
    """Full 145-vector time derivative f(x, u, w)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    _check_inputs(x, u, w)
    out = np.empty(ix.NX)
    code = K.rhs(x, u, w, _packed(params), smoothed, out)
    if code == K.RHS_DEGENERATE_FEED:
        raise PlantModelError("degenerate feed solids")
    if code == K.RHS_EFFLUENT_REVERSAL:
        raise PlantModelError("settler overflow reversal")
    return out


def reactor_derivatives(x, u, w, params=_DEFAULT, smoothed=False):
    """Derivatives of the 65 reactor states (recycle terms included)."""
    return derivative(x, u, w, params, smoothed)[:ix.NX_REACTOR]


def settler_derivatives(x, u, w, params=_DEFAULT, smoothed=False):
    """Derivatives of the 80 settler states."""
    return derivative(x, u, w, params, smoothed)[ix.NX_REACTOR:]


def settling_velocity(x_ss, x_f, params=_DEFAULT, smoothed=False):
    """Double-exponential settling velocity, clipped to [0, v0_max] (m/d)."""
    return K.settling_velocity_k(float(x_ss), float(x_f), _packed(params), smoothed)


def solid_flux(x_upper, x_lower, x_f, layer_kind, params=_DEFAULT, smoothed=False):
    """Gravity solids flux through a layer interface (g m^-2 d^-1).

    `layer_kind` is "thickening" (min of the two gravity fluxes) or
    "clarification" (upper-layer flux, gated by the X_t threshold on the
    lower layer).
    """
    if layer_kind not in ("thickening", "clarification"):
        raise ValueError(f"unknown layer kind {layer_kind!r}")
    return K.solid_flux_k(float(x_upper), float(x_lower), float(x_f),
                          layer_kind == "clarification", _packed(params), smoothed)


def feed_solids(x, params=_DEFAULT):
    """Settler feed solids X_f = 0.75 * (sum of A(5) particulates)."""
    a5 = 4 * 13
    return 0.75 * (x[a5 + ix.R_XI] + x[a5 + ix.R_XS] + x[a5 + ix.R_XBH]
                   + x[a5 + ix.R_XBA] + x[a5 + ix.R_XP])


def effluent_composites(x, params=_DEFAULT):
    """Effluent (BOD5, COD, N_TOT, N_TKN) at the settler top layer, g/m^3.

    Particulate species leave with the clarified water scaled by
    X_SS(S10)/X_f.  A zero X_f is only tolerated when the effluent carries
    no solids at all (then the particulate terms vanish).
    """
    x_f = feed_solids(x, params)
    xss_top = x[ix.layer(9, ix.L_XSS)]
    if x_f <= 0.0:
        if xss_top <= 0.0:
            ratio = 0.0
        else:
            raise PlantModelError("degenerate feed solids")
    else:
        ratio = xss_top / x_f
    a5 = 4 * 13
    x_i = ratio * x[a5 + ix.R_XI]
    x_s = ratio * x[a5 + ix.R_XS]
    x_bh = ratio * x[a5 + ix.R_XBH]
    x_ba = ratio * x[a5 + ix.R_XBA]
    x_p = ratio * x[a5 + ix.R_XP]
    x_nd = ratio * x[a5 + ix.R_XND]
    s_s = x[ix.layer(9, ix.L_SS)]
    s_i = x[ix.layer(9, ix.L_SI)]
    s_no = x[ix.layer(9, ix.L_SNO)]
    s_nh = x[ix.layer(9, ix.L_SNH)]
    s_nd = x[ix.layer(9, ix.L_SND)]

    bod5 = ((1.0 - params.f_P) * (x_bh + x_ba) + s_s + x_s) / 4.0
    cod = s_s + s_i + x_s + x_i + x_bh + x_ba + x_p
    n_tot = (s_no + s_nh + s_nd + x_nd
             + params.i_XB * (x_bh + x_ba) + params.i_XP * (x_p + x_i))
    n_tkn = n_tot - s_no
    return bod5, cod, n_tot, n_tkn


def output(x, params=_DEFAULT):
    """Sensor outputs: S_O and S_NO per reactor, then X_SS, S_NH, N_TOT at S(10)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.empty(ix.NY)
    y[:12] = x[ix.output_selector_rows()]
    y[12] = effluent_composites(x, params)[2]
    return y


def output_batch(states, params=_DEFAULT):
    """`output` applied to each row of a (n, 145) state array."""
    states = np.asarray(states, dtype=np.float64)
    return np.array([output(row, params) for row in states])


def state_jacobian_fd(x, u, w, params=_DEFAULT, smoothed=True,
                      eps_rel=1e-6, eps_min=1e-6):
    """Central-difference df/dx only (used by the equilibrium refiner)."""
    jx, _, _ = K.fd_jacobians(np.ascontiguousarray(x, dtype=np.float64),
                              np.ascontiguousarray(u, dtype=np.float64),
                              np.ascontiguousarray(w, dtype=np.float64),
                              _packed(params), smoothed, eps_rel, eps_min)
    return jx
