"""Numba kernels for the plant right-hand side, RK4 stepping, and FD Jacobians.

Everything here works on packed float64 arrays (see `PlantParams.pack`) so
the hot loops stay in nopython mode.  The `smoothed` flag switches the
settler flux expressions between the exact min/max/step forms (used to
simulate the true plant) and their soft counterparts (used everywhere a
derivative is taken).
"""

import math

import numpy as np
from numba import njit

from .params import (
    P_YA, P_YH, P_FP, P_IXB, P_IXP, P_MUH, P_KS, P_KOH, P_KNO, P_BH,
    P_ETAG, P_ETAH, P_KH, P_KX, P_MUA, P_KNH, P_BA, P_KOA, P_KA,
    P_V0MAX, P_V0, P_RH, P_RP, P_FNS, P_VS, P_HS, P_SSEC, P_SOSAT, P_XT,
    P_SHARP, P_BETAF, P_BETAV, P_VA1,
)

NX = 145
NU = 13
NW = 14

RHS_OK = 0
RHS_DEGENERATE_FEED = 1
RHS_EFFLUENT_REVERSAL = 2


@njit(cache=True)
def _softmin(a, b, beta):
    # -(1/beta) * log(exp(-beta*a) + exp(-beta*b)), shifted for stability
    m = a if a < b else b
    return m - math.log(math.exp(-beta * (a - m)) + math.exp(-beta * (b - m))) / beta


@njit(cache=True)
def _softmax0(y, beta):
    # (1/beta) * log(1 + exp(beta*y)), stable softplus
    t = beta * y
    if t > 35.0:
        return y
    if t < -35.0:
        return 0.0
    if t > 0.0:
        return y + math.log1p(math.exp(-t)) / beta
    return math.log1p(math.exp(t)) / beta


@njit(cache=True)
def settling_velocity_k(x_ss, x_f, p, smoothed):
    delta = x_ss - p[P_FNS] * x_f
    vb = p[P_V0] * (math.exp(-p[P_RH] * delta) - math.exp(-p[P_RP] * delta))
    if smoothed:
        return _softmax0(_softmin(vb, p[P_V0MAX], p[P_BETAV]), p[P_BETAV])
    v = vb if vb < p[P_V0MAX] else p[P_V0MAX]
    return v if v > 0.0 else 0.0


@njit(cache=True)
def solid_flux_k(x_upper, x_lower, x_f, clarification, p, smoothed):
    ju = settling_velocity_k(x_upper, x_f, p, smoothed) * x_upper
    jl = settling_velocity_k(x_lower, x_f, p, smoothed) * x_lower
    if smoothed:
        jmin = _softmin(ju, jl, p[P_BETAF])
        if clarification:
            phi = 0.5 + 0.5 * math.tanh(p[P_SHARP] * (x_lower - p[P_XT]))
            return phi * jmin + (1.0 - phi) * ju
        return jmin
    jmin = ju if ju < jl else jl
    if clarification and not (x_lower > p[P_XT]):
        return ju
    return jmin


@njit(cache=True)
def rhs(x, u, w, p, smoothed, out):
    """Time derivative of the full 145-state plant; returns a status code."""
    q_in = w[0]
    q_a, q_r, q_w = u[0], u[1], u[2]

    # Settler feed properties from reactor A(5)
    a5 = 4 * 13
    x_f = 0.75 * (x[a5 + 2] + x[a5 + 3] + x[a5 + 4] + x[a5 + 5] + x[a5 + 6])
    xss_bottom = x[65 + 0]
    if x_f > 0.0:
        ratio = xss_bottom / x_f
    elif xss_bottom <= 0.0:
        ratio = 0.0
    else:
        return RHS_DEGENERATE_FEED

    # Underflow concentrations: solubles equal the bottom layer, particulates
    # are reactor-A(5) particulates scaled by X_SS(S1)/X_f.
    recycle = np.empty(13)
    recycle[0] = x[65 + 1]            # S_I
    recycle[1] = x[65 + 2]            # S_S
    recycle[2] = ratio * x[a5 + 2]    # X_I
    recycle[3] = ratio * x[a5 + 3]    # X_S
    recycle[4] = ratio * x[a5 + 4]    # X_BH
    recycle[5] = ratio * x[a5 + 5]    # X_BA
    recycle[6] = ratio * x[a5 + 6]    # X_P
    recycle[7] = x[65 + 3]            # S_O
    recycle[8] = x[65 + 4]            # S_NO
    recycle[9] = x[65 + 5]            # S_NH
    recycle[10] = x[65 + 6]           # S_ND
    recycle[11] = ratio * x[a5 + 11]  # X_ND
    recycle[12] = x[65 + 7]           # S_ALK

    y_h, y_a = p[P_YH], p[P_YA]
    f_p, i_xb, i_xp = p[P_FP], p[P_IXB], p[P_IXP]

    q_prev = 0.0
    zin = np.empty(13)
    for r in range(5):
        base = 13 * r
        v_r = p[P_VA1 + r]
        q_ec = u[8 + r]
        if r == 0:
            q_flow = q_in + q_a + q_r + q_ec
            for s in range(13):
                zin[s] = (q_in * w[1 + s] + q_a * x[a5 + s] + q_r * recycle[s]) / q_flow
            zin[1] += q_ec * p[P_SSEC] / q_flow
        else:
            q_flow = q_prev + q_ec
            for s in range(13):
                zin[s] = q_prev * x[base - 13 + s] / q_flow
            zin[1] += q_ec * p[P_SSEC] / q_flow

        s_s, x_s = x[base + 1], x[base + 3]
        x_bh, x_ba = x[base + 4], x[base + 5]
        s_o, s_no, s_nh = x[base + 7], x[base + 8], x[base + 9]
        s_nd, x_nd = x[base + 10], x[base + 11]

        monod_ss = s_s / (p[P_KS] + s_s)
        monod_oh = s_o / (p[P_KOH] + s_o)
        inhib_oh = p[P_KOH] / (p[P_KOH] + s_o)
        monod_no = s_no / (p[P_KNO] + s_no)
        monod_nh = s_nh / (p[P_KNH] + s_nh)
        monod_oa = s_o / (p[P_KOA] + s_o)

        rho1 = p[P_MUH] * monod_ss * monod_oh * x_bh
        rho2 = p[P_MUH] * monod_ss * inhib_oh * monod_no * p[P_ETAG] * x_bh
        rho3 = p[P_MUA] * monod_nh * monod_oa * x_ba
        rho4 = p[P_BH] * x_bh
        rho5 = p[P_BA] * x_ba
        rho6 = p[P_KA] * s_nd * x_bh
        hyd_den = p[P_KX] * x_bh + x_s
        if hyd_den > 0.0:
            bracket = monod_oh + p[P_ETAH] * inhib_oh * monod_no
            rho7 = p[P_KH] * (x_s * x_bh / hyd_den) * bracket
            rho8 = p[P_KH] * (x_nd * x_bh / hyd_den) * bracket
        else:
            rho7 = 0.0
            rho8 = 0.0

        dil = q_flow / v_r
        out[base + 0] = dil * (zin[0] - x[base + 0])
        out[base + 1] = dil * (zin[1] - s_s) - (rho1 + rho2) / y_h + rho7
        out[base + 2] = dil * (zin[2] - x[base + 2])
        out[base + 3] = dil * (zin[3] - x_s) + (1.0 - f_p) * (rho4 + rho5) - rho7
        out[base + 4] = dil * (zin[4] - x_bh) + rho1 + rho2 - rho4
        out[base + 5] = dil * (zin[5] - x_ba) + rho3 - rho5
        out[base + 6] = dil * (zin[6] - x[base + 6]) + f_p * (rho4 + rho5)
        out[base + 7] = (dil * (zin[7] - s_o)
                         + u[3 + r] * (p[P_SOSAT] - s_o)
                         - ((1.0 - y_h) / y_h) * rho1
                         - ((4.57 - y_a) / y_a) * rho3)
        out[base + 8] = (dil * (zin[8] - s_no)
                         - ((1.0 - y_h) / (2.86 * y_h)) * rho2
                         + rho3 / y_a)
        out[base + 9] = (dil * (zin[9] - s_nh)
                         - i_xb * (rho1 + rho2)
                         - (i_xb + 1.0 / y_a) * rho3
                         + rho6)
        out[base + 10] = dil * (zin[10] - s_nd) - rho6 + rho8
        out[base + 11] = (dil * (zin[11] - x_nd)
                          + (i_xb - f_p * i_xp) * (rho4 + rho5)
                          - rho8)
        out[base + 12] = (dil * (zin[12] - x[base + 12])
                          - (i_xb / 14.0) * rho1
                          + ((1.0 - y_h) / (14.0 * 2.86 * y_h) - i_xb / 14.0) * rho2
                          - (i_xb / 14.0 + 1.0 / (7.0 * y_a)) * rho3
                          + rho6 / 14.0)
        q_prev = q_flow

    # Settler hydraulics
    q_f = q_prev - q_a
    q_u = q_r + q_w
    q_e = q_f - q_u
    if q_e < 0.0:
        return RHS_EFFLUENT_REVERSAL

    v_l = p[P_VS]
    h_l = p[P_HS]

    # Gravity flux through the interface into (0-based) layer li, li = 0..8.
    # Interfaces below the feed layer (li <= 4) thicken, the rest clarify.
    flux = np.empty(9)
    for li in range(9):
        flux[li] = solid_flux_k(x[65 + 8 * (li + 1)], x[65 + 8 * li],
                                x_f, li >= 5, p, smoothed)

    for l in range(10):
        base = 65 + 8 * l
        xss = x[base]
        if l <= 4:
            conv = (q_u / v_l) * (x[base + 8] - xss)
        elif l == 5:
            conv = (q_f / v_l) * (x_f - xss)
        else:
            conv = (q_e / v_l) * (x[base - 8] - xss)
        grav = 0.0
        if l <= 8:
            grav += flux[l]
        if l >= 1:
            grav -= flux[l - 1]
        out[base] = conv + grav / h_l

        for c in range(7):
            sc = x[base + 1 + c]
            if l <= 4:
                out[base + 1 + c] = (q_u / v_l) * (x[base + 8 + 1 + c] - sc)
            elif l == 5:
                # feed solubles come from A(5): map settler slot -> reactor slot
                if c == 0:
                    feed = x[a5 + 0]
                elif c == 1:
                    feed = x[a5 + 1]
                elif c == 2:
                    feed = x[a5 + 7]
                elif c == 3:
                    feed = x[a5 + 8]
                elif c == 4:
                    feed = x[a5 + 9]
                elif c == 5:
                    feed = x[a5 + 10]
                else:
                    feed = x[a5 + 12]
                out[base + 1 + c] = (q_f / v_l) * (feed - sc)
            else:
                out[base + 1 + c] = (q_e / v_l) * (x[base - 8 + 1 + c] - sc)
    return RHS_OK


@njit(cache=True)
def rk4_run(x, u, w, p, smoothed, nsub, h, clamp_eps):
    """Advance `x` in place by `nsub` classical RK4 substeps of length h.

    Returns (status, bad_substep, n_clamped); status mirrors `rhs` codes with
    3 = non-finite state produced at substep `bad_substep`.
    """
    k1 = np.empty(NX)
    k2 = np.empty(NX)
    k3 = np.empty(NX)
    k4 = np.empty(NX)
    xt = np.empty(NX)
    n_clamped = 0
    for step in range(nsub):
        code = rhs(x, u, w, p, smoothed, k1)
        if code != RHS_OK:
            return code, step, n_clamped
        for i in range(NX):
            xt[i] = x[i] + 0.5 * h * k1[i]
        code = rhs(xt, u, w, p, smoothed, k2)
        if code != RHS_OK:
            return code, step, n_clamped
        for i in range(NX):
            xt[i] = x[i] + 0.5 * h * k2[i]
        code = rhs(xt, u, w, p, smoothed, k3)
        if code != RHS_OK:
            return code, step, n_clamped
        for i in range(NX):
            xt[i] = x[i] + h * k3[i]
        code = rhs(xt, u, w, p, smoothed, k4)
        if code != RHS_OK:
            return code, step, n_clamped
        ok = True
        for i in range(NX):
            xi = x[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if xi < -clamp_eps:
                xi = 0.0
                n_clamped += 1
            if not math.isfinite(xi):
                ok = False
            x[i] = xi
        if not ok:
            return 3, step, n_clamped
    return RHS_OK, -1, n_clamped


@njit(cache=True)
def fd_jacobians(x, u, w, p, smoothed, eps_rel, eps_min):
    """Central-difference Jacobians (df/dx, df/du, df/dw) of the plant RHS."""
    jx = np.empty((NX, NX))
    ju = np.empty((NX, NU))
    jw = np.empty((NX, NW))
    fp = np.empty(NX)
    fm = np.empty(NX)

    xp = x.copy()
    for i in range(NX):
        eps = eps_rel * abs(x[i])
        if eps < eps_min:
            eps = eps_min
        xp[i] = x[i] + eps
        rhs(xp, u, w, p, smoothed, fp)
        xp[i] = x[i] - eps
        rhs(xp, u, w, p, smoothed, fm)
        xp[i] = x[i]
        inv = 0.5 / eps
        for j in range(NX):
            jx[j, i] = (fp[j] - fm[j]) * inv

    up = u.copy()
    for i in range(NU):
        eps = eps_rel * abs(u[i])
        if eps < eps_min:
            eps = eps_min
        up[i] = u[i] + eps
        rhs(x, up, w, p, smoothed, fp)
        up[i] = u[i] - eps
        rhs(x, up, w, p, smoothed, fm)
        up[i] = u[i]
        inv = 0.5 / eps
        for j in range(NX):
            ju[j, i] = (fp[j] - fm[j]) * inv

    wp = w.copy()
    for i in range(NW):
        eps = eps_rel * abs(w[i])
        if eps < eps_min:
            eps = eps_min
        wp[i] = w[i] + eps
        rhs(x, u, wp, p, smoothed, fp)
        wp[i] = w[i] - eps
        rhs(x, u, wp, p, smoothed, fm)
        wp[i] = w[i]
        inv = 0.5 / eps
        for j in range(NX):
            jw[j, i] = (fp[j] - fm[j]) * inv

    return jx, ju, jw
