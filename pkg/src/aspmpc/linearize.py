"""Affine discrete models around anchor points.

Continuous Jacobians come from central finite differences of the smoothed
model; zero-order-hold discretization uses the augmented-matrix exponential
(scaling-and-squaring Pade, via scipy).  The affine offset is chosen so the
model reproduces the *nonlinear* one-step image at its anchor exactly.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from . import indices as ix
from .integrator import step
from .params import PlantParams
from .plant import _packed, output

_DEFAULT = PlantParams()

# Pade-13 coefficients and double-precision order bound (Higham 2005)
_PADE13_B = (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
             1187353796428800.0, 129060195264000.0, 10559470521600.0,
             670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
             960960.0, 16380.0, 182.0, 1.0)
_PADE13_THETA = 5.371920351148152


def expm_ss(a):
    """Matrix exponential by scaling-and-squaring with a Pade-13 kernel.

    Accepts a single (n, n) matrix or a stacked (..., n, n) batch; batches
    share one scaling power (the largest needed) so all linear algebra runs
    as stacked BLAS calls.
    """
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[-1]
    norm = np.max(np.abs(a).sum(axis=-2)) if a.size else 0.0
    s = max(0, int(np.ceil(np.log2(norm / _PADE13_THETA)))) if norm > _PADE13_THETA else 0
    a = a / (2.0 ** s)
    b = _PADE13_B
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a2 @ a4
    # u = a @ (a6 @ w1 + w2), v = a6 @ z1 + z2, with w/z built in place
    w1 = b[13] * a6
    w1 += b[11] * a4
    w1 += b[9] * a2
    w2 = b[7] * a6
    w2 += b[5] * a4
    w2 += b[3] * a2
    idx = (...,) + np.diag_indices(n)
    w2[idx] += b[1]
    u = a @ (a6 @ w1 + w2)
    v = b[12] * a6
    v += b[10] * a4
    v += b[8] * a2
    v = a6 @ v
    v += b[6] * a6
    v += b[4] * a4
    v += b[2] * a2
    v[idx] += b[0]
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


@dataclass
class AffineModel:
    """x+ = A x + B u + G w + z_f over one interval; y = C x + z_g."""
    A: np.ndarray
    B: np.ndarray
    G: np.ndarray
    z_f: np.ndarray
    C: np.ndarray
    z_g: np.ndarray
    x_ref: np.ndarray
    u_ref: np.ndarray
    w_ref: np.ndarray
    y_ref: np.ndarray
    dt: float

    def propagate(self, x, u, w):
        return self.A @ x + self.B @ u + self.G @ w + self.z_f

    def observe(self, x):
        return self.C @ x + self.z_g


def jacobians(x, u, w, params=_DEFAULT, eps_rel=1e-6, eps_min=1e-6,
              smoothed=True):
    """(df/dx, df/du, df/dw, dg/dx) of the continuous model at (x, u, w).

    Central differences with per-variable perturbation
    max(eps_min, eps_rel * |value|); the smoothed flux path is the default
    since these feed the controller and estimator.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    jx, ju, jw = K.fd_jacobians(x, u, w, _packed(params), smoothed,
                                eps_rel, eps_min)
    c = output_jacobian(x, params, eps_rel, eps_min)
    return jx, ju, jw, c


def output_jacobian(x, params=_DEFAULT, eps_rel=1e-6, eps_min=1e-6):
    """dg/dx by central differences (12 selector rows + one composite row)."""
    x = np.asarray(x, dtype=np.float64)
    c = np.zeros((ix.NY, ix.NX))
    rows = ix.output_selector_rows()
    c[np.arange(12), rows] = 1.0
    # Only the N_TOT row needs differentiation, and it depends on a handful
    # of states: the S(10) solubles/solids and the A(5) particulates.
    a5 = 4 * 13
    cols = [a5 + ix.R_XI, a5 + ix.R_XS, a5 + ix.R_XBH, a5 + ix.R_XBA,
            a5 + ix.R_XP, a5 + ix.R_XND,
            ix.layer(9, ix.L_XSS), ix.layer(9, ix.L_SNO),
            ix.layer(9, ix.L_SNH), ix.layer(9, ix.L_SND)]
    xp = x.copy()
    from .plant import effluent_composites
    for i in cols:
        eps = max(eps_min, eps_rel * abs(x[i]))
        xp[i] = x[i] + eps
        n_plus = effluent_composites(xp, params)[2]
        xp[i] = x[i] - eps
        n_minus = effluent_composites(xp, params)[2]
        xp[i] = x[i]
        c[12, i] = (n_plus - n_minus) / (2.0 * eps)
    return c


def discretize(jac, delta_t, anchor, params=_DEFAULT, h=1.0 / 5760.0):
    """Build the `AffineModel` for one interval of length `delta_t`.

    `jac` is the tuple returned by `jacobians` evaluated at `anchor`
    (x, u, w).  A = exp(Jx dt); B, G are the held-input integrals obtained
    from the exponential of the augmented block matrix; z_f anchors the
    model to the nonlinear one-step image so that propagation at the anchor
    is exact.
    """
    return discretize_batch([jac], delta_t, [anchor], params, h=h)[0]


def discretize_batch(jacs, delta_t, anchors, params=_DEFAULT, h=1.0 / 5760.0):
    """`discretize` for several anchors at once (one stacked exponential)."""
    k = len(jacs)
    n, m = ix.NX, ix.NU + ix.NW
    aug = np.zeros((k, n + m, n + m))
    for i, (jx, ju, jw, _) in enumerate(jacs):
        aug[i, :n, :n] = jx * delta_t
        aug[i, :n, n:n + ix.NU] = ju * delta_t
        aug[i, :n, n + ix.NU:] = jw * delta_t
    phi = expm_ss(aug)
    if not np.all(np.isfinite(phi)):
        raise FloatingPointError("linearization failure")
    models = []
    for i, anchor in enumerate(anchors):
        x_ref, u_ref, w_ref = (np.asarray(v, dtype=np.float64) for v in anchor)
        a = phi[i, :n, :n].copy()
        b = phi[i, :n, n:n + ix.NU].copy()
        g = phi[i, :n, n + ix.NU:].copy()
        x_next = step(x_ref, u_ref, w_ref, delta_t, params, h=h, smoothed=True)
        z_f = x_next - a @ x_ref - b @ u_ref - g @ w_ref
        c = jacs[i][3]
        y_ref = output(x_ref, params)
        z_g = y_ref - c @ x_ref
        models.append(AffineModel(a, b, g, z_f, c, z_g,
                                  x_ref.copy(), u_ref.copy(), w_ref.copy(),
                                  y_ref, delta_t))
    return models


def linearize_at(x, u, w, delta_t, params=_DEFAULT, h=1.0 / 5760.0,
                 eps_rel=1e-6, eps_min=1e-6):
    """Convenience: `jacobians` + `discretize` at one anchor."""
    jac = jacobians(x, u, w, params, eps_rel, eps_min, smoothed=True)
    return discretize(jac, delta_t, (x, u, w), params, h=h)
