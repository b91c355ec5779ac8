"""Dense convex QP solver: operator splitting (ADMM) with polishing.

    minimize    0.5 z' P z + q' z
    subject to  A_eq z = b_eq,   l <= A_in z <= u

Equality and inequality rows are stacked internally into l <= A z <= u with
l = u on the equality block.  The solver runs Ruiz equilibration, a fixed
relaxed-ADMM iteration with per-row step sizes and periodic step-size
adaptation, detects primal/dual infeasibility certificates, and finishes
with an active-set polish.  There are no randomized components: identical
inputs produce identical outputs.
"""

from dataclasses import dataclass, field

import numpy as np

_INF = 1e30


@dataclass
class QpProblem:
    P: np.ndarray
    q: np.ndarray
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None
    A_in: np.ndarray = None
    l_in: np.ndarray = None
    u_in: np.ndarray = None

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=np.float64)
        self.q = np.asarray(self.q, dtype=np.float64)
        n = self.q.size
        if self.P.shape != (n, n):
            raise ValueError("P/q dimension mismatch")
        if np.max(np.abs(self.P - self.P.T)) > 1e-12 * max(1.0, np.max(np.abs(self.P))):
            raise ValueError("P must be symmetric")
        for name in ("A_eq", "b_eq", "A_in", "l_in", "u_in"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, np.asarray(v, dtype=np.float64))
        if (self.A_eq is None) != (self.b_eq is None):
            raise ValueError("A_eq and b_eq must be given together")
        if self.A_eq is not None and self.A_eq.shape != (self.b_eq.size, n):
            raise ValueError("A_eq dimension mismatch")
        if self.A_in is not None:
            m = self.A_in.shape[0]
            if self.A_in.shape != (m, n) or self.l_in.size != m or self.u_in.size != m:
                raise ValueError("A_in/l/u dimension mismatch")
            if np.any(self.l_in > self.u_in):
                raise ValueError("inequality bounds must satisfy l <= u")

    def stacked(self):
        """(A, l, u) with the equality block first."""
        n = self.q.size
        blocks_a, blocks_l, blocks_u = [], [], []
        n_eq = 0
        if self.A_eq is not None and self.A_eq.size:
            blocks_a.append(self.A_eq)
            blocks_l.append(self.b_eq)
            blocks_u.append(self.b_eq)
            n_eq = self.b_eq.size
        if self.A_in is not None and self.A_in.size:
            blocks_a.append(self.A_in)
            blocks_l.append(np.maximum(self.l_in, -_INF))
            blocks_u.append(np.minimum(self.u_in, _INF))
        if not blocks_a:
            blocks_a = [np.zeros((0, n))]
            blocks_l = [np.zeros(0)]
            blocks_u = [np.zeros(0)]
        return np.vstack(blocks_a), np.concatenate(blocks_l), np.concatenate(blocks_u), n_eq


@dataclass
class QpSolution:
    z: np.ndarray
    y: np.ndarray
    status: str
    iterations: int
    prim_res: float
    dual_res: float
    objective: float
    polished: bool = False
    detail: str = ""


def kkt_residuals(problem, z, y):
    """Scaled primal/dual KKT residuals of (z, y), recomputed from scratch."""
    a, l, u, _ = problem.stacked()
    az = a @ z
    viol = np.maximum(az - u, 0.0) + np.maximum(l - az, 0.0)
    den_p = max(1.0, np.max(np.abs(az), initial=0.0),
                np.max(np.abs(l[np.abs(l) < _INF]), initial=0.0),
                np.max(np.abs(u[np.abs(u) < _INF]), initial=0.0))
    pz = problem.P @ z
    aty = a.T @ y if y.size else np.zeros_like(z)
    dual = pz + problem.q + aty
    den_d = max(1.0, np.max(np.abs(pz), initial=0.0),
                np.max(np.abs(problem.q), initial=0.0),
                np.max(np.abs(aty), initial=0.0))
    return (np.max(viol, initial=0.0) / den_p, np.max(np.abs(dual)) / den_d)


def _ruiz(p, q, a, l, u, iters=10):
    n = p.shape[0]
    m = a.shape[0]
    d = np.ones(n)
    e = np.ones(m)
    c = 1.0
    for _ in range(iters):
        col = np.maximum(np.max(np.abs(p), axis=0, initial=0.0),
                         np.max(np.abs(a), axis=0, initial=0.0) if m else 0.0)
        col = np.clip(np.sqrt(col), 1e-4, 1e4)
        dd = 1.0 / np.where(col > 0, col, 1.0)
        row = np.max(np.abs(a), axis=1, initial=0.0) if m else np.zeros(0)
        row = np.clip(np.sqrt(row), 1e-4, 1e4)
        ee = 1.0 / np.where(row > 0, row, 1.0)
        p = p * dd[:, None] * dd[None, :]
        q = q * dd
        if m:
            a = a * ee[:, None] * dd[None, :]
            l = l * ee
            u = u * ee
        d *= dd
        e *= ee
        # cost normalization
        pcol = np.max(np.abs(p), axis=0, initial=0.0)
        gamma = max(np.mean(pcol) if n else 0.0, np.max(np.abs(q), initial=0.0))
        gamma = 1.0 / min(max(gamma, 1e-4), 1e4)
        p = p * gamma
        q = q * gamma
        c *= gamma
    return p, q, a, l, u, d, e, c


def solve(problem, warm_start=None, tol=1e-6, max_iter=20000, rho0=0.1,
          sigma=1e-6, alpha=1.6, check_every=25, dump_path=None):
    """Solve a `QpProblem`; returns a `QpSolution`.

    `warm_start` may carry (z, y) from a related solve.  Residuals in the
    returned solution are recomputed independently of the iteration loop.
    `dump_path` writes the problem matrices to a text file for offline
    inspection before solving.
    """
    if dump_path is not None:
        dump_problem(problem, dump_path)

    p0 = problem.P
    if np.any(np.diag(p0) < 0) or _min_eig_estimate(p0) < 0:
        p0 = p0 + 1e-9 * np.eye(p0.shape[0])
    a0, l0, u0, n_eq = problem.stacked()
    n, m = p0.shape[0], a0.shape[0]

    ps, qs, as_, ls, us, d, e, c = _ruiz(p0.copy(), problem.q.copy(),
                                         a0.copy(), l0.copy(), u0.copy())

    rho_bar = rho0
    eq_boost = np.ones(m)
    eq_boost[:n_eq] = 1e3
    rho = rho_bar * eq_boost

    if warm_start is not None:
        z0, y0 = warm_start
        x = np.asarray(z0, dtype=np.float64) / d
        y = (np.asarray(y0, dtype=np.float64) * c / e) if y0 is not None else np.zeros(m)
    else:
        x = np.zeros(n)
        y = np.zeros(m)
    zeta = np.clip(as_ @ x, ls, us) if m else np.zeros(0)

    def factor(rho_vec):
        k = ps + sigma * np.eye(n)
        if m:
            k = k + (as_.T * rho_vec) @ as_
        return np.linalg.cholesky(k)

    chol = factor(rho)
    status = "max_iter"
    detail = ""
    it = 0
    x_chk, y_chk = x.copy(), y.copy()

    for it in range(1, max_iter + 1):
        rhs = sigma * x - qs + (as_.T @ (rho * zeta - y) if m else 0.0)
        xt = _chol_solve(chol, rhs)
        x_new = alpha * xt + (1.0 - alpha) * x
        if m:
            zt = as_ @ xt
            v = alpha * zt + (1.0 - alpha) * zeta + y / rho
            zeta_new = np.clip(v, ls, us)
            y = rho * (v - zeta_new)
            zeta = zeta_new
        x = x_new

        if it % check_every == 0 or it == max_iter:
            # unscaled iterates and residuals
            z_u = d * x
            y_u = e * y / c
            az = a0 @ z_u if m else np.zeros(0)
            zeta_u = zeta / e if m else np.zeros(0)
            rp = np.max(np.abs(az - zeta_u), initial=0.0)
            dual = p0 @ z_u + problem.q + (a0.T @ y_u if m else 0.0)
            rd = np.max(np.abs(dual))
            eps_p = tol + tol * max(np.max(np.abs(az), initial=0.0),
                                    np.max(np.abs(zeta_u), initial=0.0))
            eps_d = tol + tol * max(np.max(np.abs(p0 @ z_u), initial=0.0),
                                    np.max(np.abs(problem.q), initial=0.0),
                                    np.max(np.abs(a0.T @ y_u), initial=0.0) if m else 0.0)
            if rp <= eps_p and rd <= eps_d:
                status = "solved"
                break

            if m and _primal_infeasible(a0, l0, u0, e * (y - y_chk) / c):
                status = "infeasible"
                detail = "primal infeasibility certificate"
                break
            if _dual_infeasible(p0, problem.q, a0, l0, u0, d * (x - x_chk)):
                status = "infeasible"
                detail = "dual infeasibility certificate"
                break
            x_chk, y_chk = x.copy(), y.copy()

            # step-size adaptation
            if m and rp > 0 and rd > 0:
                num = rp / max(np.max(np.abs(az), initial=0.0),
                               np.max(np.abs(zeta_u), initial=0.0), 1e-12)
                den = rd / max(np.max(np.abs(p0 @ z_u), initial=0.0),
                               np.max(np.abs(problem.q), initial=0.0),
                               np.max(np.abs(a0.T @ y_u), initial=0.0), 1e-12)
                ratio = np.sqrt(num / den) if den > 0 else 1.0
                if np.isfinite(ratio) and (ratio > 5.0 or ratio < 0.2):
                    rho_bar = float(np.clip(rho_bar * ratio, 1e-6, 1e6))
                    rho = rho_bar * eq_boost
                    chol = factor(rho)

    z_u = d * x
    y_u = e * y / c if m else np.zeros(0)
    polished = False
    if status == "solved" and m:
        pol = _polish(p0, problem.q, a0, l0, u0, n_eq, z_u, y_u)
        if pol is not None:
            z_u, y_u = pol
            polished = True

    rp, rd = kkt_residuals(problem, z_u, y_u)
    obj = 0.5 * z_u @ (problem.P @ z_u) + problem.q @ z_u
    return QpSolution(z_u, y_u, status, it, rp, rd, obj, polished, detail)


def _min_eig_estimate(p):
    """Cheap negative-definiteness probe: Cholesky success means >= 0."""
    try:
        np.linalg.cholesky(p + 1e-14 * max(1.0, np.max(np.abs(p))) * np.eye(p.shape[0]))
        return 0.0
    except np.linalg.LinAlgError:
        return -1.0


def _chol_solve(chol, rhs):
    t = np.linalg.solve(chol, rhs)
    return np.linalg.solve(chol.T, t)


def _primal_infeasible(a, l, u, dy, eps=1e-9):
    nrm = np.max(np.abs(dy), initial=0.0)
    if nrm < 1e-14:
        return False
    dyn = dy / nrm
    if np.max(np.abs(a.T @ dyn)) > eps * max(1.0, np.max(np.abs(a))):
        return False
    dy_p = np.maximum(dyn, 0.0)
    dy_m = np.minimum(dyn, 0.0)
    if np.any((u >= _INF) & (dy_p > 1e-12)) or np.any((l <= -_INF) & (dy_m < -1e-12)):
        return False
    fin_u = np.where(u < _INF, u, 0.0)
    fin_l = np.where(l > -_INF, l, 0.0)
    return fin_u @ dy_p + fin_l @ dy_m < -eps


def _dual_infeasible(p, q, a, l, u, dx, eps=1e-9):
    nrm = np.max(np.abs(dx), initial=0.0)
    if nrm < 1e-14:
        return False
    dxn = dx / nrm
    if np.max(np.abs(p @ dxn)) > eps * max(1.0, np.max(np.abs(p))):
        return False
    if q @ dxn > -eps * max(1.0, np.max(np.abs(q))):
        return False
    adx = a @ dxn if a.size else np.zeros(0)
    scale = eps * max(1.0, np.max(np.abs(a), initial=0.0))
    ok_u = (u >= _INF) | (adx <= scale)
    ok_l = (l <= -_INF) | (adx >= -scale)
    return bool(np.all(ok_u & ok_l))


def _polish(p, q, a, l, u, n_eq, z, y, act_tol=1e-7):
    """Equality-KKT refinement on the active set; None if it doesn't help."""
    m = a.shape[0]
    az = a @ z
    scale = 1.0 + np.maximum(np.abs(l), np.abs(u))
    scale[~np.isfinite(scale)] = 1.0
    low = (az - l) / scale < act_tol
    upp = (u - az) / scale < act_tol
    act = np.zeros(m, dtype=bool)
    act[:n_eq] = True
    act |= low | upp
    idx = np.nonzero(act)[0]
    if idx.size == 0:
        # unconstrained stationary point
        try:
            z_new = np.linalg.solve(p + 1e-12 * np.eye(p.shape[0]), -q)
        except np.linalg.LinAlgError:
            return None
        return (z_new, np.zeros(m))
    a_act = a[idx]
    b_act = np.where(low[idx], l[idx], u[idx])
    n = p.shape[0]
    k = idx.size
    kkt = np.zeros((n + k, n + k))
    reg = 1e-11 * max(1.0, np.max(np.abs(p)))
    kkt[:n, :n] = p + reg * np.eye(n)
    kkt[:n, n:] = a_act.T
    kkt[n:, :n] = a_act
    kkt[n:, n:] = -reg * np.eye(k)
    rhs = np.concatenate([-q, b_act])
    try:
        sol = np.linalg.solve(kkt, rhs)
        # one step of iterative refinement
        resid = rhs - kkt @ sol
        sol = sol + np.linalg.solve(kkt, resid)
    except np.linalg.LinAlgError:
        return None
    z_new = sol[:n]
    y_new = np.zeros(m)
    y_new[idx] = sol[n:]
    prob = QpProblem(p, q, A_in=a, l_in=l, u_in=u)
    rp_new, rd_new = kkt_residuals(prob, z_new, y_new)
    rp_old, rd_old = kkt_residuals(prob, z, y)
    if max(rp_new, rd_new) <= max(rp_old, rd_old):
        return (z_new, y_new)
    return None


def dump_problem(problem, path):
    """Write the problem blocks to a text file (numpy savetxt sections)."""
    a, l, u, n_eq = problem.stacked()
    with open(path, "w", encoding="utf-8") as fh:
        for name, arr in (("P", problem.P), ("q", problem.q), ("A", a),
                          ("l", l), ("u", u)):
            fh.write(f"# {name} shape={arr.shape} n_eq={n_eq}\n")
            np.savetxt(fh, np.atleast_2d(arr), fmt="%.17g")
