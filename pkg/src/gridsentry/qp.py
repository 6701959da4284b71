"""Dense convex QP / small MIQP solver.

Primal active-set method (nullspace EQP steps) over a feasible point found by
an LP phase 1 (scipy HiGHS). Everything is deterministic under fixed inputs:
ties break on the lowest row index, branching on the lowest variable index.
Infeasibility is certified by the positive optimum of an elastic phase-1
re-solve. Binaries are handled by depth-first branch and bound on the convex
relaxation, which is exact for convex objectives.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

__all__ = ["QuadraticProgram", "QpSolution", "solve_qp", "solve_miqp", "write_lp"]

_STEP_TOL = 1e-11
_ACTIVE_TOL = 1e-8
_DUAL_TOL = 1e-9


@dataclass
class QuadraticProgram:
    """min 0.5 x'Qx + c'x + const  s.t.  A x = b, G x <= h, lb <= x <= ub."""

    q: np.ndarray
    c: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    names: list[str] = field(default_factory=list)
    eq_names: list[str] = field(default_factory=list)
    ub_names: list[str] = field(default_factory=list)
    integer: np.ndarray | None = None      # bool mask of binary variables
    const: float = 0.0

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def __post_init__(self):
        n = self.n
        self.q = np.asarray(self.q, dtype=float).reshape(n, n)
        self.c = np.asarray(self.c, dtype=float).reshape(n)
        self.a_eq = np.asarray(self.a_eq, dtype=float).reshape(-1, n)
        self.b_eq = np.asarray(self.b_eq, dtype=float).reshape(-1)
        self.a_ub = np.asarray(self.a_ub, dtype=float).reshape(-1, n)
        self.b_ub = np.asarray(self.b_ub, dtype=float).reshape(-1)
        self.lb = np.asarray(self.lb, dtype=float).reshape(n)
        self.ub = np.asarray(self.ub, dtype=float).reshape(n)
        if not self.names:
            self.names = [f"x{i}" for i in range(n)]
        if not self.eq_names:
            self.eq_names = [f"eq{i}" for i in range(self.a_eq.shape[0])]
        if not self.ub_names:
            self.ub_names = [f"ub{i}" for i in range(self.a_ub.shape[0])]
        if self.integer is None:
            self.integer = np.zeros(n, dtype=bool)

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.q @ x + self.c @ x + self.const)


@dataclass
class QpSolution:
    status: str          # optimal | infeasible | unbounded | iteration_limit | numerical
    x: np.ndarray | None
    objective: float | None
    dual_eq: np.ndarray | None
    dual_ub: np.ndarray | None       # folded rows: a_ub, then ub, then -lb
    kkt_residual: float | None
    iterations: int
    certificate: dict | None = None
    solve_time_s: float = 0.0
    nodes: int = 0                   # branch-and-bound nodes (MIQP)
    binding: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _fold(qp: QuadraticProgram):
    """Fold variable bounds into the inequality system. Returns G, h, labels."""
    n = qp.n
    rows = [qp.a_ub]
    rhs = [qp.b_ub]
    labels = list(qp.ub_names)
    ub_idx = np.where(np.isfinite(qp.ub))[0]
    lb_idx = np.where(np.isfinite(qp.lb))[0]
    if ub_idx.size:
        e = np.zeros((ub_idx.size, n))
        e[np.arange(ub_idx.size), ub_idx] = 1.0
        rows.append(e)
        rhs.append(qp.ub[ub_idx])
        labels.extend(f"ub:{qp.names[i]}" for i in ub_idx)
    if lb_idx.size:
        e = np.zeros((lb_idx.size, n))
        e[np.arange(lb_idx.size), lb_idx] = -1.0
        rows.append(e)
        rhs.append(-qp.lb[lb_idx])
        labels.extend(f"lb:{qp.names[i]}" for i in lb_idx)
    g = np.vstack([r for r in rows if r.size]) if any(r.size for r in rows) else np.zeros((0, n))
    h = np.concatenate([r for r in rhs if r.size]) if any(r.size for r in rhs) else np.zeros(0)
    return g, h, labels


def _phase1(qp: QuadraticProgram, g, h):
    """Feasible point via HiGHS; on failure, elastic LP gives the certificate."""
    n = qp.n
    res = linprog(
        c=np.zeros(n),
        A_ub=g if g.size else None,
        b_ub=h if g.size else None,
        A_eq=qp.a_eq if qp.a_eq.size else None,
        b_eq=qp.b_eq if qp.a_eq.size else None,
        bounds=[(None, None)] * n,
        method="highs",
    )
    if res.status == 0:
        return np.asarray(res.x, dtype=float), None
    # elastic re-solve: minimize total violation
    mi, me = g.shape[0], qp.a_eq.shape[0]
    n2 = n + mi + 2 * me
    c2 = np.concatenate([np.zeros(n), np.ones(mi + 2 * me)])
    a_ub2 = np.hstack([g, -np.eye(mi), np.zeros((mi, 2 * me))]) if mi else None
    a_eq2 = (
        np.hstack([qp.a_eq, np.zeros((me, mi)), np.eye(me), -np.eye(me)]) if me else None
    )
    bounds = [(None, None)] * n + [(0, None)] * (mi + 2 * me)
    res2 = linprog(
        c=c2,
        A_ub=a_ub2,
        b_ub=h if mi else None,
        A_eq=a_eq2,
        b_eq=qp.b_eq if me else None,
        bounds=bounds,
        method="highs",
    )
    viol = float(res2.fun) if res2.status == 0 else float("inf")
    cert = {
        "kind": "phase1-positive-optimum",
        "violation": viol,
        "eq_duals": list(map(float, res2.eqlin.marginals)) if (me and res2.status == 0) else [],
        "ub_duals": list(map(float, res2.ineqlin.marginals)) if (mi and res2.status == 0) else [],
    }
    return None, cert


def _nullspace(c_rows: np.ndarray, n: int):
    """Orthonormal basis of null(c_rows) plus a rank-filtered row basis.

    SVD-based: linearly dependent rows may appear anywhere in the set (e.g.
    duplicated constraints), which defeats rank detection on an unpivoted QR.
    """
    if c_rows.shape[0] == 0:
        return np.eye(n), np.zeros((0, n))
    _, s, vt = np.linalg.svd(c_rows, full_matrices=True)
    thresh = max(c_rows.shape) * np.finfo(float).eps * (s[0] if s.size else 1.0)
    rank = int((s > thresh).sum())
    return vt[rank:].T, vt[:rank]


def solve_qp(
    qp: QuadraticProgram,
    x0: np.ndarray | None = None,
    max_iter: int | None = None,
    tol: float = 1e-9,
) -> QpSolution:
    """Solve the convex QP. ``x0``, if given, must be feasible (warm start).

    Variables pinned by ``lb == ub`` are substituted out before the active-set
    core runs: the folded +/- bound rows of a pinned variable are linearly
    dependent, which makes working-set multipliers ambiguous. Their bound
    duals are reconstructed exactly from the reduced costs afterwards.
    """
    t0 = time.perf_counter()
    n = qp.n
    if np.any(qp.lb > qp.ub + 1e-9):
        bad = int(np.argmax(qp.lb - qp.ub))
        return QpSolution(
            status="infeasible",
            x=None,
            objective=None,
            dual_eq=None,
            dual_ub=None,
            kkt_residual=None,
            iterations=0,
            certificate={
                "kind": "crossed-bounds",
                "variable": qp.names[bad],
                "violation": float(qp.lb[bad] - qp.ub[bad]),
            },
            solve_time_s=time.perf_counter() - t0,
        )
    pin = np.isfinite(qp.lb) & np.isfinite(qp.ub) & (qp.ub - qp.lb <= 1e-12)
    if not pin.any():
        return _active_set(qp, x0, max_iter, tol, t0)
    return _solve_pinned(qp, pin, x0, max_iter, tol, t0)


def _solve_pinned(qp, pin, x0, max_iter, tol, t0) -> QpSolution:
    """Eliminate lb==ub variables, solve the reduction, scatter the solution."""
    n = qp.n
    me, m_ub = qp.a_eq.shape[0], qp.a_ub.shape[0]
    pidx = np.where(pin)[0]
    fidx = np.where(~pin)[0]
    xp = 0.5 * (qp.lb[pidx] + qp.ub[pidx])
    x_full = np.zeros(n)
    x_full[pidx] = xp

    if fidx.size == 0:
        viol = 0.0
        if me:
            viol = max(viol, float(np.max(np.abs(qp.a_eq @ x_full - qp.b_eq))))
        if m_ub:
            viol = max(viol, float(max(0.0, np.max(qp.a_ub @ x_full - qp.b_ub))))
        scale = 1.0 + max(
            float(np.max(np.abs(qp.b_eq))) if me else 0.0,
            float(np.max(np.abs(qp.b_ub))) if m_ub else 0.0,
        )
        if viol > 1e-8 * scale:
            return QpSolution(
                status="infeasible",
                x=None,
                objective=None,
                dual_eq=None,
                dual_ub=None,
                kkt_residual=None,
                iterations=0,
                certificate={"kind": "pinned-infeasible", "violation": viol},
                solve_time_s=time.perf_counter() - t0,
            )
        dual_eq = np.zeros(me)
        lam_aub = np.zeros(m_ub)
        dual_ub = _scatter_bound_duals(qp, x_full, dual_eq, lam_aub, {}, pidx)
        return _assemble(qp, x_full, dual_eq, dual_ub, 0, t0)

    cross = 0.5 * (qp.q[np.ix_(fidx, pidx)] + qp.q[np.ix_(pidx, fidx)].T)
    sub = QuadraticProgram(
        q=qp.q[np.ix_(fidx, fidx)],
        c=qp.c[fidx] + cross @ xp,
        a_eq=qp.a_eq[:, fidx],
        b_eq=qp.b_eq - qp.a_eq[:, pidx] @ xp,
        a_ub=qp.a_ub[:, fidx],
        b_ub=qp.b_ub - qp.a_ub[:, pidx] @ xp,
        lb=qp.lb[fidx],
        ub=qp.ub[fidx],
        names=[qp.names[i] for i in fidx],
        eq_names=list(qp.eq_names),
        ub_names=list(qp.ub_names),
        const=qp.const + float(qp.c[pidx] @ xp + 0.5 * xp @ qp.q[np.ix_(pidx, pidx)] @ xp),
    )
    sol = _active_set(sub, x0[fidx] if x0 is not None else None, max_iter, tol, t0)
    if sol.x is not None:
        x_full[fidx] = sol.x
    if sol.status in ("infeasible", "numerical") or sol.x is None:
        sol.solve_time_s = time.perf_counter() - t0
        return sol
    if sol.status != "optimal":
        return QpSolution(
            status=sol.status,
            x=x_full,
            objective=qp.objective(x_full) if sol.objective is not None else None,
            dual_eq=None,
            dual_ub=None,
            kkt_residual=None,
            iterations=sol.iterations,
            certificate=sol.certificate,
            solve_time_s=time.perf_counter() - t0,
        )

    # map reduced bound duals back to full folded-row positions
    sub_free: dict[int, tuple[float, float]] = {}
    ub_idx_sub = np.where(np.isfinite(sub.ub))[0]
    lb_idx_sub = np.where(np.isfinite(sub.lb))[0]
    for k, j in enumerate(ub_idx_sub):
        i = int(fidx[j])
        sub_free.setdefault(i, (0.0, 0.0))
        sub_free[i] = (float(sol.dual_ub[m_ub + k]), sub_free[i][1])
    for k, j in enumerate(lb_idx_sub):
        i = int(fidx[j])
        sub_free.setdefault(i, (0.0, 0.0))
        sub_free[i] = (sub_free[i][0], float(sol.dual_ub[m_ub + ub_idx_sub.size + k]))
    dual_eq = sol.dual_eq if sol.dual_eq is not None else np.zeros(me)
    lam_aub = sol.dual_ub[:m_ub] if sol.dual_ub is not None else np.zeros(m_ub)
    dual_ub = _scatter_bound_duals(qp, x_full, dual_eq, lam_aub, sub_free, pidx)
    return _assemble(qp, x_full, dual_eq, dual_ub, sol.iterations, t0)


def _scatter_bound_duals(qp, x, dual_eq, lam_aub, free_duals, pidx):
    """Full folded dual vector from a_ub duals, free-variable bound duals, and
    exact reduced-cost duals for pinned variables."""
    m_ub = qp.a_ub.shape[0]
    ub_idx = np.where(np.isfinite(qp.ub))[0]
    lb_idx = np.where(np.isfinite(qp.lb))[0]
    pos_ub = {int(i): m_ub + k for k, i in enumerate(ub_idx)}
    pos_lb = {int(i): m_ub + ub_idx.size + k for k, i in enumerate(lb_idx)}
    dual_ub = np.zeros(m_ub + ub_idx.size + lb_idx.size)
    dual_ub[:m_ub] = lam_aub
    for i, (du, dl) in free_duals.items():
        if i in pos_ub:
            dual_ub[pos_ub[i]] = du
        if i in pos_lb:
            dual_ub[pos_lb[i]] = dl
    # stationarity row of a pinned variable is closed exactly by its bound pair
    r = qp.q @ x + qp.c + qp.a_eq.T @ dual_eq + qp.a_ub.T @ lam_aub
    for i in pidx:
        i = int(i)
        dual_ub[pos_ub[i]] = max(-r[i], 0.0)
        dual_ub[pos_lb[i]] = max(r[i], 0.0)
    return dual_ub


def _active_set(
    qp: QuadraticProgram,
    x0: np.ndarray | None,
    max_iter: int | None,
    tol: float,
    t0: float,
) -> QpSolution:
    """Primal active-set core; assumes lb < ub strictly for every variable."""
    n = qp.n
    g, h, labels = _fold(qp)
    me, mi = qp.a_eq.shape[0], g.shape[0]
    max_iter = max_iter if max_iter is not None else 100 + 12 * n

    if x0 is None:
        x, cert = _phase1(qp, g, h)
        if x is None:
            return QpSolution(
                status="infeasible",
                x=None,
                objective=None,
                dual_eq=None,
                dual_ub=None,
                kkt_residual=None,
                iterations=0,
                certificate=cert,
                solve_time_s=time.perf_counter() - t0,
            )
    else:
        x = np.array(x0, dtype=float)

    # working set: tight inequalities at the start point
    if mi:
        slack = h - g @ x
        work = sorted(int(i) for i in np.where(slack <= _ACTIVE_TOL)[0])
    else:
        work = []

    zero_steps = 0
    it = 0
    while it < max_iter:
        it += 1
        grad = qp.q @ x + qp.c
        c_rows = np.vstack([qp.a_eq, g[work]]) if (me or work) else np.zeros((0, n))
        z, _ = _nullspace(c_rows, n)
        if z.shape[1] == 0:
            p = np.zeros(n)
        else:
            hred = z.T @ qp.q @ z
            gred = z.T @ grad
            p_red, ray = _eqp_step(hred, gred)
            if ray is not None:
                d = z @ ray
                alpha, block = _ratio_test(g, h, x, d, work, mi)
                if block is None:
                    return QpSolution(
                        status="unbounded",
                        x=x,
                        objective=None,
                        dual_eq=None,
                        dual_ub=None,
                        kkt_residual=None,
                        iterations=it,
                        solve_time_s=time.perf_counter() - t0,
                    )
                x = x + alpha * d
                work = sorted(set(work) | {block})
                continue
            p = z @ p_red

        if np.max(np.abs(p)) <= _STEP_TOL:
            # multipliers for A and the working inequalities
            c_rows = np.vstack([qp.a_eq, g[work]]) if (me or work) else np.zeros((0, n))
            if c_rows.shape[0]:
                lam, *_ = np.linalg.lstsq(c_rows.T, -grad, rcond=None)
            else:
                lam = np.zeros(0)
            lam_ineq = lam[me:]
            neg = [i for i, v in enumerate(lam_ineq) if v < -_DUAL_TOL]
            if not neg:
                return _finish(qp, g, h, labels, x, lam, work, it, t0)
            if zero_steps > 4 * max(n, 8):     # Bland-style fallback against cycling
                drop = min(neg, key=lambda i: work[i])
            else:
                drop = min(neg, key=lambda i: (lam_ineq[i], work[i]))
            work = [w for j, w in enumerate(work) if j != drop]
            zero_steps += 1
            continue

        alpha, block = _ratio_test(g, h, x, p, work, mi)
        alpha = min(1.0, alpha)
        zero_steps = zero_steps + 1 if alpha <= _STEP_TOL else 0
        x = x + alpha * p
        if block is not None and alpha < 1.0 - 1e-12:
            work = sorted(set(work) | {block})

    return QpSolution(
        status="iteration_limit",
        x=x,
        objective=qp.objective(x),
        dual_eq=None,
        dual_ub=None,
        kkt_residual=None,
        iterations=it,
        solve_time_s=time.perf_counter() - t0,
    )


def _eqp_step(hred: np.ndarray, gred: np.ndarray):
    """Newton step on the reduced problem; (step, None) or (None, ray)."""
    k = hred.shape[0]
    if k == 0:
        return np.zeros(0), None
    gscale = max(1.0, float(np.max(np.abs(gred))))
    try:
        ch = np.linalg.cholesky(hred)
        y = np.linalg.solve(ch.T, np.linalg.solve(ch, -gred))
        resid = float(np.max(np.abs(hred @ y + gred)))
        if np.isfinite(y).all() and resid <= 1e-7 * gscale:
            return y, None
    except np.linalg.LinAlgError:
        pass
    # singular reduced Hessian: look for a zero-curvature descent ray
    w, v = np.linalg.eigh(hred)
    scale = max(float(np.max(np.abs(w))) if w.size else 1.0, 1.0)
    small = w <= 1e-11 * scale
    if small.any():
        comp = v[:, small].T @ gred
        j = int(np.argmax(np.abs(comp)))
        if abs(comp[j]) > 1e-9 * gscale:
            ray = -np.sign(comp[j]) * v[:, small][:, j]
            return None, ray
    wpos = np.where(w > 1e-11 * scale, w, np.inf)
    y = -(v @ ((v.T @ gred) / wpos))
    return y, None


def _ratio_test(g, h, x, p, work, mi):
    """Largest feasible step along p; (alpha, blocking_row or None)."""
    if not mi:
        return np.inf, None
    gp = g @ p
    slack = h - g @ x
    alpha, block = np.inf, None
    for i in range(mi):
        if i in work or gp[i] <= 1e-12:
            continue
        a = max(slack[i], 0.0) / gp[i]
        if a < alpha - 1e-12:
            alpha, block = a, i
    return alpha, block


def _finish(qp, g, h, labels, x, lam, work, iterations, t0):
    me = qp.a_eq.shape[0]
    dual_eq = np.asarray(lam[:me], dtype=float) if me else np.zeros(0)
    dual_ub = np.zeros(g.shape[0])
    for j, w in enumerate(work):
        dual_ub[w] = max(0.0, float(lam[me + j]))
    return _assemble(qp, x, dual_eq, dual_ub, iterations, t0, g, h, labels)


def _assemble(qp, x, dual_eq, dual_ub, iterations, t0, g=None, h=None, labels=None):
    """Final KKT accounting. Demotes the status when the residual disproves
    optimality, so callers (branch and bound above all) never trust a bound
    from a numerically failed solve."""
    if g is None:
        g, h, labels = _fold(qp)
    n = qp.n
    grad = qp.q @ x + qp.c
    stat = grad + qp.a_eq.T @ dual_eq + g.T @ dual_ub
    r_stat = float(np.max(np.abs(stat))) if n else 0.0
    r_prim = 0.0
    if qp.a_eq.shape[0]:
        r_prim = max(r_prim, float(np.max(np.abs(qp.a_eq @ x - qp.b_eq))))
    r_comp = 0.0
    if g.shape[0]:
        resid_ub = g @ x - h
        r_prim = max(r_prim, float(max(0.0, np.max(resid_ub))))
        r_comp = float(np.max(np.abs(dual_ub * resid_ub)))
        slack = -resid_ub
        binding = [
            labels[k]
            for k in range(g.shape[0])
            if dual_ub[k] > 1e-7 and slack[k] <= _ACTIVE_TOL
        ]
    else:
        binding = []
    resid = max(r_stat, r_prim, r_comp)
    gate = 1e-6 * max(1.0, float(np.max(np.abs(grad))) if n else 0.0)
    return QpSolution(
        status="optimal" if resid <= gate else "numerical",
        x=x,
        objective=qp.objective(x),
        dual_eq=dual_eq,
        dual_ub=dual_ub,
        kkt_residual=resid,
        iterations=iterations,
        solve_time_s=time.perf_counter() - t0,
        binding=binding,
    )


# ---------------------------------------------------------------------------
# branch and bound

def solve_miqp(qp: QuadraticProgram, node_limit: int = 4000, tol: float = 1e-6) -> QpSolution:
    """Exact branch-and-bound for QPs with binary variables.

    Depth-first, most-fractional branching (ties to the lowest index), zero
    branch explored first. Convex relaxations make the bound valid, so the
    search provably matches exhaustive enumeration.
    """
    t0 = time.perf_counter()
    intmask = qp.integer
    ints = np.where(intmask)[0]
    if ints.size == 0:
        return solve_qp(qp)

    best: QpSolution | None = None
    best_obj = np.inf
    nodes = 0
    infeasible_only = True
    stack: list[dict[int, int]] = [{}]      # fixed binary assignments

    while stack and nodes < node_limit:
        fixed = stack.pop()
        nodes += 1
        node_qp = _with_fixed(qp, fixed)
        rel = solve_qp(node_qp)
        if rel.status == "numerical":
            # no trustworthy bound: keep branching instead of pruning
            infeasible_only = False
            unfixed = [int(i) for i in ints if int(i) not in fixed]
            if unfixed:
                stack.append({**fixed, unfixed[0]: 1})
                stack.append({**fixed, unfixed[0]: 0})
            continue
        if rel.status != "optimal":
            continue
        infeasible_only = False
        if rel.objective is not None and rel.objective >= best_obj - 1e-9:
            continue
        xr = rel.x
        frac = np.abs(xr[ints] - np.round(xr[ints]))
        if np.all(frac <= tol):
            exact_fix = {int(i): int(round(xr[i])) for i in ints}
            cand = solve_qp(_with_fixed(qp, exact_fix))
            if cand.status == "optimal" and cand.objective < best_obj - 1e-12:
                best, best_obj = cand, cand.objective
            continue
        j = int(ints[np.lexsort((ints, -frac))[0]])
        # LIFO: push the one-branch first so the zero-branch is explored first
        stack.append({**fixed, j: 1})
        stack.append({**fixed, j: 0})

    if best is None:
        status = "infeasible" if infeasible_only else "iteration_limit"
        return QpSolution(
            status=status,
            x=None,
            objective=None,
            dual_eq=None,
            dual_ub=None,
            kkt_residual=None,
            iterations=0,
            certificate={"kind": "branch-and-bound", "nodes": nodes},
            solve_time_s=time.perf_counter() - t0,
            nodes=nodes,
        )
    best.nodes = nodes
    best.solve_time_s = time.perf_counter() - t0
    return best


def _with_fixed(qp: QuadraticProgram, fixed: dict[int, int]) -> QuadraticProgram:
    lb = qp.lb.copy()
    ub = qp.ub.copy()
    for i, v in fixed.items():
        lb[i] = ub[i] = float(v)
    return QuadraticProgram(
        q=qp.q,
        c=qp.c,
        a_eq=qp.a_eq,
        b_eq=qp.b_eq,
        a_ub=qp.a_ub,
        b_ub=qp.b_ub,
        lb=lb,
        ub=ub,
        names=qp.names,
        eq_names=qp.eq_names,
        ub_names=qp.ub_names,
        integer=qp.integer,
        const=qp.const,
    )


# ---------------------------------------------------------------------------
# debugging dump

def write_lp(qp: QuadraticProgram, path) -> None:
    """CPLEX-LP-style text dump of the problem (debugging artifact)."""
    lines = ["\\ gridsentry problem dump", "Minimize", " obj:"]
    terms = []
    for i, ci in enumerate(qp.c):
        if ci:
            terms.append(f" {ci:+.12g} {qp.names[i]}")
    quad = []
    for i in range(qp.n):
        for j in range(i, qp.n):
            v = qp.q[i, j] if i == j else qp.q[i, j] + qp.q[j, i]
            if v:
                if i == j:
                    quad.append(f" {v:+.12g} {qp.names[i]} ^ 2")
                else:
                    quad.append(f" {v:+.12g} {qp.names[i]} * {qp.names[j]}")
    body = "".join(terms) or " 0 " + qp.names[0]
    if quad:
        body += " + [" + "".join(quad) + " ] / 2"
    lines.append(body)
    lines.append("Subject To")
    for k in range(qp.a_eq.shape[0]):
        expr = "".join(
            f" {qp.a_eq[k, i]:+.12g} {qp.names[i]}" for i in range(qp.n) if qp.a_eq[k, i]
        )
        lines.append(f" {qp.eq_names[k]}:{expr or ' 0 ' + qp.names[0]} = {qp.b_eq[k]:.12g}")
    for k in range(qp.a_ub.shape[0]):
        expr = "".join(
            f" {qp.a_ub[k, i]:+.12g} {qp.names[i]}" for i in range(qp.n) if qp.a_ub[k, i]
        )
        lines.append(f" {qp.ub_names[k]}:{expr or ' 0 ' + qp.names[0]} <= {qp.b_ub[k]:.12g}")
    lines.append("Bounds")
    for i in range(qp.n):
        lo = "-inf" if not np.isfinite(qp.lb[i]) else f"{qp.lb[i]:.12g}"
        hi = "+inf" if not np.isfinite(qp.ub[i]) else f"{qp.ub[i]:.12g}"
        lines.append(f" {lo} <= {qp.names[i]} <= {hi}")
    ints = np.where(qp.integer)[0]
    if ints.size:
        lines.append("Binaries")
        lines.append(" " + " ".join(qp.names[i] for i in ints))
    lines.append("End")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
