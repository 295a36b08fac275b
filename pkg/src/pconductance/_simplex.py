"""Self-contained dense two-phase primal simplex with Bland's rule.

Deliberately simple and auditable; used by the assignment LP and by the
duality validators. Problems are small (hundreds of variables), so a dense
tableau is adequate.
"""

import numpy as np

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-8
MAX_PIVOTS = 200000


class LPError(RuntimeError):
    pass


class LPInfeasibleError(LPError):
    pass


class LPUnboundedError(LPError):
    pass


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    colvals = T[:, col].copy()
    colvals[row] = 0.0
    T -= np.outer(colvals, T[row])
    basis[row] = col


def _bland_enter(cost_row, ncols):
    for j in range(ncols):
        if cost_row[j] < -PIVOT_TOL:
            return j
    return -1


def _bland_leave(T, basis, col, nrows):
    best = -1
    best_ratio = np.inf
    for i in range(nrows):
        a = T[i, col]
        if a > PIVOT_TOL:
            ratio = T[i, -1] / a
            if ratio < best_ratio - PIVOT_TOL or (
                abs(ratio - best_ratio) <= PIVOT_TOL
                and (best < 0 or basis[i] < basis[best])
            ):
                best = i
                best_ratio = ratio
    return best


def _run_simplex(T, basis, nrows, ncols):
    pivots = 0
    while True:
        col = _bland_enter(T[nrows], ncols)
        if col < 0:
            return
        row = _bland_leave(T, basis, col, nrows)
        if row < 0:
            raise LPUnboundedError("LP is unbounded")
        _pivot(T, basis, row, col)
        pivots += 1
        if pivots > MAX_PIVOTS:
            raise LPError("pivot limit exceeded")


def solve_lp(c, A_eq=None, b_eq=None, A_ub=None, b_ub=None, maximize=False):
    """Solve min c^T x (or max) subject to A_eq x = b_eq, A_ub x <= b_ub, x >= 0.

    Returns (x, value). Raises LPInfeasibleError / LPUnboundedError.
    """
    c = np.asarray(c, dtype=np.float64)
    nstruct = c.shape[0]
    blocks = []
    rhs = []
    n_ub = 0
    if A_eq is not None and len(A_eq):
        A_eq = np.asarray(A_eq, dtype=np.float64)
        blocks.append(A_eq)
        rhs.append(np.asarray(b_eq, dtype=np.float64))
    if A_ub is not None and len(A_ub):
        A_ub = np.asarray(A_ub, dtype=np.float64)
        n_ub = A_ub.shape[0]
        blocks.append(A_ub)
        rhs.append(np.asarray(b_ub, dtype=np.float64))
    if not blocks:
        raise LPError("no constraints given")
    m = sum(b.shape[0] for b in blocks)
    ncols = nstruct + n_ub
    A = np.zeros((m, ncols))
    b = np.concatenate(rhs)
    r0 = 0
    for blk in blocks:
        A[r0 : r0 + blk.shape[0], :nstruct] = blk[:, :nstruct]
        r0 += blk.shape[0]
    if n_ub:
        A[m - n_ub :, nstruct:] = np.eye(n_ub)
    neg = b < 0
    A[neg] *= -1.0
    b = np.abs(b)

    obj = -c if maximize else c.copy()
    full_obj = np.concatenate([obj, np.zeros(n_ub)])

    # phase 1: artificial basis on every row
    T = np.zeros((m + 1, ncols + m + 1))
    T[:m, :ncols] = A
    T[:m, ncols : ncols + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(ncols, ncols + m))
    # reduced costs for min sum(artificials): c_j - sum_i A_ij on structurals
    T[m, :ncols] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    _run_simplex(T, basis, m, ncols + m)
    if -T[m, -1] > FEAS_TOL:
        raise LPInfeasibleError(f"phase-1 objective {-T[m, -1]:.3e}")

    # drive artificials out of the basis; rows that cannot pivot are redundant
    keep = np.ones(m, dtype=bool)
    for i in range(m):
        if basis[i] >= ncols:
            j = next(
                (jj for jj in range(ncols) if abs(T[i, jj]) > PIVOT_TOL), None
            )
            if j is None:
                keep[i] = False
            else:
                _pivot(T, basis, i, j)
    if not np.all(keep):
        rows = np.flatnonzero(keep)
        T = np.vstack([T[rows], T[m:]])
        basis = [basis[i] for i in rows]
        m = rows.shape[0]

    # phase 2 cost row rebuilt from the real objective
    T = np.hstack([T[:, :ncols], T[:, -1:]])
    T[m, :ncols] = full_obj
    T[m, -1] = 0.0
    for i in range(m):
        T[m] -= full_obj[basis[i]] * T[i]
    _run_simplex(T, basis, m, ncols)

    x_full = np.zeros(ncols)
    for i in range(m):
        x_full[basis[i]] = T[i, -1]
    x = x_full[:nstruct]
    value = float(c @ x)
    return x, value
