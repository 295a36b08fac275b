"""Converting continuous potentials into class labels: the argmax rule, the
cardinality-constrained transportation LP with slack epsilon, and the
cut-regularized MBO refinement."""

from dataclasses import dataclass

import numpy as np

from . import _simplex, graphs

BINARY_TOL = 1e-9


@dataclass
class AssignmentMatrix:
    """Row-stochastic n x k assignment with target cardinalities m and the
    slack epsilon used to produce it. At epsilon = 0 the matrix is binary."""

    P: np.ndarray
    m: np.ndarray
    epsilon: float

    def labels(self):
        return np.argmax(self.P, axis=1)

    @property
    def is_binary(self):
        return bool(np.all(np.abs(self.P - np.round(self.P)) <= BINARY_TOL))


def _scores(Phi):
    S = np.ascontiguousarray(getattr(Phi, "Phi", Phi), dtype=np.float64)
    if S.ndim != 2:
        raise ValueError("potentials must be an n x k matrix")
    if not np.all(np.isfinite(S)):
        raise ValueError("potentials must be finite")
    return S


def argmax_assign(Phi):
    """Per-node argmax over classes; ties go to the lowest class index."""
    return np.argmax(_scores(Phi), axis=1)


def _transport_network(S, m):
    """Transportation simplex (network simplex on the bipartite tree basis)
    maximizing <S, P> with unit supplies and demands m. Returns binary P."""
    n, k = S.shape
    C = -S  # minimize cost
    # northwest-corner initial basic feasible solution
    flow = {}
    basis = []
    supply = np.ones(n)
    demand = m.astype(np.float64).copy()
    i = j = 0
    while i < n and j < k:
        q = min(supply[i], demand[j])
        flow[(i, j)] = q
        basis.append((i, j))
        supply[i] -= q
        demand[j] -= q
        if supply[i] <= 0 and i < n - 1:
            i += 1
        elif demand[j] <= 0 and j < k - 1:
            j += 1
        else:
            i += 1
            j += 1
    # ensure a spanning tree basis of n + k - 1 cells
    have = set(basis)
    i = j = 0
    while len(basis) < n + k - 1:
        for i in range(n):
            done = False
            for j in range(k):
                if (i, j) not in have:
                    cand = (i, j)
                    have.add(cand)
                    basis.append(cand)
                    flow[cand] = 0.0
                    if _is_forest(basis, n, k):
                        done = True
                        break
                    have.discard(cand)
                    basis.pop()
                    del flow[cand]
            if done:
                break
        else:
            raise _simplex.LPError("could not complete the transport basis")

    for _ in range(_simplex.MAX_PIVOTS):
        u, v = _potentials(basis, C, n, k)
        enter = None
        for i in range(n):
            red = C[i] - u[i] - v
            red[[j for (ii, j) in basis if ii == i]] = 0.0
            cols = np.flatnonzero(red < -1e-11)
            if cols.size:
                enter = (i, int(cols[0]))
                break
        if enter is None:
            break
        cycle = _find_cycle(basis, enter, n, k)
        minus = cycle[1::2]
        theta = min(flow[c] for c in minus)
        leave = min((c for c in minus if flow[c] <= theta + 1e-15))
        for idx, cell in enumerate(cycle):
            flow[cell] = flow.get(cell, 0.0) + (theta if idx % 2 == 0 else -theta)
        basis.remove(leave)
        basis.append(enter)
        del flow[leave]
    else:
        raise _simplex.LPError("transport pivot limit exceeded")

    P = np.zeros((n, k))
    for (i, j), q in flow.items():
        P[i, j] = q
    return P


def _is_forest(cells, n, k):
    parent = list(range(n + k))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in cells:
        ra, rb = find(i), find(n + j)
        if ra == rb:
            return False
        parent[ra] = rb
    return True


def _potentials(basis, C, n, k):
    # dual potentials on the basis tree: u_i + v_j = C_ij for basic cells
    adj_rows = [[] for _ in range(n)]
    adj_cols = [[] for _ in range(k)]
    for i, j in basis:
        adj_rows[i].append(j)
        adj_cols[j].append(i)
    u = np.full(n, np.nan)
    v = np.full(k, np.nan)
    u[0] = 0.0
    stack = [("r", 0)]
    while stack:
        kind, idx = stack.pop()
        if kind == "r":
            for j in adj_rows[idx]:
                if np.isnan(v[j]):
                    v[j] = C[idx, j] - u[idx]
                    stack.append(("c", j))
        else:
            for i in adj_cols[idx]:
                if np.isnan(u[i]):
                    u[i] = C[i, idx] - v[idx]
                    stack.append(("r", i))
    return u, v


def _find_cycle(basis, enter, n, k):
    # unique alternating cycle created by the entering cell in the basis tree
    adj_rows = [[] for _ in range(n)]
    adj_cols = [[] for _ in range(k)]
    for i, j in basis:
        adj_rows[i].append(j)
        adj_cols[j].append(i)
    start_i, start_j = enter
    # path in the tree from row start_i to column start_j
    prev = {("r", start_i): None}
    stack = [("r", start_i)]
    target = ("c", start_j)
    while stack:
        node = stack.pop()
        if node == target:
            break
        kind, idx = node
        if kind == "r":
            for j in adj_rows[idx]:
                nxt = ("c", j)
                if nxt not in prev:
                    prev[nxt] = node
                    stack.append(nxt)
        else:
            for i in adj_cols[idx]:
                nxt = ("r", i)
                if nxt not in prev:
                    prev[nxt] = node
                    stack.append(nxt)
    path = [target]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    path.reverse()  # row start -> ... -> column start_j
    cycle = [enter]
    # walk the tree path backwards pairing (row, col) cells
    nodes = path
    cells = []
    for a, b in zip(nodes[:-1], nodes[1:]):
        if a[0] == "r":
            cells.append((a[1], b[1]))
        else:
            cells.append((b[1], a[1]))
    cells.reverse()
    cycle.extend(cells)
    return cycle


def _transport_simplex_lp(S, m, epsilon):
    """Dense-simplex route for the relaxed polytope with slack epsilon."""
    n, k = S.shape
    nv = n * k
    c = -S.reshape(-1)

    A_eq = np.zeros((n, nv))
    for i in range(n):
        A_eq[i, i * k : (i + 1) * k] = 1.0
    b_eq = np.ones(n)

    if epsilon == 0:
        A_cols = np.zeros((k, nv))
        for j in range(k):
            A_cols[j, j::k] = 1.0
        A_eq = np.vstack([A_eq, A_cols])
        b_eq = np.concatenate([b_eq, m.astype(np.float64)])
        A_ub, b_ub = None, None
    else:
        rows = []
        rhs = []
        for j in range(k):
            row = np.zeros(nv)
            row[j::k] = 1.0
            rows.append(row)
            rhs.append(float(m[j]) + epsilon)
            low = float(m[j]) - epsilon
            if low > 0:
                rows.append(-row)
                rhs.append(-low)
        A_ub = np.vstack(rows)
        b_ub = np.asarray(rhs)
    x, _ = _simplex.solve_lp(c, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub)
    return x.reshape(n, k)


def transport_assign(Phi, m, epsilon, method="auto"):
    """Maximize <Phi, P> over row-stochastic P with column sums within
    [m - eps, m + eps].

    At epsilon = 0 the optimum lies on the transportation polytope and is
    integral; the result is verified binary and rounded. ``method`` selects
    the solver for the epsilon = 0 case: "network" (transportation simplex,
    the scalable default) or "simplex" (the dense two-phase simplex used for
    cross-validation). Positive epsilon always uses the dense simplex.
    """
    S = _scores(Phi)
    n, k = S.shape
    m = np.asarray(m, dtype=np.int64)
    if m.shape != (k,) or np.any(m < 0):
        raise ValueError("cardinalities must be k nonnegative integers")
    if int(m.sum()) != n:
        raise ValueError(f"cardinalities sum to {int(m.sum())}, expected n={n}")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")

    if epsilon == 0:
        if method in ("auto", "network"):
            P = _transport_network(S, m)
        elif method == "simplex":
            P = _transport_simplex_lp(S, m, 0.0)
        else:
            raise ValueError(f"unknown method {method!r}")
        if np.any(np.abs(P - np.round(P)) > BINARY_TOL):
            raise _simplex.LPError("transport solution failed the integrality check")
        P = np.round(P)
    else:
        P = _transport_simplex_lp(S, m, float(epsilon))
    return AssignmentMatrix(P=P, m=m, epsilon=float(epsilon))


def mbo_refine(g, Phi, m, alpha, eta_step=None, max_iter=100):
    """Cut-regularized refinement minimizing alpha <P, L P> - <Phi, P> over
    binary assignments with exact cardinalities.

    Alternates the gradient step P - eta (2 alpha L P - Phi) with the linear
    maximization over the transportation polytope (a transport_assign call at
    epsilon = 0) and returns the best iterate by the regularized objective.
    """
    S = _scores(Phi)
    n, k = S.shape
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    m = np.asarray(m, dtype=np.int64)
    if eta_step is None:
        norm1 = 2.0 * float(g.degrees.max()) if g.n else 1.0
        eta_step = 1.0 / (2.0 * alpha * norm1 + 1.0)

    def lap_cols(P):
        return np.column_stack(
            [graphs.laplacian_apply(g, P[:, j]) for j in range(P.shape[1])]
        )

    def objective(P):
        return alpha * float(np.sum(P * lap_cols(P))) - float(np.sum(S * P))

    P = transport_assign(S, m, 0).P
    best_P, best_val = P, objective(P)
    for _ in range(max_iter):
        grad = 2.0 * alpha * lap_cols(P) - S
        half = P - eta_step * grad
        P_next = transport_assign(half, m, 0).P
        val = objective(P_next)
        if val < best_val - 1e-15:
            best_P, best_val = P_next, val
        if np.array_equal(P_next, P):
            break
        P = P_next
    return AssignmentMatrix(P=best_P, m=m, epsilon=0.0)
