"""Independent oracles that numerically verify the duality and robustness
claims: Beckmann transport programs, mincut/maxflow LPs, randomized cuts,
the diffusion robustness bound, and the lattice solver benchmark.

Everything here uses dense exact linear algebra, LPs through the audited
simplex, or exhaustive enumeration, and shares no numerics with the
production solver paths.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _simplex, graphs, solvers
from .measures import measure_values


# ---------------------------------------------------------------------------
# instance generators


def random_connected_graph(rng, n, extra_edge_prob=0.35, w_low=0.5, w_high=2.0):
    """Random spanning tree plus extra edges; weights uniform in [w_low, w_high]."""
    edges = {}
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges[(u, v)] = float(rng.uniform(w_low, w_high))
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in edges and rng.random() < extra_edge_prob:
                edges[(i, j)] = float(rng.uniform(w_low, w_high))
    return graphs.WeightedGraph(n, [(i, j, w) for (i, j), w in edges.items()])


def random_measure(rng, n, support=None):
    """Random probability measure supported on a few nodes."""
    if support is None:
        support = int(rng.integers(1, max(2, n // 3) + 1))
    nodes = rng.choice(n, size=support, replace=False)
    mass = rng.uniform(0.2, 1.0, size=support)
    v = np.zeros(n)
    v[nodes] = mass / mass.sum()
    return v


def random_disjoint_measures(rng, n):
    """A pair of probability measures with disjoint supports."""
    while True:
        mu = random_measure(rng, n)
        nu = random_measure(rng, n)
        if not np.any((mu > 0) & (nu > 0)):
            return mu, nu


# ---------------------------------------------------------------------------
# dense spectral helpers (oracle-local, assembled from the edge list)


def dense_laplacian(g):
    L = np.zeros((g.n, g.n))
    for i, j, w in zip(g.src, g.dst, g.w):
        L[i, i] += w
        L[j, j] += w
        L[i, j] -= w
        L[j, i] -= w
    return L


def dense_incidence(g):
    B = np.zeros((g.n, g.N))
    for e, (i, j) in enumerate(zip(g.src, g.dst)):
        B[i, e] = 1.0
        B[j, e] = -1.0
    return B


def dense_pinv_apply(L, b, tol=1e-11):
    vals, vecs = np.linalg.eigh(L)
    cut = tol * max(1.0, float(vals[-1]))
    inv = np.where(vals > cut, 1.0 / np.where(vals > cut, vals, 1.0), 0.0)
    return vecs @ (inv * (vecs.T @ b))


def effective_resistance_oracle(g, mu, nu):
    """(mu-nu)^T L^+ (mu-nu) through a dense eigendecomposition."""
    r = measure_values(mu) - measure_values(nu)
    L = dense_laplacian(g)
    return float(r @ dense_pinv_apply(L, r))


# ---------------------------------------------------------------------------
# Beckmann transport oracles


def conductance_dual_weights(g, p):
    """Beckmann exponent and weight vector gauge-dual to the p-conductance.

    p = 1 pairs with the weighted max (exponent inf, weights 1/w); finite
    p > 1 pairs with q = p/(p-1) and weights w^(1-q); p = inf pairs with the
    weighted 1-norm (weights 1/w).
    """
    if p == 1.0:
        return math.inf, 1.0 / g.w
    if math.isinf(p):
        return 1.0, 1.0 / g.w
    q = p / (p - 1.0)
    return q, g.w ** (1.0 - q)


def beckmann_oracle(g, mu, nu, p_B, weights, tol=1e-10):
    """Optimal value of the weighted Beckmann flow program
    min ||J||_{weights, p_B} subject to B J = mu - nu.

    p_B = 1 and p_B = inf are LPs on the audited simplex, p_B = 2 is the
    closed form with the weighted Laplacian pseudoinverse, and other
    exponents run a projected-gradient descent on the smooth flow objective.
    """
    if not g.is_connected():
        raise ValueError("Beckmann oracle needs a connected graph")
    if g.n > 64:
        raise ValueError("oracle scale exceeded")
    r = measure_values(mu) - measure_values(nu)
    c = np.asarray(weights, dtype=np.float64)
    N = g.N
    if p_B == 2.0:
        Lw = np.zeros((g.n, g.n))
        for i, j, ce in zip(g.src, g.dst, c):
            Lw[i, i] += 1.0 / ce
            Lw[j, j] += 1.0 / ce
            Lw[i, j] -= 1.0 / ce
            Lw[j, i] -= 1.0 / ce
        return float(np.sqrt(r @ dense_pinv_apply(Lw, r)))
    B = dense_incidence(g)
    if p_B == 1.0:
        # min sum c (J+ + J-)  s.t.  B (J+ - J-) = r
        cost = np.concatenate([c, c])
        A_eq = np.hstack([B, -B])
        x, val = _simplex.solve_lp(cost, A_eq=A_eq, b_eq=r)
        return val
    if math.isinf(p_B):
        # min t  s.t.  B (J+ - J-) = r,  c (J+ + J-) <= t
        cost = np.concatenate([np.zeros(2 * N), [1.0]])
        A_eq = np.hstack([B, -B, np.zeros((g.n, 1))])
        A_ub = np.hstack([np.diag(c), np.diag(c), -np.ones((N, 1))])
        x, val = _simplex.solve_lp(cost, A_eq=A_eq, b_eq=r, A_ub=A_ub,
                                   b_ub=np.zeros(N))
        return val
    return _beckmann_projected_gradient(g, r, float(p_B), c, tol=tol)


def _beckmann_projected_gradient(g, r, q, c, tol=1e-10, max_iter=500000):
    B = dense_incidence(g)
    pinv = np.linalg.pinv(B @ B.T, rcond=1e-12)
    null_proj = np.eye(g.N) - B.T @ pinv @ B
    J = B.T @ (pinv @ r)

    def value(J):
        return float(np.sum(c * np.abs(J) ** q))

    f = value(J)
    step = 1.0
    stall = 0
    for _ in range(max_iter):
        grad = null_proj @ (q * c * np.abs(J) ** (q - 1.0) * np.sign(J))
        gn2 = float(grad @ grad)
        if gn2 <= 1e-24:
            break
        while True:
            J_new = J - step * grad
            f_new = value(J_new)
            if f_new <= f - 1e-4 * step * gn2:
                break
            step *= 0.5
            if step < 1e-18:
                J_new, f_new = J, f
                break
        if abs(f - f_new) <= tol * 1e-3 * (1.0 + abs(f)):
            stall += 1
            if stall > 20:
                J, f = J_new, f_new
                break
        else:
            stall = 0
        J, f = J_new, f_new
        step *= 1.3
    return f ** (1.0 / q)


# ---------------------------------------------------------------------------
# mincut / maxflow linear programs (Dirac pairs generalize to measures)


@dataclass
class MincutResult:
    mincut_value: float
    maxflow_value: float
    psi: np.ndarray
    flow: np.ndarray


def mincut_maxflow_lp(g, mu, nu):
    """Solve the measure mincut LP and its maxflow dual on oriented edges.

    Returns both optimal values (equal under strong duality), the cut
    potentials psi, and the oriented flow J.
    """
    if not g.is_connected():
        raise ValueError("mincut LP needs a connected graph")
    if g.n > 64:
        raise ValueError("oracle scale exceeded")
    r = measure_values(mu) - measure_values(nu)
    n, N = g.n, g.N
    # oriented edges: (src->dst) then (dst->src)
    heads = np.concatenate([g.src, g.dst])
    tails = np.concatenate([g.dst, g.src])
    w2 = np.concatenate([g.w, g.w])
    M = 2 * N

    # mincut: min w^T kvar  s.t.  psi_i - psi_j - kvar_e <= 0, r^T psi >= 1
    nv = M + 2 * n
    cost = np.concatenate([w2, np.zeros(2 * n)])
    A_ub = np.zeros((M + 1, nv))
    for e in range(M):
        i, j = heads[e], tails[e]
        A_ub[e, e] = -1.0
        A_ub[e, M + i] += 1.0
        A_ub[e, M + n + i] -= 1.0
        A_ub[e, M + j] -= 1.0
        A_ub[e, M + n + j] += 1.0
    A_ub[M, M : M + n] = -r
    A_ub[M, M + n :] = r
    b_ub = np.zeros(M + 1)
    b_ub[M] = -1.0
    x, mincut_val = _simplex.solve_lp(cost, A_ub=A_ub, b_ub=b_ub)
    psi = x[M : M + n] - x[M + n :]

    # maxflow: max f  s.t.  Btilde J = f r, 0 <= J <= w
    cost = np.concatenate([np.zeros(M), [-1.0]])
    A_eq = np.zeros((n, M + 1))
    for e in range(M):
        A_eq[heads[e], e] += 1.0
        A_eq[tails[e], e] -= 1.0
    A_eq[:, M] = -r
    A_ub2 = np.hstack([np.eye(M), np.zeros((M, 1))])
    x2, neg_f = _simplex.solve_lp(cost, A_eq=A_eq, b_eq=np.zeros(n),
                                  A_ub=A_ub2, b_ub=w2)
    return MincutResult(
        mincut_value=mincut_val,
        maxflow_value=-neg_f,
        psi=psi,
        flow=x2[:M],
    )


def exhaustive_mincut_dirac(g, s, t):
    """Minimum s-t cut weight over all 2^(n-2) node bipartitions."""
    others = [v for v in range(g.n) if v not in (s, t)]
    best = math.inf
    in_a = np.zeros(g.n, dtype=bool)
    for bits in itertools.product([False, True], repeat=len(others)):
        in_a[:] = False
        in_a[s] = True
        for v, b in zip(others, bits):
            in_a[v] = b
        cut = float(np.sum(g.w[in_a[g.src] != in_a[g.dst]]))
        if cut < best:
            best = cut
    return best


# ---------------------------------------------------------------------------
# randomized cuts (uniform threshold T on [0, max phi])


@dataclass
class RandomizedCutResult:
    expected_cut: float
    expected_separation: float
    ratio: float
    mc_cut: float = math.nan
    mc_separation: float = math.nan
    mc_ratio: float = math.nan
    mc_ratio_se: float = math.nan
    # mean and standard error of the per-sample statistic
    # cut_weight - ratio * separated_mass, which has expectation zero
    mc_identity_dev: float = math.nan
    mc_identity_se: float = math.nan


def randomized_cut_check(g, mu, nu, phi, mc_samples=0, seed=0):
    """Closed-form expectations of the threshold cut and the separated mass,
    optionally cross-checked by Monte-Carlo sampling of the threshold.

    E[cut weight] = sum w |dphi| / ||phi||_inf and E[separated mass]
    = phi^T (mu - nu) / ||phi||_inf; their ratio is the total-variation
    objective at phi.
    """
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    if np.any(phi < -1e-12):
        raise ValueError("randomized cuts need phi >= 0")
    r = measure_values(mu) - measure_values(nu)
    top = float(np.max(phi))
    if top <= 0:
        raise ValueError("phi must have a positive maximum")
    tv = float(np.sum(g.w * np.abs(phi[g.src] - phi[g.dst])))
    sep_num = float(phi @ r)
    expected_cut = tv / top
    expected_sep = sep_num / top
    ratio = expected_cut / expected_sep
    out = RandomizedCutResult(expected_cut, expected_sep, ratio)
    if mc_samples > 0:
        rng = np.random.default_rng(seed)
        cuts = np.empty(mc_samples)
        seps = np.empty(mc_samples)
        block = 4096
        for lo in range(0, mc_samples, block):
            hi = min(mc_samples, lo + block)
            T = rng.uniform(0.0, top, size=hi - lo)
            above = phi[None, :] >= T[:, None]
            cross = above[:, g.src] != above[:, g.dst]
            cuts[lo:hi] = cross @ g.w
            seps[lo:hi] = above @ r
        mc_cut = float(cuts.mean())
        mc_sep = float(seps.mean())
        var_c = float(cuts.var(ddof=1)) / mc_samples
        var_s = float(seps.var(ddof=1)) / mc_samples
        cov = float(np.cov(cuts, seps, ddof=1)[0, 1]) / mc_samples
        mc_ratio = mc_cut / mc_sep
        se = abs(mc_ratio) * math.sqrt(
            max(
                var_c / mc_cut**2 + var_s / mc_sep**2 - 2.0 * cov / (mc_cut * mc_sep),
                0.0,
            )
        )
        out.mc_cut, out.mc_separation = mc_cut, mc_sep
        out.mc_ratio, out.mc_ratio_se = mc_ratio, se
        ident = cuts - ratio * seps
        out.mc_identity_dev = float(abs(ident.mean()))
        out.mc_identity_se = float(ident.std(ddof=1)) / math.sqrt(mc_samples)
    return out


# ---------------------------------------------------------------------------
# heat-diffusion robustness bound


@dataclass
class RobustnessRow:
    t: float
    lhs: float
    rhs: float
    baseline: float


@dataclass
class RobustnessReport:
    rows: list
    fiedler: float
    eta_ratio: float
    improvement_interval: tuple
    all_bounded: bool
    improvement_verified: bool


def robustness_bound_check(g, mu, nu, eta, t_grid):
    """Check ||psi - psi_t|| <= t ||mu-nu|| + exp(-t lam)/lam ||eta|| on a
    grid of diffusion times, with psi = L^+(mu-nu) and
    psi_t = L^+ exp(-tL) (mu-nu+eta), all via a dense eigendecomposition.

    Also verifies that the bound improves on ||eta||/lam strictly inside
    (0, (||eta||/||mu-nu|| - 1)/lam) whenever that interval is nonempty.
    """
    r = measure_values(mu) - measure_values(nu)
    eta = np.ascontiguousarray(eta, dtype=np.float64)
    if abs(float(eta.sum())) > 1e-10 * max(1.0, float(np.abs(eta).sum())):
        raise ValueError("perturbation eta must be mean zero")
    if not g.is_connected():
        raise ValueError("robustness check needs a connected graph")
    L = dense_laplacian(g)
    vals, vecs = np.linalg.eigh(L)
    cut = 1e-10 * max(1.0, float(vals[-1]))
    pos = vals > cut
    lam = float(vals[pos][0])
    inv = np.where(pos, 1.0 / np.where(pos, vals, 1.0), 0.0)
    rc = vecs.T @ r
    ec = vecs.T @ (r + eta)
    psi = vecs @ (inv * rc)
    nr = float(np.linalg.norm(r))
    ne = float(np.linalg.norm(eta))
    baseline = ne / lam
    rows = []
    ok = True
    for t in t_grid:
        tilde = vecs @ (inv * np.exp(-t * vals) * ec)
        lhs = float(np.linalg.norm(psi - tilde))
        rhs = t * nr + math.exp(-t * lam) * ne / lam
        rows.append(RobustnessRow(float(t), lhs, rhs, baseline))
        if lhs > rhs + 1e-9:
            ok = False
    ratio = ne / nr if nr > 0 else math.inf
    interval = (0.0, (ratio - 1.0) / lam) if ratio > 1.0 else (0.0, 0.0)
    improvement = True
    if ratio > 1.0:
        for frac in (0.25, 0.5, 0.75):
            t = interval[1] * frac
            if t <= 0:
                continue
            rhs = t * nr + math.exp(-t * lam) * ne / lam
            if not rhs < baseline:
                improvement = False
    return RobustnessReport(rows, lam, ratio, interval, ok, improvement)


# ---------------------------------------------------------------------------
# lattice solver benchmark


@dataclass
class LatticeBenchResult:
    ssnal_state: solvers.SolverState
    admm_state: solvers.SolverState
    ssnal_iterations: int
    admm_iterations: int
    reached_tolerance: bool


def lattice_benchmark(p=5.0, eps=1e-4, side=20, admm_penalty=1.0,
                      config=None):
    """SSNAL vs ADMM on the unit-weight side x side lattice with Dirac
    measures at opposite corners, run to the KKT tolerance eps."""
    g = graphs.grid_graph(side, side)
    r = np.zeros(g.n)
    r[0] = 1.0
    r[-1] = -1.0
    cfg = config or solvers.SolverConfig()
    cfg.tol = eps
    ssnal_state = solvers.ssnal_solve(g, r, p, cfg)
    admm_state = solvers.admm_solve(g, r, p, nu_penalty=admm_penalty, config=cfg)
    return LatticeBenchResult(
        ssnal_state=ssnal_state,
        admm_state=admm_state,
        ssnal_iterations=ssnal_state.iterations,
        admm_iterations=admm_state.iterations,
        reached_tolerance=ssnal_state.converged and admm_state.converged,
    )


# ---------------------------------------------------------------------------
# scalar prox oracle (golden-section on the one-dimensional objective)


def golden_section_prox(v, tau, p, tol=1e-12):
    """Minimize 0.5 (u - v)^2 + tau |u|^p by golden-section search."""

    def obj(u):
        return 0.5 * (u - v) ** 2 + tau * abs(u) ** p

    lo, hi = -abs(v) - 1.0, abs(v) + 1.0
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - gr * (b - a)
    d = a + gr * (b - a)
    fc, fd = obj(c), obj(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = obj(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = obj(d)
    return 0.5 * (a + b)


# ---------------------------------------------------------------------------
# validation suite driver (used by the CLI `validate` subcommand)


@dataclass
class ValidationCheck:
    check: str
    instance: str
    deviation: float
    tolerance: float
    passed: bool


def run_validation_suite(seed=0, fast=True):
    """Compact fuzz run over every validator; returns one row per check."""
    from . import assignment, prox
    rng = np.random.default_rng(seed)
    rows = []

    def add(check, instance, deviation, tolerance):
        rows.append(ValidationCheck(check, instance, float(deviation),
                                    float(tolerance), bool(deviation <= tolerance)))

    # effective resistance reciprocity
    for i in range(3 if fast else 10):
        g = random_connected_graph(rng, int(rng.integers(6, 20)))
        mu, nu = random_disjoint_measures(rng, g.n)
        _, c2 = solvers.solve_p2_closed_form(g, mu, nu)
        res = effective_resistance_oracle(g, mu, nu)
        add("er_reciprocity", f"g{i}", abs(c2 * c2 * res - 1.0), 1e-8)

    # gauge duality
    cfg = solvers.SolverConfig(tol=1e-7)
    for i in range(2 if fast else 6):
        g = random_connected_graph(rng, int(rng.integers(5, 9)))
        mu, nu = random_disjoint_measures(rng, g.n)
        r = mu - nu
        for p in (1.0, 2.0, 3.0, math.inf):
            q, wts = conductance_dual_weights(g, p)
            if p == 2.0:
                _, cp = solvers.solve_p2_closed_form(g, mu, nu)
            else:
                cp = solvers.ssnal_solve(g, r, p, cfg).objective
            bval = beckmann_oracle(g, mu, nu, q, wts)
            add("gauge_duality", f"g{i}_p{p}", abs(cp * bval - 1.0), 1e-5)

    # mincut / maxflow strong duality and exhaustive cut for Dirac pairs
    for i in range(3 if fast else 8):
        g = random_connected_graph(rng, int(rng.integers(5, 9)))
        s, t = rng.choice(g.n, size=2, replace=False)
        mu = np.zeros(g.n)
        nu = np.zeros(g.n)
        mu[s] = 1.0
        nu[t] = 1.0
        res = mincut_maxflow_lp(g, mu, nu)
        add("lp_strong_duality", f"g{i}",
            abs(res.mincut_value - res.maxflow_value), 1e-7)
        add("lp_exhaustive_cut", f"g{i}",
            abs(res.mincut_value - exhaustive_mincut_dirac(g, s, t)), 1e-7)

    # randomized cuts: the identity at the optimal potential, the Monte-Carlo
    # cross-check at a generic positive potential
    g = random_connected_graph(rng, 8)
    mu, nu = random_disjoint_measures(rng, g.n)
    st = solvers.ssnal_solve(g, mu - nu, 1.0, cfg)
    phi = st.phi - st.phi.min()
    rc = randomized_cut_check(g, mu, nu, phi)
    add("randomized_cut_identity", "g0", abs(rc.ratio - st.objective), 1e-6)
    phi = rng.uniform(0.1, 1.0, size=g.n) + 2.0 * mu
    phi /= float(phi @ (mu - nu))
    rc = randomized_cut_check(g, mu, nu, phi,
                              mc_samples=50000 if fast else 100000,
                              seed=int(rng.integers(2**31)))
    add("randomized_cut_mc", "g0", rc.mc_identity_dev,
        3.0 * rc.mc_identity_se + 1e-9)

    # robustness bound
    worst = 0.0
    draws = 100 if fast else 1000
    for _ in range(draws):
        g = random_connected_graph(rng, int(rng.integers(6, 24)))
        mu, nu = random_disjoint_measures(rng, g.n)
        eta = rng.normal(size=g.n)
        eta -= eta.mean()
        rep = robustness_bound_check(g, mu, nu, eta,
                                     rng.uniform(0.0, 3.0, size=4))
        worst = max(worst, max(row.lhs - row.rhs for row in rep.rows))
        if not rep.improvement_verified:
            worst = math.inf
    add("robustness_bound", f"{draws}_draws", max(worst, 0.0), 1e-9)

    # ssnal against the closed form
    for i in range(2 if fast else 5):
        g = random_connected_graph(rng, int(rng.integers(8, 20)))
        mu, nu = random_disjoint_measures(rng, g.n)
        phi2, _ = solvers.solve_p2_closed_form(g, mu, nu)
        st = solvers.ssnal_solve(g, mu - nu, 2.0, solvers.SolverConfig(tol=1e-8))
        err = np.linalg.norm((st.phi - st.phi.mean()) - phi2) / np.linalg.norm(phi2)
        add("ssnal_p2_closed_form", f"g{i}", err, 1e-5)

    # admm agreement
    for p in (1.0, 2.0):
        g = random_connected_graph(rng, 8)
        mu, nu = random_disjoint_measures(rng, g.n)
        r = mu - nu
        s1 = solvers.ssnal_solve(g, r, p, solvers.SolverConfig(tol=1e-6))
        s2 = solvers.admm_solve(g, r, p, config=solvers.SolverConfig(tol=1e-6))
        add("admm_agreement", f"p{p}",
            abs(s1.objective - s2.objective) / max(1.0, abs(s1.objective)), 1e-4)

    # transport integrality and the epsilon = n argmax route
    bad = 0.0
    for i in range(5 if fast else 20):
        n = int(rng.integers(3, 8))
        k = int(rng.integers(2, 4))
        S = rng.normal(size=(n, k))
        m = np.bincount(rng.integers(0, k, size=n), minlength=k)
        a = assignment.transport_assign(S, m, 0)
        if not a.is_binary:
            bad = math.inf
        e = assignment.transport_assign(S, m, float(n), method="simplex")
        if not np.array_equal(e.labels(), assignment.argmax_assign(S)):
            bad = math.inf
    add("transport_integrality", "fuzz", bad, 0.5)

    # prox against the golden-section oracle, Moreau identity for the max
    worst = 0.0
    for p in (1.0, 1.5, 2.0, 3.0, 5.0):
        v = rng.normal(size=50) * 2.0
        w = rng.uniform(0.2, 2.0, size=50)
        spec = prox.ProxSpec(p, w, 0.7)
        u = prox.prox_weighted_power(spec, v)
        for e in range(v.shape[0]):
            worst = max(worst, abs(u[e] - golden_section_prox(v[e], 0.7 * w[e], p)))
    add("prox_scalar_oracle", "p_grid", worst, 1e-6)
    v = rng.normal(size=40)
    w = rng.uniform(0.2, 2.0, size=40)
    spec = prox.ProxSpec(math.inf, w, 0.9)
    z, _ = prox.project_weighted_l1(v, w, 0.9)
    u = prox.prox_weighted_max(spec, v)
    add("moreau_identity", "pinf", float(np.max(np.abs(u + z - v))), 0.0)

    return rows


def write_validation_csv(rows, path):
    with open(path, "w") as fh:
        fh.write("check,instance,deviation,tolerance,passed\n")
        for row in rows:
            fh.write(
                f"{row.check},{row.instance},{row.deviation:.6e},"
                f"{row.tolerance:.6e},{int(row.passed)}\n"
            )
