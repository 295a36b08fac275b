"""Solvers for the measure p-conductance programs.

The primal form minimizes s(u) = sum_e w_e |u_e|^p (max_e w_e |u_e| for
p = inf) subject to B^T phi = u and phi^T r = 1, where r is a mean-zero
signed measure. The augmented Lagrangian outer loop alternates an inexact
minimization in (phi, u) with multiplier updates; the inner minimization is
a semismooth Newton method whose systems are solved by conjugate gradient
in O(|E|) per matvec.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kernels
from . import graphs, linalg
from .measures import measure_values
from .prox import (
    ProxSpec,
    generalized_jacobian_diag,
    max_prox_jacobian,
    penalty_value,
    prox_apply,
)


class ConvergenceError(RuntimeError):
    """Line-search or inner-solver failure; carries diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class SolverConfig:
    tol: float = 1e-4              # outer stop: max(eta1, eta2) <= tol
    max_outer: int = 200
    max_inner: int = 100
    inner_tol0: float = 1.0        # summable inner schedule eps_k = tol0 * decay^k
    inner_decay: float = 0.5
    inner_tol_floor: float = 1e-12
    cg_max_iter: int = 0           # 0: use 4n + 100
    armijo_r: float = 1.0
    armijo_sigma: float = 1e-4
    armijo_eta: float = 0.5
    max_halvings: int = 50
    sigma1: float = 1.0
    sigma2: float = 1.0
    sigma_growth: float = 2.0
    sigma_cap: float = 1e6
    damping_abs: float = 1e-11
    damping_rel: float = 1e-6
    admm_max_iter: int = 200000
    admm_check_every: int = 1


@dataclass
class TraceRow:
    outer_iter: int
    inner_iters: int
    eta1: float
    eta2: float
    objective: float
    sigma1: float
    sigma2: float


@dataclass
class SolverState:
    phi: np.ndarray
    u: np.ndarray
    z: np.ndarray
    y: float
    sigma1: float
    sigma2: float
    p: float
    eta1: float
    eta2: float
    objective: float
    iterations: int
    inner_iterations: int
    converged: bool
    trace: list = field(default_factory=list)


def _check_signed_measure(g, r):
    r = np.ascontiguousarray(r, dtype=np.float64)
    if r.shape != (g.n,):
        raise ValueError(f"signed measure must have length {g.n}")
    scale = float(np.abs(r).sum())
    if scale == 0.0:
        raise ValueError("signed measure is identically zero")
    if abs(float(r.sum())) > 1e-10 * max(1.0, scale):
        raise ValueError("signed measure must be mean zero")
    return r


def conductance_value(g, phi, p):
    """Objective (sum_e w_e |phi_i - phi_j|^p)^(1/p), or the weighted max."""
    d = np.abs(graphs.incidence_apply_t(g, phi))
    if math.isinf(p):
        return float(np.max(g.w * d)) if d.size else 0.0
    return float(np.sum(g.w * d**p) ** (1.0 / p))


def _edge_spec(g, p, sigma1):
    return ProxSpec(p, g.w, 1.0 / sigma1)


def subproblem_value(g, p, sigma1, sigma2, z, y, r, phi):
    """Value of the inner objective f(phi) = inf_u L_sigma(phi, u; z, y)."""
    f, _, _, _ = _subproblem_eval(g, _edge_spec(g, p, sigma1), sigma1, sigma2,
                                  z, y, r, phi)
    return f


def subproblem_grad(g, p, sigma1, sigma2, z, y, r, phi):
    """Gradient of the inner objective at phi."""
    spec = _edge_spec(g, p, sigma1)
    v = graphs.incidence_apply_t(g, phi) + z / sigma1
    u = prox_apply(spec, v)
    return _grad_from(g, sigma1, sigma2, z, y, r, phi, u, v)


def _subproblem_eval(g, spec, sigma1, sigma2, z, y, r, phi):
    v = graphs.incidence_apply_t(g, phi) + z / sigma1
    u = prox_apply(spec, v)
    cdev = float(phi @ r) - 1.0
    diff = u - v
    f = (
        penalty_value(spec, u)
        + 0.5 * sigma1 * float(diff @ diff)
        - float(z @ z) / (2.0 * sigma1)
        + y * cdev
        + 0.5 * sigma2 * cdev * cdev
    )
    return f, u, v, cdev


def _grad_from(g, sigma1, sigma2, z, y, r, phi, u, v):
    cdev = float(phi @ r) - 1.0
    grad = kernels.edge_div(g.src, g.dst, sigma1 * (v - u), g.n)
    grad += (y + sigma2 * cdev) * r
    return grad


@dataclass
class InnerResult:
    phi: np.ndarray
    u: np.ndarray
    v: np.ndarray
    grad_norm: float
    iterations: int
    achieved: bool


def ssncg_inner(g, p, sigma1, sigma2, z, y, r, phi0, grad_tol, config=None,
                record=None):
    """Semismooth Newton CG minimization of the inner objective.

    Runs Newton steps H dphi = -grad f with the generalized prox Jacobian,
    CG forcing tolerance min(0.5, ||grad||^0.5), a small Levenberg damping
    proportional to ||grad||, and an Armijo backtracking line search. Stops
    when ||grad f|| <= grad_tol or after config.max_inner steps.
    """
    cfg = config or SolverConfig()
    spec = _edge_spec(g, p, sigma1)
    phi = np.array(phi0, dtype=np.float64)
    f, u, v, _ = _subproblem_eval(g, spec, sigma1, sigma2, z, y, r, phi)
    grad = _grad_from(g, sigma1, sigma2, z, y, r, phi, u, v)
    cg_cap = cfg.cg_max_iter if cfg.cg_max_iter > 0 else 4 * g.n + 100
    iters = 0
    if record is not None:
        record.append(phi.copy())
    for _ in range(cfg.max_inner):
        gn = float(np.linalg.norm(grad))
        if gn <= grad_tol:
            return InnerResult(phi, u, v, gn, iters, True)
        if math.isinf(p):
            hess = linalg.HessianOperator(
                g, None, r, sigma1, sigma2,
                max_jacobian=max_prox_jacobian(spec, v),
            )
        else:
            d = generalized_jacobian_diag(spec, u)
            hess = linalg.HessianOperator(g, d, r, sigma1, sigma2)
        kappa = sigma1 * (cfg.damping_abs + cfg.damping_rel * min(1.0, gn))
        op = linalg.LinearOperator(g.n, lambda x, h=hess, k=kappa: h(x) + k * x)
        # superlinear forcing, tightened to what the requested inner accuracy
        # needs so the final Newton step can land inside grad_tol
        cg_tol = min(0.5, math.sqrt(gn), 0.5 * grad_tol / gn)
        sol = linalg.cg_solve(op, -grad, tol=cg_tol, max_iter=cg_cap,
                              project=linalg._project_mean_zero)
        step = sol.x
        slope = float(grad @ step)
        if slope >= 0.0:
            step = -grad
            slope = -gn * gn
        zeta = cfg.armijo_r
        accepted = False
        for _ in range(cfg.max_halvings):
            f_new, u_new, v_new, _ = _subproblem_eval(
                g, spec, sigma1, sigma2, z, y, r, phi + zeta * step
            )
            if f_new <= f + cfg.armijo_sigma * zeta * slope:
                accepted = True
                break
            zeta *= cfg.armijo_eta
        if not accepted:
            raise ConvergenceError(
                "Armijo line search failed",
                {"grad_norm": gn, "slope": slope, "f": f, "zeta": zeta,
                 "iterations": iters},
            )
        phi = phi + zeta * step
        f, u, v = f_new, u_new, v_new
        grad = _grad_from(g, sigma1, sigma2, z, y, r, phi, u, v)
        iters += 1
        if record is not None:
            record.append(phi.copy())
    gn = float(np.linalg.norm(grad))
    return InnerResult(phi, u, v, gn, iters, gn <= grad_tol)


def kkt_residual_parts(g, phi, u, z, y, r, p, sigma1):
    """Relative primal/dual KKT residuals (eta1, eta2).

    eta1 = (||B^T phi - u|| + |phi^T r - 1|) / (1 + ||u|| + ||r||)
    eta2 = (||B z + y r|| + ||u - prox_{s/sigma1}(u + z/sigma1)||)
           / (1 + ||r|| + ||u||)

    The dual-feasibility term uses the node-dimensional form B z + y r from
    the stationarity condition.
    """
    norm_r = float(np.linalg.norm(r))
    norm_u = float(np.linalg.norm(u))
    prim = float(np.linalg.norm(graphs.incidence_apply_t(g, phi) - u))
    cons = abs(float(phi @ r) - 1.0)
    eta1 = (prim + cons) / (1.0 + norm_u + norm_r)
    dual = float(np.linalg.norm(graphs.incidence_apply(g, z) + y * r))
    spec = _edge_spec(g, p, sigma1)
    prox_gap = float(np.linalg.norm(u - prox_apply(spec, u + z / sigma1)))
    eta2 = (dual + prox_gap) / (1.0 + norm_r + norm_u)
    return eta1, eta2


def kkt_residuals(g, state, r):
    """KKT residuals of a solver state against the signed measure r."""
    return kkt_residual_parts(
        g, state.phi, state.u, state.z, state.y, r, state.p, state.sigma1
    )


def ssnal_solve(g, r, p, config=None):
    """Semismooth Newton augmented Lagrangian solve of the p-conductance
    program for the signed measure r.

    Outer iterations alternate the SSNCG inner solve with the multiplier
    updates z += sigma1 (B^T phi - u), y += sigma2 (phi^T r - 1); penalties
    double whenever the primal residual eta1 fails to halve. Convergence is
    declared at max(eta1, eta2) <= config.tol. A state with
    ``converged=False`` is returned when the iteration cap is reached.
    """
    cfg = config or SolverConfig()
    if not (p >= 1.0):
        raise ValueError(f"p must be in [1, inf], got {p}")
    if not g.is_connected():
        raise ValueError("graph must be connected")
    r = _check_signed_measure(g, r)
    norm_r = float(np.linalg.norm(r))
    phi = r / float(r @ r)
    u = graphs.incidence_apply_t(g, phi)
    z = np.zeros(g.N)
    y = 0.0
    sigma1, sigma2 = cfg.sigma1, cfg.sigma2
    trace = []
    inner_total = 0
    last_inner = 0
    eta1_prev = None
    converged = False
    k = 0
    for k in range(cfg.max_outer):
        eta1, eta2 = kkt_residual_parts(g, phi, u, z, y, r, p, sigma1)
        obj = conductance_value(g, phi, p)
        trace.append(TraceRow(k, last_inner, eta1, eta2, obj, sigma1, sigma2))
        if max(eta1, eta2) <= cfg.tol:
            converged = True
            break
        if eta1_prev is not None and eta1 > 0.5 * eta1_prev:
            sigma1 = min(sigma1 * cfg.sigma_growth, cfg.sigma_cap)
            sigma2 = min(sigma2 * cfg.sigma_growth, cfg.sigma_cap)
        eta1_prev = eta1
        # summable schedule eps_k, tightened toward a fixed fraction of the
        # current KKT residual so each outer step makes visible progress
        eps_k = cfg.inner_tol0 * cfg.inner_decay**k
        scale = 1.0 + norm_r + float(np.linalg.norm(u))
        target = max(0.2 * max(eta1, eta2), 0.45 * cfg.tol) * scale
        grad_tol = max(
            cfg.inner_tol_floor,
            min(eps_k / max(1.0, math.sqrt(sigma1)), target),
        )
        inner = ssncg_inner(g, p, sigma1, sigma2, z, y, r, phi, grad_tol, cfg)
        phi, u = inner.phi, inner.u
        z = sigma1 * (inner.v - inner.u)
        y = y + sigma2 * (float(phi @ r) - 1.0)
        last_inner = inner.iterations
        inner_total += inner.iterations
    eta1, eta2 = kkt_residual_parts(g, phi, u, z, y, r, p, sigma1)
    obj = conductance_value(g, phi, p)
    if converged:
        iterations = k
    else:
        iterations = cfg.max_outer
        trace.append(TraceRow(iterations, last_inner, eta1, eta2, obj, sigma1, sigma2))
        converged = max(eta1, eta2) <= cfg.tol
    return SolverState(
        phi=phi, u=u, z=z, y=y, sigma1=sigma1, sigma2=sigma2, p=float(p),
        eta1=eta1, eta2=eta2, objective=obj, iterations=iterations,
        inner_iterations=inner_total, converged=converged, trace=trace,
    )


def _solve_p2_signed(g, r, tol=1e-10):
    x = linalg.laplacian_pinv_apply(g, r, tol=tol)
    res = float(r @ x)
    # r^T L^+ r >= ||r||^2 / lambda_max > 0 for nonzero mean-zero r, so a
    # nonpositive value can only be a failed solve
    if res <= 0.0:
        raise ValueError("effective resistance is numerically zero")
    return x / res, math.sqrt(1.0 / res)


def solve_p2_closed_form(g, mu, nu, tol=1e-10):
    """Closed-form p = 2 solution phi* = L^+ r / (r^T L^+ r), r = mu - nu.

    Returns (phi*, c2) with c2 = (r^T L^+ r)^(-1/2), the 2-conductance.
    """
    r = measure_values(mu) - measure_values(nu)
    if float(np.abs(r).max(initial=0.0)) == 0.0:
        raise ValueError("mu and nu coincide; conductance is undefined")
    r = _check_signed_measure(g, r)
    return _solve_p2_signed(g, r, tol=tol)


def constrained_laplacian_solve(g, b, r, tol=1e-10, xr=None, x0=None):
    """Least-squares Laplacian solve with the affine constraint phi^T r = 1:
    phi = L^+(b - gamma r), gamma = (b^T L^+ r - 1) / (r^T L^+ r).

    Returns (phi, gamma). ``xr`` may carry a precomputed L^+ r.
    """
    if xr is None:
        xr = linalg.laplacian_pinv_apply(g, r, tol=tol)
    rLr = float(r @ xr)
    if rLr <= 0.0:
        raise ValueError("r^T L^+ r vanishes; r must be nonzero and mean zero")
    xb = linalg.laplacian_pinv_apply(g, b, tol=tol, x0=x0)
    gamma = (float(r @ xb) - 1.0) / rLr
    return xb - gamma * xr, gamma


def admm_solve(g, r, p, nu_penalty=1.0, config=None):
    """ADMM baseline for finite p: alternates the edgewise prox of |.|^p,
    the constrained Laplacian least-squares update of phi, and the multiplier
    step lam += nu (v - B^T phi). Multipliers and edge variables are stored
    once per undirected edge (the full matrices are skew-symmetric).

    Supported contract is p in {1, 2}; any finite p >= 1 runs through the
    same scalar prox (used by the lattice benchmark at p = 5).
    """
    cfg = config or SolverConfig()
    if math.isinf(p):
        raise ValueError("the ADMM baseline requires finite p")
    if not (p >= 1.0):
        raise ValueError(f"p must be >= 1, got {p}")
    if not g.is_connected():
        raise ValueError("graph must be connected")
    r = _check_signed_measure(g, r)
    nu = float(nu_penalty)
    if nu <= 0:
        raise ValueError("penalty must be positive")
    pinv_tol = max(min(1e-10, cfg.tol * 1e-4), 1e-12)
    xr = linalg.laplacian_pinv_apply(g, r, tol=pinv_tol)
    rLr = float(r @ xr)
    if rLr <= 0.0:
        raise ValueError("r^T L^+ r vanishes on this instance")
    rn2 = float(r @ r)
    phi = r / rn2
    v = graphs.incidence_apply_t(g, phi)
    lam = np.zeros(g.N)
    tau = np.full(g.N, 1.0 / nu)
    trace = []
    converged = False
    xb = None
    it = 0
    for it in range(1, cfg.admm_max_iter + 1):
        zhat = graphs.incidence_apply_t(g, phi) - lam / nu
        v = kernels.prox_power(zhat, tau, float(p))
        b = kernels.edge_div(g.src, g.dst, g.w * (v + lam / nu), g.n)
        xb = linalg.laplacian_pinv_apply(g, b, tol=pinv_tol, x0=xb)
        gamma = (float(r @ xb) - 1.0) / rLr
        phi = xb - gamma * xr
        bt_phi = graphs.incidence_apply_t(g, phi)
        lam += nu * (v - bt_phi)
        if it % cfg.admm_check_every == 0 or it == cfg.admm_max_iter:
            z_map = -g.w * lam
            y_map = -float(r @ graphs.incidence_apply(g, z_map)) / rn2
            eta1, eta2 = kkt_residual_parts(g, phi, v, z_map, y_map, r, p, nu)
            obj = conductance_value(g, phi, p)
            trace.append(TraceRow(it, 0, eta1, eta2, obj, nu, nu))
            if max(eta1, eta2) <= cfg.tol:
                converged = True
                break
    z_map = -g.w * lam
    y_map = -float(r @ graphs.incidence_apply(g, z_map)) / rn2
    eta1, eta2 = kkt_residual_parts(g, phi, v, z_map, y_map, r, p, nu)
    return SolverState(
        phi=phi, u=v, z=z_map, y=y_map, sigma1=nu, sigma2=nu, p=float(p),
        eta1=eta1, eta2=eta2, objective=conductance_value(g, phi, p),
        iterations=it, inner_iterations=0, converged=converged, trace=trace,
    )


@dataclass
class Potential:
    """Solved potentials: one mean-centered column per class, with the
    conductance value and solver metadata for each column."""

    Phi: np.ndarray
    values: np.ndarray
    p: float
    column_meta: list

    @property
    def k(self):
        return self.Phi.shape[1]

    @property
    def converged(self):
        return all(m.get("converged", True) for m in self.column_meta)


def solve_multiclass(g, R, p, config=None, method="auto"):
    """Solve the one-vs-all program column by column.

    The constraint diag(Phi^T R) = 1 decouples across columns, so each class
    is an independent scalar-measure solve. ``method`` is "auto" (closed form
    for p = 2, SSNAL otherwise), "ssnal", "admm", or "closed_form".
    """
    R = np.ascontiguousarray(getattr(R, "R", R), dtype=np.float64)
    if R.ndim != 2:
        raise ValueError("R must be n x k")
    k = R.shape[1]
    if method == "auto":
        method = "closed_form" if p == 2.0 else "ssnal"
    Phi = np.zeros((g.n, k))
    values = np.zeros(k)
    meta = []
    for j in range(k):
        r = R[:, j]
        if method == "closed_form":
            if p != 2.0:
                raise ValueError("closed form applies only to p = 2")
            phi, c = _solve_p2_signed(g, r, tol=(config.tol * 1e-4 if config else 1e-10))
            meta.append({"converged": True, "iterations": 0})
        elif method == "ssnal":
            state = ssnal_solve(g, r, p, config)
            phi, c = state.phi, state.objective
            meta.append({
                "converged": state.converged, "iterations": state.iterations,
                "eta1": state.eta1, "eta2": state.eta2,
            })
        elif method == "admm":
            state = admm_solve(g, r, p, config=config)
            phi, c = state.phi, state.objective
            meta.append({"converged": state.converged, "iterations": state.iterations})
        else:
            raise ValueError(f"unknown method {method!r}")
        Phi[:, j] = phi - phi.mean()
        values[j] = c
    return Potential(Phi=Phi, values=values, p=float(p), column_meta=meta)


def write_trace_csv(state, path):
    """Convergence trace: outer_iter,inner_iters,eta1,eta2,objective,sigma1,sigma2."""
    with open(path, "w") as fh:
        fh.write("outer_iter,inner_iters,eta1,eta2,objective,sigma1,sigma2\n")
        for row in state.trace:
            fh.write(
                f"{row.outer_iter},{row.inner_iters},{row.eta1:.12e},"
                f"{row.eta2:.12e},{row.objective:.12e},{row.sigma1:.6e},"
                f"{row.sigma2:.6e}\n"
            )
