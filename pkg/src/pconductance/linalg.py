"""Iterative linear algebra: conjugate gradient, deflated Laplacian
pseudoinverse solves, and the O(|E|) Newton-system matvec."""

from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels
from . import graphs


class CGBreakdownError(RuntimeError):
    """CG met a direction with p^T A p <= 0; carries the last iterate."""

    def __init__(self, message, iterate, iterations):
        super().__init__(message)
        self.iterate = iterate
        self.iterations = iterations


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool


class LinearOperator:
    """Abstract symmetric matvec x -> A x on R^dim."""

    def __init__(self, dim, apply, symmetric=True):
        self.dim = dim
        self._apply = apply
        self.symmetric = symmetric

    def __call__(self, x):
        return self._apply(x)


def identity_operator(dim):
    return LinearOperator(dim, lambda x: x.copy())


def diagonal_operator(d):
    d = np.asarray(d, dtype=np.float64)
    return LinearOperator(d.shape[0], lambda x: d * x)


def laplacian_operator(g):
    return LinearOperator(g.n, lambda x: graphs.laplacian_apply(g, x))


def cg_solve(A, b, tol=1e-10, max_iter=None, x0=None, project=None):
    """Conjugate gradient for symmetric positive (semi)definite operators.

    Stops when ||Ax - b|| <= tol * ||b|| or at ``max_iter`` (reported in the
    result). ``project`` is applied to the right-hand side and to every
    matvec output; it is used to deflate known null-space components.
    """
    b = np.ascontiguousarray(b, dtype=np.float64)
    n = b.shape[0]
    if max_iter is None:
        max_iter = 10 * n + 100
    if project is not None:
        b = project(b)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return CGResult(np.zeros(n), 0, 0.0, True)
    if x0 is None:
        x = np.zeros(n)
        r = b.copy()
    else:
        x = np.array(x0, dtype=np.float64)
        if project is not None:
            x = project(x)
        Ax = A(x)
        if project is not None:
            Ax = project(Ax)
        r = b - Ax
    p = r.copy()
    rs = float(r @ r)
    target = tol * bnorm
    iters = 0
    while np.sqrt(rs) > target and iters < max_iter:
        Ap = A(p)
        if project is not None:
            Ap = project(Ap)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            if np.sqrt(rs) <= 1e-12 * bnorm:
                # stagnation at machine precision, not indefiniteness
                return CGResult(x, iters, float(np.sqrt(rs)), True)
            raise CGBreakdownError(
                f"CG breakdown: p^T A p = {pAp} at iteration {iters}", x, iters
            )
        alpha = rs / pAp
        x += alpha * p
        r -= alpha * Ap
        rs_new = float(r @ r)
        p = r + (rs_new / rs) * p
        rs = rs_new
        iters += 1
    return CGResult(x, iters, float(np.sqrt(rs)), np.sqrt(rs) <= target)


def _project_mean_zero(v):
    return v - v.mean()


def laplacian_pinv_apply(g, b, tol=1e-10, max_iter=None, x0=None):
    """Solve L x = b for the mean-zero x on a connected graph.

    The right-hand side must be mean zero within tolerance (it is projected
    onto the mean-zero subspace regardless); CG is deflated against the
    constant vector.
    """
    if not g.is_connected():
        raise ValueError("graph is not connected; the pseudoinverse solve needs one component")
    b = np.ascontiguousarray(b, dtype=np.float64)
    if b.shape != (g.n,):
        raise ValueError(f"expected vector of length {g.n}")
    if abs(float(b.sum())) > 1e-10 * max(1.0, float(np.abs(b).sum())):
        raise ValueError("right-hand side is not mean zero")
    res = cg_solve(
        laplacian_operator(g), b, tol=tol, max_iter=max_iter, x0=x0,
        project=_project_mean_zero,
    )
    return _project_mean_zero(res.x)


class HessianOperator:
    """Newton-system matvec sigma1 * B (I - D) B^T x + sigma2 (r^T x) r.

    ``d_u`` is the diagonal of the generalized prox Jacobian, one entry per
    undirected edge. For the weighted-max penalty the Jacobian has an extra
    rank-one piece on the active edge set, supplied via ``max_jacobian``
    (see prox.MaxProxJacobian). One apply costs O(|E|) + O(n).
    """

    def __init__(self, g, d_u, r, sigma1, sigma2, max_jacobian=None):
        self.graph = g
        self.r = np.ascontiguousarray(r, dtype=np.float64)
        self.sigma1 = float(sigma1)
        self.sigma2 = float(sigma2)
        self.max_jacobian = max_jacobian
        if max_jacobian is None:
            d = np.ascontiguousarray(d_u, dtype=np.float64)
            if d.shape != (g.N,):
                raise ValueError("d_u must have one entry per edge")
            self.edge_weights = 1.0 - d
        else:
            self.edge_weights = None
        self.dim = g.n

    def __call__(self, x):
        g = self.graph
        if self.max_jacobian is None:
            lap = kernels.edge_laplacian_apply(g.src, g.dst, self.edge_weights, x)
        else:
            t = kernels.edge_grad(g.src, g.dst, x)
            t -= self.max_jacobian.apply(t)
            lap = kernels.edge_div(g.src, g.dst, t, g.n)
        return self.sigma1 * lap + self.sigma2 * float(self.r @ x) * self.r


def hessian_apply(h, x):
    """Apply the Newton-system operator; see HessianOperator."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (h.dim,):
        raise ValueError(f"expected vector of length {h.dim}")
    return h(x)
