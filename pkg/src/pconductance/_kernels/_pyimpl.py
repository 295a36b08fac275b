"""Pure-numpy implementations of the hot edge-sweep and prox kernels.

Mirror of ``_cyimpl``; both backends must produce results that agree to
floating-point roundoff so they are interchangeable at import time.
"""

import numpy as np

BACKEND = "python"


def edge_grad(src, dst, phi):
    # (B^T phi)_e = phi_i - phi_j for the oriented edge (i, j), i < j
    return phi[src] - phi[dst]


def edge_div(src, dst, vals, n):
    # adjoint of edge_grad: (B J)_i = sum_{e out of i} J_e - sum_{e into i} J_e
    out = np.bincount(src, weights=vals, minlength=n)
    out -= np.bincount(dst, weights=vals, minlength=n)
    return out


def laplacian_apply(src, dst, w, deg, x):
    # (D - W) x in one edge sweep
    out = deg * x
    out -= np.bincount(src, weights=w * x[dst], minlength=x.shape[0])
    out -= np.bincount(dst, weights=w * x[src], minlength=x.shape[0])
    return out


def edge_laplacian_apply(src, dst, ew, x):
    # B diag(ew) B^T x for an arbitrary per-edge weighting ew
    t = ew * (x[src] - x[dst])
    out = np.bincount(src, weights=t, minlength=x.shape[0])
    out -= np.bincount(dst, weights=t, minlength=x.shape[0])
    return out


def prox_power(v, tau, p):
    """Coordinatewise prox of u -> tau_e * |u|^p (tau = lambda * w).

    p = 1 and p = 2 use the closed forms; otherwise each coordinate solves
    x + tau*p*x^(p-1) = |v| on [0, |v|] with a bisection-safeguarded Newton
    iteration (absolute residual 1e-12, 100-iteration cap).
    """
    v = np.asarray(v, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    if p == 1.0:
        return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)
    if p == 2.0:
        return v / (1.0 + 2.0 * tau)
    a = np.abs(v)
    c = tau * p
    x = a.copy()
    lo = np.zeros_like(a)
    hi = a.copy()
    tol = 1e-12 * np.maximum(1.0, a)
    active = a > 0.0
    for _ in range(100):
        if not np.any(active):
            break
        xa = x[active]
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            h = xa + c[active] * xa ** (p - 1.0) - a[active]
            dh = 1.0 + c[active] * (p - 1.0) * xa ** (p - 2.0)
        done = np.abs(h) <= tol[active]
        pos = h > 0.0
        hia = hi[active]
        loa = lo[active]
        hia[pos] = np.minimum(hia[pos], xa[pos])
        loa[~pos] = np.maximum(loa[~pos], xa[~pos])
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            xn = xa - h / dh
        bad = ~np.isfinite(xn) | (xn <= loa) | (xn >= hia)
        xn[bad] = 0.5 * (loa[bad] + hia[bad])
        xn[done] = xa[done]
        x[active] = xn
        hi[active] = hia
        lo[active] = loa
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return np.sign(v) * x
