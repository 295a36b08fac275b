"""Proximal maps and generalized Jacobians for the weighted edge penalties
s(u) = sum_e w_e |u_e|^p (finite p >= 1) and s(u) = max_e w_e |u_e|."""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels


@dataclass
class ProxSpec:
    """Penalty description: exponent p in [1, inf], positive weights, and the
    prox scale lam (= 1/sigma1 inside the augmented Lagrangian)."""

    p: float
    weights: np.ndarray
    lam: float

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if not (self.p >= 1.0):
            raise ValueError(f"p must be >= 1, got {self.p}")
        if np.any(self.weights <= 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be positive and finite")
        if not (self.lam > 0) or not np.isfinite(self.lam):
            raise ValueError(f"prox scale must be positive, got {self.lam}")

    @property
    def is_max(self):
        return math.isinf(self.p)


def penalty_value(spec, u):
    """s(u) for the spec's penalty."""
    u = np.asarray(u, dtype=np.float64)
    if spec.is_max:
        return float(np.max(spec.weights * np.abs(u))) if u.size else 0.0
    return float(np.sum(spec.weights * np.abs(u) ** spec.p))


def prox_weighted_power(spec, v):
    """Coordinatewise prox of lam * sum_e w_e |u_e|^p for finite p.

    p = 1 soft-thresholds, p = 2 rescales, other exponents run a safeguarded
    scalar Newton solve of (u - v) + lam*p*w*|u|^(p-1)*sgn(u) = 0. The output
    is verified against that optimality condition.
    """
    if spec.is_max:
        raise ValueError("prox_weighted_power needs finite p")
    v = np.ascontiguousarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("prox input must be finite")
    tau = spec.lam * spec.weights
    u = kernels.prox_power(v, tau, float(spec.p))
    if spec.p not in (1.0, 2.0):
        res = np.abs(u - v + tau * spec.p * np.abs(u) ** (spec.p - 1.0) * np.sign(u))
        bad = res > 1e-9 * np.maximum(1.0, np.abs(v))
        if np.any(bad):
            raise RuntimeError(
                f"scalar prox Newton failed at coordinate {int(np.flatnonzero(bad)[0])}"
            )
    return u


def project_weighted_l1(v, weights, radius):
    """Project v onto {z : sum_e |z_e| / w_e <= radius} (sorted thresholds).

    Returns (z, theta) where theta is the threshold multiplier (0 when v is
    already inside the set).
    """
    v = np.ascontiguousarray(v, dtype=np.float64)
    c = 1.0 / np.ascontiguousarray(weights, dtype=np.float64)
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    a = np.abs(v)
    if float(c @ a) <= radius:
        return v.copy(), 0.0
    t = a / c
    order = np.argsort(-t)
    ts = t[order]
    s1 = np.cumsum((c * a)[order])
    s2 = np.cumsum((c * c)[order])
    theta = None
    m = v.shape[0]
    for k in range(m):
        cand = (s1[k] - radius) / s2[k]
        nxt = ts[k + 1] if k + 1 < m else 0.0
        if cand >= nxt and cand <= ts[k]:
            theta = cand
            break
    if theta is None:
        theta = (s1[-1] - radius) / s2[-1]
    z = np.sign(v) * np.maximum(a - theta * c, 0.0)
    return z, float(theta)


class MaxProxJacobian:
    """Generalized Jacobian of the weighted-max prox at a point v.

    The prox is the identity off the projection's active set; on the active
    set it is the orthogonal projector onto span(s), s_e = sgn(v_e)/w_e.
    """

    def __init__(self, inactive, s, s2):
        self.inactive = inactive
        self.s = s
        self.s2 = s2

    def apply(self, t):
        out = np.where(self.inactive, t, 0.0)
        if self.s2 > 0:
            out += self.s * (float(self.s @ t) / self.s2)
        return out


def prox_weighted_max(spec, v):
    """Prox of lam * max_e w_e |u_e| via the Moreau decomposition
    prox(v) = v - proj_C(v), C = {z : sum |z_e|/w_e <= lam}."""
    if not spec.is_max:
        raise ValueError("prox_weighted_max needs p = inf")
    v = np.ascontiguousarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("prox input must be finite")
    z, _ = project_weighted_l1(v, spec.weights, spec.lam)
    return v - z


def max_prox_jacobian(spec, v):
    """A Clarke-Jacobian selection for the weighted-max prox at v."""
    v = np.ascontiguousarray(v, dtype=np.float64)
    z, theta = project_weighted_l1(v, spec.weights, spec.lam)
    if theta == 0.0:
        # inside the polar ball: prox == 0, Jacobian == 0
        return MaxProxJacobian(np.zeros(v.shape[0], dtype=bool), np.zeros_like(v), 0.0)
    c = 1.0 / spec.weights
    active = np.abs(v) - theta * c > 0
    s = np.where(active, np.sign(v) * c, 0.0)
    return MaxProxJacobian(~active, s, float(s @ s))


def prox_apply(spec, v):
    """Dispatch to the power or max prox according to spec.p."""
    return prox_weighted_max(spec, v) if spec.is_max else prox_weighted_power(spec, v)


def generalized_jacobian_diag(spec, ubar):
    """Diagonal of a generalized Jacobian of the finite-p prox at the prox
    output ubar; entries lie in [0, 1].

    The smooth formula is 1 / (1 + lam*p*w*(p-1)*|u|^(p-2)); for p < 2 the
    entry at u = 0 is taken to be 0 (a valid selection).
    """
    if spec.is_max:
        raise ValueError("generalized_jacobian_diag needs finite p")
    u = np.abs(np.ascontiguousarray(ubar, dtype=np.float64))
    p = float(spec.p)
    if p == 2.0:
        return 1.0 / (1.0 + 2.0 * spec.lam * spec.weights) * np.ones_like(u)
    if p == 1.0:
        return (u > 0).astype(np.float64)
    d = np.zeros_like(u)
    nz = u > 0
    with np.errstate(divide="ignore", over="ignore"):
        d[nz] = 1.0 / (1.0 + spec.lam * p * (p - 1.0) * spec.weights[nz] * u[nz] ** (p - 2.0))
    if p > 2.0:
        d[~nz] = 1.0
    return d


def fenchel_subgradient_check(spec, u, z, tol=1e-6):
    """True when z lies in the subdifferential of the penalty at u.

    Finite p checks the pointwise gradient (the sign interval at zero for
    p = 1); p = inf uses the norm characterization: dual norm at most one and
    <z, u> equal to the norm value.
    """
    u = np.ascontiguousarray(u, dtype=np.float64)
    z = np.ascontiguousarray(z, dtype=np.float64)
    w = spec.weights
    if spec.is_max:
        dual = float(np.sum(np.abs(z) / w))
        if dual > 1.0 + tol:
            return False
        val = float(np.max(w * np.abs(u))) if u.size else 0.0
        return float(z @ u) >= val - tol * (1.0 + abs(val))
    p = float(spec.p)
    zero = u == 0.0
    if p == 1.0:
        if np.any(np.abs(z[zero]) > w[zero] + tol):
            return False
    else:
        if np.any(np.abs(z[zero]) > tol):
            return False
    nz = ~zero
    grad = p * w[nz] * np.abs(u[nz]) ** (p - 1.0) * np.sign(u[nz])
    return bool(np.all(np.abs(z[nz] - grad) <= tol * np.maximum(1.0, np.abs(grad))))
