"""Dissipation potential, its viscous augmentations and the associated
proximal/velocity maps.

The base potential is the weighted l1 norm R(v) = sum_i omega_i |v_i|; its
subdifferential at zero (the *stable set*) is the box {|xi_i| <= omega_i}.
Viscosity adds (eps/2) ||v||_V^2 and optionally (delta/2) ||v||_Z^2, which
makes the velocity map single valued and Lipschitz.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .spaces import DiscreteSpaces


class VelocitySolveError(RuntimeError):
    """Inner iteration failed to reach its tolerance; carries the residual."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (final residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class DissipationParams:
    """Viscosities and smoothing level of the regularized dissipation."""

    eps: float
    delta: float = 0.0
    sigma: float = 0.0

    def __post_init__(self):
        if self.delta < 0.0:
            raise ValueError("delta must be nonnegative")
        if self.sigma < 0.0:
            raise ValueError("sigma must be nonnegative")

    def require_viscous(self):
        if self.eps <= 0.0:
            raise ValueError("velocity solves require eps > 0")


def R(spaces, v):
    v = spaces._check_dim(v)
    return float(spaces.diss_weights @ np.abs(v))


def R_eps_delta(spaces, v, params):
    v = spaces._check_dim(v)
    val = R(spaces, v) + 0.5 * params.eps * float(v @ (spaces.mass * v))
    if params.delta > 0.0:
        val += 0.5 * params.delta * float(v @ (spaces.stiffness @ v))
    return val


def project_stable(spaces, xi):
    """Coordinatewise clamp of a dual vector onto the stable box."""
    xi = spaces._check_dim(xi)
    w = spaces.diss_weights
    return np.clip(xi, -w, w)


def stable_set_check(spaces, xi):
    xi = spaces._check_dim(xi)
    return bool(np.all(np.abs(xi) <= spaces.diss_weights))


def dist_vstar(spaces, xi):
    """V*-distance of a dual vector to the stable box (clamp, then norm)."""
    xi = spaces._check_dim(xi)
    excess = xi - project_stable(spaces, xi)
    return float(np.sqrt(excess @ (excess / spaces.mass)))


def dist_zstar(spaces, xi, tol=1e-10, max_iter=10_000):
    """Z*-distance to the stable box: a box-constrained QP in the inverse
    stiffness metric, solved by projected gradient with Barzilai-Borwein steps.
    """
    xi = spaces._check_dim(xi)
    w = spaces.diss_weights
    if np.all(np.abs(xi) <= w):
        return 0.0

    def grad(eta):
        # d/d eta of 1/2 (xi - eta)' A^{-1} (xi - eta)
        return -spaces.solve_stiffness(xi - eta)

    eta = project_stable(spaces, xi)
    g = grad(eta)
    step = 1.0 / spaces.stiffness_norm  # safe initial step: A^{-1} has norm >= its min eigenvalue
    prev_eta, prev_g = None, None
    for _ in range(max_iter):
        eta_new = np.clip(eta - step * g, -w, w)
        pg = (eta - eta_new) / step
        if float(np.sqrt(pg @ pg)) <= tol:
            eta = eta_new
            break
        prev_eta, prev_g = eta, g
        eta = eta_new
        g = grad(eta)
        de, dg = eta - prev_eta, g - prev_g
        denom = float(de @ dg)
        if denom > 0.0:
            step = float(de @ de) / denom
        else:
            step = 1.0 / spaces.stiffness_norm
    else:
        pg_norm = float(np.sqrt(pg @ pg))
        raise VelocitySolveError("projected-gradient QP for the Z*-distance "
                                 "did not converge", pg_norm)
    d = xi - eta
    return float(np.sqrt(d @ spaces.solve_stiffness(d)))


def solve_velocity(spaces, w, params, v0=None, tol=1e-11, max_iter=100_000):
    """Velocity map: argmin_v R(v) + (eps/2)||v||_V^2 + (delta/2)||v||_Z^2 - <w, v>.

    For delta = 0 this is exact coordinatewise shrinkage; for delta > 0 a
    proximal-gradient iteration (compiled kernel when available).  Ties at
    |w_i| = omega_i resolve to v_i = 0 exactly.
    """
    params.require_viscous()
    w = spaces._check_dim(w)
    om = spaces.diss_weights
    if params.delta == 0.0:
        return np.sign(w) * np.maximum(np.abs(w) - om, 0.0) / (params.eps * spaces.mass)
    step = 1.0 / (params.eps * float(np.max(spaces.mass))
                  + params.delta * spaces.stiffness_norm)
    v, _, res = kernels.velocity_prox_grad(
        np.ascontiguousarray(w), np.ascontiguousarray(om),
        np.ascontiguousarray(spaces.mass), np.ascontiguousarray(spaces.stiffness),
        params.eps, params.delta, step, tol, int(max_iter), v0)
    if res > tol:
        raise VelocitySolveError("velocity proximal-gradient iteration did not "
                                 "converge", res)
    return np.asarray(v)


def conjugate_R_eps_delta(spaces, w, params, **kw):
    """Convex conjugate of the regularized dissipation, via its maximizer.

    R*(w) = <w, v> - R_{eps,delta}(v) at v = solve_velocity(w).  For delta = 0
    this equals sum_i max(|w_i| - omega_i, 0)^2 / (2 eps m_i) in closed form;
    the generic path evaluates the inner minimization so the Fenchel-Young
    identity is exact by construction.
    """
    v = solve_velocity(spaces, w, params, **kw)
    return float(w @ v) - R_eps_delta(spaces, v, params)


def lipschitz_audit(spaces, params, trials=1000, scale=3.0, rng=None):
    """Sampled Lipschitz constant of the velocity map, V* -> V."""
    params.require_viscous()
    rng = np.random.default_rng(rng)
    worst = 0.0
    for _ in range(trials):
        w1 = scale * rng.standard_normal(spaces.n) * spaces.diss_weights
        w2 = scale * rng.standard_normal(spaces.n) * spaces.diss_weights
        dw = w1 - w2
        denom = float(np.sqrt(dw @ (dw / spaces.mass)))
        if denom == 0.0:
            continue
        dv = solve_velocity(spaces, w1, params) - solve_velocity(spaces, w2, params)
        worst = max(worst, spaces.norm_v(dv) / denom)
    return worst


# -- Huber smoothing ---------------------------------------------------------

def moreau_R(spaces, v, sigma):
    """Huber envelope of R: quadratic for |v_i| <= sigma, linear outside."""
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    v = spaces._check_dim(v)
    av = np.abs(v)
    vals = np.where(av <= sigma, av ** 2 / (2.0 * sigma), av - sigma / 2.0)
    return float(spaces.diss_weights @ vals)


def moreau_R_grad(spaces, v, sigma):
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    v = spaces._check_dim(v)
    return spaces.diss_weights * np.clip(v / sigma, -1.0, 1.0)


def moreau_R_hess_diag(spaces, v, sigma):
    """Diagonal of the (a.e.) second derivative of the Huber envelope."""
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    v = spaces._check_dim(v)
    return np.where(np.abs(v) < sigma, spaces.diss_weights / sigma, 0.0)
