"""Time integration of the viscously regularized evolution and the energy /
variation diagnostics attached to it.

The scheme is implicit incremental minimization: each step solves

    z_{k+1} = argmin_z  tau R((z - z_k)/tau) + (eps/2 tau) ||z - z_k||_V^2
              + (delta/2 tau) ||z - z_k||_Z^2 + I(l_{k+1}, z)

through a fixed point on the velocity, v <- V(-grad I(l_{k+1}, z_k + tau v)),
where V is the regularized velocity map.  The fixed point is damped adaptively
when the plain iteration is not contractive.
"""

from dataclasses import dataclass, field

import numpy as np

from .dissipation import (DissipationParams, R, R_eps_delta,
                          conjugate_R_eps_delta, dist_vstar, solve_velocity)
from .energy import D2F_diag, energy_I, grad_I, grad_penalized
from .spaces import TimeGrid


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class LoadPath:
    """Dual-vector trajectory sampled on a uniform grid.

    ``derivatives`` are backward differences with the first entry copied from
    the second, matching the implicit scheme's evaluation points.
    """

    grid: TimeGrid
    values: np.ndarray  # (K+1, n)

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        if vals.ndim != 2 or vals.shape[0] != self.grid.steps + 1:
            raise ValueError("load values must have shape (K+1, n)")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def derivatives(self):
        d = np.diff(self.values, axis=0) / self.grid.tau
        return np.vstack([d[:1], d])

    @classmethod
    def zero(cls, grid, n):
        return cls(grid, np.zeros((grid.steps + 1, n)))

    @classmethod
    def ramp(cls, grid, direction, rate=1.0, offset=0.0):
        direction = np.asarray(direction, dtype=float)
        t = grid.nodes[:, None]
        return cls(grid, (offset + rate * t) * direction[None, :])

    @classmethod
    def from_function(cls, grid, fn):
        return cls(grid, np.array([fn(t) for t in grid.nodes], dtype=float))


@dataclass(frozen=True)
class StatePath:
    """State trajectory; ``velocities[k] = (z_k - z_{k-1})/tau`` with v_0 = 0."""

    grid: TimeGrid
    values: np.ndarray  # (K+1, n)

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        if vals.ndim != 2 or vals.shape[0] != self.grid.steps + 1:
            raise ValueError("state values must have shape (K+1, n)")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def velocities(self):
        v = np.diff(self.values, axis=0) / self.grid.tau
        return np.vstack([np.zeros((1, v.shape[1])), v])


@dataclass
class SolveReport:
    energy_residual: float = np.nan
    rate_identity_residual: float = np.nan
    sup_z_norm: float = 0.0
    h1v_seminorm: float = 0.0
    h1z_seminorm: float = 0.0
    var_z: float = 0.0
    velocity0_norm: float = 0.0
    stationarity_distance: float = 0.0

    def to_dict(self):
        return {k: float(v) for k, v in self.__dict__.items()}


def _total_grad(model, eta, ztilde, k, ell_k, z):
    if eta > 0.0:
        return grad_penalized(model, eta, k, ztilde, ell_k, z)
    return grad_I(model, ell_k, z)


def solve_ris(model, ell, z0, params, *, eta=0.0, ztilde=None,
              inner_tol=1e-10, inner_cap=10_000, check_initial_stability=False,
              compute_residuals=True):
    """Integrate the regularized evolution; returns (StatePath, SolveReport).

    ``eta``/``ztilde`` switch on the quadratic tracking penalty (the penalized
    energy), which is equivalent to shifting the load by eta*M*ztilde.
    """
    params.require_viscous()
    sp = model.spaces
    grid = ell.grid
    tau = grid.tau
    z0 = sp._check_dim(z0)
    if eta > 0.0 and ztilde is None:
        raise ValueError("penalized solve needs a ztilde path")

    if check_initial_stability:
        d0 = dist_vstar(sp, -_total_grad(model, eta, ztilde, 0, ell.values[0], z0))
        if d0 > 1e-9:
            raise SolverError(f"initial state is not locally stable (dist {d0:.3e})")

    # Instability guard from the quadratic-growth a priori bound.
    lam = 4.0 / sp.alpha
    mu = 4.0 * sp.embedding_constant ** 2 / sp.alpha ** 2
    sup_load = max(sp.dual_norm_vstar(l) for l in ell.values)
    i0 = energy_I(model, ell.values[0], z0)
    z_bound = 10.0 * (1.0 + np.sqrt(max(lam * i0, 0.0) + mu * sup_load ** 2)
                      + sp.norm_z(z0))

    zs = np.empty((grid.steps + 1, sp.n))
    zs[0] = z0
    v = np.zeros(sp.n)
    for k in range(grid.steps):
        ell_k = ell.values[k + 1]
        theta = 1.0
        prev_res = np.inf
        prev_dv = None
        for it in range(inner_cap):
            w = -_total_grad(model, eta, ztilde, k + 1, ell_k, zs[k] + tau * v)
            v_new = solve_velocity(sp, w, params, v0=v)
            dv = v_new - v
            res = sp.norm_v(dv)
            if res <= inner_tol:
                v = v_new
                break
            # Damp when the plain iteration diverges or settles into a slowly
            # decaying oscillation (update direction flips without real
            # progress).  Monotone slow progress is left alone: it is the
            # physical transit through a jump, not a solver failure.
            if theta > 1.0 / 1024.0:
                oscillating = prev_dv is not None and float(dv @ prev_dv) < 0.0
                if res >= prev_res or (oscillating and res > 0.9 * prev_res):
                    theta *= 0.5
            prev_res = res
            prev_dv = dv
            v = v + theta * dv
        else:
            raise SolverError(f"inner fixed point stalled at step {k + 1} "
                              f"(residual {res:.3e})")
        zs[k + 1] = zs[k] + tau * v
        if sp.norm_z(zs[k + 1]) > z_bound:
            raise SolverError(f"state norm exceeded 10x the a priori bound at "
                              f"step {k + 1}")

    path = StatePath(grid, zs)
    report = _build_report(model, path, ell, params, eta=eta, ztilde=ztilde,
                           compute_residuals=compute_residuals)
    return path, report


def _build_report(model, path, ell, params, *, eta=0.0, ztilde=None,
                  compute_residuals=True):
    sp = model.spaces
    tau = path.grid.tau
    vel = path.velocities
    rep = SolveReport()
    rep.sup_z_norm = max(sp.norm_z(z) for z in path.values)
    v_v = np.array([sp.norm_v(v) for v in vel])
    v_z = np.array([sp.norm_z(v) for v in vel])
    rep.h1v_seminorm = float(np.sqrt(np.sum(tau * v_v[1:] ** 2)))
    rep.h1z_seminorm = float(np.sqrt(np.sum(tau * v_z[1:] ** 2)))
    rep.var_z = variation_z(path, sp)
    rep.velocity0_norm = float(v_v[1]) if len(v_v) > 1 else 0.0
    dists = [dist_vstar(sp, -_total_grad(model, eta, ztilde, k, ell.values[k],
                                         path.values[k]))
             for k in range(path.grid.steps + 1)]
    rep.stationarity_distance = float(max(d - params.eps * nv
                                          for d, nv in zip(dists, v_v)))
    if compute_residuals and eta == 0.0:
        rep.energy_residual = energy_balance_residual(model, path, ell, params)
        rep.rate_identity_residual = rate_energy_residual(model, path, ell, params)
    return rep


def energy_balance_residual(model, path, ell, params):
    """Max defect of the integrated energy balance along the path.

    I(l(t), z(t)) + int_0^t [R_{eps,delta}(z') + R*_{eps,delta}(-D_z I)]
        = I(l(0), z(0)) - int_0^t <l', z>.
    """
    sp = model.spaces
    tau = path.grid.tau
    kk = path.grid.steps
    vel = path.velocities
    diss = np.empty(kk + 1)
    power = np.empty(kk + 1)
    dl = ell.derivatives
    for k in range(kk + 1):
        w = -grad_I(model, ell.values[k], path.values[k])
        diss[k] = (R_eps_delta(sp, vel[k], params)
                   + conjugate_R_eps_delta(sp, w, params, v0=vel[k]))
        power[k] = float(dl[k] @ path.values[k])
    # trapezoid cumulative integrals
    cum_diss = np.concatenate([[0.0], np.cumsum(0.5 * tau * (diss[1:] + diss[:-1]))])
    cum_power = np.concatenate([[0.0], np.cumsum(0.5 * tau * (power[1:] + power[:-1]))])
    i0 = energy_I(model, ell.values[0], path.values[0])
    defect = [energy_I(model, ell.values[k], path.values[k]) + cum_diss[k]
              - (i0 - cum_power[k]) for k in range(kk + 1)]
    return float(np.max(np.abs(defect)))


def rate_energy_residual(model, path, ell, params):
    """Max defect of the differentiated (rate) energy identity.

    (eps/2)||z'(t)||_V^2 + (delta/2)||z'(t)||_Z^2 + int_0^t D^2 E(z)[z', z']
        = int_0^t <l', z'>.
    """
    sp = model.spaces
    tau = path.grid.tau
    kk = path.grid.steps
    vel = path.velocities
    dl = ell.derivatives
    curv = np.empty(kk + 1)
    power = np.empty(kk + 1)
    for k in range(kk + 1):
        v = vel[k]
        curv[k] = float(v @ (sp.stiffness @ v) + v @ (D2F_diag(model, path.values[k]) * v))
        power[k] = float(dl[k] @ v)
    cum_curv = np.concatenate([[0.0], np.cumsum(0.5 * tau * (curv[1:] + curv[:-1]))])
    cum_power = np.concatenate([[0.0], np.cumsum(0.5 * tau * (power[1:] + power[:-1]))])
    defect = [0.5 * params.eps * sp.norm_v(vel[k]) ** 2
              + 0.5 * params.delta * sp.norm_z(vel[k]) ** 2
              + cum_curv[k] - cum_power[k] for k in range(kk + 1)]
    return float(np.max(np.abs(defect)))


def apriori_audit(model, path, ell, params):
    """Recompute the diagnostic report for an existing path."""
    return _build_report(model, path, ell, params)


def variation_z(path, spaces):
    """Discrete total variation of the state in the Z-norm."""
    diffs = np.diff(path.values, axis=0)
    return float(sum(spaces.norm_z(d) for d in diffs))


@dataclass
class DeltaStudy:
    deltas: list
    errors: list
    order: float


def delta_convergence_study(model, ell, z0, eps, deltas, reference_factor=100.0,
                            **solve_kw):
    """Sup-in-time Z-norm errors against a small-delta reference, with a
    least-squares convergence order in delta."""
    deltas = list(deltas)
    if any(d2 >= d1 for d1, d2 in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be strictly decreasing")
    sp = model.spaces
    ref_params = DissipationParams(eps=eps, delta=min(deltas) / reference_factor)
    ref, _ = solve_ris(model, ell, z0, ref_params, compute_residuals=False,
                       **solve_kw)
    errors = []
    for d in deltas:
        path, _ = solve_ris(model, ell, z0, DissipationParams(eps=eps, delta=d),
                            compute_residuals=False, **solve_kw)
        err = max(sp.norm_z(a - b) for a, b in zip(path.values, ref.values))
        errors.append(err)
    order = float(np.polyfit(np.log(deltas), np.log(errors), 1)[0]) \
        if all(e > 0 for e in errors) else np.inf
    return DeltaStudy(deltas=deltas, errors=errors, order=order)
