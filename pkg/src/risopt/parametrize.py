"""Arc-length reparametrization of viscous solutions and the residual
diagnostics of the parametrized balanced-viscosity solution conditions.

A viscous trajectory z(t) is rescaled by

    s(t) = t + int_0^t [ R(z') + ||z'||_V dist_V*(-D_z I, stable set) ] dr,

inverted to physical time t_hat(s) and composed to z_hat = z o t_hat.  In the
vanishing-viscosity limit the triple (S, t_hat, z_hat) satisfies a
complementarity condition, a normalization condition and an energy identity;
at finite viscosity all three are checked as residuals.
"""

from dataclasses import dataclass

import numpy as np

from .dissipation import R, dist_vstar
from .energy import energy_I, grad_I
from .spaces import TimeGrid
from .solver import StatePath


@dataclass(frozen=True)
class ParametrizedSolution:
    total_length: float          # S (>= T)
    s_nodes: np.ndarray          # uniform grid on [0, S]
    hat_t: np.ndarray            # physical time per node, nondecreasing
    hat_z: np.ndarray            # (m, n) states
    hat_ell: np.ndarray          # (m, n) loads (composition with hat_t)
    dist: np.ndarray             # V*-distance to the stable set per node
    G_mask: np.ndarray           # nodes where the distance exceeds threshold
    final_time: float

    def __post_init__(self):
        if self.hat_t[0] > 1e-12 or abs(self.hat_t[-1] - self.final_time) > 1e-9:
            raise ValueError("hat_t must run from 0 to the final time")
        if np.any(np.diff(self.hat_t) < -1e-12):
            raise ValueError("hat_t must be nondecreasing")


def contact_potential(spaces, v, xi):
    """R(v) + ||v||_V * dist_V*(xi, stable set)."""
    return R(spaces, v) + spaces.norm_v(v) * dist_vstar(spaces, xi)


def arclength(model, path, ell, eps):
    """Cumulative arc length s(t_k) along a solved viscous path.

    Returns (s_values, S).  The integrand 1 + contact potential is positive,
    so s is strictly increasing and S >= T.
    """
    sp = model.spaces
    tau = path.grid.tau
    dists = np.array([dist_vstar(sp, -grad_I(model, ell.values[k],
                                             path.values[k]))
                      for k in range(path.grid.steps + 1)])
    # Exact increment for piecewise-linear states: the R-term telescopes to
    # R(dz); the distance factor is averaged over the step (trapezoid).
    inc = np.empty(path.grid.steps)
    for k in range(path.grid.steps):
        dz = path.values[k + 1] - path.values[k]
        inc[k] = tau + R(sp, dz) + sp.norm_v(dz) * 0.5 * (dists[k] + dists[k + 1])
    s_vals = np.concatenate([[0.0], np.cumsum(inc)])
    return s_vals, float(s_vals[-1])


def reparametrize(model, path, ell, eps, m_out=None, g_threshold=0.05):
    """Resample a viscous solution on a uniform arc-length grid.

    ``m_out`` defaults to 4x the time-step count.  t_hat is the monotone
    piecewise-linear inverse of s; z_hat and ell_hat are linear
    interpolations of the trajectories at t_hat.
    """
    sp = model.spaces
    if m_out is None:
        m_out = 4 * path.grid.steps
    s_vals, total = arclength(model, path, ell, eps)
    if np.any(np.diff(s_vals) <= 0.0):
        raise ValueError("arc length is not strictly increasing")
    s_grid = np.linspace(0.0, total, m_out)
    t_nodes = path.grid.nodes
    hat_t = np.interp(s_grid, s_vals, t_nodes)
    hat_z = np.column_stack([np.interp(hat_t, t_nodes, path.values[:, i])
                             for i in range(sp.n)])
    hat_ell = np.column_stack([np.interp(hat_t, t_nodes, ell.values[:, i])
                               for i in range(sp.n)])
    dist = np.array([dist_vstar(sp, -grad_I(model, hat_ell[j], hat_z[j]))
                     for j in range(m_out)])
    return ParametrizedSolution(total_length=total, s_nodes=s_grid, hat_t=hat_t,
                                hat_z=hat_z, hat_ell=hat_ell, dist=dist,
                                G_mask=dist > g_threshold,
                                final_time=path.grid.final_time)


def bv_residuals(model, psol, ell=None):
    """Sup-norm residuals of the three balanced-viscosity conditions.

    * complementarity: min(t_hat', dist) at every node (the product vanishes
      in the limit);
    * normalization: |t_hat' + R[z_hat'] (+ ||z_hat'||_V dist on G) - 1|,
      with matching forward differences for t_hat and z_hat;
    * energy identity: max defect of the parametrized energy balance.
    """
    sp = model.spaces
    s = psol.s_nodes
    ds = np.diff(s)
    m = len(s)
    tp = np.diff(psol.hat_t) / ds                       # forward differences
    dz = np.diff(psol.hat_z, axis=0)
    dl = np.diff(psol.hat_ell, axis=0)

    compl = float(np.max(np.minimum(tp, psol.dist[:-1])))

    norm_res = 0.0
    for j in range(m - 1):
        rz = R(sp, dz[j]) / ds[j]
        val = tp[j] + rz
        if psol.G_mask[j]:
            val += sp.norm_v(dz[j]) / ds[j] * psol.dist[j]
        norm_res = max(norm_res, abs(val - 1.0))

    # energy identity, integrated with increments of the s-grid
    energies = np.array([energy_I(model, psol.hat_ell[j], psol.hat_z[j])
                         for j in range(m)])
    diss_inc = np.array([R(sp, dz[j]) + sp.norm_v(dz[j]) * psol.dist[j]
                         for j in range(m - 1)])
    work_inc = np.array([float(dl[j] @ (0.5 * (psol.hat_z[j] + psol.hat_z[j + 1])))
                         for j in range(m - 1)])
    cum_diss = np.concatenate([[0.0], np.cumsum(diss_inc)])
    cum_work = np.concatenate([[0.0], np.cumsum(work_inc)])
    defect = energies + cum_diss - energies[0] + cum_work
    energy_res = float(np.max(np.abs(defect)))

    return {"complementarity": compl, "normalization": norm_res,
            "energy_identity": energy_res}


def physical_time_solution(psol, jump_threshold=0.05, min_run=3, steps=None):
    """Collapse t_hat plateaus to jump records and rebuild a physical path.

    Plateaus are runs of >= ``min_run`` consecutive nodes with forward
    difference quotient of t_hat below ``jump_threshold``.  The returned path
    selects the right limit at jump times.
    """
    s = psol.s_nodes
    tp = np.diff(psol.hat_t) / np.diff(s)
    slow = tp < jump_threshold

    jumps = []
    j = 0
    m = len(slow)
    while j < m:
        if slow[j]:
            start = j
            while j < m and slow[j]:
                j += 1
            end = j  # node index after the plateau
            if end - start >= min_run:
                t_jump = float(0.5 * (psol.hat_t[start] + psol.hat_t[end]))
                jumps.append((t_jump, psol.hat_z[start].copy(),
                              psol.hat_z[end].copy()))
        else:
            j += 1

    if steps is None:
        steps = max(1, len(s) // 4)
    grid = TimeGrid(final_time=psol.final_time, steps=steps)
    idx = np.searchsorted(psol.hat_t, grid.nodes, side="right") - 1
    idx = np.clip(idx, 0, len(s) - 1)
    return StatePath(grid, psol.hat_z[idx]), jumps
