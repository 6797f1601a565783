"""Optimal control of the regularized evolution.

The reduced objective is

    J(l) = 1/2 ||z(T; l) - z_des||_V^2 + (beta/2) ||l||_{H1(0,T; V*)}^2,

subject to local stability of the initial pair (exact box projection of l(0))
and a relaxed end-time stationarity constraint handled by a quadratic penalty.
Gradients come from the discrete adjoint of a Huber-smoothed forward scheme;
each forward step is a damped Newton solve of the smoothed stationarity
system.
"""

from dataclasses import dataclass, field

import numpy as np

from .dissipation import (DissipationParams, dist_vstar, dist_zstar,
                          moreau_R_grad, moreau_R_hess_diag, project_stable)
from .energy import DF, D2F_diag, convexity_threshold, grad_I
from .solver import LoadPath, SolverError, StatePath, solve_ris
from .spaces import TimeGrid


@dataclass(frozen=True)
class ControlProblem:
    model: object
    z_des: np.ndarray
    beta: float
    z0: np.ndarray
    grid: TimeGrid
    eps: float
    delta: float
    sigma: float
    variant: str = "eps_delta"      # "eps" or "eps_delta"
    penalty_weight: float = 10.0

    def __post_init__(self):
        if self.beta <= 0.0:
            raise ValueError("Tikhonov weight beta must be positive")
        if self.variant not in ("eps", "eps_delta"):
            raise ValueError("variant must be 'eps' or 'eps_delta'")
        object.__setattr__(self, "z_des",
                           self.model.spaces._check_dim(self.z_des))
        object.__setattr__(self, "z0", self.model.spaces._check_dim(self.z0))

    @property
    def end_tolerance(self):
        tol = self.eps ** 0.25
        if self.variant == "eps_delta":
            tol += self.delta ** 0.25
        return tol


@dataclass
class OptimizationResult:
    ell_star: LoadPath
    z_star: StatePath
    J_star: float
    gradient_norm_history: list
    feasibility: dict
    iterations: int
    feasible: bool
    continuation: list = field(default_factory=list)


# -- discrete H1(0,T; V*) calculus ------------------------------------------

def _h1_weights(grid):
    """Trapezoid node weights a_k and derivative-term weights b_k.

    The derivative sequence uses backward differences with the first entry
    copied from the second, so node 1 carries the weight of nodes 0 and 1.
    """
    kk = grid.steps
    tau = grid.tau
    a = np.full(kk + 1, tau)
    a[0] = a[-1] = 0.5 * tau
    b = a.copy()
    b[1] += b[0]
    b[0] = 0.0
    return a, b


def path_h1_vstar_norm(ell, spaces):
    """H1(0,T; V*) norm of a load path with trapezoid-in-time weights."""
    return h1_vstar_norm(ell.grid, ell.values, spaces.mass)


def h1_vstar_norm(grid, values, m_diag):
    return float(np.sqrt(_h1_quadratic(grid, values, 1.0 / m_diag)))


def _h1_quadratic(grid, values, inv_m):
    a, b = _h1_weights(grid)
    tau = grid.tau
    q = float(np.einsum("k,ki,i,ki->", a, values, inv_m, values))
    d = np.diff(values, axis=0) / tau
    q += float(np.einsum("k,ki,i,ki->", b[1:], d, inv_m, d))
    return q


def h1_gram_apply(grid, values, m_diag):
    """Gradient of 1/2 * (H1 norm)^2 w.r.t. the load coefficients."""
    a, b = _h1_weights(grid)
    tau = grid.tau
    inv_m = 1.0 / m_diag
    g = a[:, None] * values * inv_m[None, :]
    d = np.diff(values, axis=0) / tau
    wd = b[1:, None] * d * inv_m[None, :] / tau
    g[1:] += wd
    g[:-1] -= wd
    return g


# -- objective and constraints ----------------------------------------------

def objective(problem, z_path, ell):
    sp = problem.model.spaces
    d = z_path.values[-1] - problem.z_des
    track = 0.5 * float(d @ (sp.mass * d))
    tik = 0.5 * problem.beta * _h1_quadratic(ell.grid, ell.values, 1.0 / sp.mass)
    return track + tik


def feasibility_residuals(problem, ell, z_path):
    model = problem.model
    sp = model.spaces
    init = dist_vstar(sp, -grad_I(model, ell.values[0], problem.z0))
    end = dist_zstar(sp, -grad_I(model, ell.values[-1], z_path.values[-1]))
    return {"init_dist": init, "end_dist": end}


def project_initial_load(problem, values):
    """Clamp l(0) so the initial pair is exactly locally stable."""
    model = problem.model
    sp = model.spaces
    center = sp.stiffness @ problem.z0 + DF(model, problem.z0)
    out = np.array(values, dtype=float)
    out[0] = np.clip(out[0], center - sp.diss_weights, center + sp.diss_weights)
    return out


# -- smoothed forward solve ---------------------------------------------------

def solve_ris_smoothed(problem, ell, newton_tol=1e-12, newton_cap=100):
    """Forward integration with the Huber-smoothed dissipation.

    Per step, damped Newton on the smoothed stationarity residual

        G(z) = R_sigma'((z - z_prev)/tau) + (eps/tau) M (z - z_prev)
               + (delta/tau) A (z - z_prev) + A z + DF(z) - l_k = 0.
    """
    model = problem.model
    sp = model.spaces
    grid = ell.grid
    tau = grid.tau
    sigma = problem.sigma
    if sigma <= 0.0:
        raise ValueError("smoothed solve requires sigma > 0")
    if problem.delta <= 0.0:
        raise ValueError("smoothed solve requires delta > 0")

    zs = np.empty((grid.steps + 1, sp.n))
    zs[0] = problem.z0
    visc = (problem.eps / tau) * np.diag(sp.mass) + (problem.delta / tau) * sp.stiffness
    for k in range(1, grid.steps + 1):
        z = zs[k - 1].copy()
        ell_k = ell.values[k]
        for it in range(newton_cap):
            v = (z - zs[k - 1]) / tau
            res = (moreau_R_grad(sp, v, sigma) + visc @ (z - zs[k - 1])
                   + sp.stiffness @ z + DF(model, z) - ell_k)
            rnorm = float(np.linalg.norm(res))
            if rnorm <= newton_tol * (1.0 + float(np.linalg.norm(ell_k))):
                break
            jac = (np.diag(moreau_R_hess_diag(sp, v, sigma)) / tau + visc
                   + sp.stiffness + np.diag(D2F_diag(model, z)))
            try:
                dz = np.linalg.solve(jac, -res)
            except np.linalg.LinAlgError as exc:
                raise SolverError(f"singular Newton system at step {k}") from exc
            # backtracking on the residual norm
            t = 1.0
            for _ in range(40):
                z_try = z + t * dz
                v_try = (z_try - zs[k - 1]) / tau
                r_try = (moreau_R_grad(sp, v_try, sigma) + visc @ (z_try - zs[k - 1])
                         + sp.stiffness @ z_try + DF(model, z_try) - ell_k)
                if float(np.linalg.norm(r_try)) <= (1.0 - 1e-4 * t) * rnorm:
                    break
                t *= 0.5
            z = z + t * dz
        else:
            raise SolverError(f"smoothed Newton did not converge at step {k} "
                              f"(residual {rnorm:.3e})")
        zs[k] = z
    return StatePath(grid, zs)


# -- reduced objective and adjoint gradient ----------------------------------

def reduced_objective_smoothed(problem, ell, penalty=0.0, z_path=None):
    if z_path is None:
        z_path = solve_ris_smoothed(problem, ell)
    val = objective(problem, z_path, ell)
    if penalty > 0.0:
        end = _end_distance(problem, ell, z_path)
        excess = max(0.0, end - problem.end_tolerance)
        val += 0.5 * penalty * excess ** 2
    return val


def _end_distance(problem, ell, z_path):
    model = problem.model
    return dist_zstar(model.spaces,
                      -grad_I(model, ell.values[-1], z_path.values[-1]))


def _end_distance_gradients(problem, ell, z_path):
    """Gradients of the end-time Z*-distance w.r.t. z_K and l_K.

    With xi = l_K - A z_K - DF(z_K) and eta* the box point realizing the
    distance, d(dist)/d(xi) = A^{-1}(xi - eta*)/dist; the chain rule through
    xi gives the two partials.  Returns (grad_zK, grad_lK, dist).
    """
    model = problem.model
    sp = model.spaces
    zK = z_path.values[-1]
    xi = -grad_I(model, ell.values[-1], zK)
    dist = dist_zstar(sp, xi)
    if dist <= 1e-14:
        return np.zeros(sp.n), np.zeros(sp.n), dist
    eta = _zstar_projection(sp, xi)
    dxi = sp.solve_stiffness(xi - eta) / dist
    hess = sp.stiffness + np.diag(D2F_diag(model, zK))
    return -hess @ dxi, dxi, dist


def _zstar_projection(sp, xi, tol=1e-10, max_iter=10_000):
    """Box point nearest to xi in the inverse-stiffness metric."""
    w = sp.diss_weights
    if np.all(np.abs(xi) <= w):
        return np.array(xi, dtype=float)
    eta = project_stable(sp, xi)
    step = 1.0 / sp.stiffness_norm
    g = -sp.solve_stiffness(xi - eta)
    prev = None
    for _ in range(max_iter):
        eta_new = np.clip(eta - step * g, -w, w)
        if float(np.linalg.norm(eta - eta_new)) <= tol * step:
            return eta_new
        prev = (eta, g)
        eta = eta_new
        g = -sp.solve_stiffness(xi - eta)
        de, dg = eta - prev[0], g - prev[1]
        denom = float(de @ dg)
        step = float(de @ de) / denom if denom > 0.0 else 1.0 / sp.stiffness_norm
    return eta


def reduced_gradient(problem, ell, penalty=0.0, z_path=None):
    """Discrete adjoint gradient of the smoothed reduced objective.

    Returns an array shaped like ``ell.values``.  Entry 0 only carries the
    Tikhonov part (the initial load is handled by projection, and the first
    state step depends on l_1, not l_0).
    """
    model = problem.model
    sp = model.spaces
    grid = ell.grid
    tau = grid.tau
    sigma = problem.sigma
    if z_path is None:
        z_path = solve_ris_smoothed(problem, ell)
    zs = z_path.values
    kk = grid.steps
    visc = (problem.eps / tau) * np.diag(sp.mass) + (problem.delta / tau) * sp.stiffness

    def step_matrices(k):
        v = (zs[k] - zs[k - 1]) / tau
        hub = np.diag(moreau_R_hess_diag(sp, v, sigma)) / tau
        d_k = hub + visc + sp.stiffness + np.diag(D2F_diag(model, zs[k]))
        b_k = hub + visc          # = -dG_k/dz_{k-1}
        return d_k, b_k

    # terminal condition
    phi_z = sp.mass * (zs[-1] - problem.z_des)
    grad = problem.beta * h1_gram_apply(grid, ell.values, sp.mass)
    if penalty > 0.0:
        gz, gl, dist = _end_distance_gradients(problem, ell, z_path)
        excess = max(0.0, dist - problem.end_tolerance)
        if excess > 0.0:
            phi_z = phi_z + penalty * excess * gz
            grad[-1] += penalty * excess * gl

    lam = np.zeros(sp.n)
    b_next = None
    for k in range(kk, 0, -1):
        d_k, b_k = step_matrices(k)
        rhs = -phi_z if k == kk else b_next @ lam
        lam = np.linalg.solve(d_k, rhs)
        grad[k] += -lam
        b_next = b_k
    return grad


# -- optimizer ----------------------------------------------------------------

def solve_vocp(problem, ell_init, max_rounds=6, max_inner=200, gtol=1e-6,
               sigma_schedule=(1e-2, 1e-3, 1e-4), penalty_growth=10.0,
               step0=1.0, verbose=False):
    """Quadratic-penalty / projected-gradient-descent solve of the control
    problem.  Returns a flagged (never silently infeasible) result."""
    from dataclasses import replace

    grid = problem.grid
    values = project_initial_load(problem, np.asarray(ell_init.values, dtype=float))
    history = []
    penalty = problem.penalty_weight
    iterations = 0
    j_val = np.inf
    for rnd in range(max_rounds):
        sigma = sigma_schedule[min(rnd, len(sigma_schedule) - 1)]
        prob = replace(problem, sigma=sigma)
        ell = LoadPath(grid, values)
        z_path = solve_ris_smoothed(prob, ell)
        j_val = reduced_objective_smoothed(prob, ell, penalty, z_path)
        step = step0
        for _ in range(max_inner):
            ell = LoadPath(grid, values)
            if z_path is None:
                z_path = solve_ris_smoothed(prob, ell)
                j_val = reduced_objective_smoothed(prob, ell, penalty, z_path)
            g = reduced_gradient(prob, ell, penalty, z_path)
            gnorm = float(np.linalg.norm(g))
            history.append(gnorm)
            if gnorm <= gtol * (1.0 + abs(j_val)):
                break
            accepted = False
            for _ in range(50):
                trial = project_initial_load(prob, values - step * g)
                try:
                    z_try = solve_ris_smoothed(prob, LoadPath(grid, trial))
                except SolverError:
                    step *= 0.5
                    continue
                j_try = reduced_objective_smoothed(prob, LoadPath(grid, trial),
                                                   penalty, z_try)
                if j_try <= j_val - 1e-4 * step * gnorm ** 2:
                    values, z_path, j_val = trial, z_try, j_try
                    accepted = True
                    break
                step *= 0.5
            iterations += 1
            if not accepted:
                break
            step = min(step * 2.0, 1e6)
        ell = LoadPath(grid, values)
        z_path = solve_ris_smoothed(prob, ell)
        end = _end_distance(prob, ell, z_path)
        if verbose:
            print(f"round {rnd}: J={j_val:.6g} end_dist={end:.3e} "
                  f"tol={problem.end_tolerance:.3e}")
        if end <= problem.end_tolerance:
            break
        penalty *= penalty_growth

    ell = LoadPath(grid, values)
    z_path = solve_ris_smoothed(replace(problem, sigma=sigma), ell)
    feas = feasibility_residuals(problem, ell, z_path)
    feasible = feas["end_dist"] <= problem.end_tolerance and \
        feas["init_dist"] <= 1e-9
    return OptimizationResult(
        ell_star=ell, z_star=z_path,
        J_star=objective(problem, z_path, ell),
        gradient_norm_history=history, feasibility=feas,
        iterations=iterations, feasible=feasible)


def continuation_delta(problem, deltas, ell_init, **kw):
    """Warm-started sequence of solves for decreasing Z-viscosity."""
    from dataclasses import replace

    deltas = list(deltas)
    if any(d2 >= d1 for d1, d2 in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be strictly decreasing")
    results = []
    ell = ell_init
    for d in deltas:
        prob = replace(problem, delta=d)
        res = solve_vocp(prob, ell, **kw)
        res.continuation.append(d)
        results.append(res)
        ell = res.ell_star
    return results


# -- reverse approximation ----------------------------------------------------

@dataclass
class RecoveryRecord:
    eps: float
    z_eps: StatePath
    ell_eps: LoadPath
    z_gap_h1: float
    ell_gap_h1: float
    end_dist: float


@dataclass
class RecoveryStudy:
    records: list
    eta_bar: float
    end_dist_order: float
    candidate_residual: float


def differential_solution_residual(model, path, ell):
    """Max componentwise subdifferential residual of the unregularized
    inclusion along a path (0 means an exact differential solution)."""
    sp = model.spaces
    vel = path.velocities
    worst = 0.0
    for k in range(path.grid.steps + 1):
        xi = -grad_I(model, ell.values[k], path.values[k])
        v = vel[k]
        for i in range(sp.n):
            if abs(v[i]) > 1e-12:
                r = abs(xi[i] - sp.diss_weights[i] * np.sign(v[i]))
            else:
                r = max(abs(xi[i]) - sp.diss_weights[i], 0.0)
            worst = max(worst, r / sp.diss_weights[i])
    return worst


def recovery_sequence(model, ztilde, ell, eps_list, *, radius=None,
                      candidate_tol=0.05, rho=0.05, min_that_prime=None,
                      solve_kw=None):
    """Build viscous solutions and perturbed loads converging to a prescribed
    jump-free trajectory.

    For each eps, solves the penalized viscous system (tracking penalty
    eta_bar around ztilde) and sets l_eps = l - eta_bar * M (z_eps - ztilde).
    The candidate ztilde is validated first: its stationarity residual must be
    below ``candidate_tol`` and, when supplied, its measured minimal time
    dilation must exceed ``rho``.
    """
    sp = model.spaces
    resid = differential_solution_residual(model, ztilde, ell)
    if resid > candidate_tol:
        raise ValueError(f"candidate trajectory is not a differential solution "
                         f"(residual {resid:.3e} > {candidate_tol})")
    if min_that_prime is not None and min_that_prime < rho:
        raise ValueError(f"candidate violates the uniform time-dilation bound "
                         f"(min t_hat' {min_that_prime:.3f} < rho {rho})")
    if radius is None:
        radius = 2.0 * max(sp.norm_z(z) for z in ztilde.values) + 1.0
    eta_bar = convexity_threshold(model, radius)
    solve_kw = dict(solve_kw or {})

    records = []
    for eps in eps_list:
        params = DissipationParams(eps=eps, delta=0.0)
        z_eps, _ = solve_ris(model, ell, ztilde.values[0], params,
                             eta=eta_bar, ztilde=ztilde,
                             compute_residuals=False, **solve_kw)
        shift = eta_bar * (z_eps.values - ztilde.values) * sp.mass[None, :]
        ell_eps = LoadPath(ell.grid, ell.values - shift)
        gap_z = np.sqrt(_h1_quadratic_primal(ell.grid,
                                             z_eps.values - ztilde.values, sp))
        gap_l = h1_vstar_norm(ell.grid, ell_eps.values - ell.values, sp.mass)
        end = dist_vstar(sp, -grad_I(model, ell_eps.values[-1], z_eps.values[-1]))
        records.append(RecoveryRecord(eps=eps, z_eps=z_eps, ell_eps=ell_eps,
                                      z_gap_h1=float(gap_z), ell_gap_h1=gap_l,
                                      end_dist=end))
    ends = [r.end_dist for r in records]
    if all(e > 0.0 for e in ends):
        order = float(np.polyfit(np.log(list(eps_list)), np.log(ends), 1)[0])
    else:
        order = np.inf
    return RecoveryStudy(records=records, eta_bar=eta_bar,
                         end_dist_order=order, candidate_residual=resid)


def _h1_quadratic_primal(grid, values, sp):
    """Squared H1(0,T; Z) norm of a primal path (stiffness pairing)."""
    a, b = _h1_weights(grid)
    tau = grid.tau
    q = sum(a[k] * float(values[k] @ (sp.stiffness @ values[k]))
            for k in range(grid.steps + 1))
    d = np.diff(values, axis=0) / tau
    q += sum(b[k + 1] * float(d[k] @ (sp.stiffness @ d[k]))
             for k in range(grid.steps))
    return q
