"""Pure-NumPy kernel implementations, used when the compiled core is absent."""

import numpy as np

COMPILED = False


def velocity_prox_grad(w, omega, m, a_mat, eps, delta, step, tol, max_iter, v0=None):
    """Proximal-gradient solve of the regularized velocity problem.

    Minimizes sum omega_i |v_i| + (eps/2) v'Mv + (delta/2) v'Av - w'v.
    Forward step on the smooth quadratic part, coordinatewise shrinkage
    backward step.  Returns (v, iterations, residual) where the residual is
    the V-norm of the last fixed-point update.
    """
    n = w.shape[0]
    v = np.zeros(n) if v0 is None else np.array(v0, dtype=float)
    thresh = step * omega
    res = 0.0
    for it in range(1, max_iter + 1):
        grad = eps * m * v + delta * (a_mat @ v) - w
        u = v - step * grad
        v_new = np.sign(u) * np.maximum(np.abs(u) - thresh, 0.0)
        dv = v_new - v
        res = float(np.sqrt(dv @ (m * dv)))
        v = v_new
        if res <= tol:
            return v, it, res
    return v, max_iter, res
