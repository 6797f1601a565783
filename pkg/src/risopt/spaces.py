"""Finite-dimensional realization of the space hierarchy used by the toolkit.

The continuous problem lives on nested spaces (an H1-like energy space, an
L2-like pivot space and an L1-like dissipation space).  Here everything is
reduced to interior nodal values of a 1-D mesh: the energy pairing is the
Dirichlet stiffness matrix, the pivot pairing a lumped (diagonal) mass matrix
and the dissipation weights the quadrature weights of the nodal L1 norm.

Dual vectors are stored as plain linear-functional coefficients: every pairing
in the code base is a raw dot product and no Riesz map is ever applied
implicitly.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import cho_factor, cho_solve


@dataclass(frozen=True)
class DiscreteSpaces:
    """Matrices and weights defining all norms of the discrete hierarchy.

    Attributes
    ----------
    n : int
        Number of interior nodes.
    length : float
        Length of the underlying interval.
    h : float
        Mesh width (``length / (n + 1)`` for the FEM build).
    stiffness : (n, n) ndarray
        Symmetric positive definite matrix defining the energy-space pairing.
    mass : (n,) ndarray
        Diagonal of the (lumped) mass matrix, pivot-space pairing.
    diss_weights : (n,) ndarray
        Strictly positive weights of the weighted-l1 dissipation norm.
    quad_weights : (n,) ndarray
        Nodal quadrature weights used for integral functionals.
    alpha : float
        Coercivity constant of the stiffness matrix w.r.t. the chosen
        energy norm.  By convention the energy norm *is* the stiffness
        norm, so ``alpha == 1`` exactly.
    kappa : float
        Exponent of the intermediate L^kappa norm, in [2, 6).
    """

    n: int
    length: float
    h: float
    stiffness: np.ndarray
    mass: np.ndarray
    diss_weights: np.ndarray
    quad_weights: np.ndarray
    kappa: float = 2.0
    alpha: float = 1.0

    def __post_init__(self):
        a = np.asarray(self.stiffness, dtype=float)
        if a.shape != (self.n, self.n):
            raise ValueError("stiffness has wrong shape")
        if not np.array_equal(a, a.T):
            raise ValueError("stiffness must be symmetric")
        if np.any(np.asarray(self.mass) <= 0.0):
            raise ValueError("mass diagonal must be strictly positive")
        if np.any(np.asarray(self.diss_weights) <= 0.0):
            raise ValueError("dissipation weights must be strictly positive")
        for name in ("stiffness", "mass", "diss_weights", "quad_weights"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=float))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @cached_property
    def _chol(self):
        return cho_factor(np.array(self.stiffness))

    def solve_stiffness(self, xi):
        """Apply the inverse stiffness matrix to a dual vector."""
        return cho_solve(self._chol, np.asarray(xi, dtype=float))

    def _check_dim(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape != (self.n,):
            raise ValueError(f"expected vector of length {self.n}, got shape {z.shape}")
        return z

    # -- primal norms -------------------------------------------------------

    def norm_v(self, z):
        z = self._check_dim(z)
        return float(np.sqrt(z @ (self.mass * z)))

    def norm_z(self, z):
        z = self._check_dim(z)
        return float(np.sqrt(z @ (self.stiffness @ z)))

    def norm_x(self, z):
        z = self._check_dim(z)
        return float(self.diss_weights @ np.abs(z))

    def norm_lkappa(self, z):
        z = self._check_dim(z)
        k = self.kappa
        return float((self.quad_weights @ np.abs(z) ** k) ** (1.0 / k))

    def norm_eps_delta(self, z, eps, delta):
        """Norm of the tailored scalar product mixing pivot and energy pairings.

        ``sqrt(z' M z + (delta/eps) z' A z)``; only the ratio delta/eps enters.
        """
        if eps <= 0.0:
            raise ValueError("eps must be positive")
        if delta < 0.0:
            raise ValueError("delta must be nonnegative")
        z = self._check_dim(z)
        val = z @ (self.mass * z) + (delta / eps) * (z @ (self.stiffness @ z))
        return float(np.sqrt(val))

    # -- dual norms ---------------------------------------------------------

    def dual_norm_vstar(self, xi):
        xi = self._check_dim(xi)
        return float(np.sqrt(xi @ (xi / self.mass)))

    def dual_norm_zstar(self, xi):
        xi = self._check_dim(xi)
        return float(np.sqrt(xi @ self.solve_stiffness(xi)))

    # -- recorded constants -------------------------------------------------

    @cached_property
    def embedding_constant(self):
        """Smallest C with ||z||_V <= C ||z||_Z (also ||xi||_Z* <= C ||xi||_V*)."""
        from scipy.linalg import eigh

        mu = eigh(np.diag(self.mass), np.array(self.stiffness), eigvals_only=True)
        return float(np.sqrt(np.max(mu)))

    @cached_property
    def stiffness_norm(self):
        """Operator norm of the stiffness matrix in the V -> V* sense."""
        from scipy.linalg import eigh

        rt = 1.0 / np.sqrt(self.mass)
        b = rt[:, None] * self.stiffness * rt[None, :]
        return float(np.max(np.abs(eigh(b, eigvals_only=True))))


def build_spaces(n, length=1.0, kappa=2.0):
    """Assemble the 1-D FEM hierarchy with homogeneous Dirichlet conditions.

    Stiffness is ``(1/h) tridiag(-1, 2, -1)``, mass is lumped ``h I`` and the
    dissipation/quadrature weights are the nodal weights ``h``.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    if length <= 0.0:
        raise ValueError("domain length must be positive")
    if not (2.0 <= kappa < 6.0):
        raise ValueError("kappa must lie in [2, 6)")
    h = length / (n + 1)
    a = (np.diag(np.full(n, 2.0)) + np.diag(np.full(n - 1, -1.0), 1)
         + np.diag(np.full(n - 1, -1.0), -1)) / h
    w = np.full(n, h)
    return DiscreteSpaces(n=n, length=length, h=h, stiffness=a, mass=w.copy(),
                          diss_weights=w.copy(), quad_weights=w.copy(), kappa=kappa)


def unit_spaces(n, kappa=2.0):
    """Identity-weight hierarchy (M = A = I, unit dissipation weights).

    Convenient for scalar oracles where the play-operator solution is known
    in closed form.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    w = np.ones(n)
    return DiscreteSpaces(n=n, length=float(n), h=1.0, stiffness=np.eye(n),
                          mass=w.copy(), diss_weights=w.copy(), quad_weights=w.copy(),
                          kappa=kappa)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [0, T] into K steps."""

    final_time: float
    steps: int

    def __post_init__(self):
        if self.final_time <= 0.0:
            raise ValueError("final time must be positive")
        if self.steps < 1:
            raise ValueError("step count must be a positive integer")

    @property
    def tau(self):
        return self.final_time / self.steps

    @cached_property
    def nodes(self):
        t = np.linspace(0.0, self.final_time, self.steps + 1)
        t.setflags(write=False)
        return t
