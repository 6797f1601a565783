"""Stored energy of the evolution: quadratic part, nonlinearity catalogue,
penalized variants and the coercivity constants used in a priori bounds.

The full energy is

    I(l, z) = 1/2 <A z, z> + F(z) - <l, z>,

with F the nodal quadrature of a scalar potential f.  The reduced energy
E(z) = I(0, z) drops the load.  All gradients are returned as
linear-functional coefficients (pairing = plain dot product).
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .spaces import DiscreteSpaces

_DOUBLEWELL_A_RANGE = (2.0, 2.5)


@dataclass(frozen=True)
class Nonlinearity:
    """Scalar potential f and its first two derivatives.

    Kinds
    -----
    ``doublewell``
        r^4 - r^2 + 1 on [-1, 1], matched C^2 to a power-a growth branch
        outside; requires ``a`` in (2, 2.5).  Growth exponent q = a - 2,
        Hoelder exponent s = 2.
    ``sine``
        sin(r) + 1; q = 0, s = 1.
    ``none``
        f = 0 (purely quadratic, convex energy).
    """

    kind: str
    a: float | None = None

    def __post_init__(self):
        if self.kind not in ("doublewell", "sine", "none"):
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "doublewell":
            lo, hi = _DOUBLEWELL_A_RANGE
            if self.a is None or not (lo < self.a < hi):
                raise ValueError(f"doublewell exponent a must lie in ({lo}, {hi})")

    # Coefficients of the outer branch c1|r|^a + c2 r^2 + c3, chosen so that
    # value, slope and curvature match the quartic at |r| = 1.
    @cached_property
    def _outer(self):
        a = self.a
        return 8.0 / (a * (a - 2.0)), (a - 6.0) / (a - 2.0), (4.0 * a - 8.0) / (a * (a - 2.0))

    @property
    def q(self):
        """Growth exponent of f'' (|f''(r)| <= gamma (1 + |r|^q))."""
        if self.kind == "doublewell":
            return self.a - 2.0
        return 0.0

    @property
    def s(self):
        """Hoelder exponent of f''."""
        return {"doublewell": 2.0, "sine": 1.0, "none": 1.0}[self.kind]

    @cached_property
    def gamma(self):
        """Growth constant: max of |f''(r)| / (1 + |r|^q) over a wide grid."""
        if self.kind == "none":
            return 0.0
        if self.kind == "sine":
            return 1.0
        r = np.linspace(-50.0, 50.0, 200001)
        return float(np.max(np.abs(self.f_second(r)) / (1.0 + np.abs(r) ** self.q)))

    def f(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "none":
            return np.zeros_like(r)
        if self.kind == "sine":
            return np.sin(r) + 1.0
        c1, c2, c3 = self._outer
        # both branches are evaluated; overflow in the discarded one is benign
        with np.errstate(invalid="ignore", over="ignore"):
            inner = r ** 4 - r ** 2 + 1.0
            outer = c1 * np.abs(r) ** self.a + c2 * r ** 2 + c3
        return np.where(np.abs(r) <= 1.0, inner, outer)

    def f_prime(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "none":
            return np.zeros_like(r)
        if self.kind == "sine":
            return np.cos(r)
        c1, c2, _ = self._outer
        with np.errstate(invalid="ignore", over="ignore"):
            inner = 4.0 * r ** 3 - 2.0 * r
            outer = (c1 * self.a * np.abs(r) ** (self.a - 1.0) * np.sign(r)
                     + 2.0 * c2 * r)
        return np.where(np.abs(r) <= 1.0, inner, outer)

    def f_second(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "none":
            return np.zeros_like(r)
        if self.kind == "sine":
            return -np.sin(r)
        c1, c2, _ = self._outer
        with np.errstate(invalid="ignore", over="ignore"):
            inner = 12.0 * r ** 2 - 2.0
            outer = (c1 * self.a * (self.a - 1.0) * np.abs(r) ** (self.a - 2.0)
                     + 2.0 * c2)
        return np.where(np.abs(r) <= 1.0, inner, outer)


@dataclass(frozen=True)
class EnergyModel:
    spaces: DiscreteSpaces
    nonlinearity: Nonlinearity


def f_eval(model_or_nl, r):
    nl = model_or_nl.nonlinearity if isinstance(model_or_nl, EnergyModel) else model_or_nl
    return nl.f(r)


def F_eval(model, z):
    """Quadrature of the potential: sum_i w_i f(z_i)."""
    z = model.spaces._check_dim(z)
    return float(model.spaces.quad_weights @ model.nonlinearity.f(z))


def DF(model, z):
    """Gradient of F_eval (functional coefficients): w_i f'(z_i)."""
    z = model.spaces._check_dim(z)
    return model.spaces.quad_weights * model.nonlinearity.f_prime(z)


def D2F_diag(model, z):
    """Diagonal of the second derivative of F_eval: w_i f''(z_i)."""
    z = model.spaces._check_dim(z)
    return model.spaces.quad_weights * model.nonlinearity.f_second(z)


def D2F_apply(model, z, v):
    return D2F_diag(model, z) * np.asarray(v, dtype=float)


def reduced_E(model, z):
    sp = model.spaces
    z = sp._check_dim(z)
    return float(0.5 * z @ (sp.stiffness @ z)) + F_eval(model, z)


def energy_I(model, ell, z):
    ell = model.spaces._check_dim(ell)
    z = model.spaces._check_dim(z)
    return reduced_E(model, z) - float(ell @ z)


def grad_I(model, ell, z):
    """D_z I(l, z) = A z + DF(z) - l, as functional coefficients."""
    sp = model.spaces
    ell = sp._check_dim(ell)
    z = sp._check_dim(z)
    return sp.stiffness @ z + DF(model, z) - ell


def hessian_E(model, z):
    """Second derivative of the reduced energy: A + diag(w f''(z))."""
    return model.spaces.stiffness + np.diag(D2F_diag(model, z))


def energy_penalized(model, eta, t_index, ztilde_path, ell, z):
    """Energy with quadratic tracking penalty (eta/2) ||z - ztilde(t)||_V^2.

    ``ztilde_path`` is indexed by time node; passing an (K+1, n) array or a
    StatePath-like object with ``.values`` both work.
    """
    if eta < 0.0:
        raise ValueError("penalty weight eta must be nonnegative")
    zt = _ztilde_at(model, ztilde_path, t_index)
    d = np.asarray(z, dtype=float) - zt
    return energy_I(model, ell, z) + 0.5 * eta * (d @ (model.spaces.mass * d))


def grad_penalized(model, eta, t_index, ztilde_path, ell, z):
    if eta < 0.0:
        raise ValueError("penalty weight eta must be nonnegative")
    zt = _ztilde_at(model, ztilde_path, t_index)
    d = np.asarray(z, dtype=float) - zt
    return grad_I(model, ell, z) + eta * model.spaces.mass * d


def _ztilde_at(model, ztilde_path, t_index):
    values = getattr(ztilde_path, "values", ztilde_path)
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[1] != model.spaces.n:
        raise ValueError("ztilde path has wrong shape")
    if not (0 <= t_index < values.shape[0]):
        raise ValueError("time index outside the sampled path")
    return values[t_index]


def coercivity_constants(model, horizon=1.0):
    """Constants (lambda, mu, nu) of the quadratic-growth lower bounds.

    lambda = 4/alpha and mu = 4 C^2/alpha^2 with C the measured embedding
    constant give ||z||_Z^2 <= lambda I(l, z) + mu ||l||_{V*}^2 whenever
    F >= 0.  nu is the recorded constant of the load-continuity bound; it
    involves the constant of the H^1(0,T) -> C([0,T]) embedding and hence a
    time horizon (default 1).
    """
    alpha = model.spaces.alpha
    c = model.spaces.embedding_constant
    lam = 4.0 / alpha
    mu = 4.0 * c ** 2 / alpha ** 2
    nu = (1.0 + c ** 2 * (1.0 + 1.0 / horizon)) / alpha
    return lam, mu, nu


def convexity_threshold(model, r):
    """Smallest penalty weight making the reduced energy uniformly convex.

    For states with ||z||_Z <= r the curvature of F is bounded below by
    -gamma (1 + r^q)^2-type terms; eta_bar = gamma^2/(2 alpha) (1 + r^q)^2
    guarantees D^2 E_eta >= (alpha/2) ||.||_Z^2 on that ball.
    """
    if r <= 0.0:
        raise ValueError("radius bound r must be positive")
    nl = model.nonlinearity
    alpha = model.spaces.alpha
    return nl.gamma ** 2 / (2.0 * alpha) * (1.0 + r ** nl.q) ** 2


def complete_continuity_bound(model, r):
    """Lipschitz constant K(r) of F w.r.t. the V-norm on ||z||_Z <= r.

    Uses the discrete sup bound ||z||_inf <= (sqrt(L)/2) ||z||_Z and the
    growth of f' to bound |F(z1) - F(z2)| <= K(r) ||z1 - z2||_V.
    """
    nl = model.nonlinearity
    sp = model.spaces
    big_r = 0.5 * np.sqrt(sp.length) * r
    fp0 = float(np.abs(nl.f_prime(0.0)))
    q = nl.q
    slope = fp0 + nl.gamma * (big_r + big_r ** (1.0 + q) / (1.0 + q))
    return slope * np.sqrt(float(np.sum(sp.quad_weights ** 2 / sp.mass)))
