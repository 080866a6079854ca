"""Squared-exponential kernel, its partial derivatives, and the constant prior mean.

The latent score-difference process has a constant prior mean ``beta`` and the
stationary covariance

    C(s, t) = alpha^2 * exp(-(s - t)^2 / (2 rho^2)).

Joint inference for the process and its first two time derivatives requires
the partial derivatives ``d^a/ds^a d^b/dt^b C(s, t)`` for a, b in {0, 1, 2}.
For a stationary kernel these reduce to ordinary derivatives of the profile
``k(r) = alpha^2 exp(-r^2 / (2 rho^2))`` at ``r = s - t``, which have the
closed Hermite form

    k^(n)(r) = (-1)^n rho^(-n) He_n(r / rho) k(r),

with ``He_n`` the probabilists' Hermite polynomials, so that

    d^a/ds^a d^b/dt^b C(s, t) = (-1)^a rho^(-(a+b)) He_{a+b}((s-t)/rho) k(s-t).

All functions are pure, stateless, and broadcast over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedOrder

MAX_ORDER = 2


@dataclass(frozen=True)
class Hyperparams:
    """Hyperparameters (beta, alpha, rho, sigma) of the latent-process model.

    beta
        Prior mean level of the score difference, in score units.
    alpha
        Kernel amplitude SD, in score units.
    rho
        Kernel length-scale, in minutes.
    sigma
        Observation noise SD, in score units.

    alpha, rho and sigma must be strictly positive and finite.
    """

    beta: float
    alpha: float
    rho: float
    sigma: float

    def __post_init__(self):
        vals = (self.beta, self.alpha, self.rho, self.sigma)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"hyperparameters must be finite, got {vals}")
        if min(self.alpha, self.rho, self.sigma) <= 0:
            raise ValueError(
                "alpha, rho and sigma must be > 0, got "
                f"({self.alpha}, {self.rho}, {self.sigma})"
            )

    @property
    def sigma2(self) -> float:
        """Observation noise variance."""
        return self.sigma * self.sigma

    def as_array(self) -> np.ndarray:
        return np.array([self.beta, self.alpha, self.rho, self.sigma], dtype=float)

    @classmethod
    def from_array(cls, x) -> "Hyperparams":
        return cls(float(x[0]), float(x[1]), float(x[2]), float(x[3]))


def _hermite_e(n: int, u):
    """Probabilists' Hermite polynomial He_n(u) for n in 0..4."""
    if n == 0:
        return np.ones_like(u)
    if n == 1:
        return u
    u2 = u * u
    if n == 2:
        return u2 - 1.0
    if n == 3:
        return u * (u2 - 3.0)
    return u2 * (u2 - 6.0) + 3.0


def se_cov(s, t, theta: Hyperparams):
    """Squared-exponential covariance ``alpha^2 exp(-(s-t)^2 / (2 rho^2))``.

    Symmetric in (s, t); broadcasts over array arguments.
    """
    u = (np.asarray(s, dtype=float) - np.asarray(t, dtype=float)) / theta.rho
    return theta.alpha**2 * np.exp(-0.5 * u * u)


def se_cov_partial(a: int, b: int, s, t, theta: Hyperparams):
    """Partial derivative of order ``a`` in ``s`` and ``b`` in ``t`` of `se_cov`.

    Orders are restricted to {0, 1, 2} in each argument; raises
    UnsupportedOrder otherwise.  Broadcasts over array arguments.
    """
    if a not in (0, 1, 2) or b not in (0, 1, 2):
        raise UnsupportedOrder(
            f"derivative orders must lie in {{0..{MAX_ORDER}}}, got ({a}, {b})"
        )
    u = (np.asarray(s, dtype=float) - np.asarray(t, dtype=float)) / theta.rho
    n = a + b
    value = _hermite_e(n, u) * np.exp(-0.5 * u * u)
    value = value * (theta.alpha**2 / theta.rho**n)
    return -value if a % 2 else value


def mean_fn(order: int, t, theta: Hyperparams):
    """Constant prior mean and its time derivatives: beta at order 0, else 0."""
    if order < 0:
        raise UnsupportedOrder(f"derivative order must be >= 0, got {order}")
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    if order == 0:
        out = out + theta.beta
    return out


def gram(a: int, b: int, grid1, grid2, theta: Hyperparams) -> np.ndarray:
    """Cross-covariance matrix with entry (i, j) = se_cov_partial(a, b, grid1[i], grid2[j]).

    grid1 and grid2 must be non-empty 1-D arrays of time points.
    """
    g1 = np.atleast_1d(np.asarray(grid1, dtype=float))
    g2 = np.atleast_1d(np.asarray(grid2, dtype=float))
    if g1.size == 0 or g2.size == 0:
        raise ValueError("grids must be non-empty")
    return se_cov_partial(a, b, g1[:, None], g2[None, :], theta)
