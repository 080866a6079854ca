"""Joint posterior moments of the latent process and its first two derivatives.

Conditioning the derivative-augmented Gaussian process on the observed score
differences gives, on an evaluation grid ``t*`` of p points, a 3p-dimensional
normal with mean blocks (mu_d, mu_d1, mu_d2) and six distinct covariance
blocks.  Writing K = C(t_m, t_m) + sigma^2 I and B_a for the p x J matrix of
order-a kernel derivatives between the grid and the event times, every block
has the shape

    mu_a  = mean_a(t*) + B_a K^{-1} (D - beta 1)
    S_ab  = d1^a d2^b C(t*, t*) - B_a K^{-1} B_b^T,

so a single factorization of K serves all nine expressions.  The solve is
done through the shared jittered Cholesky; the explicit inverse is never
formed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import ScoreSeries
from .kernel import Hyperparams, gram, mean_fn
from .linalg import chol_solve, jittered_cholesky, solve_lower


@dataclass(frozen=True)
class PosteriorMoments:
    """Posterior means and covariance blocks of (d, d', d'') on a grid.

    Diagonal entries of S_dd, S_d1d1 and S_d2d2 that came out slightly
    negative from roundoff have been clipped to zero; ``clipped_points``
    counts how many.
    """

    grid: np.ndarray
    mu_d: np.ndarray
    mu_d1: np.ndarray
    mu_d2: np.ndarray
    S_dd: np.ndarray
    S_d1d1: np.ndarray
    S_d2d2: np.ndarray
    S_dd1: np.ndarray
    S_dd2: np.ndarray
    S_d1d2: np.ndarray
    clipped_points: int = 0

    @property
    def n_points(self) -> int:
        return int(self.grid.size)

    def var_d(self) -> np.ndarray:
        return np.diag(self.S_dd).copy()

    def var_d1(self) -> np.ndarray:
        return np.diag(self.S_d1d1).copy()

    def var_d2(self) -> np.ndarray:
        return np.diag(self.S_d2d2).copy()

    def cov_d1d2(self) -> np.ndarray:
        return np.diag(self.S_d1d2).copy()

    def joint_mean(self) -> np.ndarray:
        """Stacked 3p mean vector (d block, then d', then d'')."""
        return np.concatenate([self.mu_d, self.mu_d1, self.mu_d2])

    def joint_cov(self) -> np.ndarray:
        """Assembled 3p x 3p covariance; built on demand, only sampling needs it."""
        return np.block(
            [
                [self.S_dd, self.S_dd1, self.S_dd2],
                [self.S_dd1.T, self.S_d1d1, self.S_d1d2],
                [self.S_dd2.T, self.S_d1d2.T, self.S_d2d2],
            ]
        )


def posterior_moments(
    series: ScoreSeries, theta: Hyperparams, grid
) -> PosteriorMoments:
    """Posterior moments of (d, d', d'') at the grid points, given one match.

    Uses one jittered Cholesky factorization of C(t_m, t_m) + sigma^2 I for
    all nine mean/covariance expressions.  Raises FactorizationFailure for
    pathological hyperparameters.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("evaluation grid must be non-empty")
    t, D = series.times, series.diffs

    K = gram(0, 0, t, t, theta)
    K[np.diag_indices_from(K)] += theta.sigma2
    L, _ = jittered_cholesky(K, scale=theta.alpha**2)
    w = chol_solve(L, D - theta.beta)

    B = [gram(a, 0, grid, t, theta) for a in range(3)]
    # V[a] = L^{-1} B_a^T, so that B_a K^{-1} B_b^T = V[a]^T V[b]
    V = [solve_lower(L, Ba.T) for Ba in B]

    mu = [mean_fn(a, grid, theta) + B[a] @ w for a in range(3)]

    def block(a: int, b: int) -> np.ndarray:
        S = gram(a, b, grid, grid, theta) - V[a].T @ V[b]
        if a == b:
            S = 0.5 * (S + S.T)
        return S

    S_dd, S_d1d1, S_d2d2 = block(0, 0), block(1, 1), block(2, 2)
    S_dd1, S_dd2, S_d1d2 = block(0, 1), block(0, 2), block(1, 2)

    clipped = 0
    for S in (S_dd, S_d1d1, S_d2d2):
        d = np.diag(S)
        neg = d < 0
        if np.any(neg):
            clipped += int(neg.sum())
            S[np.diag_indices_from(S)] = np.where(neg, 0.0, d)

    return PosteriorMoments(
        grid=grid,
        mu_d=mu[0],
        mu_d1=mu[1],
        mu_d2=mu[2],
        S_dd=S_dd,
        S_d1d1=S_d1d1,
        S_d2d2=S_d2d2,
        S_dd1=S_dd1,
        S_dd2=S_dd2,
        S_d1d2=S_d1d2,
        clipped_points=clipped,
    )


_SAMPLE_CHUNK = 2000


def sample_joint_paths(
    moments: PosteriorMoments, n: int, seed: int
) -> np.ndarray:
    """Draw ``n`` joint samples of (d, d', d'') on the grid, as an n x 3p array.

    Deterministic given ``seed``.  The covariance factorization reuses the
    escalating-jitter policy; FactorizationFailure propagates when even the
    largest jitter fails.
    """
    if n < 1:
        raise ValueError(f"need n >= 1 draws, got {n}")
    mu = moments.joint_mean()
    cov = moments.joint_cov()
    scale = max(float(np.max(np.diag(cov))), np.finfo(float).tiny)
    L, _ = jittered_cholesky(cov, scale=scale)

    rng = np.random.default_rng(seed)
    out = np.empty((n, mu.size))
    for start in range(0, n, _SAMPLE_CHUNK):
        stop = min(start + _SAMPLE_CHUNK, n)
        Z = rng.standard_normal((stop - start, mu.size))
        out[start:stop] = mu + Z @ L.T
    return out


def moments_to_dict(moments: PosteriorMoments) -> dict:
    """Plot-ready summary: grid, mean vectors, block diagonals."""
    return {
        "grid": moments.grid.tolist(),
        "mu_d": moments.mu_d.tolist(),
        "mu_d1": moments.mu_d1.tolist(),
        "mu_d2": moments.mu_d2.tolist(),
        "var_d": moments.var_d().tolist(),
        "var_d1": moments.var_d1().tolist(),
        "var_d2": moments.var_d2().tolist(),
        "cov_d1d2": moments.cov_d1d2().tolist(),
        "clipped_points": moments.clipped_points,
    }
