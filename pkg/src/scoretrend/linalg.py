"""Positive-definite factorization with escalating diagonal jitter.

Every solve against ``C(t_m, t_m) + sigma^2 I`` in the package goes through
`jittered_cholesky` so that duplicate timestamps or a tiny noise SD degrade
gracefully: the diagonal is bumped by ``eps * scale`` with eps escalating
tenfold from 1e-10 to 1e-6 before giving up.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import FactorizationFailure

JITTER_LADDER = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


def jittered_cholesky(mat: np.ndarray, scale: float) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``mat``, jittering the diagonal if necessary.

    Returns ``(L, eps)`` where ``L`` is lower triangular with
    ``L @ L.T == mat + eps * scale * I`` and ``eps`` is the jitter level that
    succeeded (0.0 when none was needed).  Raises FactorizationFailure when
    the matrix stays non positive definite at the largest jitter, or when it
    contains non-finite entries.
    """
    mat = np.asarray(mat, dtype=float)
    if not np.all(np.isfinite(mat)):
        raise FactorizationFailure("matrix contains non-finite entries")
    n = mat.shape[0]
    bump = scale * np.eye(n)
    for eps in JITTER_LADDER:
        try:
            target = mat if eps == 0.0 else mat + eps * bump
            L = scipy.linalg.cholesky(target, lower=True, check_finite=False)
            return L, eps
        except np.linalg.LinAlgError:
            continue
    raise FactorizationFailure(
        f"{n}x{n} matrix not positive definite even with jitter "
        f"{JITTER_LADDER[-1]:g} * scale (scale={scale:g})"
    )


def chol_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve (L L^T) x = b given the lower factor L."""
    return scipy.linalg.cho_solve((L, True), b, check_finite=False)


def solve_lower(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve L x = B for lower-triangular L."""
    return scipy.linalg.solve_triangular(L, B, lower=True, check_finite=False)


def logdet_from_chol(L: np.ndarray) -> float:
    """log det(L L^T) from the lower factor."""
    return 2.0 * float(np.sum(np.log(np.diag(L))))
