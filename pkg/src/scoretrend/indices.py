"""Trend Direction Index and Excitement Trend Index from posterior moments.

At a time point t, given the posterior moments of (d', d''):

  TDI(t)  = P(d'(t) > 0) = 1/2 + 1/2 Erf(mu1 / sqrt(2 var1)),

the probability that the reference team is currently improving its lead, and

  dETI(t) = lam * phi(mu1 / sqrt(var1)) * (2 phi(zeta) + zeta Erf(zeta / sqrt 2)),

the instantaneous intensity of a zero-crossing of d' (a monotonicity change
of the latent score difference), with

  lam  = sqrt(var2 / var1) * sqrt(1 - omega^2),
  omega = cov12 / sqrt(var1 var2),
  zeta = (mu1 sqrt(var2) omega / sqrt(var1) - mu2) / (sqrt(var2) sqrt(1 - omega^2)).

dETI is the conditional-expectation form of the zero-crossing rate of a
differentiable Gaussian process: in the zero-mean uncorrelated case it
collapses to the stationary rate (1/pi) sqrt(var2 / var1).  Integrating dETI
over the match (trapezoidal rule on the evaluation grid) gives the ETI, the
expected number of monotonicity changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import DegenerateCorrelation, FactorizationFailure
from .ingest import ScoreSeries
from .inference import HyperChain
from .kernel import Hyperparams
from .posterior import PosteriorMoments, posterior_moments

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# treat 1 - omega^2 at or below this as a degenerate d'-d'' correlation
DEGENERATE_TOL = 1e-12


def default_grid(domain_end: float = 48.0, n_points: int = 241) -> np.ndarray:
    """Equidistant evaluation grid on [0, domain_end] including both endpoints."""
    if n_points < 2:
        raise ValueError("need at least 2 grid points")
    return np.linspace(0.0, float(domain_end), n_points)


def _phi(x):
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def tdi_at(mu1, var1):
    """P(d' > 0) for a normal with mean ``mu1`` and variance ``var1``.

    Vectorized; ``var1`` may be 0, in which case the sign limit applies
    (1 for mu1 > 0, 0.5 at 0, 0 for mu1 < 0).
    """
    mu1 = np.asarray(mu1, dtype=float)
    var1 = np.asarray(var1, dtype=float)
    if np.any(var1 < 0):
        raise ValueError("var1 must be >= 0")
    pos = var1 > 0
    sd = np.sqrt(np.where(pos, var1, 1.0))
    smooth = 0.5 + 0.5 * erf(mu1 / (_SQRT2 * sd))
    limit = np.where(mu1 > 0, 1.0, np.where(mu1 < 0, 0.0, 0.5))
    out = np.where(pos, smooth, limit)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CrossingIntensityTerms:
    """The (lam, omega, zeta) ingredients of the zero-crossing intensity."""

    lam: float
    omega: float
    zeta: float


def crossing_terms(
    var1: float, var2: float, cov12: float, mu1: float, mu2: float
) -> CrossingIntensityTerms:
    """Compute lam, omega and zeta from pointwise d'/d'' posterior moments.

    Requires var1, var2 > 0 and cov12^2 <= var1 * var2.  Raises
    DegenerateCorrelation when |omega| = 1 within tolerance; callers
    substitute dETI = 0 there.
    """
    if var1 <= 0 or var2 <= 0:
        raise ValueError(f"variances must be > 0, got ({var1}, {var2})")
    omega = cov12 / math.sqrt(var1 * var2)
    if abs(omega) > 1 + 1e-9:
        raise ValueError(f"cov12^2 exceeds var1*var2 (omega = {omega})")
    omega = min(max(omega, -1.0), 1.0)
    one_minus_w2 = 1.0 - omega * omega
    if one_minus_w2 <= DEGENERATE_TOL:
        raise DegenerateCorrelation(f"|omega| = {abs(omega)} within tolerance of 1")
    root = math.sqrt(one_minus_w2)
    lam = math.sqrt(var2 / var1) * root
    zeta = (mu1 * math.sqrt(var2) * omega / math.sqrt(var1) - mu2) / (
        math.sqrt(var2) * root
    )
    return CrossingIntensityTerms(lam=lam, omega=omega, zeta=zeta)


def _crossing_factor(zeta):
    """2 phi(zeta) + zeta Erf(zeta / sqrt 2); the scaled E|N(zeta, 1)|, always >= 0."""
    value = 2.0 * _phi(zeta) + zeta * erf(zeta / _SQRT2)
    assert np.all(value >= 0), "crossing factor must be non-negative"
    return value


def deti_at(mu1: float, mu2: float, var1: float, var2: float, cov12: float) -> float:
    """Instantaneous zero-crossing intensity of d' (per minute) at one time point."""
    terms = crossing_terms(var1, var2, cov12, mu1, mu2)
    return float(
        terms.lam * _phi(mu1 / math.sqrt(var1)) * _crossing_factor(terms.zeta)
    )


@dataclass(frozen=True)
class TrendIndices:
    """TDI and dETI curves plus the integrated ETI for one hyperparameter value.

    ``flagged`` marks grid points where clipped-to-zero variances or a
    degenerate d'-d'' correlation forced the limit values (dETI 0, TDI the
    sign limit).
    """

    grid: np.ndarray
    tdi: np.ndarray
    deti: np.ndarray
    eti: float
    flagged: np.ndarray

    def __post_init__(self):
        if np.any(self.tdi < 0) or np.any(self.tdi > 1):
            raise ValueError("tdi values must lie in [0, 1]")
        if np.any(self.deti < 0):
            raise ValueError("deti values must be >= 0")


def trend_indices(moments: PosteriorMoments) -> TrendIndices:
    """TDI/dETI curves and the trapezoid ETI from posterior moments on a grid."""
    grid = moments.grid
    mu1, mu2 = moments.mu_d1, moments.mu_d2
    var1, var2 = moments.var_d1(), moments.var_d2()
    cov12 = moments.cov_d1d2()

    tdi = tdi_at(mu1, var1)

    ok = (var1 > 0) & (var2 > 0)
    safe1 = np.where(ok, var1, 1.0)
    safe2 = np.where(ok, var2, 1.0)
    omega = np.clip(cov12 / np.sqrt(safe1 * safe2), -1.0, 1.0)
    one_minus_w2 = 1.0 - omega * omega
    ok &= one_minus_w2 > DEGENERATE_TOL

    root = np.sqrt(np.where(ok, one_minus_w2, 1.0))
    lam = np.sqrt(safe2 / safe1) * root
    zeta = (mu1 * omega * np.sqrt(safe2) / np.sqrt(safe1) - mu2) / (
        np.sqrt(safe2) * root
    )
    deti = np.where(
        ok, lam * _phi(mu1 / np.sqrt(safe1)) * _crossing_factor(zeta), 0.0
    )

    return TrendIndices(
        grid=grid,
        tdi=np.asarray(tdi, dtype=float),
        deti=deti,
        eti=float(np.trapezoid(deti, grid)),
        flagged=~ok,
    )


@dataclass(frozen=True)
class IndexPosteriorSummary:
    """Index curves and ETI summarized over the hyperparameter posterior."""

    grid: np.ndarray
    tdi_mean: np.ndarray
    tdi_q05: np.ndarray
    tdi_q50: np.ndarray
    tdi_q95: np.ndarray
    deti_q50: np.ndarray
    eti_median: float
    eti_mean: float
    eti_q025: float
    eti_q975: float
    n_draws_used: int
    n_draws_failed: int


def summarize_over_chain(
    series: ScoreSeries,
    chain: HyperChain,
    grid,
    thin_to: int = 500,
) -> IndexPosteriorSummary:
    """Posterior summaries of TDI and ETI over (thinned) hyperparameter draws.

    Each retained draw runs posterior_moments -> trend_indices; curves are
    summarized pointwise by empirical mean and quantiles.  Draws that fail
    factorization are skipped and counted; more than 1% skipped is an error.
    """
    if len(chain) == 0:
        raise ValueError("empty hyperparameter chain")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    draws = chain.draws
    if thin_to and draws.shape[0] > thin_to:
        stride = math.ceil(draws.shape[0] / thin_to)
        draws = draws[::stride]

    tdi_curves, deti_curves, etis = [], [], []
    failed = 0
    for row in draws:
        theta = Hyperparams.from_array(row)
        try:
            idx = trend_indices(posterior_moments(series, theta, grid))
        except FactorizationFailure:
            failed += 1
            continue
        tdi_curves.append(idx.tdi)
        deti_curves.append(idx.deti)
        etis.append(idx.eti)

    used = len(etis)
    if used == 0 or failed > 0.01 * (used + failed):
        raise FactorizationFailure(
            f"{failed} of {used + failed} hyperparameter draws failed factorization"
        )

    tdi = np.array(tdi_curves)
    deti = np.array(deti_curves)
    etis = np.array(etis)
    return IndexPosteriorSummary(
        grid=grid,
        tdi_mean=tdi.mean(axis=0),
        tdi_q05=np.quantile(tdi, 0.05, axis=0),
        tdi_q50=np.quantile(tdi, 0.50, axis=0),
        tdi_q95=np.quantile(tdi, 0.95, axis=0),
        deti_q50=np.quantile(deti, 0.50, axis=0),
        eti_median=float(np.median(etis)),
        eti_mean=float(np.mean(etis)),
        eti_q025=float(np.quantile(etis, 0.025)),
        eti_q975=float(np.quantile(etis, 0.975)),
        n_draws_used=used,
        n_draws_failed=failed,
    )


def summary_to_dict(summary: IndexPosteriorSummary) -> dict:
    """JSON-ready per-match index summary (the data behind the index plots)."""
    return {
        "grid": summary.grid.tolist(),
        "tdi_mean": summary.tdi_mean.tolist(),
        "tdi_q05": summary.tdi_q05.tolist(),
        "tdi_q50": summary.tdi_q50.tolist(),
        "tdi_q95": summary.tdi_q95.tolist(),
        "deti_q50": summary.deti_q50.tolist(),
        "eti_median": summary.eti_median,
        "eti_mean": summary.eti_mean,
        "eti_q025": summary.eti_q025,
        "eti_q975": summary.eti_q975,
        "n_draws_used": summary.n_draws_used,
        "n_draws_failed": summary.n_draws_failed,
    }
