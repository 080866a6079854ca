"""Hyperparameter inference: marginal likelihood, MLE, priors, and MCMC.

The marginal likelihood of one match integrates the latent process out,
leaving a Gaussian in the observed differences with covariance
C(t_m, t_m) + sigma^2 I.  Its maximizer anchors independent heavy-tailed
location-scale T priors (df 4, scale 5 by default; amplitude, length-scale
and noise truncated to the positive half-line with renormalization).  The
hyperparameter posterior is sampled with an adaptive random-walk Metropolis
kernel on (beta, log alpha, log rho, log sigma); the log-Jacobian of the log
transform is included so draws mapped back to the constrained space target
the prior/posterior exactly.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.optimize
import scipy.stats
from scipy.special import gammaln

from .errors import ChainDiverged, OptimizerDiverged
from .ingest import ScoreSeries
from .kernel import Hyperparams, gram
from .linalg import chol_solve, jittered_cholesky, logdet_from_chol

PARAM_NAMES = ("beta", "alpha", "rho", "sigma")


# ---------------------------------------------------------------------------
# marginal likelihood
# ---------------------------------------------------------------------------

def marginal_loglik(theta: Hyperparams, series: ScoreSeries) -> float:
    """Marginal log-likelihood of the observed diffs (additive constant dropped).

    Equals -1/2 log|C + sigma^2 I| - 1/2 (D - beta 1)^T (C + sigma^2 I)^{-1}
    (D - beta 1); shares the jittered factorization policy with the posterior
    module.
    """
    K = gram(0, 0, series.times, series.times, theta)
    K[np.diag_indices_from(K)] += theta.sigma2
    L, _ = jittered_cholesky(K, scale=theta.alpha**2)
    r = series.diffs - theta.beta
    return -0.5 * logdet_from_chol(L) - 0.5 * float(r @ chol_solve(L, r))


def _unconstrain(theta: Hyperparams) -> np.ndarray:
    return np.array(
        [theta.beta, math.log(theta.alpha), math.log(theta.rho), math.log(theta.sigma)]
    )


def _constrain(x) -> Hyperparams:
    return Hyperparams(
        beta=float(x[0]),
        alpha=float(np.exp(x[1])),
        rho=float(np.exp(x[2])),
        sigma=float(np.exp(x[3])),
    )


def _make_loglik(series: ScoreSeries):
    """Closure computing the marginal log-likelihood on unconstrained x.

    Pre-computes the squared-lag matrix once; returns -inf for numerically
    hopeless hyperparameters instead of raising.
    """
    t, D = series.times, series.diffs
    Q = (t[:, None] - t[None, :]) ** 2
    n = t.size
    eye = np.eye(n)

    def loglik(x: np.ndarray) -> float:
        beta, la, lr, ls = x
        if not np.all(np.isfinite(x)) or max(abs(la), abs(lr), abs(ls)) > 50:
            return -np.inf
        alpha2 = math.exp(2 * la)
        rho2 = math.exp(2 * lr)
        sigma2 = math.exp(2 * ls)
        K = alpha2 * np.exp(-0.5 * Q / rho2) + sigma2 * eye
        try:
            L = np.linalg.cholesky(K)
        except np.linalg.LinAlgError:
            return -np.inf
        r = D - beta
        z = np.linalg.solve(L, r)  # hot path: avoid scipy wrapper overhead
        return -float(np.sum(np.log(np.diag(L)))) - 0.5 * float(z @ z)

    return loglik


def _nll_and_grad(x, t, D, Q, eye):
    """Negative marginal log-likelihood and gradient in (beta, log alpha, log rho, log sigma)."""
    beta, la, lr, ls = x
    bad = np.inf, np.zeros(4)
    if not np.all(np.isfinite(x)) or max(abs(la), abs(lr), abs(ls)) > 50:
        return bad
    alpha2 = math.exp(2 * la)
    rho2 = math.exp(2 * lr)
    sigma2 = math.exp(2 * ls)
    R = np.exp(-0.5 * Q / rho2)
    K = alpha2 * R + sigma2 * eye
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        return bad
    r = D - beta
    w = chol_solve(L, r)
    ll = -float(np.sum(np.log(np.diag(L)))) - 0.5 * float(r @ w)
    Kinv = chol_solve(L, eye)
    G = np.outer(w, w) - Kinv
    g_beta = float(np.sum(w))
    g_la = float(alpha2 * np.sum(G * R))                # d/d log alpha: dK = 2 alpha^2 R
    g_lr = 0.5 * float(alpha2 / rho2 * np.sum(G * R * Q))
    g_ls = float(sigma2 * np.trace(G))
    return -ll, -np.array([g_beta, g_la, g_lr, g_ls])


@dataclass(frozen=True)
class MleSettings:
    """Multi-start optimizer settings for the marginal MLE."""

    n_starts: int = 8
    maxiter: int = 300


def _mle_starts(series: ScoreSeries, n_starts: int, rng: np.random.Generator):
    """Moment-based initializers plus jittered copies (length-scale is multimodal)."""
    D, t = series.diffs, series.times
    sd = float(np.std(D, ddof=1)) if D.size > 1 else 1.0
    sd = max(sd, 1e-2)
    span = float(t[-1] - t[0])
    span = span if span > 0 else float(series.domain_end)
    beta0 = float(np.mean(D))
    base = [
        np.array([beta0, math.log(sd), math.log(r0), math.log(s0)])
        for r0 in (span / 10.0, span / 4.0)
        for s0 in (1.0, max(sd / 4.0, 1e-2))
    ]
    starts = list(base)
    while len(starts) < n_starts:
        proto = base[len(starts) % len(base)]
        jitter = rng.normal(scale=0.4, size=4)
        starts.append(proto + jitter)
    return starts[:n_starts]


def fit_mle(
    series: ScoreSeries, opts: MleSettings | None = None, seed: int = 0
) -> Hyperparams:
    """Marginal maximum-likelihood hyperparameters via multi-start L-BFGS.

    Optimization runs over (beta, log alpha, log rho, log sigma) so
    positivity is structural.  Raises OptimizerDiverged when no start yields
    a finite objective.
    """
    opts = opts or MleSettings()
    t, D = series.times, series.diffs
    Q = (t[:, None] - t[None, :]) ** 2
    eye = np.eye(t.size)
    rng = np.random.default_rng(seed)

    best_x, best_val = None, np.inf
    for x0 in _mle_starts(series, opts.n_starts, rng):
        res = scipy.optimize.minimize(
            _nll_and_grad,
            x0,
            args=(t, D, Q, eye),
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": opts.maxiter},
        )
        if np.isfinite(res.fun) and res.fun < best_val:
            best_x, best_val = res.x, float(res.fun)
    if best_x is None:
        raise OptimizerDiverged(
            f"no finite marginal likelihood at any of {opts.n_starts} starts"
        )
    return _constrain(best_x)


# ---------------------------------------------------------------------------
# hyperpriors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PriorSpec:
    """Independent T hyperpriors centered at the marginal MLEs.

    beta is untruncated; alpha, rho and sigma are truncated to (0, inf) with
    renormalization.  ``scale`` is the T scale parameter (not variance).
    """

    beta_loc: float
    alpha_loc: float
    rho_loc: float
    sigma_loc: float
    scale: float = 5.0
    df: float = 4.0

    def __post_init__(self):
        locs = (self.beta_loc, self.alpha_loc, self.rho_loc, self.sigma_loc)
        if not all(np.isfinite(v) for v in locs):
            raise ValueError(f"prior locations must be finite, got {locs}")
        if min(self.alpha_loc, self.rho_loc, self.sigma_loc) <= 0:
            raise ValueError("alpha_loc, rho_loc, sigma_loc must be > 0")
        if self.scale <= 0 or self.df <= 0:
            raise ValueError("scale and df must be > 0")

    @classmethod
    def from_mle(
        cls, theta: Hyperparams, scale: float = 5.0, df: float = 4.0
    ) -> "PriorSpec":
        return cls(
            beta_loc=theta.beta,
            alpha_loc=theta.alpha,
            rho_loc=theta.rho,
            sigma_loc=theta.sigma,
            scale=scale,
            df=df,
        )

    def locations(self) -> Hyperparams:
        return Hyperparams(self.beta_loc, self.alpha_loc, self.rho_loc, self.sigma_loc)


def _t_logpdf_std(z: float, df: float) -> float:
    """Standard location-scale-free Student-T log density."""
    c = (
        gammaln((df + 1.0) / 2.0)
        - gammaln(df / 2.0)
        - 0.5 * math.log(df * math.pi)
    )
    return float(c - (df + 1.0) / 2.0 * math.log1p(z * z / df))


@lru_cache(maxsize=256)
def _log_positive_mass(loc: float, scale: float, df: float) -> float:
    """log P(X > 0) for X ~ T_df(loc, scale); the truncation normalizer."""
    # by symmetry P(X > 0) = F_std(loc / scale)
    return float(np.log(scipy.stats.t.cdf(loc / scale, df)))


def prior_logpdf_components(theta: Hyperparams, prior: PriorSpec) -> dict[str, float]:
    """Per-parameter log prior densities (truncated ones renormalized)."""
    s, df = prior.scale, prior.df
    log_s = math.log(s)
    out = {"beta": _t_logpdf_std((theta.beta - prior.beta_loc) / s, df) - log_s}
    for name, x, loc in (
        ("alpha", theta.alpha, prior.alpha_loc),
        ("rho", theta.rho, prior.rho_loc),
        ("sigma", theta.sigma, prior.sigma_loc),
    ):
        if x <= 0:
            out[name] = -np.inf
            continue
        out[name] = (
            _t_logpdf_std((x - loc) / s, df)
            - log_s
            - _log_positive_mass(loc, s, df)
        )
    return out


def prior_logpdf(theta: Hyperparams, prior: PriorSpec) -> float:
    """Joint log prior density: sum of the four independent components."""
    return float(sum(prior_logpdf_components(theta, prior).values()))


# ---------------------------------------------------------------------------
# MCMC over the hyperparameter posterior
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class McmcSettings:
    """Adaptive random-walk Metropolis settings.

    ``prior_only`` drops the likelihood term from the target; useful for
    validating that the sampler reproduces the prior.
    """

    n_chains: int = 4
    n_iter: int = 5000
    warmup_frac: float = 0.5
    target_accept: float = 0.3
    adapt_window: int = 50
    init_jitter: float = 0.5
    prior_only: bool = False

    def __post_init__(self):
        if self.n_chains < 1 or self.n_iter < 2:
            raise ValueError("need n_chains >= 1 and n_iter >= 2")
        if not 0.0 < self.warmup_frac < 1.0:
            raise ValueError("warmup_frac must be in (0, 1)")

    @property
    def n_warmup(self) -> int:
        return int(self.n_iter * self.warmup_frac)


@dataclass(frozen=True)
class ChainDiagnostics:
    rhat: dict[str, float]
    ess: dict[str, float]


@dataclass(frozen=True)
class HyperChain:
    """Post-warmup hyperparameter draws, all chains concatenated.

    ``by_chain`` keeps the pre-concatenation layout (n_chains, n_kept, 4)
    that the diagnostics were computed on; ``log_post`` is the constrained-
    space unnormalized log posterior marginal_loglik + prior_logpdf at each
    draw (no transform Jacobian).
    """

    by_chain: np.ndarray
    log_post_by_chain: np.ndarray
    n_chains: int
    n_iter: int
    n_warmup: int
    diagnostics: ChainDiagnostics
    accept_rate: float

    def __len__(self) -> int:
        return int(self.by_chain.shape[0] * self.by_chain.shape[1])

    @property
    def draws(self) -> np.ndarray:
        """(n_total, 4) array of (beta, alpha, rho, sigma) draws."""
        return self.by_chain.reshape(-1, 4)

    @property
    def log_post(self) -> np.ndarray:
        return self.log_post_by_chain.reshape(-1)

    def hyperparams(self, i: int) -> Hyperparams:
        return Hyperparams.from_array(self.draws[i])

    def to_csv(self, path) -> None:
        """Write draws as CSV with columns chain,iter,beta,alpha,rho,sigma,log_post."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["chain", "iter"] + list(PARAM_NAMES) + ["log_post"])
            for c in range(self.by_chain.shape[0]):
                for i in range(self.by_chain.shape[1]):
                    row = [c, i]
                    row += [f"{v:.17g}" for v in self.by_chain[c, i]]
                    row.append(f"{self.log_post_by_chain[c, i]:.17g}")
                    writer.writerow(row)


def _run_chain(log_target, x0, n_iter, n_warmup, settings, rng):
    """One adaptive RWM chain; returns kept unconstrained draws, target values, accept rate."""
    x = np.array(x0, dtype=float)
    lp = log_target(x)
    tries = 0
    while not np.isfinite(lp):
        tries += 1
        if tries > 100:
            raise ChainDiverged("could not find a finite starting point")
        x = np.asarray(x0) + settings.init_jitter * rng.standard_normal(4)
        lp = log_target(x)

    step = 0.5
    spread = np.full(4, 0.2)
    window = settings.adapt_window
    accepted_in_window = 0
    n_epochs = 0
    welford_n = 0
    welford_mean = np.zeros(4)
    welford_m2 = np.zeros(4)

    n_kept = n_iter - n_warmup
    kept = np.empty((n_kept, 4))
    kept_lp = np.empty(n_kept)
    accepted_sampling = 0

    for i in range(n_iter):
        prop = x + step * spread * rng.standard_normal(4)
        lp_prop = log_target(prop)
        u = rng.random()
        log_u = math.log(u) if u > 0 else -math.inf
        if np.isfinite(lp_prop) and log_u < lp_prop - lp:
            x, lp = prop, lp_prop
            if i < n_warmup:
                accepted_in_window += 1
            else:
                accepted_sampling += 1

        if i < n_warmup:
            welford_n += 1
            delta = x - welford_mean
            welford_mean += delta / welford_n
            welford_m2 += delta * (x - welford_mean)
            if (i + 1) % window == 0:
                n_epochs += 1
                rate = accepted_in_window / window
                accepted_in_window = 0
                step *= math.exp((rate - settings.target_accept) / math.sqrt(n_epochs))
                if welford_n > 4 * window:
                    var = welford_m2 / (welford_n - 1)
                    spread = np.sqrt(np.maximum(var, 1e-12))
        else:
            kept[i - n_warmup] = x
            kept_lp[i - n_warmup] = lp

    return kept, kept_lp, accepted_sampling / max(n_kept, 1)


def sample_hyper_posterior(
    series: ScoreSeries,
    prior: PriorSpec,
    opts: McmcSettings | None = None,
    seed: int = 0,
) -> HyperChain:
    """Sample the hyperparameter posterior with independent adaptive RWM chains.

    The target is marginal_loglik + prior_logpdf, evaluated on
    (beta, log alpha, log rho, log sigma) with the log-transform Jacobian
    included.  Chains start at the prior locations (the MLEs) with jitter;
    draws are deterministic given ``seed``.  Warns when split-Rhat exceeds
    1.01 or ESS falls below 400 for any parameter.
    """
    opts = opts or McmcSettings()
    loglik = None if opts.prior_only else _make_loglik(series)

    def log_target(x):
        theta = _constrain(x)
        lp = prior_logpdf(theta, prior)
        if not np.isfinite(lp):
            return -np.inf
        if loglik is not None:
            ll = loglik(x)
            if not np.isfinite(ll):
                return -np.inf
            lp += ll
        # Jacobian of the log transform for alpha, rho, sigma
        return lp + float(x[1] + x[2] + x[3])

    x0 = _unconstrain(prior.locations())
    n_warmup = opts.n_warmup
    n_kept = opts.n_iter - n_warmup

    seeds = np.random.SeedSequence(seed).spawn(opts.n_chains)
    by_chain = np.empty((opts.n_chains, n_kept, 4))
    lp_by_chain = np.empty((opts.n_chains, n_kept))
    accept_rates = []
    for c in range(opts.n_chains):
        rng = np.random.default_rng(seeds[c])
        start = x0 + opts.init_jitter * rng.standard_normal(4)
        kept_x, kept_lp, rate = _run_chain(
            log_target, start, opts.n_iter, n_warmup, opts, rng
        )
        by_chain[c, :, 0] = kept_x[:, 0]
        by_chain[c, :, 1:] = np.exp(kept_x[:, 1:])
        # report constrained-space log posterior: remove the Jacobian term
        lp_by_chain[c] = kept_lp - kept_x[:, 1:].sum(axis=1)
        accept_rates.append(rate)

    rhat = {}
    ess = {}
    for j, name in enumerate(PARAM_NAMES):
        chains_j = by_chain[:, :, j]
        rhat[name] = split_rhat(chains_j)
        ess[name] = effective_sample_size(chains_j)
    diagnostics = ChainDiagnostics(rhat=rhat, ess=ess)

    worst_rhat = max(rhat.values())
    worst_ess = min(ess.values())
    if worst_rhat > 1.01:
        warnings.warn(f"split-Rhat up to {worst_rhat:.3f} > 1.01; chains may be unmixed")
    if worst_ess < 400:
        warnings.warn(f"effective sample size as low as {worst_ess:.0f} < 400")

    return HyperChain(
        by_chain=by_chain,
        log_post_by_chain=lp_by_chain,
        n_chains=opts.n_chains,
        n_iter=opts.n_iter,
        n_warmup=n_warmup,
        diagnostics=diagnostics,
        accept_rate=float(np.mean(accept_rates)),
    )


# ---------------------------------------------------------------------------
# convergence diagnostics
# ---------------------------------------------------------------------------

def _split_halves(chains: np.ndarray) -> np.ndarray:
    """Split each chain in half, dropping one trailing draw if the length is odd."""
    chains = np.atleast_2d(np.asarray(chains, dtype=float))
    m, n = chains.shape
    half = n // 2
    if half < 2:
        raise ValueError("chains too short to split")
    return np.concatenate([chains[:, :half], chains[:, half : 2 * half]], axis=0)


def split_rhat(chains: np.ndarray) -> float:
    """Split-Rhat potential scale reduction for one parameter.

    ``chains`` has shape (n_chains, n_draws); halves are treated as separate
    chains.
    """
    split = _split_halves(chains)
    m, n = split.shape
    means = split.mean(axis=1)
    variances = split.var(axis=1, ddof=1)
    W = float(variances.mean())
    B = n * float(means.var(ddof=1))
    if W == 0:
        return 1.0
    var_plus = (n - 1) / n * W + B / n
    return float(np.sqrt(var_plus / W))


def effective_sample_size(chains: np.ndarray) -> float:
    """Effective sample size for one parameter, via FFT autocorrelations.

    Uses split chains and Geyer's initial monotone positive sequence to
    truncate the autocorrelation sum.
    """
    split = _split_halves(chains)
    m, n = split.shape
    total = m * n

    centered = split - split.mean(axis=1, keepdims=True)
    nfft = int(2 ** np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(centered, nfft, axis=1)
    acov = np.fft.irfft(f * np.conj(f), nfft, axis=1)[:, :n].real / n

    s2 = acov[:, 0] * n / (n - 1)
    W = float(s2.mean())
    means = split.mean(axis=1)
    B_over_n = float(means.var(ddof=1))
    var_plus = (n - 1) / n * W + B_over_n
    if var_plus == 0:
        return float(total)

    rho = 1.0 - (W - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0

    # Geyer: sum pair sums while positive, enforcing monotone non-increase
    tau = 0.0
    prev_pair = np.inf
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        pair = min(pair, prev_pair)
        prev_pair = pair
        tau += 2.0 * pair
    tau -= 1.0
    tau = max(tau, 1.0 / total)
    return float(total / tau)
