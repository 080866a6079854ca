"""Season-scale analytics: batch fits, ETI summaries, team tables, clustering.

A season run fits every match independently (MLE -> MCMC -> index summary),
caches each result on disk keyed by (match_id, config hash), then aggregates
the per-match median posterior ETIs: distribution summaries, a per-team
table, and a grouping of the ETI-ranked teams found by exhaustively scoring
contiguous partitions with leave-one-out cross-validated RMSEP.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
import os
import re
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import RunConfig
from .errors import InsufficientData, ScoreTrendError
from .indices import default_grid, summarize_over_chain, summary_to_dict
from .inference import PriorSpec, fit_mle, sample_hyper_posterior
from .ingest import ScoreSeries, series_to_dict
from .posterior import moments_to_dict, posterior_moments

logger = logging.getLogger(__name__)

GROUP_LABELS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


# ---------------------------------------------------------------------------
# small shared utilities
# ---------------------------------------------------------------------------

def atomic_write_text(path, text: str) -> None:
    """Write a file via temp file + rename so readers never see partial content."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def derive_seed(seed: int, label: str) -> int:
    """Deterministic per-item seed fanned out from a top-level seed."""
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _safe_name(match_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", match_id)


# ---------------------------------------------------------------------------
# per-match records and season distribution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MatchEtiRecord:
    """One match's excitement summary: the median posterior ETI."""

    match_id: str
    date: str
    home_team: str
    away_team: str
    eti_median: float

    def __post_init__(self):
        if not (self.eti_median >= 0):
            raise ValueError(f"eti_median must be >= 0, got {self.eti_median}")


@dataclass(frozen=True)
class SeasonStats:
    n: int
    mean: float
    median: float
    sd: float
    skewness: float
    minimum: float
    maximum: float


def season_stats(records: Sequence[MatchEtiRecord]) -> SeasonStats:
    """Distribution summary of the per-match ETI medians.

    SD uses the n-1 denominator; skewness is the adjusted Fisher-Pearson
    estimator (0 by convention for constant or too-short samples).
    """
    if len(records) < 2:
        raise InsufficientData(f"need >= 2 records, got {len(records)}")
    x = np.array([r.eti_median for r in records], dtype=float)
    n = x.size
    mean = float(x.mean())
    dev = x - mean
    m2 = float(np.mean(dev**2))
    m3 = float(np.mean(dev**3))
    if n < 3 or m2 == 0:
        skew = 0.0
    else:
        skew = math.sqrt(n * (n - 1)) / (n - 2) * m3 / m2**1.5
    return SeasonStats(
        n=n,
        mean=mean,
        median=float(np.median(x)),
        sd=float(x.std(ddof=1)),
        skewness=skew,
        minimum=float(x.min()),
        maximum=float(x.max()),
    )


# ---------------------------------------------------------------------------
# team summaries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TeamSummary:
    team: str
    average: float
    sd: float
    q025: float
    q50: float
    q975: float
    n_matches: int
    group_label: str = ""


def _team_values(records: Iterable[MatchEtiRecord]) -> dict[str, list[float]]:
    values: dict[str, list[float]] = {}
    for r in records:
        values.setdefault(r.home_team, []).append(r.eti_median)
        values.setdefault(r.away_team, []).append(r.eti_median)
    return values


def team_table(records: Sequence[MatchEtiRecord]) -> list[TeamSummary]:
    """Per-team ETI summaries; each match counts for both participating teams.

    Rows are sorted by average descending, ties broken by team name.  Every
    team must appear in at least two records.
    """
    rows = []
    for team, vals in _team_values(records).items():
        if len(vals) < 2:
            raise InsufficientData(f"team {team!r} appears in only {len(vals)} records")
        x = np.array(vals, dtype=float)
        rows.append(
            TeamSummary(
                team=team,
                average=float(x.mean()),
                sd=float(x.std(ddof=1)),
                q025=float(np.quantile(x, 0.025)),
                q50=float(np.quantile(x, 0.50)),
                q975=float(np.quantile(x, 0.975)),
                n_matches=len(vals),
            )
        )
    rows.sort(key=lambda r: (-r.average, r.team))
    return rows


def rank_teams(records: Sequence[MatchEtiRecord]) -> list[str]:
    """Teams ordered by season-average ETI, highest first (ties by name)."""
    values = _team_values(records)
    return sorted(values, key=lambda t: (-float(np.mean(values[t])), t))


# ---------------------------------------------------------------------------
# leave-one-out clustering of the ranked teams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Partition:
    """A contiguous grouping of the ranked teams and its LOO-CV score.

    ``cut_ranks`` are the c-1 strictly increasing start indices of groups
    two onwards within the ranking.
    """

    c: int
    cut_ranks: tuple[int, ...]
    rmsep: float


def loo_rmsep(
    records: Sequence[MatchEtiRecord], groups: Sequence[Iterable[str]]
) -> float:
    """Leave-one-out RMSEP of the group-mean model on per-team-match outcomes.

    Each match contributes one observation per participating team, assigned
    to that team's group.  The LOO prediction for an observation is its
    group's mean with the observation removed; a group holding a single
    observation makes LOO undefined and scores the partition +inf.
    """
    group_of: dict[str, int] = {}
    for g, members in enumerate(groups):
        for team in members:
            if team in group_of:
                raise ValueError(f"team {team!r} assigned to more than one group")
            group_of[team] = g

    values, idx = [], []
    for r in records:
        for team in (r.home_team, r.away_team):
            if team not in group_of:
                raise ValueError(f"team {team!r} missing from the partition")
            values.append(r.eti_median)
            idx.append(group_of[team])
    x = np.array(values, dtype=float)
    g = np.array(idx, dtype=int)
    n_groups = len(groups)
    counts = np.bincount(g, minlength=n_groups)
    if np.any(counts == 0):
        raise ValueError("every group must induce at least one observation")
    if np.any(counts == 1):
        return math.inf
    sums = np.bincount(g, weights=x, minlength=n_groups)
    resid = (counts[g] * x - sums[g]) / (counts[g] - 1)
    return float(np.sqrt(np.mean(resid**2)))


def _prefix_stats(records, ranking):
    """Per-ranked-team observation count/sum/sum-of-squares prefix arrays."""
    per_team = _team_values(records)
    n = np.zeros(len(ranking) + 1)
    s = np.zeros(len(ranking) + 1)
    q = np.zeros(len(ranking) + 1)
    for i, team in enumerate(ranking):
        vals = np.array(per_team[team], dtype=float)
        n[i + 1] = n[i] + vals.size
        s[i + 1] = s[i] + vals.sum()
        q[i + 1] = q[i] + float(vals @ vals)
    return n, s, q


def _partition_sse(bounds, n, s, q):
    """Total LOO squared error over contiguous groups given prefix stats.

    For a group with count m, sum S and sum of squares Q the LOO residual
    identity sum((m x_i - S) / (m - 1))^2 = (m^2 Q - m S^2) / (m - 1)^2
    avoids touching individual observations.
    """
    sse = 0.0
    for lo, hi in bounds:
        m = n[hi] - n[lo]
        if m <= 1:
            return math.inf
        S = s[hi] - s[lo]
        Q = q[hi] - q[lo]
        sse += (m * m * Q - m * S * S) / ((m - 1) * (m - 1))
    return sse


@dataclass(frozen=True)
class ClusterResult:
    ranking: list[str]
    partitions: dict[int, Partition]
    selected_c: int

    def groups(self, c: int | None = None) -> list[list[str]]:
        part = self.partitions[c if c is not None else self.selected_c]
        edges = [0, *part.cut_ranks, len(self.ranking)]
        return [self.ranking[lo:hi] for lo, hi in zip(edges[:-1], edges[1:])]

    def labels(self, c: int | None = None) -> dict[str, str]:
        out = {}
        for g, members in enumerate(self.groups(c)):
            for team in members:
                out[team] = GROUP_LABELS[g]
        return out


def cluster_teams(
    records: Sequence[MatchEtiRecord],
    c_max: int = 8,
    tol: float = 1e-3,
) -> ClusterResult:
    """Best contiguous partition of the ETI-ranked teams for each group count.

    For c groups every placement of c-1 cuts in the ranking is scored by
    loo_rmsep and the minimum kept (ties: leftmost cut vector, by iteration
    order).  The selected c is the smallest one whose improvement over the
    next count falls below ``tol``; the search is deterministic in the
    records alone.
    """
    ranking = rank_teams(records)
    n_teams = len(ranking)
    if not 1 <= c_max <= n_teams:
        raise ValueError(f"c_max must be in [1, {n_teams}], got {c_max}")
    n, s, q = _prefix_stats(records, ranking)
    total_obs = n[-1]

    partitions: dict[int, Partition] = {}
    for c in range(1, c_max + 1):
        best_cuts, best_sse = None, math.inf
        for cuts in itertools.combinations(range(1, n_teams), c - 1):
            edges = [0, *cuts, n_teams]
            sse = _partition_sse(list(zip(edges[:-1], edges[1:])), n, s, q)
            if sse < best_sse:
                best_cuts, best_sse = cuts, sse
        if best_cuts is None:
            best_cuts = tuple(range(1, c))
            best_sse = math.inf
        rmsep = math.sqrt(best_sse / total_obs) if math.isfinite(best_sse) else math.inf
        partitions[c] = Partition(c=c, cut_ranks=tuple(best_cuts), rmsep=rmsep)

    selected = c_max
    for c in range(1, c_max):
        if partitions[c].rmsep - partitions[c + 1].rmsep < tol:
            selected = c
            break
    return ClusterResult(ranking=ranking, partitions=partitions, selected_c=selected)


# ---------------------------------------------------------------------------
# per-match pipeline and batch orchestration
# ---------------------------------------------------------------------------

def analyze_match(series: ScoreSeries, cfg: RunConfig, seed: int):
    """Full single-match pipeline: MLE -> priors -> MCMC -> index summary.

    Returns (bundle_dict, chain); the bundle holds everything the season
    aggregation and the plot-data export need.
    """
    theta_hat = fit_mle(series, cfg.mle, seed=seed)
    prior = PriorSpec.from_mle(theta_hat, scale=cfg.prior_scale, df=cfg.prior_df)
    chain = sample_hyper_posterior(series, prior, cfg.mcmc, seed=seed)
    grid = default_grid(series.domain_end, cfg.grid_points)
    summary = summarize_over_chain(series, chain, grid, thin_to=cfg.thin_to)
    moments = posterior_moments(series, theta_hat, grid)
    bundle = {
        "match": series_to_dict(series),
        "config_hash": cfg.config_hash(),
        "seed": seed,
        "mle": {
            "beta": theta_hat.beta,
            "alpha": theta_hat.alpha,
            "rho": theta_hat.rho,
            "sigma": theta_hat.sigma,
        },
        "diagnostics": {
            "rhat": chain.diagnostics.rhat,
            "ess": chain.diagnostics.ess,
            "accept_rate": chain.accept_rate,
        },
        "moments_mle": moments_to_dict(moments),
        "indices": summary_to_dict(summary),
    }
    return bundle, chain


def _season_job(args):
    series, cfg, seed, cache_dir, bundle_dir = args
    cache_file = Path(cache_dir) / f"{_safe_name(series.match_id)}-{cfg.config_hash()}.json"
    if cache_file.exists():
        logger.info("cache hit for match %s", series.match_id)
        return series.match_id, json.loads(cache_file.read_text()), True
    bundle, chain = analyze_match(series, cfg, seed)
    match_dir = Path(bundle_dir) / _safe_name(series.match_id)
    write_match_bundle(match_dir, bundle, chain)
    atomic_write_text(cache_file, json.dumps(bundle))
    return series.match_id, bundle, False


def write_match_bundle(match_dir, bundle: dict, chain=None) -> None:
    """Write the per-match output files (atomic per file)."""
    match_dir = Path(match_dir)
    match_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(match_dir / "mle.json", json.dumps(bundle["mle"], indent=2))
    atomic_write_text(
        match_dir / "posterior_mle.json", json.dumps(bundle["moments_mle"])
    )
    atomic_write_text(match_dir / "indices.json", json.dumps(bundle["indices"]))
    meta = {
        k: bundle[k] for k in ("match", "config_hash", "seed", "diagnostics")
    }
    atomic_write_text(match_dir / "meta.json", json.dumps(meta, indent=2))
    if chain is not None:
        tmp = match_dir / ".chain.csv.tmp"
        chain.to_csv(tmp)
        os.replace(tmp, match_dir / "chain.csv")


@dataclass(frozen=True)
class SeasonResult:
    records: list[MatchEtiRecord]
    failures: dict[str, str]
    n_cache_hits: int


def run_season(
    series_list: Sequence[ScoreSeries],
    cfg: RunConfig,
    out_dir,
) -> SeasonResult:
    """Fit every match (cached, optionally in parallel) and collect ETI records.

    Per-match failures are logged and skipped; callers decide whether the
    failure fraction is acceptable.
    """
    out_dir = Path(out_dir)
    cache_dir = out_dir / "cache"
    bundle_dir = out_dir / "matches"
    cache_dir.mkdir(parents=True, exist_ok=True)

    jobs = [
        (s, cfg, derive_seed(cfg.seed, s.match_id), cache_dir, bundle_dir)
        for s in series_list
    ]
    records: list[MatchEtiRecord] = []
    failures: dict[str, str] = {}
    hits = 0

    def consume(result):
        nonlocal hits
        match_id, bundle, was_cached = result
        if was_cached:
            hits += 1
        match = bundle["match"]
        records.append(
            MatchEtiRecord(
                match_id=match_id,
                date=match.get("date", ""),
                home_team=match["home_team"],
                away_team=match["away_team"],
                eti_median=float(bundle["indices"]["eti_median"]),
            )
        )

    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = {pool.submit(_season_job, job): job[0].match_id for job in jobs}
            for future, match_id in futures.items():
                try:
                    consume(future.result())
                except ScoreTrendError as exc:
                    logger.warning("match %s failed: %s", match_id, exc)
                    failures[match_id] = str(exc)
    else:
        for job in jobs:
            try:
                consume(_season_job(job))
            except ScoreTrendError as exc:
                logger.warning("match %s failed: %s", job[0].match_id, exc)
                failures[job[0].match_id] = str(exc)

    return SeasonResult(records=records, failures=failures, n_cache_hits=hits)


# ---------------------------------------------------------------------------
# season output files
# ---------------------------------------------------------------------------

def write_season_outputs(out_dir, records: Sequence[MatchEtiRecord], c_max: int = 8) -> None:
    """Emit season_eti.csv, team_table.csv and clusters.json under out_dir."""
    out_dir = Path(out_dir)

    lines = ["match_id,date,home_team,away_team,eti_median"]
    for r in sorted(records, key=lambda r: r.match_id):
        lines.append(
            f"{r.match_id},{r.date},{r.home_team},{r.away_team},{r.eti_median:.17g}"
        )
    atomic_write_text(out_dir / "season_eti.csv", "\n".join(lines) + "\n")

    teams = team_table(records)
    effective_c_max = min(c_max, len(teams))
    clusters = cluster_teams(records, c_max=effective_c_max)
    labels = clusters.labels()

    lines = ["team,average,sd,q025,q50,q975,n_matches,group"]
    for t in teams:
        lines.append(
            f"{t.team},{t.average:.17g},{t.sd:.17g},{t.q025:.17g},"
            f"{t.q50:.17g},{t.q975:.17g},{t.n_matches},{labels[t.team]}"
        )
    atomic_write_text(out_dir / "team_table.csv", "\n".join(lines) + "\n")

    payload = {
        "ranking": clusters.ranking,
        "selected_c": clusters.selected_c,
        "labels": labels,
        "per_c": {
            str(c): {
                "rmsep": p.rmsep if math.isfinite(p.rmsep) else None,
                "cut_ranks": list(p.cut_ranks),
            }
            for c, p in clusters.partitions.items()
        },
    }
    atomic_write_text(out_dir / "clusters.json", json.dumps(payload, indent=2))
