"""Synthetic match generators for demos, tests and simulation studies."""

from __future__ import annotations

import numpy as np

from .ingest import ScoreSeries, parse_play_by_play
from .kernel import Hyperparams, gram
from .linalg import jittered_cholesky


def draw_score_series(
    theta: Hyperparams,
    n_events: int = 120,
    seed: int = 0,
    domain_end: float = 48.0,
    match_id: str = "sim",
    home_team: str = "HOME",
    away_team: str = "AWAY",
) -> ScoreSeries:
    """Sample a ScoreSeries from the generative model at fixed hyperparameters.

    Event times are sorted uniforms on (0, domain_end); observed diffs are a
    joint draw from N(beta 1, C + sigma^2 I) at those times.
    """
    if n_events < 2:
        raise ValueError("need at least 2 events")
    rng = np.random.default_rng(seed)
    times = np.sort(rng.uniform(0.0, domain_end, size=n_events))
    times = np.maximum(times, 1e-9)
    K = gram(0, 0, times, times, theta)
    K[np.diag_indices_from(K)] += theta.sigma2
    L, _ = jittered_cholesky(K, scale=theta.alpha**2)
    diffs = theta.beta + L @ rng.standard_normal(n_events)
    return ScoreSeries(
        match_id=match_id,
        home_team=home_team,
        away_team=away_team,
        times=times,
        diffs=diffs,
        domain_end=domain_end,
    )


def simulate_play_by_play(
    seed: int = 0,
    n_events: int = 110,
    domain_end: float = 48.0,
    match_id: str = "sim",
    home_team: str = "HOME",
    away_team: str = "AWAY",
    date: str = "2020-01-01",
    home_strength: float = 0.5,
) -> list[dict]:
    """Integer play-by-play rows shaped like real feed data.

    Each event awards 1, 2 or 3 points to one team, chosen with probability
    ``home_strength`` for the home side.  Returns rows in the CSV schema
    (match_id, date, home_team, away_team, minute, home_score, away_score).
    """
    rng = np.random.default_rng(seed)
    minutes = np.sort(rng.uniform(0.2, domain_end, size=n_events)).round(2)
    home = away = 0
    rows = []
    for minute in minutes:
        points = int(rng.choice([1, 2, 3], p=[0.15, 0.6, 0.25]))
        if rng.random() < home_strength:
            home += points
        else:
            away += points
        rows.append(
            {
                "match_id": match_id,
                "date": date,
                "home_team": home_team,
                "away_team": away_team,
                "minute": float(minute),
                "home_score": home,
                "away_score": away,
            }
        )
    return rows


def simulated_series(seed: int = 0, **kwargs) -> ScoreSeries:
    """Convenience wrapper: simulate_play_by_play piped through the parser."""
    return parse_play_by_play(simulate_play_by_play(seed=seed, **kwargs))
