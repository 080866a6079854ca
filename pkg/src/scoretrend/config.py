"""Run configuration shared by the CLI and the season batch runner."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .inference import McmcSettings, MleSettings


@dataclass(frozen=True)
class RunConfig:
    """All knobs of a fit: grid, priors, MLE, MCMC, thinning, seeding."""

    grid_points: int = 241
    domain_end: float = 48.0
    prior_scale: float = 5.0
    prior_df: float = 4.0
    mcmc: McmcSettings = field(default_factory=McmcSettings)
    mle: MleSettings = field(default_factory=MleSettings)
    thin_to: int = 500
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")
        if self.domain_end <= 0:
            raise ValueError("domain_end must be > 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def config_hash(self) -> str:
        """Short digest of every numerically relevant field; keys result caching."""
        payload = dataclasses.asdict(self)
        payload.pop("workers")  # parallelism does not change results
        text = json.dumps(payload, sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:12]

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


_MCMC_KEYS = {"n_chains", "n_iter", "warmup_frac", "target_accept"}
_MLE_KEYS = {"mle_starts": "n_starts", "mle_maxiter": "maxiter"}


def load_config(path) -> RunConfig:
    """Read a RunConfig from a JSON file.

    Top-level keys mirror the RunConfig fields; MCMC settings may be given
    flat (n_chains, n_iter, warmup_frac, target_accept, mle_starts) or under
    a nested "mcmc"/"mle" object.
    """
    data = json.loads(Path(path).read_text())
    return config_from_dict(data)


def config_from_dict(data: dict) -> RunConfig:
    data = dict(data)
    mcmc_kwargs = dict(data.pop("mcmc", {}))
    mle_kwargs = dict(data.pop("mle", {}))
    for key in list(data):
        if key in _MCMC_KEYS:
            mcmc_kwargs[key] = data.pop(key)
        elif key in _MLE_KEYS:
            mle_kwargs[_MLE_KEYS[key]] = data.pop(key)
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(
        mcmc=McmcSettings(**mcmc_kwargs),
        mle=MleSettings(**mle_kwargs),
        **data,
    )
