"""Command-line front-end: fit, season, plotdata, validate.

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 too many
per-match failures in a season run.  Failures print a machine-readable
JSON object to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .config import RunConfig, config_from_dict, load_config
from .errors import (
    ChainDiverged,
    DegenerateCorrelation,
    EmptyAfterTruncation,
    FactorizationFailure,
    InsufficientData,
    MissingBundle,
    NonMonotoneScores,
    OptimizerDiverged,
    ScoreTrendError,
)
from .ingest import read_matches_csv, validate_series
from .season import (
    analyze_match,
    atomic_write_text,
    derive_seed,
    run_season,
    write_match_bundle,
    write_season_outputs,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_SEASON_FAILURES = 4

SEASON_FAILURE_THRESHOLD = 0.05

_INPUT_ERRORS = (
    EmptyAfterTruncation,
    NonMonotoneScores,
    InsufficientData,
    MissingBundle,
    FileNotFoundError,
    ValueError,
)
_NUMERICAL_ERRORS = (
    FactorizationFailure,
    OptimizerDiverged,
    ChainDiverged,
    DegenerateCorrelation,
)

# 95% central interval
_Z95 = 1.959963984540054


def _fail(exc: BaseException, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload), file=sys.stderr)
    return code


def _build_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "grid_points", None) is not None:
        overrides["grid_points"] = args.grid_points
    if getattr(args, "prior_scale", None) is not None:
        overrides["prior_scale"] = args.prior_scale
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if cfg_mcmc := {
        k: v
        for k, v in {
            "n_chains": getattr(args, "chains", None),
            "n_iter": getattr(args, "iters", None),
        }.items()
        if v is not None
    }:
        import dataclasses

        overrides["mcmc"] = dataclasses.replace(cfg.mcmc, **cfg_mcmc)
    return cfg.replace(**overrides) if overrides else cfg


def _load_single_match(path, cfg: RunConfig):
    series_list = read_matches_csv(path, domain_end=cfg.domain_end)
    if len(series_list) != 1:
        raise ValueError(
            f"{path}: expected exactly one match, found {len(series_list)}"
        )
    return series_list[0]


def cmd_fit(args) -> int:
    cfg = _build_config(args)
    series = _load_single_match(args.input, cfg)
    for warning in validate_series(series):
        logger.warning("%s: %s", series.match_id, warning)
    seed = derive_seed(cfg.seed, series.match_id)
    bundle, chain = analyze_match(series, cfg, seed)
    out_dir = Path(args.out) / series.match_id
    write_match_bundle(out_dir, bundle, chain)
    print(json.dumps({"match_id": series.match_id, "out": str(out_dir),
                      "eti_median": bundle["indices"]["eti_median"]}))
    return EXIT_OK


def cmd_season(args) -> int:
    cfg = _build_config(args)
    input_path = Path(args.input)
    if input_path.is_dir():
        csvs = sorted(input_path.glob("*.csv"))
        if not csvs:
            raise FileNotFoundError(f"no CSV files under {input_path}")
        series_list = []
        for f in csvs:
            series_list.extend(read_matches_csv(f, domain_end=cfg.domain_end))
    else:
        series_list = read_matches_csv(input_path, domain_end=cfg.domain_end)

    out_dir = Path(args.out)
    result = run_season(series_list, cfg, out_dir)
    n_total = len(series_list)
    n_failed = len(result.failures)
    logger.info(
        "season: %d matches, %d failed, %d cache hits",
        n_total, n_failed, result.n_cache_hits,
    )
    if n_failed > SEASON_FAILURE_THRESHOLD * n_total:
        print(
            json.dumps({"error": "SeasonFailures", "failures": result.failures}),
            file=sys.stderr,
        )
        return EXIT_SEASON_FAILURES
    write_season_outputs(out_dir, result.records)
    print(json.dumps({"matches": n_total, "failed": n_failed,
                      "cache_hits": result.n_cache_hits, "out": str(out_dir)}))
    return EXIT_OK


def cmd_plotdata(args) -> int:
    bundle_dir = Path(args.input)
    needed = ["mle.json", "posterior_mle.json", "indices.json"]
    missing = [f for f in needed if not (bundle_dir / f).exists()]
    if missing:
        raise MissingBundle(f"{bundle_dir}: missing {missing}")
    mle = json.loads((bundle_dir / "mle.json").read_text())
    moments = json.loads((bundle_dir / "posterior_mle.json").read_text())
    indices = json.loads((bundle_dir / "indices.json").read_text())

    sigma2 = mle["sigma"] ** 2
    header = (
        "t,mu_d,cred_lo,cred_hi,pred_lo,pred_hi,"
        "tdi_mean,tdi_q05,tdi_q50,tdi_q95,deti_q50"
    )
    lines = [header]
    for i, t in enumerate(moments["grid"]):
        mu = moments["mu_d"][i]
        sd = math.sqrt(moments["var_d"][i])
        sd_pred = math.sqrt(moments["var_d"][i] + sigma2)
        cells = [
            t, mu,
            mu - _Z95 * sd, mu + _Z95 * sd,
            mu - _Z95 * sd_pred, mu + _Z95 * sd_pred,
            indices["tdi_mean"][i], indices["tdi_q05"][i],
            indices["tdi_q50"][i], indices["tdi_q95"][i],
            indices["deti_q50"][i],
        ]
        lines.append(",".join(f"{v:.17g}" for v in cells))
    text = "\n".join(lines) + "\n"
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _build_config(args)
    series_list = read_matches_csv(args.input, domain_end=cfg.domain_end)
    report = {}
    for series in series_list:
        report[series.match_id] = validate_series(series)
    print(json.dumps(report, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scoretrend",
        description=(
            "Latent Gaussian-process trend analysis of running score "
            "differences: trend-direction and excitement indices per match, "
            "plus season summaries and team clustering."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_model_flags=True):
        p.add_argument("--input", required=True, help="input path")
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--seed", type=int, help="top-level RNG seed (default 0)")
        if with_model_flags:
            p.add_argument("--grid-points", type=int, dest="grid_points",
                           help="evaluation grid size (default 241)")
            p.add_argument("--chains", type=int, help="number of MCMC chains (default 4)")
            p.add_argument("--iters", type=int,
                           help="MCMC iterations per chain incl. warm-up (default 5000)")
            p.add_argument("--prior-scale", type=float, dest="prior_scale",
                           help="scale of the hyperparameter T priors (default 5)")
            p.add_argument("--workers", type=int, help="parallel match fits (default 1)")

    p_fit = sub.add_parser("fit", help="fit one match and write its result bundle")
    add_common(p_fit)
    p_fit.add_argument("--out", required=True, help="output directory")
    p_fit.set_defaults(func=cmd_fit)

    p_season = sub.add_parser("season", help="fit a directory/CSV of matches and aggregate")
    add_common(p_season)
    p_season.add_argument("--out", required=True, help="output directory")
    p_season.set_defaults(func=cmd_season)

    p_plot = sub.add_parser("plotdata", help="export plot-ready CSV from a match bundle")
    p_plot.add_argument("--input", required=True, help="match bundle directory")
    p_plot.add_argument("--out", help="output CSV path (default: stdout)")
    p_plot.set_defaults(func=cmd_plotdata)

    p_val = sub.add_parser("validate", help="parse a CSV and report data-quality warnings")
    add_common(p_val, with_model_flags=False)
    p_val.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _NUMERICAL_ERRORS as exc:
        return _fail(exc, EXIT_NUMERICAL)
    except _INPUT_ERRORS as exc:
        return _fail(exc, EXIT_INPUT)
    except ScoreTrendError as exc:
        return _fail(exc, EXIT_NUMERICAL)


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
