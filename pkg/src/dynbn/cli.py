"""Command line: simulate | fit | predict | backtest | report.

Every command reads one INI config (see README for the format); --seed and
--out override the config. Exit codes: 0 ok, 2 config error, 3 numeric
failure, 4 data error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import datetime
import os
import sys

import numpy as np

from . import dataio
from .backtest import run_backtest
from .errors import ConfigError, DataError, NumericError
from .graphs import auroc
from .mcmc import SCALAR_PARAMS, run_chain
from .predict import FitSummary, predict_paths, risk_indicators
from .simulate import demo_params, simulate_dataset


def _dates_for(T: int) -> list[str]:
    start = datetime.date(2020, 1, 1)
    return [(start + datetime.timedelta(days=k)).isoformat() for k in range(T)]


def _rep_dirs(out_dir: str, replications: int) -> list[str]:
    if replications <= 1:
        return [out_dir]
    return [os.path.join(out_dir, f"rep{k:03d}") for k in range(replications)]


def _derive_seeds(seed: int, count: int) -> list[int]:
    gen = np.random.default_rng(seed)
    return [int(s) for s in gen.integers(0, 2**63 - 1, size=count)]


def _simulate_one(cfg: dataio.RunConfig, seed: int, out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    theta = demo_params(cfg.sim_n, rng, n_edges=cfg.sim_edges)
    data, truth = simulate_dataset(theta, cfg.sim_T, rng)
    prov = f"{cfg.provenance()} worker_seed={seed}"
    dates = _dates_for(cfg.sim_T)
    symbols = [f"s{k + 1}" for k in range(cfg.sim_n)]
    dataio.write_returns_csv(os.path.join(out_dir, "returns.csv"), dates, symbols, data, prov)
    dataio.write_returns_csv(os.path.join(out_dir, "vol_index.csv"), dates, ["vol"],
                             truth.vol_index[:, None], prov)
    dataio.write_truth(os.path.join(out_dir, "truth.jsonl"), truth, prov)
    return out_dir


def _fit_one(cfg: dataio.RunConfig, seed: int, out_dir: str) -> str:
    from .mcmc import build_archive_header

    os.makedirs(out_dir, exist_ok=True)
    _, _, data = dataio.ingest_returns(dataio.require_input(cfg.returns_path, "[data] returns"))
    _, vol = dataio.ingest_series(dataio.require_input(cfg.vol_index_path, "[data] vol_index"))
    if len(vol) != len(data):
        raise DataError("returns and volatility index lengths differ")
    prov = f"{cfg.provenance()} worker_seed={seed}"
    # records stream to disk as they are retained; an aborted fit leaves a
    # readable prefix of the archive
    writer = dataio.ArchiveWriter(os.path.join(out_dir, "archive.jsonl"),
                                  build_archive_header(cfg.sampler, data, vol, seed), prov)
    try:
        archive = run_chain(cfg.sampler, data, vol, seed=seed, on_record=writer.record)
        writer.finish(archive.accept_stats, archive.edge_freq)
    finally:
        writer.close()
    fit = FitSummary.from_archive(archive)
    dataio.write_network(os.path.join(out_dir, "map_network.txt"), fit.g_T, prov)
    return out_dir


def cmd_simulate(cfg, replications, threads):
    dirs = _rep_dirs(cfg.out_dir, replications)
    seeds = _derive_seeds(cfg.seed, len(dirs)) if replications > 1 else [cfg.seed]
    _fan_out(_simulate_one, cfg, seeds, dirs, threads)


def cmd_fit(cfg, replications, threads):
    dirs = _rep_dirs(cfg.out_dir, replications)
    seeds = _derive_seeds(cfg.seed, len(dirs)) if replications > 1 else [cfg.seed]
    _fan_out(_fit_one, cfg, seeds, dirs, threads)


def _fan_out(worker, cfg, seeds, dirs, threads):
    if threads > 1 and len(dirs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(worker, cfg, s, d) for s, d in zip(seeds, dirs)]
            for fut in futures:
                fut.result()
    else:
        for s, d in zip(seeds, dirs):
            worker(cfg, s, d)


def cmd_predict(cfg):
    archive = dataio.read_archive(dataio.require_input(cfg.archive_path, "[predict] archive"))
    fit = FitSummary.from_archive(archive)
    bundle = predict_paths(fit, cfg.horizon, cfg.n_paths, seed=cfg.seed)
    prov = cfg.provenance()
    os.makedirs(cfg.out_dir, exist_ok=True)
    dataio.write_bundle_csv(os.path.join(cfg.out_dir, "bundle.csv"), bundle, prov)
    nd, cc, var = risk_indicators(bundle, cfg.risk.alpha)
    dataio.write_table_csv(
        os.path.join(cfg.out_dir, "indicators.csv"),
        ["h", "density", "clustering", f"var_{cfg.risk.alpha}"],
        [[h + 1, repr(float(nd[h])), repr(float(cc[h])), repr(float(var[h]))]
         for h in range(bundle.horizon)],
        prov,
    )


def cmd_backtest(cfg):
    dates, _, data = dataio.ingest_returns(dataio.require_input(cfg.returns_path, "[data] returns"))
    if cfg.external_sigma_path is not None:
        # comparison mode: trade on covariance forecasts produced elsewhere
        from .backtest import external_forecast_ledger

        sigmas = dataio.read_sigma_series(
            dataio.require_input(cfg.external_sigma_path, "[backtest] external_sigma"),
            data.shape[1],
        )
        ledger = external_forecast_ledger(sigmas, data, cfg.window,
                                          strategy=cfg.strategy, risk=cfg.risk)
    else:
        _, vol = dataio.ingest_series(dataio.require_input(cfg.vol_index_path, "[data] vol_index"))
        ledger = run_backtest(
            data, vol, strategy=cfg.strategy, risk=cfg.risk, window=cfg.window,
            refit_every=cfg.refit_every, sampler=cfg.sampler, n_paths=cfg.n_paths,
            seed=cfg.seed,
        )
    os.makedirs(cfg.out_dir, exist_ok=True)
    dataio.write_ledger_csv(os.path.join(cfg.out_dir, "ledger.csv"), ledger,
                            cfg.provenance(), dates)


def cmd_report(cfg):
    os.makedirs(cfg.out_dir, exist_ok=True)
    prov = cfg.provenance()
    wrote = False
    if cfg.archive_path is not None:
        archive = dataio.read_archive(dataio.require_input(cfg.archive_path, "[report] archive"))
        rows = []
        for name in SCALAR_PARAMS:
            lo, hi = archive.credible_interval(name)
            rows.append([name, repr(archive.posterior_mean(name)), repr(lo), repr(hi)])
        dataio.write_table_csv(
            os.path.join(cfg.out_dir, "params_summary.csv"),
            ["parameter", "posterior_mean", "lower_2.5", "upper_2.5"], rows, prov,
        )
        freq_rows = []
        T, n, _ = archive.edge_freq.shape
        for t in range(T):
            for i in range(n):
                for j in range(n):
                    if i != j and archive.edge_freq[t, i, j] > 0:
                        freq_rows.append([t + 1, i + 1, j + 1, repr(float(archive.edge_freq[t, i, j]))])
        dataio.write_table_csv(os.path.join(cfg.out_dir, "edge_freq.csv"),
                               ["t", "i", "j", "frequency"], freq_rows, prov)
        if cfg.truth_path is not None:
            truths = dataio.read_truth_networks(dataio.require_input(cfg.truth_path, "[report] truth"))
            if len(truths) != T:
                raise DataError(f"truth has {len(truths)} steps, archive {T}")
            rows = [[t + 1, repr(float(auroc(archive.edge_freq[t], truths[t])))]
                    for t in range(T)]
            dataio.write_table_csv(os.path.join(cfg.out_dir, "auroc_by_t.csv"),
                                   ["t", "auroc"], rows, prov)
        wrote = True
    if cfg.ledger_path is not None:
        rows = []
        with open(cfg.ledger_path) as fh:
            import csv as _csv

            reader = _csv.reader(r for r in fh if not r.startswith("#"))
            header = next(reader)
            date_col = header.index("date")
            cum_col = header.index("cum_value")
            for row in reader:
                rows.append([row[date_col], row[cum_col]])
        dataio.write_table_csv(os.path.join(cfg.out_dir, "cumvalue.csv"),
                               ["date", "cum_value"], rows, prov)
        wrote = True
    if not wrote:
        raise ConfigError("report needs [report] archive and/or ledger")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynbn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "fit", "predict", "backtest", "report"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--replications", type=int, default=1)
        p.add_argument("--threads", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = dataio.load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out_dir = args.out
        if args.command == "simulate":
            cmd_simulate(cfg, args.replications, args.threads)
        elif args.command == "fit":
            cmd_fit(cfg, args.replications, args.threads)
        elif args.command == "predict":
            cmd_predict(cfg)
        elif args.command == "backtest":
            cmd_backtest(cfg)
        elif args.command == "report":
            cmd_report(cfg)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
