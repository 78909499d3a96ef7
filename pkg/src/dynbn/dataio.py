"""CSV ingestion, run configuration, and file persistence.

All emitted files carry a provenance line (config hash + seed) so any table
can be traced back to the run that produced it. Sample archives are
line-delimited JSON with a schema-version header, written append-only so a
long fit that dies still leaves a readable prefix.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .backtest import BacktestLedger, RiskConfig
from .errors import ConfigError, DataError
from .graphs import Dag
from .mcmc import SampleArchive, SamplerConfig
from .predict import PredictionBundle

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# Input data
# ---------------------------------------------------------------------------


def _parse_cell(raw: str, line_no: int, col_name: str) -> float:
    text = raw.strip()
    if text == "":
        raise DataError(f"line {line_no}: missing value in column {col_name!r}")
    try:
        return float(text)
    except ValueError:
        raise DataError(f"line {line_no}: non-numeric value {raw!r} in column {col_name!r}") from None


def ingest_returns(path: str) -> tuple[list[str], list[str], np.ndarray]:
    """Read a returns CSV: header of symbols, first column ISO dates.

    Returns (dates, symbols, T x n matrix). Ragged rows, missing or
    non-numeric cells, duplicate dates, and out-of-order dates are all
    reported with their line number.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        symbols = [h.strip() for h in header[1:]]
        if not symbols:
            raise DataError(f"{path}: header has no symbol columns")
        dates: list[str] = []
        rows: list[list[float]] = []
        seen = set()
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(symbols) + 1:
                raise DataError(
                    f"line {line_no}: expected {len(symbols) + 1} cells, got {len(row)}"
                )
            date = row[0].strip()
            if date in seen:
                raise DataError(f"line {line_no}: duplicate date {date}")
            if dates and date <= dates[-1]:
                raise DataError(f"line {line_no}: dates not strictly increasing at {date}")
            seen.add(date)
            dates.append(date)
            rows.append([_parse_cell(cell, line_no, symbols[k]) for k, cell in enumerate(row[1:])])
    if not rows:
        raise DataError(f"{path}: no data rows")
    return dates, symbols, np.asarray(rows, dtype=float)


def ingest_series(path: str) -> tuple[list[str], np.ndarray]:
    """Read a single-column series CSV (dates + one value column)."""
    dates, names, mat = ingest_returns(path)
    if mat.shape[1] != 1:
        raise DataError(f"{path}: expected exactly one value column, got {len(names)}")
    return dates, mat[:, 0]


def write_returns_csv(path: str, dates: Iterable[str], symbols: Iterable[str],
                      matrix: np.ndarray, provenance: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if provenance:
            fh.write(f"# {provenance}\n")
        writer = csv.writer(fh)
        writer.writerow(["date", *symbols])
        for date, row in zip(dates, np.asarray(matrix)):
            writer.writerow([date, *[repr(float(x)) for x in np.atleast_1d(row)]])


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    """Everything a CLI run needs, parsed from an INI file."""

    seed: int = 0
    out_dir: str = "out"
    returns_path: str | None = None
    vol_index_path: str | None = None
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    # simulate
    sim_n: int = 5
    sim_T: int = 250
    sim_edges: int | None = None
    # predict
    archive_path: str | None = None
    horizon: int = 20
    n_paths: int = 100
    # backtest
    window: int = 250
    refit_every: int = 20
    strategy: int = 1
    risk: RiskConfig = field(default_factory=RiskConfig)
    external_sigma_path: str | None = None
    # report inputs
    bundle_path: str | None = None
    ledger_path: str | None = None
    truth_path: str | None = None
    raw_text: str = ""

    def config_hash(self) -> str:
        return hashlib.sha256(self.raw_text.encode()).hexdigest()[:12]

    def provenance(self) -> str:
        return f"provenance config={self.config_hash()} seed={self.seed}"


def load_config(path: str) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            text = fh.read()
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc

    cfg = RunConfig(raw_text=text)

    def grab(section, option, cast, default):
        if parser.has_option(section, option):
            try:
                return cast(parser.get(section, option))
            except ValueError as exc:
                raise ConfigError(f"[{section}] {option}: {exc}") from exc
        return default

    cfg.seed = grab("run", "seed", int, cfg.seed)
    cfg.out_dir = grab("run", "out", str, cfg.out_dir)
    cfg.returns_path = grab("data", "returns", str, None)
    cfg.vol_index_path = grab("data", "vol_index", str, None)

    sc = SamplerConfig()
    sc.iterations = grab("sampler", "iterations", int, sc.iterations)
    sc.burn_in = grab("sampler", "burn_in", int, sc.burn_in)
    sc.thinning = grab("sampler", "thinning", int, sc.thinning)
    sc.init_window = grab("sampler", "init_window", int, sc.init_window)
    sc.init_lambda = grab("sampler", "init_lambda", float, sc.init_lambda)
    sc.ram_scale = grab("sampler", "ram_scale", float, sc.ram_scale)
    cfg.sampler = sc

    cfg.sim_n = grab("simulate", "n", int, cfg.sim_n)
    cfg.sim_T = grab("simulate", "T", int, cfg.sim_T)
    cfg.sim_edges = grab("simulate", "edges", int, cfg.sim_edges)

    cfg.archive_path = grab("predict", "archive", str, None)
    cfg.horizon = grab("predict", "horizon", int, cfg.horizon)
    cfg.n_paths = grab("predict", "paths", int, cfg.n_paths)

    cfg.window = grab("backtest", "window", int, cfg.window)
    cfg.refit_every = grab("backtest", "refit_every", int, cfg.refit_every)
    cfg.strategy = grab("backtest", "strategy", int, cfg.strategy)
    cfg.n_paths = grab("backtest", "paths", int, cfg.n_paths)
    risk = RiskConfig()
    risk.indicator = grab("backtest", "indicator", str, risk.indicator)
    risk.alpha = grab("backtest", "alpha", float, risk.alpha)
    risk.lookback = grab("backtest", "lookback", int, risk.lookback)
    cfg.risk = risk
    cfg.external_sigma_path = grab("backtest", "external_sigma", str, None)

    cfg.bundle_path = grab("report", "bundle", str, None)
    cfg.ledger_path = grab("report", "ledger", str, None)
    cfg.truth_path = grab("report", "truth", str, None)
    cfg.archive_path = grab("report", "archive", str, cfg.archive_path)

    if not 0.0 < cfg.risk.alpha < 0.5:
        raise ConfigError(f"risk alpha must be in (0, 0.5), got {cfg.risk.alpha}")
    return cfg


def require_input(path: str | None, label: str) -> str:
    """Existence check for a file a command is about to read."""
    if path is None:
        raise ConfigError(f"missing config entry for {label}")
    if not os.path.exists(path):
        raise ConfigError(f"{label} file does not exist: {path}")
    return path


# ---------------------------------------------------------------------------
# Archives (line-delimited JSON)
# ---------------------------------------------------------------------------


class ArchiveWriter:
    """Append-only streaming writer: a crashed fit still leaves a readable prefix."""

    def __init__(self, path: str, header: dict, provenance: str):
        self._fh = open(path, "w")
        payload = dict(header)
        payload["provenance"] = provenance
        payload["schema"] = SCHEMA_VERSION
        self._fh.write(json.dumps({"kind": "header", **payload}) + "\n")
        self._fh.flush()

    def record(self, rec: dict) -> None:
        self._fh.write(json.dumps({"kind": "sample", **rec}) + "\n")
        self._fh.flush()

    def finish(self, accept_stats: dict, edge_freq: np.ndarray) -> None:
        self._fh.write(json.dumps({"kind": "accept_stats", "stats": accept_stats}) + "\n")
        self._fh.write(json.dumps({"kind": "edge_freq", "data": edge_freq.tolist()}) + "\n")
        self.close()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()


def write_archive(path: str, archive: SampleArchive, provenance: str) -> None:
    writer = ArchiveWriter(path, archive.header, provenance)
    for rec in archive.records:
        writer.record(rec)
    writer.finish(archive.accept_stats, archive.edge_freq)


def read_archive(path: str) -> SampleArchive:
    header = None
    records = []
    accept_stats: dict = {}
    edge_freq = None
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path} line {line_no}: bad JSON ({exc})") from None
            kind = obj.pop("kind", None)
            if kind == "header":
                if obj.get("schema") != SCHEMA_VERSION:
                    raise DataError(
                        f"{path}: archive schema {obj.get('schema')} != supported {SCHEMA_VERSION}"
                    )
                header = obj
            elif kind == "sample":
                records.append(obj)
            elif kind == "accept_stats":
                accept_stats = obj["stats"]
            elif kind == "edge_freq":
                edge_freq = np.asarray(obj["data"], dtype=float)
            else:
                raise DataError(f"{path} line {line_no}: unknown record kind {kind!r}")
    if header is None:
        raise DataError(f"{path}: missing archive header")
    return SampleArchive(header=header, records=records, edge_freq=edge_freq,
                         accept_stats=accept_stats)


# ---------------------------------------------------------------------------
# Networks, bundles, ledgers, report tables
# ---------------------------------------------------------------------------


def write_network(path: str, dag: Dag, provenance: str | None = None) -> None:
    """Edge-list serialization: a header line ``n=<count>`` then 1-based ``i j`` lines."""
    with open(path, "w") as fh:
        if provenance:
            fh.write(f"# {provenance}\n")
        fh.write(f"n={dag.n}\n")
        for u, v in sorted(dag.edges):
            fh.write(f"{u + 1} {v + 1}\n")


def read_network(path: str) -> Dag:
    n = None
    edges = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("n="):
                n = int(line[2:])
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DataError(f"{path} line {line_no}: expected 'i j', got {line!r}")
            edges.append((int(parts[0]) - 1, int(parts[1]) - 1))
    if n is None:
        raise DataError(f"{path}: missing 'n=<count>' header line")
    return Dag(n, edges)


def read_sigma_series(path: str, n: int) -> np.ndarray:
    """Covariance forecasts as CSV rows of the lower triangle (day, sigma_i_j...)."""
    tril = [(i, j) for i in range(n) for j in range(i + 1)]
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(r for r in fh if not r.startswith("#"))
        header = next(reader)
        if len(header) != 1 + len(tril):
            raise DataError(f"{path}: expected {1 + len(tril)} columns for n={n}, got {len(header)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            sig = np.zeros((n, n))
            for (i, j), cell in zip(tril, row[1:]):
                sig[i, j] = sig[j, i] = _parse_cell(cell, line_no, f"sigma_{i + 1}_{j + 1}")
            rows.append(sig)
    if not rows:
        raise DataError(f"{path}: no covariance rows")
    return np.asarray(rows)


def write_bundle_csv(path: str, bundle: PredictionBundle, provenance: str) -> None:
    """One row per (path, horizon step): lower-triangle covariance, stats, returns."""
    n = bundle.returns.shape[2]
    tril = [(i, j) for i in range(n) for j in range(i + 1)]
    with open(path, "w", newline="") as fh:
        fh.write(f"# {provenance}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["path", "h"]
            + [f"sigma_{i + 1}_{j + 1}" for i, j in tril]
            + ["density", "clustering"]
            + [f"r_{k + 1}" for k in range(n)]
        )
        for ell in range(bundle.n_paths):
            for h in range(bundle.horizon):
                sig = bundle.sigmas[ell, h]
                writer.writerow(
                    [ell + 1, h + 1]
                    + [repr(float(sig[i, j])) for i, j in tril]
                    + [repr(float(bundle.density[ell, h])), repr(float(bundle.clustering[ell, h]))]
                    + [repr(float(x)) for x in bundle.returns[ell, h]]
                )


def write_ledger_csv(path: str, ledger: BacktestLedger, provenance: str,
                     dates: list[str] | None = None) -> None:
    n = ledger.weights.shape[1]
    with open(path, "w", newline="") as fh:
        fh.write(f"# {provenance}\n")
        writer = csv.writer(fh)
        writer.writerow(["date", "invested", "indicator", "threshold"]
                        + [f"w_{k + 1}" for k in range(n)]
                        + ["daily_return", "cum_value"])
        for k, day in enumerate(ledger.days):
            date = dates[day] if dates is not None else str(int(day))
            writer.writerow(
                [date, int(ledger.invested[k]),
                 repr(float(ledger.indicator[k])),
                 "" if np.isnan(ledger.threshold[k]) else repr(float(ledger.threshold[k]))]
                + [repr(float(x)) for x in ledger.weights[k]]
                + [repr(float(ledger.daily_return[k])), repr(float(ledger.cum_value[k]))]
            )


def write_table_csv(path: str, header: list[str], rows: list[list], provenance: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {provenance}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_truth(path: str, truth, provenance: str) -> None:
    """Persist a simulated latent truth (per-t graphs and counts plus parameters)."""
    from .mcmc import _theta_record

    with open(path, "w") as fh:
        fh.write(json.dumps({
            "kind": "header", "schema": SCHEMA_VERSION, "provenance": provenance,
            "n": truth.theta.n, "T": truth.path.T,
            "params": _theta_record(truth.theta),
            "a_counts": truth.theta.a_counts.tolist(),
            "d_counts": truth.theta.d_counts.tolist(),
        }) + "\n")
        for state in truth.path.states:
            fh.write(json.dumps({
                "kind": "state", "t": state.t,
                "edges": sorted(state.g.edges),
                "a": int(state.a), "d": int(state.d),
            }) + "\n")


def read_truth_networks(path: str) -> list[Dag]:
    n = None
    graphs: list[Dag] = []
    with open(path) as fh:
        for line in fh:
            obj = json.loads(line)
            if obj["kind"] == "header":
                n = obj["n"]
            elif obj["kind"] == "state":
                graphs.append(Dag(n, [tuple(e) for e in obj["edges"]]))
    if n is None or not graphs:
        raise DataError(f"{path}: not a truth file")
    return graphs
