"""Command-line entry point: run, ensemble, and centrality subcommands."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .centrality import debtrank_all, katz_scores, rank_banks
from .engine import ModePolicy, run_simulation
from .ensemble import (
    EnsembleConfig,
    run_ensemble,
    summarize,
    write_ensemble_csv,
    write_profile_csvs,
)
from .params import ConfigError, SimParams, load_config

log = logging.getLogger("ibsim")

EXIT_OK = 0
EXIT_CONFIG = 2


class CliError(Exception):
    """User-facing input problem; maps to exit code 2."""


def _load_params(args) -> SimParams:
    if args.config:
        try:
            params = load_config(args.config)
        except FileNotFoundError:
            raise CliError(f"config file not found: {args.config}")
        except ConfigError as exc:
            raise CliError("invalid config:\n  " + "\n  ".join(exc.errors))
    else:
        params = SimParams()
    if getattr(args, "mode", None):
        policy = ModePolicy.parse(args.mode)
        params = params.with_overrides(mode=policy.mode, rank_metric=policy.rank_metric)
    try:
        params.validate()
    except ConfigError as exc:
        raise CliError("invalid parameters:\n  " + "\n  ".join(exc.errors))
    return params


def _prepare_out(args, filenames: list[str]) -> str:
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    if not args.force:
        clashes = [f for f in filenames if os.path.exists(os.path.join(out_dir, f))]
        if clashes:
            raise CliError(
                f"refusing to overwrite {', '.join(clashes)} in {out_dir}; pass --force"
            )
    return out_dir


def cmd_run(args) -> int:
    params = _load_params(args)
    out_dir = _prepare_out(args, ["run_record.json", "events.log"])
    record, world = run_simulation(params, args.seed, log_events=True, return_world=True)
    with open(os.path.join(out_dir, "run_record.json"), "w") as fh:
        json.dump(record.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "events.log"), "w") as fh:
        for t, kind, a, b, amount in world.events:
            fh.write(f"{t},{kind},{a},{b},{amount!r}\n")
    log.info("run finished: t_fd=%s losses=%s", record.t_fd, record.losses)
    return EXIT_OK


def _parse_modes(text: str) -> list[ModePolicy]:
    policies = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        policies.append(ModePolicy.parse(part))
    if not policies:
        raise CliError("no modes given")
    return policies


def cmd_ensemble(args) -> int:
    params = _load_params(args)
    if not args.config:
        # desk-scale default profile
        params = params.with_overrides(n_banks=50, n_firms=50)
    if args.paper_scale:
        params = params.with_overrides(n_banks=100, n_firms=100)
        args.runs = 10_000
    try:
        policies = _parse_modes(args.modes)
    except ValueError as exc:
        raise CliError(str(exc))
    cfg = EnsembleConfig(
        params=params,
        n_runs=args.runs,
        base_seed=args.seed,
        policies=policies,
        paired=not args.unpaired,
    )
    profile_files = [f"debtrank_profile_{p.label}.csv" for p in policies]
    out_dir = _prepare_out(args, ["ensemble.csv", "summary.json"] + profile_files)
    result = run_ensemble(cfg, max_workers=args.workers)
    for run_id, label, error in result.failures:
        log.warning("run %d (%s) failed: %s", run_id, label, error)
    write_ensemble_csv(result.records, cfg, os.path.join(out_dir, "ensemble.csv"))
    write_profile_csvs(result.records, cfg, out_dir)
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summarize(result, cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("%d records written to %s", len(result.records), out_dir)
    return EXIT_OK


def _read_csv_rows(path: str, n_cols: int) -> list[tuple[int, list[str]]]:
    """Rows as (line_number, cells); a non-numeric first row is treated as a header."""
    try:
        with open(path, newline="") as fh:
            raw = list(csv.reader(fh))
    except FileNotFoundError:
        raise CliError(f"file not found: {path}")
    rows = []
    for lineno, cells in enumerate(raw, start=1):
        if not cells or all(not c.strip() for c in cells):
            continue
        if lineno == 1:
            try:
                float(cells[0])
            except ValueError:
                continue  # header row
        if len(cells) != n_cols:
            raise CliError(f"{path}: line {lineno}: expected {n_cols} columns, got {len(cells)}")
        rows.append((lineno, [c.strip() for c in cells]))
    return rows


def cmd_centrality(args) -> int:
    cap_rows = _read_csv_rows(args.capital, 2)
    if not cap_rows:
        raise CliError(f"{args.capital}: no capital rows")
    capital_by_bank: dict[int, float] = {}
    for lineno, (bank_s, cap_s) in cap_rows:
        try:
            bank, cap = int(bank_s), float(cap_s)
        except ValueError as exc:
            raise CliError(f"{args.capital}: line {lineno}: {exc}")
        if bank in capital_by_bank:
            raise CliError(f"{args.capital}: line {lineno}: duplicate bank id {bank}")
        capital_by_bank[bank] = cap
    n = max(capital_by_bank) + 1
    missing = sorted(set(range(n)) - set(capital_by_bank))
    if missing:
        raise CliError(f"{args.capital}: missing capital for banks {missing}")
    capital = np.array([capital_by_bank[i] for i in range(n)])
    L = np.zeros((n, n))
    for lineno, (borrower_s, lender_s, amount_s) in _read_csv_rows(args.liabilities, 3):
        try:
            borrower, lender, amount = int(borrower_s), int(lender_s), float(amount_s)
        except ValueError as exc:
            raise CliError(f"{args.liabilities}: line {lineno}: {exc}")
        if not (0 <= borrower < n and 0 <= lender < n):
            raise CliError(
                f"{args.liabilities}: line {lineno}: bank id outside 0..{n - 1}"
            )
        if borrower == lender:
            raise CliError(f"{args.liabilities}: line {lineno}: self-loan")
        if amount < 0:
            raise CliError(f"{args.liabilities}: line {lineno}: negative amount")
        L[borrower, lender] += amount  # duplicate rows are summed
    debt = debtrank_all(L, capital, psi=1.0)
    katz = katz_scores(L)
    rank_debt = rank_banks(debt, args.seed)
    rank_katz = rank_banks(katz, args.seed)
    lines = ["bank_id,debtrank,katz,rank_debt,rank_katz"]
    for i in range(n):
        lines.append(
            f"{i},{float(debt[i])!r},{float(katz[i])!r},{int(rank_debt[i])},{int(rank_katz[i])}"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ibsim",
        description="Interbank market simulator with risk-transparent counterparty selection.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single seeded simulation run")
    p_run.add_argument("--config", help="flat key=value parameter file")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--mode", help="override the configured mode, e.g. transparent")
    p_run.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p_run.set_defaults(func=cmd_run)

    p_ens = sub.add_parser("ensemble", help="many seeded runs, CSV tables and stats")
    p_ens.add_argument("--config", help="flat key=value parameter file")
    p_ens.add_argument("--out", default="out", help="output directory")
    p_ens.add_argument("--seed", type=int, default=0, help="base seed; run k uses base+k")
    p_ens.add_argument("--runs", type=int, default=1000)
    p_ens.add_argument(
        "--modes",
        default="normal,transparent,fast",
        help="comma list; append -katz for the Katz metric, e.g. transparent-katz",
    )
    p_ens.add_argument("--unpaired", action="store_true", help="disjoint seed ranges per mode")
    p_ens.add_argument("--paper-scale", action="store_true", help="10000 runs of 100 banks")
    p_ens.add_argument("--workers", type=int, default=None, help="max worker processes")
    p_ens.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p_ens.set_defaults(func=cmd_ensemble)

    p_cen = sub.add_parser("centrality", help="score a liability snapshot from CSV files")
    p_cen.add_argument("liabilities", help="CSV: borrower,lender,amount")
    p_cen.add_argument("capital", help="CSV: bank,capital")
    p_cen.add_argument("--out", help="output CSV path (default stdout)")
    p_cen.add_argument("--seed", type=int, default=0, help="tie-break seed for ranks")
    p_cen.set_defaults(func=cmd_centrality)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
