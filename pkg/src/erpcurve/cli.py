"""Command line pipeline: ingest -> carry -> fit -> tilt -> premium -> report."""
from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import logging
import os
import sys
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from .calibrate import FitConfig, FitDiagnostics, fit_density
from .carry import fit_carry, pair_quotes, select_near_money
from .chain import ExpirySlice, OptionQuote, build_slices, load_column_mapping, parse_chain_file
from .erp import risk_return_points, term_structure_from_fits
from .errors import CacheError, ErpCurveError
from .mixture import MixtureDensity
from .report import (
    read_density_cache,
    write_density_cache,
    write_risk_return_csv,
    write_term_structure,
)
from .tilt import real_world_moments, tilt

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_TOTAL_FAILURE = 1
EXIT_PARTIAL = 2
EXIT_USAGE = 64

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


@dataclass
class RunConfig:
    """Everything one pipeline invocation needs, resolved from flags."""

    inputs: list[Path]
    fmt: str = "generic-csv"
    mapping: Path | None = None
    out_dir: Path = Path("out")
    emit: str = "csv"
    fit: FitConfig = field(default_factory=FitConfig)
    kappa: float = 3.0
    kappa_band: float = 0.5
    near_money_fraction: float = 0.5
    log_level: str = "INFO"

    def __post_init__(self) -> None:
        if self.kappa_band < 0:
            raise ValueError("kappa_band must be >= 0")
        if not 0.0 < self.near_money_fraction <= 1.0:
            raise ValueError("near_money_fraction must be in (0, 1]")

    def echo(self) -> dict:
        """Config summary embedded in output metadata."""
        return {
            "kappa": self.kappa,
            "kappa_band": self.kappa_band,
            "near_money_fraction": self.near_money_fraction,
            "n_components": self.fit.n_components,
            "precision_goal": self.fit.precision_goal,
            "max_steps": self.fit.max_steps,
            "sig_mult": self.fit.sig_mult,
            "n_restarts": self.fit.n_restarts,
            "seed": self.fit.seed,
        }


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse default exits 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="erpcurve", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--input", action="append", type=Path, default=None,
                       help="chain file; repeat for several files")
        p.add_argument("--format", default="generic-csv", help="chain format name")
        p.add_argument("--mapping", type=Path, default=None,
                       help="canonical=vendor column mapping file")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--emit", choices=("csv", "json", "both"), default="csv")
        p.add_argument("--kappa", type=float, default=3.0, help="risk aversion mid point")
        p.add_argument("--kappa-band", type=float, default=0.5,
                       help="half-width of the risk aversion band")
        p.add_argument("--n-components", type=int, default=5)
        p.add_argument("--max-steps", type=int, default=600)
        p.add_argument("--precision-goal", type=int, default=4)
        p.add_argument("--sig-mult", type=float, default=1.2)
        p.add_argument("--near-money-fraction", type=float, default=0.5)
        p.add_argument("--restarts", type=int, default=8)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--log-level", choices=LOG_LEVELS, default="INFO")

    add_common(sub.add_parser("fit", help="fit term structures from chain files"))
    add_common(sub.add_parser("riskreturn",
                              help="emit (variance rate, premium) pairs from cached densities"))
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    fit = FitConfig(
        n_components=args.n_components,
        precision_goal=args.precision_goal,
        max_steps=args.max_steps,
        sig_mult=args.sig_mult,
        n_restarts=args.restarts,
        seed=args.seed,
    )
    return RunConfig(
        inputs=list(args.input or []),
        fmt=args.format,
        mapping=args.mapping,
        out_dir=args.out,
        emit=args.emit,
        fit=fit,
        kappa=args.kappa,
        kappa_band=args.kappa_band,
        near_money_fraction=args.near_money_fraction,
        log_level=os.environ.get("ERPCURVE_LOG", args.log_level),
    )


def _load_quotes(config: RunConfig) -> tuple[dict[date, list[OptionQuote]], str]:
    mapping = load_column_mapping(config.mapping) if config.mapping else None
    digest = hashlib.sha256()
    by_date: dict[date, list[OptionQuote]] = {}
    for path in sorted(config.inputs):
        digest.update(Path(path).read_bytes())
        for quote in parse_chain_file(path, config.fmt, mapping):
            by_date.setdefault(quote.trade_date, []).append(quote)
    return by_date, digest.hexdigest()


def _fit_slice(
    chain_slice: ExpirySlice, config: RunConfig
) -> tuple[date, MixtureDensity, FitDiagnostics]:
    pairs = pair_quotes(chain_slice)
    pairs = select_near_money(pairs, chain_slice.spot, config.near_money_fraction)
    carry = fit_carry(pairs, chain_slice.spot, chain_slice.tau)
    density, diagnostics = fit_density(chain_slice, carry, config.fit)
    return chain_slice.expiry_date, density, diagnostics


def _fit_trade_date(
    trade_date: date,
    quotes: list[OptionQuote],
    config: RunConfig,
) -> tuple[list[tuple[date, MixtureDensity, FitDiagnostics]], int, float]:
    """Fit every usable expiration; failures skip the expiration, not the date."""
    slices = build_slices(quotes)
    fits: list[tuple[date, MixtureDensity, FitDiagnostics] | None] = [None] * len(slices)
    n_failed = 0
    max_workers = min(len(slices), os.cpu_count() or 1)
    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [pool.submit(_fit_slice, s, config) for s in slices]
        for i, future in enumerate(futures):  # reduce in expiry order
            try:
                fits[i] = future.result()
            except ErpCurveError as exc:
                n_failed += 1
                log.error("trade date %s expiry %s failed: %s",
                          trade_date, slices[i].expiry_date, exc)
    done = [f for f in fits if f is not None]
    return done, n_failed, slices[0].spot


def cmd_fit(config: RunConfig) -> int:
    try:
        by_date, digest = _load_quotes(config)
    except (ErpCurveError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_TOTAL_FAILURE
    if not by_date:
        log.error("no quotes found in input")
        return EXIT_TOTAL_FAILURE

    config.out_dir.mkdir(parents=True, exist_ok=True)
    n_written = 0
    n_failed = 0
    for trade_date in sorted(by_date):
        try:
            fits, failed, spot = _fit_trade_date(trade_date, by_date[trade_date], config)
        except ErpCurveError as exc:
            log.error("trade date %s failed: %s", trade_date, exc)
            n_failed += 1
            continue
        n_failed += failed
        if not fits:
            log.error("trade date %s: every expiration failed", trade_date)
            continue
        structure = term_structure_from_fits(
            trade_date, spot, fits, kappa=config.kappa, kappa_band=config.kappa_band
        )
        stem = config.out_dir / f"erp_{trade_date.isoformat()}"
        if config.emit in ("csv", "both"):
            write_term_structure(structure, "csv", stem.with_suffix(".csv"),
                                 config_echo=config.echo(), input_digest=digest)
        if config.emit in ("json", "both"):
            write_term_structure(structure, "json", stem.with_suffix(".json"),
                                 config_echo=config.echo(), input_digest=digest)
        write_density_cache(
            config.out_dir / f"densities_{trade_date.isoformat()}.json",
            trade_date, spot, fits, config_echo=config.echo(),
        )
        n_written += 1
        log.info("trade date %s: wrote %d expirations", trade_date, len(structure.points))

    if n_written == 0:
        return EXIT_TOTAL_FAILURE
    return EXIT_PARTIAL if n_failed else EXIT_OK


def _risk_return_rows(
    trade_date: date,
    spot: float,
    entries: list[tuple[date, MixtureDensity, FitDiagnostics | None]],
    config: RunConfig,
) -> list[tuple[date, float, float, float]]:
    structure = term_structure_from_fits(
        trade_date, spot, entries, kappa=config.kappa, kappa_band=config.kappa_band
    )
    densities = [e[1] for e in sorted(entries, key=lambda e: e[1].tau)]
    points = risk_return_points(structure, densities)
    return [
        (p.expiry_date, p.tau, variance_rate, erp_mid)
        for p, (variance_rate, erp_mid) in zip(structure.points, points)
    ]


def cmd_riskreturn(config: RunConfig) -> int:
    caches = sorted(config.out_dir.glob("densities_*.json"))
    runs: list[tuple[date, float, list]] = []
    if caches:
        for cache in caches:
            try:
                trade_date, spot, entries = read_density_cache(cache)
            except CacheError as exc:
                log.error("%s", exc)
                return EXIT_TOTAL_FAILURE
            runs.append((trade_date, spot, entries))
    elif config.inputs:
        log.info("no density cache under %s; refitting from input", config.out_dir)
        try:
            by_date, _ = _load_quotes(config)
        except (ErpCurveError, OSError) as exc:
            log.error("%s", exc)
            return EXIT_TOTAL_FAILURE
        for trade_date in sorted(by_date):
            try:
                fits, _, spot = _fit_trade_date(trade_date, by_date[trade_date], config)
            except ErpCurveError as exc:
                log.error("trade date %s failed: %s", trade_date, exc)
                continue
            if fits:
                runs.append((trade_date, spot, fits))
    else:
        log.error("no density cache under %s and no --input to refit from", config.out_dir)
        return EXIT_TOTAL_FAILURE

    if not runs:
        return EXIT_TOTAL_FAILURE
    config.out_dir.mkdir(parents=True, exist_ok=True)
    for trade_date, spot, entries in runs:
        rows = _risk_return_rows(trade_date, spot, entries, config)
        out = config.out_dir / f"riskreturn_{trade_date.isoformat()}.csv"
        write_risk_return_csv(out, trade_date, rows)
        log.info("trade date %s: wrote %d risk-return points", trade_date, len(rows))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
    except ValueError as exc:
        print(f"erpcurve: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=getattr(logging, config.log_level.upper(), logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.command == "fit":
        if not config.inputs:
            print("erpcurve: error: fit requires --input", file=sys.stderr)
            return EXIT_USAGE
        return cmd_fit(config)
    return cmd_riskreturn(config)


if __name__ == "__main__":
    sys.exit(main())
