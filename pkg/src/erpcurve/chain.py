"""End-of-day option chain ingestion: parsing and quote cleaning rules."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ChainParseError, IngestError

log = logging.getLogger(__name__)

GENERIC_CSV = "generic-csv"
KNOWN_FORMATS = (GENERIC_CSV,)

#: Minimum two-sided quotes (calls + puts) a slice needs before the default
#: five-component mixture (13 free parameters) is identifiable.
MIN_USABLE_QUOTES = 8

DAYS_PER_YEAR = 365

CANONICAL_COLUMNS = (
    "trade_date",
    "expiry_date",
    "session",
    "type",
    "strike",
    "bid",
    "ask",
    "underlying",
)
# session may be absent; rows then default to PM
REQUIRED_COLUMNS = tuple(c for c in CANONICAL_COLUMNS if c != "session")


class Session(Enum):
    AM = "AM"
    PM = "PM"


class OptionType(Enum):
    CALL = "C"
    PUT = "P"


@dataclass(frozen=True)
class OptionQuote:
    """One strike-level bid/ask record for a trade date and expiration."""

    trade_date: date
    expiry_date: date
    expiry_session: Session
    option_type: OptionType
    strike: float
    bid: float
    ask: float
    underlying_close: float

    def is_two_sided(self) -> bool:
        """Both sides quoted and not crossed; only such quotes survive ingestion."""
        return self.bid > 0.0 and self.ask > 0.0 and self.ask >= self.bid

    @property
    def mid(self) -> float:
        return 0.5 * (self.bid + self.ask)

    @property
    def half_spread(self) -> float:
        return 0.5 * (self.ask - self.bid)


@dataclass(frozen=True)
class ExpirySlice:
    """Clean per-expiration quote set: two-sided only, single session, sorted strikes."""

    trade_date: date
    expiry_date: date
    tau: float  # year fraction, integer days / 365 exactly
    calls: tuple[OptionQuote, ...]
    puts: tuple[OptionQuote, ...]
    spot: float

    @property
    def n_quotes(self) -> int:
        return len(self.calls) + len(self.puts)


def load_column_mapping(path: str | Path) -> dict[str, str]:
    """Read a canonical_column=vendor_column mapping file, one pair per line."""
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ChainParseError(f"{path}: line {lineno}: expected canonical=vendor, got {line!r}")
        canonical, vendor = (part.strip() for part in line.split("=", 1))
        if canonical not in CANONICAL_COLUMNS:
            raise ChainParseError(f"{path}: line {lineno}: unknown canonical column {canonical!r}")
        if not vendor:
            raise ChainParseError(f"{path}: line {lineno}: empty vendor column for {canonical!r}")
        mapping[canonical] = vendor
    return mapping


def _parse_date(raw: str) -> date:
    return date.fromisoformat(raw.strip())


def _parse_row(path, row_no: int, row: Sequence[str], idx: dict[str, int | None]) -> OptionQuote:
    def cell(column: str) -> str:
        i = idx[column]
        assert i is not None
        if i >= len(row):
            raise ChainParseError(f"{path}: row {row_no}: missing column {column!r}")
        return row[i].strip()

    def fail(column: str, raw: str) -> ChainParseError:
        return ChainParseError(f"{path}: row {row_no}: invalid {column} value {raw!r}")

    values: dict[str, object] = {}
    for column in ("trade_date", "expiry_date"):
        raw = cell(column)
        try:
            values[column] = _parse_date(raw)
        except ValueError:
            raise fail(column, raw) from None
    for column in ("strike", "bid", "ask", "underlying"):
        raw = cell(column)
        try:
            values[column] = float(raw)
        except ValueError:
            raise fail(column, raw) from None

    if idx["session"] is None:
        session = Session.PM
    else:
        raw = cell("session")
        try:
            session = Session(raw.upper())
        except ValueError:
            raise fail("session", raw) from None

    raw = cell("type")
    try:
        option_type = OptionType(raw.upper())
    except ValueError:
        raise fail("type", raw) from None

    strike = values["strike"]
    if strike <= 0:
        raise fail("strike", cell("strike"))
    if values["bid"] < 0:
        raise fail("bid", cell("bid"))
    if values["ask"] < 0:
        raise fail("ask", cell("ask"))
    if values["underlying"] <= 0:
        raise fail("underlying", cell("underlying"))

    return OptionQuote(
        trade_date=values["trade_date"],
        expiry_date=values["expiry_date"],
        expiry_session=session,
        option_type=option_type,
        strike=strike,
        bid=values["bid"],
        ask=values["ask"],
        underlying_close=values["underlying"],
    )


def parse_chain_file(
    path: str | Path,
    fmt: str = GENERIC_CSV,
    column_mapping: dict[str, str] | None = None,
) -> list[OptionQuote]:
    """Parse one chain file into quotes, row order preserved, no filtering.

    Args:
        path: CSV file with a header row.
        fmt: chain format name; only ``generic-csv`` is known.
        column_mapping: optional canonical->vendor column renames.

    Raises:
        ChainParseError: unknown format, missing columns, or a malformed row
            (the message names the row number and column).
    """
    if fmt not in KNOWN_FORMATS:
        raise ChainParseError(f"unknown chain format {fmt!r}; known formats: {', '.join(KNOWN_FORMATS)}")
    names = {c: c for c in CANONICAL_COLUMNS}
    if column_mapping:
        names.update(column_mapping)

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ChainParseError(f"{path}: empty file, expected a header row")
        header = [h.strip() for h in header]
        idx: dict[str, int | None] = {}
        for column in CANONICAL_COLUMNS:
            try:
                idx[column] = header.index(names[column])
            except ValueError:
                idx[column] = None
        missing = [c for c in REQUIRED_COLUMNS if idx[c] is None]
        if missing:
            raise ChainParseError(f"{path}: missing required columns: {', '.join(missing)}")

        quotes: list[OptionQuote] = []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            quotes.append(_parse_row(path, row_no, row, idx))
    return quotes


def _resolve_sessions(quotes: list[OptionQuote], expiry: date) -> list[OptionQuote]:
    sessions = {q.expiry_session for q in quotes}
    if len(sessions) == 1:
        return quotes
    kept = [q for q in quotes if q.expiry_session is Session.PM]
    log.info("expiry %s has AM and PM sessions; keeping PM only (%d of %d quotes)",
             expiry, len(kept), len(quotes))
    return kept


def _dedupe_last(quotes: list[OptionQuote], expiry: date) -> list[OptionQuote]:
    seen: dict[tuple[OptionType, float], OptionQuote] = {}
    for q in quotes:
        key = (q.option_type, q.strike)
        if key in seen:
            log.warning("expiry %s: duplicate %s strike %g, keeping last occurrence",
                        expiry, q.option_type.name.lower(), q.strike)
        seen[key] = q
    return list(seen.values())


def build_slices(
    quotes: Iterable[OptionQuote],
    min_quotes: int = MIN_USABLE_QUOTES,
) -> list[ExpirySlice]:
    """Group quotes into clean per-expiration slices.

    Applies, in order: drop one-sided and crossed quotes; on dual-session
    expiries keep PM only; dedupe (type, strike) keeping the last row; sort
    by strike; drop slices with fewer than ``min_quotes`` usable quotes.

    Raises:
        IngestError: mixed trade dates / underlying closes, or no slice survives.
    """
    quotes = list(quotes)
    if not quotes:
        raise IngestError("no usable expirations: empty quote collection")

    trade_dates = sorted({q.trade_date for q in quotes})
    if len(trade_dates) > 1:
        raise IngestError(f"mixed trade dates in one chain: {', '.join(str(d) for d in trade_dates)}")
    trade_date = trade_dates[0]
    spots = sorted({q.underlying_close for q in quotes})
    if len(spots) > 1:
        raise IngestError(f"mixed underlying closes in one chain: {spots}")
    spot = spots[0]

    usable: list[OptionQuote] = []
    n_one_sided = n_crossed = 0
    for q in quotes:
        if q.bid > 0 and q.ask > 0 and q.ask < q.bid:
            n_crossed += 1
            log.warning("dropping crossed quote %s %s K=%g bid=%g ask=%g",
                        q.expiry_date, q.option_type.name.lower(), q.strike, q.bid, q.ask)
        elif not q.is_two_sided():
            n_one_sided += 1
        else:
            usable.append(q)
    if n_one_sided:
        log.debug("dropped %d one-sided quotes", n_one_sided)

    by_expiry: dict[date, list[OptionQuote]] = {}
    for q in usable:
        by_expiry.setdefault(q.expiry_date, []).append(q)

    slices: list[ExpirySlice] = []
    for expiry in sorted(by_expiry):
        group = _dedupe_last(_resolve_sessions(by_expiry[expiry], expiry), expiry)
        days = (expiry - trade_date).days
        if days <= 0:
            log.warning("expiry %s is not after trade date %s; dropping %d quotes",
                        expiry, trade_date, len(group))
            continue
        calls = tuple(sorted((q for q in group if q.option_type is OptionType.CALL),
                             key=lambda q: q.strike))
        puts = tuple(sorted((q for q in group if q.option_type is OptionType.PUT),
                            key=lambda q: q.strike))
        n = len(calls) + len(puts)
        if n < min_quotes:
            log.warning("expiry %s has only %d usable quotes (< %d); dropping slice",
                        expiry, n, min_quotes)
            continue
        slices.append(ExpirySlice(
            trade_date=trade_date,
            expiry_date=expiry,
            tau=days / DAYS_PER_YEAR,
            calls=calls,
            puts=puts,
            spot=spot,
        ))

    if not slices:
        raise IngestError("no usable expirations")
    return slices
