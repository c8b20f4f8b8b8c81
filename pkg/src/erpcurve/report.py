"""Stable CSV/JSON serialization of term structures and density caches."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from datetime import date
from pathlib import Path
from typing import Sequence

from .calibrate import FitDiagnostics
from .carry import CarryParams
from .erp import ErpTermStructure
from .errors import CacheError
from .mixture import MixtureDensity, make_martingale_mixture

CSV_COLUMNS = (
    "trade_date",
    "expiry_date",
    "tau_years",
    "erp_lo_annpct",
    "erp_mid_annpct",
    "erp_hi_annpct",
    "r",
    "delta",
    "forward",
    "frac_inside_spread",
)

RISK_RETURN_COLUMNS = ("trade_date", "expiry_date", "tau_years", "variance_rate", "erp_mid_annpct")


def _fmt(x: float) -> str:
    """Six significant digits, plain notation for term-structure magnitudes."""
    return f"{x:.6g}"


def _sig6(x: float) -> float:
    return float(_fmt(x))


@dataclass
class TermStructureRecord:
    """Flat, JSON-ready view of a term structure plus run metadata."""

    trade_date: str
    spot: float
    config: dict
    version: str
    input_digest: str | None
    points: list[dict]

    def to_obj(self) -> dict:
        return asdict(self)

    @classmethod
    def from_obj(cls, obj: dict) -> "TermStructureRecord":
        try:
            return cls(
                trade_date=obj["trade_date"],
                spot=obj["spot"],
                config=obj["config"],
                version=obj["version"],
                input_digest=obj["input_digest"],
                points=obj["points"],
            )
        except KeyError as exc:
            raise CacheError(f"term structure record missing field {exc}") from None

    @classmethod
    def from_structure(
        cls,
        structure: ErpTermStructure,
        config_echo: dict | None = None,
        input_digest: str | None = None,
    ) -> "TermStructureRecord":
        from . import __version__

        points = []
        for p in structure.points:
            diag = p.diagnostics
            points.append({
                "trade_date": structure.trade_date.isoformat(),
                "expiry_date": p.expiry_date.isoformat(),
                "tau_years": _sig6(p.tau),
                "erp_lo_annpct": _sig6(p.erp_lo),
                "erp_mid_annpct": _sig6(p.erp_mid),
                "erp_hi_annpct": _sig6(p.erp_hi),
                "r": _sig6(p.carry.r),
                "delta": _sig6(p.carry.delta),
                "forward": _sig6(p.carry.forward),
                "frac_inside_spread": _sig6(diag.frac_inside_spread) if diag else None,
            })
        return cls(
            trade_date=structure.trade_date.isoformat(),
            spot=_sig6(structure.spot),
            config=dict(config_echo or {}),
            version=__version__,
            input_digest=input_digest,
            points=points,
        )


def write_term_structure(
    structure: ErpTermStructure,
    fmt: str,
    path: str | Path,
    config_echo: dict | None = None,
    input_digest: str | None = None,
) -> None:
    """Write one term structure as ``csv`` or ``json``.

    Both formats render every number at 6 significant digits, so emissions of
    the same structure carry identical numeric values.
    """
    record = TermStructureRecord.from_structure(structure, config_echo, input_digest)
    path = Path(path)
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for p in record.points:
                writer.writerow([
                    p[col] if col in ("trade_date", "expiry_date")
                    else ("" if p[col] is None else _fmt(p[col]))
                    for col in CSV_COLUMNS
                ])
    elif fmt == "json":
        path.write_text(json.dumps(record.to_obj(), indent=2) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"unknown output format {fmt!r}; expected csv or json")


def read_term_structure(path: str | Path) -> TermStructureRecord:
    """Parse a JSON term-structure file back into a record."""
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CacheError(f"corrupt term structure file {path}: {exc}") from None
    return TermStructureRecord.from_obj(obj)


def write_risk_return_csv(
    path: str | Path,
    trade_date: date,
    rows: Sequence[tuple[date, float, float, float]],
) -> None:
    """Rows of (expiry, tau, variance_rate, erp_mid) for the risk-return plot."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RISK_RETURN_COLUMNS)
        for expiry, tau, variance_rate, erp_mid in rows:
            writer.writerow([
                trade_date.isoformat(),
                expiry.isoformat(),
                _fmt(tau),
                _fmt(variance_rate),
                _fmt(erp_mid),
            ])


def write_density_cache(
    path: str | Path,
    trade_date: date,
    spot: float,
    entries: Sequence[tuple[date, MixtureDensity, FitDiagnostics | None]],
    config_echo: dict | None = None,
) -> None:
    """Persist fitted densities at full precision for later reuse."""
    expirations = []
    for expiry, density, diagnostics in entries:
        expirations.append({
            "expiry_date": expiry.isoformat(),
            "tau": density.tau,
            "carry": {
                "tau": density.carry.tau,
                "r": density.carry.r,
                "delta": density.carry.delta,
                "forward": density.carry.forward,
                "n_pairs_used": density.carry.n_pairs_used,
            },
            "weights": density.weights.tolist(),
            "drifts": density.drifts.tolist(),
            "vols": density.vols.tolist(),
            "diagnostics": asdict(diagnostics) if diagnostics else None,
        })
    obj = {
        "trade_date": trade_date.isoformat(),
        "spot": spot,
        "config": dict(config_echo or {}),
        "expirations": expirations,
    }
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def read_density_cache(
    path: str | Path,
) -> tuple[date, float, list[tuple[date, MixtureDensity, FitDiagnostics | None]]]:
    """Load a density cache written by :func:`write_density_cache`.

    Raises:
        CacheError: file is not valid JSON or lacks required fields; the
            message names the file.
    """
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CacheError(f"corrupt density cache {path}: {exc}") from None
    try:
        trade_date = date.fromisoformat(obj["trade_date"])
        spot = float(obj["spot"])
        entries = []
        for e in obj["expirations"]:
            carry = CarryParams(
                tau=float(e["carry"]["tau"]),
                r=float(e["carry"]["r"]),
                delta=float(e["carry"]["delta"]),
                forward=float(e["carry"]["forward"]),
                n_pairs_used=int(e["carry"]["n_pairs_used"]),
            )
            density = make_martingale_mixture(
                weights=e["weights"],
                drifts=e["drifts"],
                vols=e["vols"],
                tau=float(e["tau"]),
                carry=carry,
            )
            diag = FitDiagnostics(**e["diagnostics"]) if e.get("diagnostics") else None
            entries.append((date.fromisoformat(e["expiry_date"]), density, diag))
    except (KeyError, TypeError, ValueError) as exc:
        raise CacheError(f"corrupt density cache {path}: {exc!r}") from None
    return trade_date, spot, entries
