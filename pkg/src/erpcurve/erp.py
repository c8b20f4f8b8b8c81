"""Annualized equity risk premium per expiration and term-structure assembly."""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date
from typing import Sequence

from scipy.special import logsumexp

from .calibrate import FitDiagnostics
from .carry import CarryParams
from .chain import ExpirySlice
from .errors import ErpComputationError
from .mixture import MixtureDensity
from .tilt import real_world_moments, tilt

#: exp() argument beyond this cannot be a real premium; fail loudly.
MAX_LOG_GROSS = 700.0


def erp_annualized(density: MixtureDensity, kappa: float) -> float:
    """Annualized percent equity risk premium implied by the tilted mixture.

    Evaluates (100/tau) * (e^(delta tau) * E_p[e^X] - e^(r tau)), where the
    real-world expectation is a closed-form exponential moment of the tilted
    mixture, computed through log-sum-exp.
    """
    tilted = tilt(density, kappa)
    exponents = density.log_means + (kappa + 0.5) * density.log_vars
    log_expectation = float(logsumexp(exponents, b=tilted.weights))
    carry = density.carry
    log_gross = carry.delta * density.tau + log_expectation
    if log_gross > MAX_LOG_GROSS:
        raise ErpComputationError(
            f"gross return exponent {log_gross:.3g} overflows; density parameters are corrupt"
        )
    riskless_gross = math.exp(carry.r * density.tau)
    return 100.0 / density.tau * (math.exp(log_gross) - riskless_gross)


@dataclass(frozen=True)
class ErpPoint:
    """One expiration's premium with its risk-aversion band."""

    expiry_date: date
    tau: float
    erp_mid: float
    erp_lo: float
    erp_hi: float
    kappa_mid: float
    kappa_lo: float
    kappa_hi: float
    carry: CarryParams
    diagnostics: FitDiagnostics | None = None


@dataclass(frozen=True)
class ErpTermStructure:
    """All fitted expirations of one trade date, ordered by horizon."""

    trade_date: date
    spot: float
    points: tuple[ErpPoint, ...]

    def __post_init__(self) -> None:
        if not self.points:
            raise ValueError("term structure needs at least one point")
        taus = [p.tau for p in self.points]
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ValueError("points must be strictly increasing in tau")


def term_structure_from_fits(
    trade_date: date,
    spot: float,
    fits: Sequence[tuple[date, MixtureDensity, FitDiagnostics | None]],
    kappa: float = 3.0,
    kappa_band: float = 0.5,
) -> ErpTermStructure:
    """Assemble a term structure from (expiry, density, diagnostics) fits."""
    if not fits:
        raise ValueError("no fitted expirations")
    if kappa_band < 0:
        raise ValueError("kappa_band must be >= 0")
    points = []
    for expiry, density, diagnostics in sorted(fits, key=lambda f: f[1].tau):
        lo, mid, hi = kappa - kappa_band, kappa, kappa + kappa_band
        points.append(ErpPoint(
            expiry_date=expiry,
            tau=density.tau,
            erp_mid=erp_annualized(density, mid),
            erp_lo=erp_annualized(density, lo),
            erp_hi=erp_annualized(density, hi),
            kappa_mid=mid,
            kappa_lo=lo,
            kappa_hi=hi,
            carry=density.carry,
            diagnostics=diagnostics,
        ))
    return ErpTermStructure(trade_date=trade_date, spot=spot, points=tuple(points))


def build_term_structure(
    slices: Sequence[ExpirySlice],
    carries: Sequence[CarryParams],
    densities: Sequence[MixtureDensity],
    diagnostics: Sequence[FitDiagnostics | None] | None = None,
    kappa: float = 3.0,
    kappa_band: float = 0.5,
) -> ErpTermStructure:
    """One ErpPoint per fitted expiration, mid at kappa, band at kappa -+ band."""
    if not slices:
        raise ValueError("no fitted expirations")
    if not (len(slices) == len(carries) == len(densities)):
        raise ValueError("slices, carries, densities must align")
    if diagnostics is None:
        diagnostics = [None] * len(slices)
    elif len(diagnostics) != len(slices):
        raise ValueError("diagnostics must align with slices")
    for s, c, d in zip(slices, carries, densities):
        if abs(s.tau - d.tau) > 1e-12 or d.carry is not c and abs(c.tau - d.tau) > 1e-12:
            raise ValueError(f"misaligned expiration at tau {s.tau!r}")
    fits = [(s.expiry_date, d, g) for s, d, g in zip(slices, densities, diagnostics)]
    return term_structure_from_fits(
        slices[0].trade_date, slices[0].spot, fits, kappa=kappa, kappa_band=kappa_band
    )


def risk_return_points(
    structure: ErpTermStructure,
    densities: Sequence[MixtureDensity],
) -> list[tuple[float, float]]:
    """(real-world variance rate, mid premium) pairs for the risk-return plot."""
    if len(densities) != len(structure.points):
        raise ValueError("densities must align with structure points")
    out = []
    for point, density in zip(structure.points, densities):
        if abs(point.tau - density.tau) > 1e-12:
            raise ValueError(f"misaligned expiration at tau {point.tau!r}")
        _, variance_rate = real_world_moments(tilt(density, point.kappa_mid))
        out.append((variance_rate, point.erp_mid))
    return out
