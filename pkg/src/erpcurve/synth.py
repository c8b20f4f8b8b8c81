"""Synthetic option chains from known mixtures, plus brute-force quadrature oracles.

The oracles evaluate the defining integrals pointwise (mixture pdf, payoff,
exponential tilt) so round-trip and equivalence tests never share a code path
with the closed forms they check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Sequence

import numpy as np
from scipy.integrate import quad

from .chain import DAYS_PER_YEAR, OptionQuote, OptionType, Session
from .errors import QuadratureError
from .mixture import MixtureDensity, mixture_price

#: Smallest representable quote; sides below this are emitted as absent.
MIN_TICK = 0.05

#: Half-width of the integration window in units of the widest component's
#: total vol. e^((kappa+1)x) tail weight decays safely inside this for the
#: vol/horizon ranges this library targets.
QUAD_WIDTH_SIGMAS = 12.0

_QUAD_OPTS = dict(epsabs=1e-10, epsrel=1e-12, limit=400)


@dataclass
class SynthSpec:
    """Recipe for one synthetic per-expiration chain."""

    truth: MixtureDensity
    strike_grid: Sequence[float]
    spread: float = 0.0  # absolute half-spread applied to each side
    session: Session = Session.PM
    noise_seed: int = 0  # reserved for microstructure noise models
    trade_date: date = date(2020, 1, 2)

    def __post_init__(self) -> None:
        grid = np.asarray(self.strike_grid, dtype=float)
        if grid.size == 0 or np.any(grid <= 0):
            raise ValueError("strike_grid must be non-empty and positive")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("strike_grid must be strictly increasing")
        if self.spread < 0:
            raise ValueError("spread must be >= 0")
        self.strike_grid = grid


def _clip_side(value: float) -> float:
    return value if value >= MIN_TICK else 0.0


def generate_chain(spec: SynthSpec) -> list[OptionQuote]:
    """Emit call and put quotes at each strike, mid-priced from the truth.

    Sides falling below the minimum tick are emitted as 0 (no quote on that
    side), so deep wings exercise the one-sided ingestion filter.
    """
    truth = spec.truth
    days = round(truth.tau * DAYS_PER_YEAR)
    if days < 1:
        raise ValueError(f"truth tau {truth.tau!r} is under one day")
    expiry = spec.trade_date + timedelta(days=days)
    spot = truth.spot

    quotes: list[OptionQuote] = []
    for option_type in (OptionType.CALL, OptionType.PUT):
        mids = mixture_price(truth, spec.strike_grid, option_type)
        for strike, mid in zip(spec.strike_grid, mids):
            quotes.append(OptionQuote(
                trade_date=spec.trade_date,
                expiry_date=expiry,
                expiry_session=spec.session,
                option_type=option_type,
                strike=float(strike),
                bid=_clip_side(mid - spec.spread),
                ask=_clip_side(mid + spec.spread),
                underlying_close=spot,
            ))
    return quotes


def _log_pdf_terms(weights, log_means, log_vars) -> list[tuple[float, float, float]]:
    """Per-component (log weight + normalizer, mean, 1/(2 variance)) constants."""
    terms = []
    for w, m, v in zip(weights, log_means, log_vars):
        if w > 0:
            terms.append((math.log(w) - 0.5 * math.log(2.0 * math.pi * v), m, 0.5 / v))
    return terms


def _log_mixture_pdf(x: float, terms: Sequence[tuple[float, float, float]]) -> float:
    """Pointwise log density of the Gaussian mixture in the log return.

    Plain-Python max-subtraction sum; the component count is tiny and this
    sits in the inner loop of every quadrature call.
    """
    exponents = [c - (x - m) ** 2 * inv2v for c, m, inv2v in terms]
    top = max(exponents)
    return top + math.log(sum(math.exp(e - top) for e in exponents))


def _integrate(fn, lo: float, hi: float, breakpoints: Sequence[float], what: str) -> float:
    pts = sorted(p for p in breakpoints if lo < p < hi)
    out = quad(fn, lo, hi, points=pts or None, full_output=True, **_QUAD_OPTS)
    value, abserr = float(out[0]), float(out[1])
    # QUADPACK may flag the near-machine epsrel request even when the error
    # estimate is excellent; gate on the estimate itself.
    if not math.isfinite(value) or abserr > max(1e-10, 1e-9 * abs(value)):
        message = out[3] if len(out) > 3 else "error estimate too large"
        raise QuadratureError(f"{what}: integral {value!r}, abserr {abserr!r}: {message}")
    return value


def quadrature_erp(density: MixtureDensity, kappa: float) -> float:
    """Annualized percent premium by direct numerical integration.

    Tilts the mixture pointwise (normalizer also by quadrature) and
    integrates the gross real-world return, then subtracts the riskless
    gross return and annualizes. Independent of the closed-form path.
    """
    w = density.weights
    lm = density.log_means
    lv = density.log_vars
    terms = _log_pdf_terms(w, lm, lv)
    widest = float(np.sqrt(lv).max())
    tilted_centers = lm + kappa * lv
    gross_centers = lm + (kappa + 1.0) * lv
    lo = float(min(tilted_centers.min(), lm.min())) - QUAD_WIDTH_SIGMAS * widest
    hi = float(max(gross_centers.max(), lm.max())) + QUAD_WIDTH_SIGMAS * widest

    # common log-scale shift keeps both integrands inside float range
    scale = float(np.max(kappa * lm + 0.5 * kappa ** 2 * lv))

    def tilt_unnorm(x: float) -> float:
        return math.exp(kappa * x + _log_mixture_pdf(x, terms) - scale)

    def gross_unnorm(x: float) -> float:
        return math.exp((kappa + 1.0) * x + _log_mixture_pdf(x, terms) - scale)

    breakpoints = [*tilted_centers, *gross_centers, *lm]
    normalizer = _integrate(tilt_unnorm, lo, hi, breakpoints, "tilt normalizer")
    gross = _integrate(gross_unnorm, lo, hi, breakpoints, "gross return integral")
    if normalizer <= 0:
        raise QuadratureError(f"tilt normalizer {normalizer!r} is not positive")

    carry = density.carry
    tau = density.tau
    expected_gross = math.exp(carry.delta * tau) * gross / normalizer
    return 100.0 / tau * (expected_gross - math.exp(carry.r * tau))


def quadrature_price(density: MixtureDensity, strike: float, option_type: OptionType) -> float:
    """Discounted option price by integrating the payoff against the mixture pdf."""
    w = density.weights
    lm = density.log_means
    lv = density.log_vars
    spot = density.spot
    terms = _log_pdf_terms(w, lm, lv)
    widest = float(np.sqrt(lv).max())
    lo = float(lm.min()) - QUAD_WIDTH_SIGMAS * widest
    hi = float(lm.max()) + QUAD_WIDTH_SIGMAS * widest
    kink = math.log(strike / spot)

    if option_type is OptionType.CALL:
        def integrand(x: float) -> float:
            return (spot * math.exp(x) - strike) * math.exp(_log_mixture_pdf(x, terms))
        lo = max(lo, kink)
    else:
        def integrand(x: float) -> float:
            return (strike - spot * math.exp(x)) * math.exp(_log_mixture_pdf(x, terms))
        hi = min(hi, kink)

    if hi <= lo:
        return 0.0
    undiscounted = _integrate(integrand, lo, hi, list(lm), f"payoff integral K={strike}")
    return density.carry.discount * undiscounted
