"""Lognormal forward pricing kernel and bracketed implied volatility."""
from __future__ import annotations

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .chain import OptionType
from .errors import PricingError

#: Bracket for the annualized implied volatility root search.
IV_BRACKET = (1e-6, 20.0)

#: Required round-trip accuracy of the implied vol, absolute in price.
IV_PRICE_TOL = 1e-10


def black_price(forward, strike, vol_total, df=1.0, option_type: OptionType = OptionType.CALL):
    """Discounted lognormal option price on the forward.

    ``vol_total`` is the total standard deviation of the log return over the
    horizon (annualized vol times sqrt(tau)). At ``vol_total == 0`` the price
    degenerates to the discounted intrinsic value on the forward. Broadcasts
    over numpy array inputs; returns a float for scalar inputs.
    """
    f = np.asarray(forward, dtype=float)
    k = np.asarray(strike, dtype=float)
    s = np.asarray(vol_total, dtype=float)
    if np.any(s < 0):
        raise ValueError("vol_total must be >= 0")
    if np.any(f <= 0) or np.any(k <= 0):
        raise ValueError("forward and strike must be > 0")

    omega = 1.0 if option_type is OptionType.CALL else -1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = np.log(f / k) / s + 0.5 * s
        d2 = d1 - s
        live = omega * (f * ndtr(omega * d1) - k * ndtr(omega * d2))
    intrinsic = np.maximum(omega * (f - k), 0.0)
    price = df * np.where(s > 0, live, intrinsic)
    return float(price) if price.ndim == 0 else price


def implied_vol(price, forward, strike, df, tau, option_type: OptionType = OptionType.CALL) -> float:
    """Annualized vol reproducing ``price`` through :func:`black_price`.

    Solved by bracketed root finding on ``IV_BRACKET``; the round trip is
    accurate to ``IV_PRICE_TOL`` absolute in price.

    Raises:
        PricingError: price is outside the attainable no-arbitrage range.
    """
    if tau <= 0:
        raise ValueError("tau must be > 0")
    if df <= 0:
        raise ValueError("df must be > 0")
    sqrt_tau = np.sqrt(tau)
    lo, hi = IV_BRACKET

    def objective(sigma: float) -> float:
        return black_price(forward, strike, sigma * sqrt_tau, df, option_type) - price

    f_lo = objective(lo)
    f_hi = objective(hi)
    if f_lo > 0 or f_hi < 0:
        raise PricingError(
            f"no implied vol: price {price!r} outside attainable range "
            f"[{price + f_lo:.6g}, {price + f_hi:.6g}] for F={forward!r} K={strike!r}"
        )
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi

    sigma = brentq(objective, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps)
    if abs(objective(sigma)) > IV_PRICE_TOL:
        raise PricingError(f"implied vol root did not converge for price {price!r}")
    return float(sigma)
