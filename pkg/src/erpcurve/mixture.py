"""Gaussian mixture model of the risk-neutral log price-return density."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .carry import CarryParams
from .chain import OptionType
from .pricing import black_price

WEIGHT_SUM_TOL = 1e-12
MARTINGALE_RTOL = 1e-10


@dataclass
class MixtureDensity:
    """N-component Gaussian mixture for the log price-return over one horizon.

    Component i is normal with mean ``drifts[i] * tau`` and variance
    ``vols[i]**2 * tau``. Construction enforces weight normalization and the
    martingale condition sum_i w_i e^(a_i + v_i/2) = e^((r - delta) tau)
    against the attached carry; use :func:`make_martingale_mixture` to build
    one from free parameters.
    """

    weights: np.ndarray
    drifts: np.ndarray
    vols: np.ndarray
    tau: float
    carry: CarryParams

    def __post_init__(self) -> None:
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        self.drifts = np.atleast_1d(np.asarray(self.drifts, dtype=float))
        self.vols = np.atleast_1d(np.asarray(self.vols, dtype=float))
        n = self.weights.size
        if self.drifts.size != n or self.vols.size != n:
            raise ValueError("weights, drifts, vols must have equal length")
        if n < 1:
            raise ValueError("mixture needs at least one component")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.drifts))
                and np.all(np.isfinite(self.vols))):
            raise ValueError("mixture parameters must be finite")
        if np.any(self.weights < 0):
            raise ValueError("weights must be non-negative")
        if abs(float(self.weights.sum()) - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {self.weights.sum()!r}, not 1")
        if np.any(self.vols <= 0):
            raise ValueError("vols must be strictly positive")
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if abs(self.tau - self.carry.tau) > 1e-12 * max(1.0, self.tau):
            raise ValueError(f"tau {self.tau!r} disagrees with carry tau {self.carry.tau!r}")
        target = self.carry.carry_factor
        gross = float(np.exp(logsumexp(self.log_means + 0.5 * self.log_vars, b=self.weights)))
        if abs(gross - target) > MARTINGALE_RTOL * target:
            raise ValueError(
                f"martingale violated: repriced carry factor {gross!r} vs {target!r}"
            )

    @property
    def n(self) -> int:
        return self.weights.size

    @property
    def log_means(self) -> np.ndarray:
        """Per-component mean of the log return over the horizon."""
        return self.drifts * self.tau

    @property
    def log_vars(self) -> np.ndarray:
        """Per-component variance of the log return over the horizon."""
        return self.vols ** 2 * self.tau

    @property
    def spot(self) -> float:
        return self.carry.spot

    @property
    def component_forwards(self) -> np.ndarray:
        """Expected terminal level under each component."""
        return self.spot * np.exp(self.log_means + 0.5 * self.log_vars)


def make_martingale_mixture(weights, drifts, vols, tau: float, carry: CarryParams) -> MixtureDensity:
    """Build a valid mixture from free parameters.

    Weights are renormalized to sum to 1 and every drift is shifted by the
    same constant, which restores the martingale condition exactly without
    breaking component symmetry.
    """
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    mu = np.atleast_1d(np.asarray(drifts, dtype=float))
    sig = np.atleast_1d(np.asarray(vols, dtype=float))
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be non-negative with positive sum")
    w = w / w.sum()
    target_log = (carry.r - carry.delta) * tau
    current_log = float(logsumexp(mu * tau + 0.5 * sig ** 2 * tau, b=w))
    shift = (target_log - current_log) / tau
    return MixtureDensity(weights=w, drifts=mu + shift, vols=sig, tau=tau, carry=carry)


def mixture_price(density: MixtureDensity, strike, option_type: OptionType):
    """Discounted option price under the mixture: weighted component prices.

    Each component is lognormal with its own forward, so the slice price is
    the weight-averaged discounted lognormal price. Broadcasts over an array
    of strikes; returns a float for a scalar strike.
    """
    k = np.asarray(strike, dtype=float)
    scalar = k.ndim == 0
    k2 = np.atleast_1d(k)
    f_i = density.component_forwards[:, None]
    s_i = np.sqrt(density.log_vars)[:, None]
    per_component = black_price(f_i, k2[None, :], s_i, 1.0, option_type)
    price = density.carry.discount * (density.weights @ per_component)
    return float(price[0]) if scalar else price
