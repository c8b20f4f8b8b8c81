"""Exponential change of measure from risk-neutral to real-world density."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .mixture import MixtureDensity

#: Numerical guard; risk aversion beyond this is never meaningful here.
MAX_ABS_KAPPA = 20.0


def tilted_components(weights, log_means, log_vars, kappa: float) -> tuple[np.ndarray, np.ndarray]:
    """Tilt a Gaussian mixture by e^(kappa x) and renormalize.

    Component variances are unchanged; component i's log-mean shifts by
    kappa * v_i and its weight is re-scaled by its tilt normalizer. Weight
    arithmetic runs in log space with max subtraction, so large exponents
    never overflow for |kappa| <= 20.
    """
    if abs(kappa) > MAX_ABS_KAPPA:
        raise ValueError(f"|kappa| must be <= {MAX_ABS_KAPPA}, got {kappa}")
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    lm = np.atleast_1d(np.asarray(log_means, dtype=float))
    lv = np.atleast_1d(np.asarray(log_vars, dtype=float))
    if kappa == 0.0:
        return w.copy(), lm.copy()
    gamma = kappa * lm + 0.5 * kappa ** 2 * lv
    with np.errstate(divide="ignore"):
        log_unnorm = np.log(w) + gamma
    tilted_w = np.exp(log_unnorm - logsumexp(log_unnorm))
    tilted_w = tilted_w / tilted_w.sum()
    return tilted_w, lm + kappa * lv


@dataclass
class TiltedDensity:
    """Real-world density: the risk-neutral mixture after exponential tilting."""

    base: MixtureDensity
    kappa: float
    weights: np.ndarray
    log_means: np.ndarray

    def __post_init__(self) -> None:
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        self.log_means = np.atleast_1d(np.asarray(self.log_means, dtype=float))
        if abs(float(self.weights.sum()) - 1.0) > 1e-12:
            raise ValueError(f"tilted weights sum to {self.weights.sum()!r}, not 1")

    @property
    def log_vars(self) -> np.ndarray:
        """Component variances are invariant under the tilt."""
        return self.base.log_vars

    @property
    def tau(self) -> float:
        return self.base.tau


def tilt(density: MixtureDensity, kappa: float) -> TiltedDensity:
    """Apply the closed-form exponential tilt to a fitted mixture."""
    weights, log_means = tilted_components(
        density.weights, density.log_means, density.log_vars, kappa
    )
    return TiltedDensity(base=density, kappa=kappa, weights=weights, log_means=log_means)


def real_world_moments(tilted: TiltedDensity) -> tuple[float, float]:
    """Annualized (mean log return, variance rate) of the real-world density."""
    m1 = float(tilted.weights @ tilted.log_means)
    m2 = float(tilted.weights @ (tilted.log_vars + tilted.log_means ** 2))
    tau = tilted.tau
    return m1 / tau, (m2 - m1 ** 2) / tau
