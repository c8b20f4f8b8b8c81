"""Mixture calibration to out-of-the-money quotes."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp, ndtr

from .carry import CarryParams
from .chain import MIN_USABLE_QUOTES, ExpirySlice, OptionQuote, OptionType
from .errors import CalibrationError, PricingError
from .mixture import MixtureDensity, make_martingale_mixture, mixture_price
from .pricing import implied_vol

log = logging.getLogger(__name__)

#: Half of the exchange minimum tick; floors the spread weight of each quote.
MIN_HALF_SPREAD = 0.025

#: Lower box bound for fitted component vols (annualized).
VOL_FLOOR = 1e-4

_LOGIT_BOUND = 30.0
_LOG_MEAN_BOUND = 20.0


@dataclass
class FitConfig:
    """Optimizer and model knobs for the per-expiration density fit."""

    n_components: int = 5
    precision_goal: int = 4
    max_steps: int = 600
    sig_mult: float = 1.2
    n_restarts: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_components < 1:
            raise ValueError("n_components must be >= 1")
        if self.sig_mult < 1:
            raise ValueError("sig_mult must be >= 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.precision_goal < 1:
            raise ValueError("precision_goal must be >= 1")
        if self.n_restarts < 1:
            raise ValueError("n_restarts must be >= 1")


@dataclass
class FitDiagnostics:
    """Fit quality summary reported with every calibrated density."""

    objective_value: float
    n_quotes_fit: int
    frac_inside_spread: float
    rmse_price: float
    converged: bool
    steps_used: int


@dataclass(frozen=True)
class FitTarget:
    """One out-of-the-money quote entering the objective."""

    quote: OptionQuote
    mid: float
    half_spread: float

    @property
    def strike(self) -> float:
        return self.quote.strike

    @property
    def option_type(self) -> OptionType:
        return self.quote.option_type


def select_fit_targets(
    chain_slice: ExpirySlice,
    carry: CarryParams,
    min_targets: int = MIN_USABLE_QUOTES,
) -> list[FitTarget]:
    """Out-of-the-money quotes relative to the forward, with spread weights.

    Calls at strikes >= forward and puts below it; a strike exactly at the
    forward counts as a call. Each target carries the quote mid and a
    half-spread floored at MIN_HALF_SPREAD.
    """
    targets = []
    for q in chain_slice.calls:
        if q.strike >= carry.forward:
            targets.append(FitTarget(q, q.mid, max(q.half_spread, MIN_HALF_SPREAD)))
    for q in chain_slice.puts:
        if q.strike < carry.forward:
            targets.append(FitTarget(q, q.mid, max(q.half_spread, MIN_HALF_SPREAD)))
    if len(targets) < min_targets:
        raise CalibrationError(
            f"expiry {chain_slice.expiry_date}: only {len(targets)} out-of-the-money "
            f"target(s), need >= {min_targets}"
        )
    return targets


def _target_vols(targets: list[FitTarget], carry: CarryParams) -> tuple[float, float]:
    """(at-the-money implied vol, highest implied vol) over the targets."""
    df = carry.discount
    ivs: list[tuple[float, float]] = []  # (|log moneyness|, iv)
    for t in targets:
        try:
            iv = implied_vol(t.mid, carry.forward, t.strike, df, carry.tau, t.option_type)
        except PricingError:
            log.debug("no implied vol for %s K=%g mid=%g; skipping for vol bounds",
                      t.option_type.name.lower(), t.strike, t.mid)
            continue
        ivs.append((abs(math.log(t.strike / carry.forward)), iv))
    if not ivs:
        raise CalibrationError("no target admits an implied vol; cannot bound fitted vols")
    iv_atm = min(ivs)[1]
    iv_max = max(iv for _, iv in ivs)
    return iv_atm, iv_max


class _Objective:
    """Spread-normalized squared pricing error over the fit targets.

    Parameter vector is [weight logits, raw log-means, total vols]; weights
    come from a softmax and a uniform log-mean shift re-imposes the
    martingale condition exactly on every proposal. Gradients are analytic,
    propagated through the softmax, the shift, and the pricing kernel.
    """

    def __init__(self, targets: list[FitTarget], carry: CarryParams):
        self.strikes = np.array([t.strike for t in targets])
        self.mids = np.array([t.mid for t in targets])
        self.halves = np.array([t.half_spread for t in targets])
        self.is_call = np.array([t.option_type is OptionType.CALL for t in targets])
        self.spot = carry.spot
        self.df = carry.discount
        self.target_log = (carry.r - carry.delta) * carry.tau

    def unpack(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = x.size // 3
        logits, raw_means, total_vols = x[:n], x[n:2 * n], x[2 * n:]
        w = np.exp(logits - logits.max())
        w /= w.sum()
        shift = self.target_log - logsumexp(raw_means + 0.5 * total_vols ** 2, b=w)
        return w, raw_means + shift, total_vols

    def model_prices(self, w: np.ndarray, log_means: np.ndarray, total_vols: np.ndarray) -> np.ndarray:
        f = (self.spot * np.exp(log_means + 0.5 * total_vols ** 2))[:, None]
        s = total_vols[:, None]
        k = self.strikes[None, :]
        d1 = np.log(f / k) / s + 0.5 * s
        call = f * ndtr(d1) - k * ndtr(d1 - s)
        per_component = np.where(self.is_call[None, :], call, call - (f - k))
        return self.df * (w @ per_component)

    def __call__(self, x: np.ndarray) -> float:
        prices = self.model_prices(*self.unpack(x))
        residuals = (prices - self.mids) / self.halves
        return float(residuals @ residuals)

    def value_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        w, log_means, total_vols = self.unpack(x)
        f = (self.spot * np.exp(log_means + 0.5 * total_vols ** 2))[:, None]
        s = total_vols[:, None]
        k = self.strikes[None, :]
        d1 = np.log(f / k) / s + 0.5 * s
        nd1 = ndtr(d1)
        call = f * nd1 - k * ndtr(d1 - s)
        prices_c = np.where(self.is_call[None, :], call, call - (f - k))
        prices = self.df * (w @ prices_c)
        residuals = (prices - self.mids) / self.halves
        value = float(residuals @ residuals)

        # martingale-sum shares; the uniform shift moves every log-mean by
        # -u_j per unit of raw parameter j
        theta = log_means + 0.5 * total_vols ** 2
        u = w * np.exp(theta - theta.max())
        u /= u.sum()

        dp_df = np.where(self.is_call[None, :], nd1, nd1 - 1.0)  # per-component delta
        phi_d1 = np.exp(-0.5 * d1 ** 2) / np.sqrt(2.0 * np.pi)
        r2 = 2.0 * residuals / self.halves  # dG/dprice per target

        comp_px = prices_c @ r2                     # dG via component price
        comp_fwd = (f[:, 0]) * (dp_df @ r2)         # dG via component forward
        fwd_total = float(w @ comp_fwd)
        comp_vega = (f[:, 0]) * (phi_d1 @ r2)       # dG via component total vol

        grad_logits = self.df * (w * comp_px - w * float(w @ comp_px)
                                 + (w - u) * fwd_total)
        grad_means = self.df * (w * comp_fwd - u * fwd_total)
        grad_vols = self.df * (w * (comp_vega + comp_fwd * total_vols)
                               - u * total_vols * fwd_total)
        return value, np.concatenate([grad_logits, grad_means, grad_vols])


def fit_density(
    chain_slice: ExpirySlice,
    carry: CarryParams,
    config: FitConfig,
) -> tuple[MixtureDensity, FitDiagnostics]:
    """Calibrate the mixture to the slice's out-of-the-money quotes.

    Box-constrained local minimization of the spread-normalized objective,
    restarted ``n_restarts`` times from jittered initial points; the best
    objective wins, ties broken by restart index. The returned density
    satisfies normalization and the martingale condition by construction and
    its vols respect the sig_mult * IVMAX cap.

    Raises:
        CalibrationError: too few targets, no implied vols, or no restart
            produced a finite objective.
    """
    targets = select_fit_targets(chain_slice, carry)
    iv_atm, iv_max = _target_vols(targets, carry)
    tau = carry.tau
    sqrt_tau = math.sqrt(tau)
    n = config.n_components

    vol_cap = config.sig_mult * iv_max
    tv_lo = VOL_FLOOR * sqrt_tau
    tv_hi = vol_cap * sqrt_tau
    objective = _Objective(targets, carry)

    base_vols = np.geomspace(max(0.5 * iv_atm, VOL_FLOOR), vol_cap, n) if n > 1 \
        else np.array([min(iv_atm, vol_cap)])
    base_tv = np.clip(base_vols * sqrt_tau, tv_lo, tv_hi)
    carry_drift = (carry.r - carry.delta) * tau
    base_means = carry_drift - 0.5 * base_tv ** 2
    base_x = np.concatenate([np.zeros(n), base_means, base_tv])

    bounds = (
        [(-_LOGIT_BOUND, _LOGIT_BOUND)] * n
        + [(-_LOG_MEAN_BOUND, _LOG_MEAN_BOUND)] * n
        + [(tv_lo, tv_hi)] * n
    )
    options = {
        "maxiter": config.max_steps,
        "maxfun": 200 * config.max_steps,
        "ftol": 10.0 ** (-config.precision_goal),
    }

    rng = np.random.default_rng(config.seed)
    best: tuple[float, int, object] | None = None
    for restart in range(config.n_restarts):
        x0 = base_x.copy()
        if restart > 0:
            x0[:n] = rng.normal(0.0, 0.75, n)
            x0[n:2 * n] = base_means + rng.normal(0.0, 1.0, n) * base_tv
            x0[2 * n:] = np.clip(base_tv * np.exp(rng.normal(0.0, 0.5, n)), tv_lo, tv_hi)
        result = minimize(objective.value_and_grad, x0, jac=True, method="L-BFGS-B",
                          bounds=bounds, options=options)
        if not np.isfinite(result.fun):
            log.warning("restart %d produced non-finite objective; discarded", restart)
            continue
        if best is None or result.fun < best[0]:
            best = (float(result.fun), restart, result)

    if best is None:
        raise CalibrationError(
            f"calibration failed at expiry {chain_slice.expiry_date}: "
            "no restart produced a finite objective"
        )
    _, _, result = best
    w, log_means, total_vols = objective.unpack(result.x)
    density = make_martingale_mixture(
        weights=w,
        drifts=log_means / tau,
        vols=total_vols / sqrt_tau,
        tau=tau,
        carry=carry,
    )
    diagnostics = _diagnose(density, targets, result)
    log.info(
        "expiry %s: objective %.4g over %d quotes, %.0f%% inside spread, rmse %.4g, "
        "%d steps%s",
        chain_slice.expiry_date, diagnostics.objective_value, diagnostics.n_quotes_fit,
        100 * diagnostics.frac_inside_spread, diagnostics.rmse_price,
        diagnostics.steps_used, "" if diagnostics.converged else " (step budget hit)",
    )
    return density, diagnostics


def _diagnose(density: MixtureDensity, targets: list[FitTarget], result) -> FitDiagnostics:
    strikes = np.array([t.strike for t in targets])
    is_call = np.array([t.option_type is OptionType.CALL for t in targets])
    calls = mixture_price(density, strikes, OptionType.CALL)
    puts = mixture_price(density, strikes, OptionType.PUT)
    prices = np.where(is_call, np.atleast_1d(calls), np.atleast_1d(puts))

    mids = np.array([t.mid for t in targets])
    halves = np.array([t.half_spread for t in targets])
    bids = np.array([t.quote.bid for t in targets])
    asks = np.array([t.quote.ask for t in targets])
    residuals = (prices - mids) / halves
    return FitDiagnostics(
        objective_value=float(residuals @ residuals),
        n_quotes_fit=len(targets),
        frac_inside_spread=float(np.mean((prices >= bids) & (prices <= asks))),
        rmse_price=float(np.sqrt(np.mean((prices - mids) ** 2))),
        converged=bool(result.status == 0),
        steps_used=int(result.nit),
    )
