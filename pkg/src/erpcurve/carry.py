"""Per-expiration cost of carry from put-call parity regression."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .chain import ExpirySlice
from .errors import CarryError

log = logging.getLogger(__name__)

#: |r| or |delta| beyond 200%/yr indicates corrupt data, not erratic quotes.
MAX_ABS_RATE = 2.0

ParityPair = tuple[float, float, float]  # (strike, call_mid, put_mid)


@dataclass(frozen=True)
class CarryParams:
    """Forward price and continuously compounded carry rates for one expiration."""

    tau: float
    r: float
    delta: float
    forward: float
    n_pairs_used: int

    @property
    def spot(self) -> float:
        return self.forward * math.exp(-(self.r - self.delta) * self.tau)

    @property
    def discount(self) -> float:
        return math.exp(-self.r * self.tau)

    @property
    def carry_factor(self) -> float:
        """Gross forward growth factor e^((r - delta) * tau)."""
        return math.exp((self.r - self.delta) * self.tau)

    @classmethod
    def from_spot(cls, spot: float, r: float, delta: float, tau: float,
                  n_pairs_used: int = 2) -> "CarryParams":
        forward = spot * math.exp((r - delta) * tau)
        return cls(tau=tau, r=r, delta=delta, forward=forward, n_pairs_used=n_pairs_used)


def pair_quotes(chain_slice: ExpirySlice) -> list[ParityPair]:
    """Mid-price call/put pairs at every strike quoted on both sides.

    Raises:
        CarryError: fewer than 2 common strikes.
    """
    call_mids = {q.strike: q.mid for q in chain_slice.calls}
    put_mids = {q.strike: q.mid for q in chain_slice.puts}
    common = sorted(set(call_mids) & set(put_mids))
    if len(common) < 2:
        raise CarryError(
            f"parity regression infeasible: {len(common)} paired strike(s) at "
            f"expiry {chain_slice.expiry_date}, need >= 2"
        )
    return [(k, call_mids[k], put_mids[k]) for k in common]


def select_near_money(pairs: Sequence[ParityPair], spot: float, fraction: float) -> list[ParityPair]:
    """Keep the ceil(fraction * n) pairs closest to the money.

    Moneyness is |ln(strike / spot)|; ties go to the lower strike; at least
    2 pairs are always retained. Returned in strike order.
    """
    if not pairs:
        raise ValueError("pairs must be non-empty")
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    keep = min(len(pairs), max(2, math.ceil(fraction * len(pairs))))
    ranked = sorted(pairs, key=lambda p: (abs(math.log(p[0] / spot)), p[0]))
    return sorted(ranked[:keep], key=lambda p: p[0])


def fit_carry(pairs: Sequence[ParityPair], spot: float, tau: float) -> CarryParams:
    """Infer (r, delta, forward) by OLS of call_mid - put_mid on strike.

    The parity line has intercept spot * e^(-delta tau) and slope
    -e^(-r tau), so the forward is -intercept/slope.

    Raises:
        CarryError: non-negative slope, non-positive intercept, or inferred
            rates beyond +-200%/yr.
    """
    if len(pairs) < 2:
        raise CarryError(f"parity regression infeasible: {len(pairs)} pair(s), need >= 2")
    x = np.array([p[0] for p in pairs], dtype=float)
    y = np.array([p[1] - p[2] for p in pairs], dtype=float)
    if np.unique(x).size < 2:
        raise CarryError("parity regression infeasible: all pairs share one strike")

    xm = x.mean()
    ym = y.mean()
    dx = x - xm
    slope = float(dx @ (y - ym) / (dx @ dx))
    intercept = float(ym - slope * xm)

    if slope >= 0:
        raise CarryError(f"degenerate parity regression: slope {slope:.6g} >= 0")
    if intercept <= 0:
        raise CarryError(f"degenerate parity regression: intercept {intercept:.6g} <= 0")

    r = -math.log(-slope) / tau
    delta = -math.log(intercept / spot) / tau
    if abs(r) > MAX_ABS_RATE or abs(delta) > MAX_ABS_RATE:
        raise CarryError(
            f"implausible carry rates r={r:.4g} delta={delta:.4g} (|rate| > {MAX_ABS_RATE}); "
            "input quotes look corrupt"
        )
    forward = -intercept / slope
    if abs(r) > 0.5 or abs(delta) > 0.5:
        log.info("erratic carry at tau=%.4g: r=%.4g delta=%.4g (forward %.6g retained)",
                 tau, r, delta, forward)
    return CarryParams(tau=tau, r=r, delta=delta, forward=forward, n_pairs_used=len(pairs))
