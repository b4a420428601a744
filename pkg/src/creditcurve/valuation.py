"""Risky valuation kernels and spread transforms.

The building blocks are three trapezium sums over a time grid
{0, h, 2h, ..., T} (last step shortened to land on T):

    Pi   ~ sum dt * (B Q)_avg            -- RPV01, PV of a 1/yr risky stream
    Xi   ~ sum B_avg * (-dQ)             -- PV factor of 1 paid at default
    rhat -- risky-weighted average riskfree forward, defined through
            B(T)Q(T) + Xi + rhat*Pi = 1  (the parity identity)

The discretisation telescopes, so parity holds to accumulation rounding
for any grid step.  Model price of a bond per 100 face is then

    100 * (coupon * Pi + B(T)Q(T) + recovery * Xi)

which treats the coupon stream as continuously paid.  Bond prices fed
into this module are therefore full invoice values per 100 face; there
is no separate accrued-interest concept.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .ratecurve import RiskfreeCurve
from .survival import SurvivalParams

__all__ = [
    "DEFAULT_GRID_STEP",
    "RiskyKernels",
    "DiscountGridCache",
    "KernelGrid",
    "kernels",
    "BondSpec",
    "CdsSpec",
    "AssetSwapInputs",
    "bond_model_price",
    "price_from_yield",
    "yield_from_price",
    "riskfree_schedule_price",
    "z_spread",
    "asset_swap_spread",
    "par_cds_spread",
    "par_adjusted_spread_bond",
    "cds_traded_spread_to_upfront",
    "cds_upfront",
    "par_adjusted_spread_cds",
    "exact_fit_to_instrument",
]

DEFAULT_GRID_STEP = 1.0 / 12.0

SNAC_COUPONS = (0.01, 0.05)


@dataclass(frozen=True)
class RiskyKernels:
    """Trapezium kernels for one (curve, survival, tenor) triple."""

    pi: float        # RPV01, years
    xi: float        # recovery-leg factor, unitless
    rhat: float      # weighted riskfree forward, per annum
    bq_T: float      # B(T) * Q(T)
    tenor: float

    @property
    def parity_gap(self) -> float:
        """B(T)Q(T) + Xi + rhat*Pi - 1; zero up to rounding."""
        return self.bq_T + self.xi + self.rhat * self.pi - 1.0


class DiscountGridCache:
    """Grid times and discount factors shared across survival candidates.

    Fitting evaluates thousands of candidate curves against one
    riskfree curve; B on the grid never changes, so compute it once.
    """

    def __init__(self, curve: RiskfreeCurve, t_max: float,
                 grid_step: float = DEFAULT_GRID_STEP):
        if t_max <= 0.0:
            raise ValueError("t_max must be > 0")
        if grid_step <= 0.0:
            raise ValueError("grid_step must be > 0")
        self.curve = curve
        self.h = float(grid_step)
        n = int(math.ceil(t_max / self.h - 1e-12))
        self.t = np.arange(n + 1) * self.h
        self.B = np.asarray(curve.discount_factor(self.t))

    def kernel_grid(self, params: SurvivalParams) -> "KernelGrid":
        return KernelGrid(self.curve, params, self.t[-1], self.h, _cache=self)

    def readout(self, tenors: np.ndarray) -> "KernelReadout":
        """Precompute grid indices and discounts for a fixed tenor set."""
        tenors = np.asarray(tenors, dtype=float)
        if np.any(tenors <= 0) or np.any(tenors > self.t[-1] + 1e-9):
            raise ValueError("tenors must lie in (0, t_max]")
        k = np.minimum(np.floor(tenors / self.h + 1e-9).astype(int),
                       len(self.t) - 1)
        return KernelReadout(k=k, dt=tenors - self.t[k], B_k=self.B[k],
                             B_T=np.asarray(self.curve.discount_factor(tenors)),
                             tenors=tenors)


class KernelGrid:
    """Cumulative kernels on a shared grid, for many tenors off one curve.

    Builds the arrays once up to ``t_max``; :meth:`at` then reads off
    the kernels for any tenor in (0, t_max] with the final short step
    handled exactly as in the one-shot definition.
    """

    def __init__(self, curve: RiskfreeCurve, params: SurvivalParams,
                 t_max: float, grid_step: float = DEFAULT_GRID_STEP,
                 _cache: DiscountGridCache | None = None):
        if _cache is None:
            _cache = DiscountGridCache(curve, t_max, grid_step)
        self.curve = curve
        self.params = params
        self.h = _cache.h
        t = _cache.t
        B = _cache.B
        Q = np.asarray(params.survival_probability(t))
        BQ = B * Q
        self._t = t
        self._B = B
        self._Q = Q
        self._cum_pi = np.concatenate(
            ([0.0], np.cumsum(self.h * (BQ[:-1] + BQ[1:]) / 2.0)))
        self._cum_xi = np.concatenate(
            ([0.0], np.cumsum((B[:-1] + B[1:]) / 2.0 * (Q[:-1] - Q[1:]))))
        self._cum_rp = np.concatenate(
            ([0.0], np.cumsum((B[:-1] - B[1:]) * (Q[:-1] + Q[1:]) / 2.0)))

    def at(self, tenor: float, B_T: float | None = None,
           Q_T: float | None = None) -> RiskyKernels:
        """Kernels at ``tenor``; B_T/Q_T may be passed in precomputed."""
        if tenor <= 0.0:
            raise ValueError("tenor must be > 0")
        if tenor > self._t[-1] + 1e-9:
            raise ValueError(f"tenor {tenor} beyond grid horizon {self._t[-1]}")
        k = int(math.floor(tenor / self.h + 1e-9))
        k = min(k, len(self._t) - 1)
        pi = self._cum_pi[k]
        xi = self._cum_xi[k]
        rp = self._cum_rp[k]
        dt = tenor - self._t[k]
        if B_T is None:
            B_T = self.curve.discount_factor(tenor)
        if Q_T is None:
            Q_T = self.params.survival_probability(tenor)
        if dt > 1e-12:
            B_k, Q_k = self._B[k], self._Q[k]
            pi = pi + dt * (B_k * Q_k + B_T * Q_T) / 2.0
            xi = xi + (B_k + B_T) / 2.0 * (Q_k - Q_T)
            rp = rp + (B_k - B_T) * (Q_k + Q_T) / 2.0
        return RiskyKernels(pi=float(pi), xi=float(xi), rhat=float(rp / pi),
                            bq_T=float(B_T * Q_T), tenor=float(tenor))

    def at_many(self, ro: "KernelReadout",
                Q_T: np.ndarray | None = None) -> tuple[np.ndarray, ...]:
        """Vectorised kernels (pi, xi, rhat, bq_T) at the readout tenors.

        Same arithmetic as :meth:`at`; the partial-step terms vanish
        identically when a tenor sits on the grid.
        """
        if Q_T is None:
            Q_T = np.asarray(self.params.survival_probability(ro.tenors))
        k = ro.k
        Q_k = self._Q[k]
        B_k, B_T = ro.B_k, ro.B_T
        pi = self._cum_pi[k] + ro.dt * (B_k * Q_k + B_T * Q_T) / 2.0
        xi = self._cum_xi[k] + (B_k + B_T) / 2.0 * (Q_k - Q_T)
        rp = self._cum_rp[k] + (B_k - B_T) * (Q_k + Q_T) / 2.0
        return pi, xi, rp / pi, B_T * Q_T


@dataclass(frozen=True)
class KernelReadout:
    """Grid indices and discounts for a fixed set of tenors."""

    k: np.ndarray
    dt: np.ndarray
    B_k: np.ndarray
    B_T: np.ndarray
    tenors: np.ndarray


def kernels(curve: RiskfreeCurve, params: SurvivalParams, tenor: float,
            grid_step: float = DEFAULT_GRID_STEP) -> RiskyKernels:
    """One-shot kernels for a single tenor."""
    if tenor <= 0.0:
        raise ValueError("tenor must be > 0")
    return KernelGrid(curve, params, tenor, grid_step).at(tenor)


# -- instruments -----------------------------------------------------


@dataclass(frozen=True)
class BondSpec:
    """A fixed-coupon bond.  ``price`` is the full value per 100 face."""

    coupon: float
    tenor: float
    price: float
    recovery: float = 0.4
    issue_size: float = 1000.0     # USD millions outstanding
    rating: int | None = None
    internal_rating: int | None = None
    sovereign_spread: float | None = None  # par sov spread at this tenor
    identifier: str = ""

    def __post_init__(self) -> None:
        if self.coupon < 0:
            raise ValueError("coupon must be >= 0")
        if self.tenor <= 0:
            raise ValueError("tenor must be > 0")
        if self.price <= 0:
            raise ValueError("price must be > 0")
        if not 0.0 <= self.recovery < 1.0:
            raise ValueError("recovery must be in [0, 1)")

    @property
    def effective_rating(self) -> int | None:
        return self.internal_rating if self.internal_rating is not None else self.rating


@dataclass(frozen=True)
class CdsSpec:
    """A CDS quote: running ``coupon`` plus either a traded spread or an
    upfront per unit notional (positive upfront paid by the protection
    buyer)."""

    coupon: float
    tenor: float
    quote_type: str                 # "spread" | "upfront"
    quote: float
    quoting_recovery: float = 0.4   # SNAC flat-hazard conversion only
    issue_size: float = 1000.0      # $1Bn default for liquid CDS
    rating: int | None = None
    internal_rating: int | None = None
    sovereign_spread: float | None = None
    model_recovery: float | None = None  # valuation recovery, if pre-resolved
    identifier: str = ""

    def __post_init__(self) -> None:
        if self.tenor <= 0:
            raise ValueError("tenor must be > 0")
        if self.quote_type not in ("spread", "upfront"):
            raise ValueError("quote_type must be 'spread' or 'upfront'")
        if self.quote_type == "spread" and self.quote < 0:
            raise ValueError("traded spread must be >= 0")
        if not 0.0 <= self.quoting_recovery < 1.0:
            raise ValueError("quoting recovery must be in [0, 1)")
        if self.coupon not in SNAC_COUPONS:
            warnings.warn(
                f"CDS coupon {self.coupon} is not a standard 1%/5% running coupon",
                stacklevel=2)

    @property
    def effective_rating(self) -> int | None:
        return self.internal_rating if self.internal_rating is not None else self.rating


@dataclass(frozen=True)
class AssetSwapInputs:
    """Par swap rate and the swap PV01s entering the asset-swap spread."""

    par_swap_rate: float
    fixed_pv01: float
    float_pv01: float

    def __post_init__(self) -> None:
        if self.fixed_pv01 <= 0 or self.float_pv01 <= 0:
            raise ValueError("swap PV01s must be > 0")


# -- pricing and spread transforms ------------------------------------


def bond_model_price(spec: BondSpec, k: RiskyKernels) -> float:
    """Model price per 100: coupon*Pi + B(T)Q(T) + recovery*Xi; linear in recovery."""
    return 100.0 * (spec.coupon * k.pi + k.bq_T + spec.recovery * k.xi)


def _annuity(y: float, tenor: float, m: int) -> float:
    # (1 - (1+y/m)^{-mT}) / y with a stable small-y branch
    if abs(y) < 1e-8:
        return tenor * (1.0 - 0.5 * y * (tenor + 1.0 / m))
    return -math.expm1(-m * tenor * math.log1p(y / m)) / y


def price_from_yield(coupon: float, tenor: float, y: float, m: int = 2) -> float:
    """Textbook price-yield relation for a vanilla bond, per 100 face.

    Exact for m*T integer and used regardless; m is the compounding
    frequency.
    """
    if tenor <= 0:
        raise ValueError("tenor must be > 0")
    if y <= -m:
        raise ValueError("yield must exceed -m")
    disc = math.exp(-m * tenor * math.log1p(y / m))
    return 100.0 * (coupon * _annuity(y, tenor, m) + disc)


def yield_from_price(coupon: float, tenor: float, price: float, m: int = 2) -> float:
    """Invert the price-yield relation (IRR) to |dP| <= 1e-10."""
    if price <= 0:
        raise ValueError("price must be > 0")

    def f(y: float) -> float:
        return price_from_yield(coupon, tenor, y, m) - price

    lo, hi = -0.5, 1.0
    for _ in range(60):
        if f(lo) > 0 > f(hi):
            break
        if f(hi) >= 0:
            hi *= 2.0
        if f(lo) <= 0:
            lo = (lo - m) / 2.0 if lo > -m * 0.999 else lo
    else:
        raise ArithmeticError("could not bracket the yield")
    return brentq(f, lo, hi, xtol=1e-14)


def _schedule(coupon: float, tenor: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    # discrete cashflow schedule generated backwards from maturity
    n = max(1, int(math.ceil(m * tenor - 1e-9)))
    times = tenor - (n - 1 - np.arange(n)) / m
    flows = np.full(n, 100.0 * coupon / m)
    flows[-1] += 100.0
    return times, flows


def riskfree_schedule_price(coupon: float, tenor: float, curve: RiskfreeCurve,
                            m: int = 2, spread: float = 0.0) -> float:
    """Discrete-schedule price off the curve's zero rates plus a flat spread.

    This is the discounting that the Z-spread inverts; spread = 0 gives
    the riskfree value of the schedule.
    """
    times, flows = _schedule(coupon, tenor, m)
    pv = 0.0
    for t, cf in zip(times, flows):
        z = curve.zero_rate(float(t), m)
        pv += cf * math.exp(-m * t * math.log1p((z + spread) / m))
    return pv


def z_spread(spec: BondSpec, curve: RiskfreeCurve, m: int = 2) -> float:
    """Constant add-on to the curve's zero rates that reprices the bond."""

    def f(s: float) -> float:
        return riskfree_schedule_price(spec.coupon, spec.tenor, curve, m, s) - spec.price

    lo, hi = -0.25, 0.5
    for _ in range(60):
        if f(lo) > 0 > f(hi):
            break
        if f(hi) >= 0:
            hi *= 2.0
        if f(lo) <= 0:
            lo -= 0.25
            if lo < -m * 0.5:
                raise ArithmeticError("z-spread root-finding failed to bracket")
    else:
        raise ArithmeticError("z-spread root-finding failed to bracket")
    return brentq(f, lo, hi, xtol=1e-14)


def asset_swap_spread(spec: BondSpec, inputs: AssetSwapInputs) -> float:
    """Par asset-swap spread; linear in the bond price."""
    num = 1.0 - spec.price / 100.0 + (spec.coupon - inputs.par_swap_rate) * inputs.fixed_pv01
    return num / inputs.float_pv01


def par_cds_spread(k: RiskyKernels, recovery: float) -> float:
    """s(T) = (1 - recovery) * Xi / Pi, the running spread worth par."""
    return (1.0 - recovery) * k.xi / k.pi


def par_adjusted_spread_bond(spec: BondSpec, k: RiskyKernels) -> float:
    """sbar from P/100 - 1 = (c - rhat - sbar) * Pi.

    Equals the par CDS spread of the curve whenever the price sits on
    the model curve, removing the premium/discount distortion.
    """
    return spec.coupon - k.rhat - (spec.price / 100.0 - 1.0) / k.pi


def cds_traded_spread_to_upfront(q: CdsSpec, curve: RiskfreeCurve,
                                 grid_step: float = DEFAULT_GRID_STEP) -> float:
    """SNAC conversion: u = (s_traded - coupon) * Pi_tilde.

    Pi_tilde is the RPV01 under the flat hazard lambda = s/(1-R_quote)
    on the riskfree curve; the quoting recovery is a market convention,
    not a valuation assumption.
    """
    if q.quote_type != "spread":
        raise ValueError("quote is already an upfront")
    s = q.quote
    if s < 0:
        raise ValueError("traded spread must be >= 0")
    lam = s / (1.0 - q.quoting_recovery)
    pi_tilde = kernels(curve, SurvivalParams.flat(lam), q.tenor, grid_step).pi
    return (s - q.coupon) * pi_tilde


def cds_upfront(q: CdsSpec, curve: RiskfreeCurve,
                grid_step: float = DEFAULT_GRID_STEP) -> float:
    """Upfront per unit notional, converting from spread quotes if needed."""
    if q.quote_type == "upfront":
        return q.quote
    return cds_traded_spread_to_upfront(q, curve, grid_step)


def par_adjusted_spread_cds(q: CdsSpec, k: RiskyKernels,
                            curve: RiskfreeCurve,
                            grid_step: float = DEFAULT_GRID_STEP) -> float:
    """sbar = coupon + upfront / Pi, with Pi the model-curve RPV01."""
    u = cds_upfront(q, curve, grid_step)
    return q.coupon + u / k.pi


def _cds_model_upfront(q: CdsSpec, k: RiskyKernels, recovery: float) -> float:
    # upfront the model would charge for the contract coupon
    return (par_cds_spread(k, recovery) - q.coupon) * k.pi


def exact_fit_to_instrument(spec: BondSpec | CdsSpec, base: SurvivalParams,
                            curve: RiskfreeCurve,
                            recovery: float | None = None,
                            grid_step: float = DEFAULT_GRID_STEP) -> SurvivalParams:
    """Scale (a, b) of ``base`` so the model reprices the instrument.

    A multiplicative shift of both hazard levels preserves the curve
    shape and keeps the parameters positive.  Repricing is to
    |dP| <= 1e-8 per 100 face.
    """
    is_bond = isinstance(spec, BondSpec)
    if recovery is None:
        recovery = spec.recovery if is_bond else spec.quoting_recovery
    if is_bond:
        target = spec.price
    else:
        target = 100.0 * cds_upfront(spec, curve, grid_step)

    def gap(factor: float) -> float:
        k = kernels(curve, base.scaled(factor), spec.tenor, grid_step)
        if is_bond:
            return bond_model_price(spec, k) - target
        return 100.0 * _cds_model_upfront(spec, k, recovery) - target

    # bond prices fall, CDS upfronts rise, as hazards scale up
    sign = -1.0 if is_bond else 1.0
    lo, hi = 0.5, 2.0
    for _ in range(80):
        g_lo, g_hi = sign * gap(lo), sign * gap(hi)
        if g_lo < 0 < g_hi:
            break
        if g_lo >= 0:
            lo /= 4.0
        if g_hi <= 0:
            hi *= 4.0
        if lo < 1e-14 or hi > 1e14:
            raise ArithmeticError(
                "no positive-hazard curve reprices the instrument "
                "(price outside the attainable range)")
    else:
        raise ArithmeticError("exact-fit bracketing failed")
    factor = brentq(lambda x: gap(x), lo, hi, xtol=1e-13, rtol=8.9e-16)
    fitted = base.scaled(factor)
    if abs(gap(factor)) > 1e-8:
        raise ArithmeticError("exact fit did not converge to |dP| <= 1e-8")
    return fitted
