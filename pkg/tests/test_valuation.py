import math

import numpy as np
import pytest

import creditcurve as cc
from creditcurve.ratecurve import RiskfreeCurve
from creditcurve.survival import SurvivalParams
from creditcurve.valuation import (
    AssetSwapInputs,
    BondSpec,
    CdsSpec,
    DiscountGridCache,
    KernelGrid,
    RiskyKernels,
    asset_swap_spread,
    bond_model_price,
    cds_traded_spread_to_upfront,
    cds_upfront,
    exact_fit_to_instrument,
    kernels,
    par_adjusted_spread_bond,
    par_adjusted_spread_cds,
    par_cds_spread,
    price_from_yield,
    riskfree_schedule_price,
    yield_from_price,
    z_spread,
)

FLAT2 = RiskfreeCurve.flat(0.02)
FLAT0 = RiskfreeCurve.flat(0.0)


def closed_form_kernels(r, lam, T):
    pi = (1 - math.exp(-(r + lam) * T)) / (r + lam) if r + lam else T
    return pi, lam * pi


# -- kernels -----------------------------------------------------------


def test_kernels_zero_rate_zero_hazard():
    k = kernels(FLAT0, SurvivalParams(0.0, 0.0, 0.1), 10.0)
    assert k.pi == pytest.approx(10.0, rel=1e-12)
    assert k.xi == 0.0
    assert k.rhat == 0.0
    assert k.bq_T == 1.0


def test_kernels_flat_closed_form():
    k = kernels(FLAT2, SurvivalParams.flat(0.03), 5.0)
    pi_cf, xi_cf = closed_form_kernels(0.02, 0.03, 5.0)
    assert k.pi == pytest.approx(pi_cf, rel=1e-5)
    assert k.pi == pytest.approx(4.423984, abs=1e-4)
    assert k.xi == pytest.approx(xi_cf, rel=1e-5)
    assert k.xi == pytest.approx(0.132720, abs=1e-5)
    assert k.rhat == pytest.approx(0.02, abs=1e-6)
    assert abs(k.parity_gap) < 1e-14


def test_rhat_equals_flat_forward_for_any_survival():
    for params in (SurvivalParams(0.01, 0.2, 0.05), SurvivalParams(0.3, 0.02, 0.2),
                   SurvivalParams.flat(1e-4)):
        for r in (0.001, 0.03, 0.1):
            k = kernels(RiskfreeCurve.flat(r), params, 12.0)
            assert k.rhat == pytest.approx(r, abs=1e-5)


def test_kernels_parity_random_cases():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(1, 5))
        ts = np.sort(rng.uniform(0.5, 30.0, n))
        zs = rng.uniform(0.0, 0.08, n)
        curve = RiskfreeCurve(tuple(zip(ts.tolist(), zs.tolist())))
        params = SurvivalParams(rng.uniform(0, 0.2), rng.uniform(0, 0.2),
                                rng.uniform(0.05, 0.2))
        k = kernels(curve, params, float(rng.uniform(0.1, 30.0)),
                    float(rng.choice([1 / 12, 1 / 4, 1 / 52])))
        assert abs(k.parity_gap) <= 1e-12


def test_kernels_rejects_bad_args():
    with pytest.raises(ValueError):
        kernels(FLAT2, SurvivalParams.flat(0.01), 0.0)
    with pytest.raises(ValueError):
        kernels(FLAT2, SurvivalParams.flat(0.01), 5.0, grid_step=0.0)


def test_kernel_grid_matches_one_shot():
    params = SurvivalParams(0.01, 0.06, 0.12)
    kg = KernelGrid(FLAT2, params, 20.0)
    for T in (0.3, 1.0, 7.25, 19.99, 20.0):
        one = kernels(FLAT2, params, T)
        many = kg.at(T)
        assert many.pi == pytest.approx(one.pi, rel=1e-12)
        assert many.xi == pytest.approx(one.xi, rel=1e-9, abs=1e-15)
        assert many.rhat == pytest.approx(one.rhat, rel=1e-9)


def test_at_many_matches_at():
    params = SurvivalParams(0.02, 0.08, 0.1)
    cache = DiscountGridCache(FLAT2, 15.0)
    kg = cache.kernel_grid(params)
    tenors = np.array([0.5, 2.0, 7.3, 12.0, 15.0])
    pi, xi, rhat, bq = kg.at_many(cache.readout(tenors))
    for i, T in enumerate(tenors):
        k = kg.at(float(T))
        assert pi[i] == pytest.approx(k.pi, rel=1e-12)
        assert xi[i] == pytest.approx(k.xi, rel=1e-12)
        assert rhat[i] == pytest.approx(k.rhat, rel=1e-12)
        assert bq[i] == pytest.approx(k.bq_T, rel=1e-12)


def test_kernels_match_quadrature_on_sloped_curves():
    # independent oracle: adaptive quadrature of the defining integrals
    # on a multi-pillar curve and a sloped hazard curve
    from scipy.integrate import quad

    curve = RiskfreeCurve(pillars=((1.0, 0.01), (4.0, 0.02), (12.0, 0.03)))
    params = SurvivalParams(0.015, 0.09, 0.12)
    T = 9.6
    knots = [1.0, 4.0]

    def bq(t):
        return curve.discount_factor(t) * params.survival_probability(t)

    pi_ref, _ = quad(bq, 0.0, T, points=knots, limit=200)
    xi_ref, _ = quad(lambda t: bq(t) * params.forward_hazard(t), 0.0, T,
                     points=knots, limit=200)
    rp_ref, _ = quad(lambda t: bq(t) * curve.instantaneous_forward(t), 0.0, T,
                     points=knots, limit=200)
    k = kernels(curve, params, T)
    assert k.pi == pytest.approx(pi_ref, rel=2e-5)
    assert k.xi == pytest.approx(xi_ref, rel=2e-5)
    assert k.rhat == pytest.approx(rp_ref / pi_ref, rel=2e-4)


def test_grid_refinement_is_second_order():
    r, lam, T = 0.05, 0.15, 30.0
    pi_cf, xi_cf = closed_form_kernels(r, lam, T)
    curve = RiskfreeCurve.flat(r)
    params = SurvivalParams.flat(lam)
    e1 = kernels(curve, params, T, 1 / 12).pi / pi_cf - 1
    e2 = kernels(curve, params, T, 1 / 24).pi / pi_cf - 1
    e4 = kernels(curve, params, T, 1 / 48).pi / pi_cf - 1
    assert e1 / e2 == pytest.approx(4.0, abs=0.4)   # halving: O(h^2)
    assert e1 / e4 == pytest.approx(16.0, abs=1.5)  # quartering
    x1 = kernels(curve, params, T, 1 / 12).xi / xi_cf - 1
    x2 = kernels(curve, params, T, 1 / 24).xi / xi_cf - 1
    assert x1 / x2 == pytest.approx(4.0, abs=0.4)


# -- bond pricing ------------------------------------------------------


def test_model_price_riskless():
    k = kernels(FLAT0, SurvivalParams(0.0, 0.0, 0.1), 10.0)
    spec = BondSpec(coupon=0.05, tenor=10.0, price=100.0, recovery=0.0)
    assert bond_model_price(spec, k) == pytest.approx(150.0, rel=1e-12)


def test_model_price_flat_case():
    k = kernels(FLAT2, SurvivalParams.flat(0.03), 5.0)
    spec = BondSpec(coupon=0.05, tenor=5.0, price=100.0, recovery=0.4)
    assert bond_model_price(spec, k) == pytest.approx(105.309, abs=2e-3)
    pi_cf, xi_cf = closed_form_kernels(0.02, 0.03, 5.0)
    exact = 100 * (0.05 * pi_cf + math.exp(-0.25) + 0.4 * xi_cf)
    assert bond_model_price(spec, k) == pytest.approx(exact, abs=1e-4)


def test_model_price_linear_in_recovery():
    k = kernels(FLAT2, SurvivalParams(0.02, 0.09, 0.1), 8.0)
    prices = [bond_model_price(
        BondSpec(coupon=0.06, tenor=8.0, price=100.0, recovery=rec), k)
        for rec in (0.0, 0.5, 0.99)]
    mid = prices[0] + (prices[2] - prices[0]) * (0.5 / 0.99)
    assert prices[1] == pytest.approx(mid, abs=1e-12)


def test_full_recovery_approaches_riskfree_price():
    spec = BondSpec(coupon=0.04, tenor=6.0, price=100.0, recovery=0.99999)
    riskfree = bond_model_price(
        BondSpec(coupon=0.04, tenor=6.0, price=100.0, recovery=0.0),
        kernels(FLAT2, SurvivalParams(0.0, 0.0, 0.1), 6.0))
    near = bond_model_price(spec, kernels(FLAT2, SurvivalParams.flat(1e-7), 6.0))
    assert near == pytest.approx(riskfree, abs=1e-4)
    # with real hazard, coupons stay risky: price below riskfree even at full recovery
    risky = bond_model_price(
        BondSpec(coupon=0.04, tenor=6.0, price=100.0, recovery=1.0 - 1e-12),
        kernels(FLAT2, SurvivalParams.flat(0.1), 6.0))
    assert risky < riskfree - 1.0


# -- yield / z-spread --------------------------------------------------


def test_par_identity():
    for coupon in (0.01, 0.04, 0.08):
        for m in (1, 2, 4):
            for T in (2.0, 7.88, 30.0):
                assert price_from_yield(coupon, T, coupon, m) == pytest.approx(100.0, rel=1e-12)


def test_premium_bond_yields_less_than_coupon():
    y = yield_from_price(0.04, 7.88, 101.10)
    assert y < 0.04
    assert price_from_yield(0.04, 7.88, y) == pytest.approx(101.10, abs=1e-10)


def test_zero_yield_limit():
    assert price_from_yield(0.05, 7.0, 0.0) == pytest.approx(100 * (1 + 0.05 * 7), rel=1e-10)


def test_yield_round_trip():
    for price in (60.0, 95.0, 100.0, 132.0):
        y = yield_from_price(0.06, 11.3, price)
        assert price_from_yield(0.06, 11.3, y) == pytest.approx(price, abs=1e-10)


def test_yield_monotone_in_price():
    ys = [yield_from_price(0.05, 10.0, p) for p in (90.0, 100.0, 110.0)]
    assert ys[0] > ys[1] > ys[2]


def test_price_from_yield_domain():
    with pytest.raises(ValueError):
        price_from_yield(0.05, 5.0, -2.0, m=2)


def test_z_spread_zero_for_riskfree_priced_bond():
    curve = RiskfreeCurve(pillars=((1.0, 0.01), (5.0, 0.02), (20.0, 0.03)))
    price = riskfree_schedule_price(0.05, 7.0, curve)
    spec = BondSpec(coupon=0.05, tenor=7.0, price=price)
    assert z_spread(spec, curve) == pytest.approx(0.0, abs=1e-12)


def test_z_spread_decreasing_in_price():
    curve = RiskfreeCurve.flat(0.02)
    zs = [z_spread(BondSpec(coupon=0.05, tenor=8.0, price=p), curve)
          for p in (90.0, 100.0, 115.0)]
    assert zs[0] > zs[1] > zs[2]


def test_z_spread_premium_discount_bias():
    # two bonds priced off one survival curve with recovery: the high-coupon
    # (premium) bond carries the higher z-spread
    params = SurvivalParams.flat(0.04)
    T = 8.0
    k = kernels(FLAT2, params, T)
    lo = BondSpec(coupon=0.04, tenor=T, price=100.0, recovery=0.4)
    hi = BondSpec(coupon=0.09, tenor=T, price=100.0, recovery=0.4)
    lo = BondSpec(coupon=0.04, tenor=T, price=bond_model_price(lo, k), recovery=0.4)
    hi = BondSpec(coupon=0.09, tenor=T, price=bond_model_price(hi, k), recovery=0.4)
    assert z_spread(hi, FLAT2) > z_spread(lo, FLAT2)


# -- spread measures ---------------------------------------------------


def test_asset_swap_spread_cases():
    inp = AssetSwapInputs(par_swap_rate=0.03, fixed_pv01=4.2, float_pv01=4.0)
    par = BondSpec(coupon=0.03, tenor=5.0, price=100.0)
    assert asset_swap_spread(par, inp) == pytest.approx(0.0, abs=1e-15)
    below = BondSpec(coupon=0.03, tenor=5.0, price=98.0)
    assert asset_swap_spread(below, inp) == pytest.approx(0.005, rel=1e-12)
    # linearity: slope in price is -1/(100 * float_pv01)
    p1 = asset_swap_spread(BondSpec(coupon=0.05, tenor=5.0, price=101.0), inp)
    p2 = asset_swap_spread(BondSpec(coupon=0.05, tenor=5.0, price=103.0), inp)
    assert (p2 - p1) / 2.0 == pytest.approx(-1.0 / (100.0 * 4.0), rel=1e-12)


def test_par_cds_spread_flat_hazard():
    k = kernels(FLAT2, SurvivalParams.flat(0.03), 5.0)
    assert par_cds_spread(k, 0.4) == pytest.approx(0.018, abs=1e-6)
    k0 = kernels(FLAT2, SurvivalParams(0.0, 0.0, 0.1), 5.0)
    assert par_cds_spread(k0, 0.4) == 0.0


def test_par_adjusted_spread_on_model_price_equals_par_spread():
    for params in (SurvivalParams(0.01, 0.05, 0.1), SurvivalParams.flat(0.02)):
        for rec in (0.0, 0.4, 0.7):
            k = kernels(FLAT2, params, 7.0)
            spec = BondSpec(coupon=0.055, tenor=7.0, price=100.0, recovery=rec)
            spec = BondSpec(coupon=0.055, tenor=7.0,
                            price=bond_model_price(spec, k), recovery=rec)
            assert par_adjusted_spread_bond(spec, k) == pytest.approx(
                par_cds_spread(k, rec), abs=1e-12)


from hypothesis import given, settings
from hypothesis import strategies as st


@given(a=st.floats(1e-4, 0.2), b=st.floats(1e-4, 0.2), c=st.floats(0.05, 0.2),
       rec=st.floats(0.0, 0.9), coupon=st.floats(0.0, 0.12),
       tenor=st.floats(0.5, 30.0), rate=st.floats(0.0, 0.08))
@settings(max_examples=40, deadline=None)
def test_par_adjusted_spread_consistency_property(a, b, c, rec, coupon, tenor, rate):
    # a bond priced by the model always shows sbar equal to the curve's
    # par CDS spread, in every parameter direction
    curve = RiskfreeCurve.flat(rate)
    k = kernels(curve, SurvivalParams(a, b, c), tenor)
    spec = BondSpec(coupon=coupon, tenor=tenor, price=100.0, recovery=rec)
    spec = BondSpec(coupon=coupon, tenor=tenor,
                    price=bond_model_price(spec, k), recovery=rec)
    assert par_adjusted_spread_bond(spec, k) == pytest.approx(
        par_cds_spread(k, rec), abs=1e-11)


def test_par_adjusted_spread_at_par():
    k = kernels(FLAT2, SurvivalParams.flat(0.03), 5.0)
    spec = BondSpec(coupon=0.05, tenor=5.0, price=100.0, recovery=0.4)
    assert par_adjusted_spread_bond(spec, k) == pytest.approx(0.05 - k.rhat, abs=1e-15)


def test_par_adjusted_spread_flat_case_value():
    k = kernels(FLAT2, SurvivalParams.flat(0.03), 5.0)
    spec = BondSpec(coupon=0.05, tenor=5.0, price=100.0, recovery=0.4)
    spec = BondSpec(coupon=0.05, tenor=5.0, price=bond_model_price(spec, k), recovery=0.4)
    assert par_adjusted_spread_bond(spec, k) == pytest.approx(0.018, abs=1e-6)


# -- CDS quotes --------------------------------------------------------


def test_snac_upfront_at_par():
    q = CdsSpec(coupon=0.05, tenor=5.0, quote_type="spread", quote=0.05)
    assert cds_traded_spread_to_upfront(q, FLAT2) == pytest.approx(0.0, abs=1e-15)


def test_snac_upfront_closed_form():
    q = CdsSpec(coupon=0.05, tenor=5.0, quote_type="spread", quote=0.03,
                quoting_recovery=0.4)
    u = cds_traded_spread_to_upfront(q, FLAT0)
    pi_cf, _ = closed_form_kernels(0.0, 0.05, 5.0)
    assert u == pytest.approx((0.03 - 0.05) * pi_cf, abs=2e-5)
    assert u == pytest.approx(-0.088480, abs=2e-5)


def test_snac_negative_spread_rejected():
    with pytest.raises(ValueError):
        CdsSpec(coupon=0.05, tenor=5.0, quote_type="spread", quote=-0.01)


def test_par_adjusted_spread_cds_round_trip():
    k = kernels(FLAT2, SurvivalParams(0.01, 0.07, 0.12), 5.0)
    q = CdsSpec(coupon=0.01, tenor=5.0, quote_type="upfront", quote=0.04)
    sbar = par_adjusted_spread_cds(q, k, FLAT2)
    assert (sbar - q.coupon) * k.pi == pytest.approx(0.04, abs=1e-15)
    # u = 0 means the CDS is at par
    q0 = CdsSpec(coupon=0.01, tenor=5.0, quote_type="upfront", quote=0.0)
    assert par_adjusted_spread_cds(q0, k, FLAT2) == pytest.approx(0.01, abs=1e-15)


def test_par_adjusted_spread_cds_direct_substitution():
    k = RiskyKernels(pi=4.0, xi=0.1, rhat=0.02, bq_T=0.84, tenor=5.0)
    q = CdsSpec(coupon=0.01, tenor=5.0, quote_type="upfront", quote=0.04)
    assert par_adjusted_spread_cds(q, k, FLAT2) == pytest.approx(0.02, abs=1e-15)


def test_cds_spread_quote_at_par_is_exact():
    q = CdsSpec(coupon=0.05, tenor=5.0, quote_type="spread", quote=0.05)
    k = kernels(FLAT2, SurvivalParams.flat(0.0833), 5.0)
    assert par_adjusted_spread_cds(q, k, FLAT2) == pytest.approx(0.05, abs=1e-15)


def test_nonstandard_cds_coupon_warns():
    with pytest.warns(UserWarning):
        CdsSpec(coupon=0.02, tenor=5.0, quote_type="spread", quote=0.02)


def test_bond_cds_spec_validation():
    with pytest.raises(ValueError):
        BondSpec(coupon=-0.01, tenor=5.0, price=100.0)
    with pytest.raises(ValueError):
        BondSpec(coupon=0.05, tenor=0.0, price=100.0)
    with pytest.raises(ValueError):
        BondSpec(coupon=0.05, tenor=5.0, price=100.0, recovery=1.0)
    with pytest.raises(ValueError):
        CdsSpec(coupon=0.05, tenor=5.0, quote_type="bogus", quote=0.0)


# -- exact fit ---------------------------------------------------------


def test_exact_fit_on_curve_is_identity():
    base = SurvivalParams(0.01, 0.05, 0.1)
    k = kernels(FLAT2, base, 6.0)
    spec = BondSpec(coupon=0.05, tenor=6.0, price=100.0, recovery=0.4)
    spec = BondSpec(coupon=0.05, tenor=6.0, price=bond_model_price(spec, k), recovery=0.4)
    fitted = exact_fit_to_instrument(spec, base, FLAT2)
    assert fitted.a == pytest.approx(base.a, rel=1e-9)
    assert fitted.b == pytest.approx(base.b, rel=1e-9)


def test_exact_fit_cheapening_raises_hazards():
    base = SurvivalParams(0.01, 0.05, 0.1)
    k = kernels(FLAT2, base, 6.0)
    spec = BondSpec(coupon=0.05, tenor=6.0, price=100.0, recovery=0.4)
    on_curve = bond_model_price(spec, k)
    cheap = BondSpec(coupon=0.05, tenor=6.0, price=on_curve - 3.0, recovery=0.4)
    fitted = exact_fit_to_instrument(cheap, base, FLAT2)
    assert fitted.a > base.a and fitted.b > base.b
    assert fitted.b / fitted.a == pytest.approx(base.b / base.a, rel=1e-12)
    k_f = kernels(FLAT2, fitted, 6.0)
    assert bond_model_price(cheap, k_f) == pytest.approx(cheap.price, abs=1e-8)


def test_exact_fit_cds():
    q = CdsSpec(coupon=0.01, tenor=5.0, quote_type="spread", quote=0.025,
                quoting_recovery=0.4)
    fitted = exact_fit_to_instrument(q, SurvivalParams.flat(0.01), FLAT2, recovery=0.4)
    k = kernels(FLAT2, fitted, 5.0)
    u_model = (par_cds_spread(k, 0.4) - q.coupon) * k.pi
    assert u_model == pytest.approx(cds_upfront(q, FLAT2), abs=1e-10)


def test_exact_fit_unattainable_price():
    base = SurvivalParams(0.01, 0.05, 0.1)
    rich = BondSpec(coupon=0.05, tenor=6.0, price=200.0, recovery=0.4)
    with pytest.raises(ArithmeticError):
        exact_fit_to_instrument(rich, base, FLAT2)
    below_floor = BondSpec(coupon=0.05, tenor=6.0, price=20.0, recovery=0.4)
    with pytest.raises(ArithmeticError):
        exact_fit_to_instrument(below_floor, base, FLAT2)
