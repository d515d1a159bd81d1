import itertools

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from pvtwin import losses as L
from pvtwin.errors import InputError, NumericalError

pct = st.floats(0.0, 100.0, allow_nan=False)


def test_temperature_correct():
    assert L.temperature_correct(1000.0, 25.0, -0.0036) == 1000.0
    assert L.temperature_correct(1000.0, 60.0, 0.0) == 1000.0
    assert L.temperature_correct(1000.0, 45.0, -0.0036) == pytest.approx(1077.586207, rel=1e-9)
    with pytest.raises(NumericalError):
        L.temperature_correct(1000.0, 400.0, -0.0036)


def _day_frame(days, p_ac, g=800.0, t=25.0):
    idx = pd.date_range("2021-01-01", periods=days * 288, freq="5min")
    daylight = (idx.hour >= 6) & (idx.hour < 18)
    day_no = (idx.normalize() - idx[0].normalize()).days
    P = np.where(daylight, np.asarray(p_ac)[day_no] if np.ndim(p_ac) else p_ac, 0.0)
    return pd.DataFrame({"G_POA": np.where(daylight, g, 0.0), "T_cell": t, "P_AC": P}, index=idx)


def test_daily_performance_constants():
    table, excluded = L.daily_performance(_day_frame(3, 4000.0), -0.0036)
    assert excluded == []
    assert table["H"].iloc[0] == pytest.approx(800.0 * 12)
    assert table["E"].iloc[0] == pytest.approx(4000.0 * 12)
    assert np.allclose(table["PM"], 5.0)
    assert np.allclose(table["PM_norm"], 1.0)


def test_daily_performance_linear_decay():
    p = 5000.0 * (1.0 - 0.002 * np.arange(60))
    table, _ = L.daily_performance(_day_frame(60, p), -0.0036)
    expected = p / np.percentile(p / 800.0, 95) / 800.0
    assert np.allclose(table["PM_norm"], expected, rtol=0.01)


def test_daily_performance_flags_dark_day():
    df = _day_frame(3, 4000.0)
    df.loc["2021-01-02", "G_POA"] = 0.0
    table, excluded = L.daily_performance(df, -0.0036)
    assert excluded == [pd.Timestamp("2021-01-02")]
    assert len(table) == 2


def test_rolling_median_cases(rng):
    assert np.array_equal(L.rolling_median(np.full(30, 0.7)), np.full(30, 0.7))
    x = np.ones(31)
    x[15] = 50.0
    assert L.rolling_median(x)[15] == 1.0
    with pytest.raises(InputError):
        L.rolling_median(x, 0)


def test_cleaning_events_rules():
    assert L.detect_cleaning_events(np.ones(40)) == []
    n = 120
    day = np.arange(n)
    saw = 1.0 - 0.003 * (day % 30) + 0.0
    events = L.detect_cleaning_events(saw)
    assert len(events) == 3
    assert all(abs(e - s) <= 1 for e, s in zip(events, (30, 60, 90)))
    drop = np.ones(40)
    drop[20:] -= 0.3
    assert L.detect_cleaning_events(drop) == []
    with pytest.raises(InputError):
        L.detect_cleaning_events(np.ones(10))


def test_theil_sen_cases(rng):
    x = np.arange(20.0)
    ts = L.theil_sen(x, 3.0 - 0.01 * x)
    assert ts.slope == pytest.approx(-0.01)
    assert ts.ci_low == pytest.approx(-0.01) and ts.ci_high == pytest.approx(-0.01)
    x5, y5 = rng.uniform(0, 10, 5), rng.normal(size=5)
    brute = np.median([(y5[j] - y5[i]) / (x5[j] - x5[i])
                       for i, j in itertools.combinations(range(5), 2)])
    assert L.theil_sen(x5, y5).slope == brute
    x9 = np.arange(9.0)
    y9 = 2.0 + 0.5 * x9
    y9[4] = 100.0
    assert L.theil_sen(x9, y9).slope == pytest.approx(0.5)
    with pytest.raises(InputError):
        L.theil_sen(np.ones(5), np.arange(5.0))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 50), st.integers(0, 10_000))
def test_theil_sen_equals_brute_force(n, seed):
    r = np.random.default_rng(seed)
    x, y = np.sort(r.choice(200, n, replace=False)).astype(float), r.normal(size=n)
    brute = np.median([(y[j] - y[i]) / (x[j] - x[i]) for i, j in itertools.combinations(range(n), 2)])
    ts = L.theil_sen(x, y)
    assert ts.slope == brute
    assert ts.ci_low <= ts.slope <= ts.ci_high


def test_theil_sen_ci_matches_scipy(rng):
    x = np.arange(40.0)
    y = -0.003 * x + 0.01 * rng.normal(size=40)
    ref = stats.theilslopes(y, x, alpha=0.95)
    ts = L.theil_sen(x, y)
    assert ts.slope == pytest.approx(ref.slope)
    assert ts.ci_low == pytest.approx(ref.low_slope)
    assert ts.ci_high == pytest.approx(ref.high_slope)


def test_segment_intervals_merges_short_pieces():
    assert L.segment_intervals(30, [10, 12]) == [(0, 9), (10, 29)]
    assert L.segment_intervals(30, [27]) == [(0, 29)]
    assert L.segment_intervals(30, []) == [(0, 29)]


def _interval(lo, hi, i0, i1, start_value=1.0):
    d = pd.date_range("2021-01-01", periods=i1 + 1)
    return L.SoilingInterval(d[i0], d[i1], (lo + hi) / 2, lo, hi, np.nan, start_value, i0, i1)


def test_monte_carlo_cases():
    dates = pd.date_range("2021-01-01", periods=40)
    fixed = [_interval(-0.002, -0.002, 0, 19), _interval(-0.004, -0.004, 20, 39, 0.99)]
    prof = L.monte_carlo_soiling(fixed, 20, 1, dates)
    assert prof.shape == (20, 40)
    assert np.all(prof == prof[0])
    wide = [_interval(-0.006, -0.002, 0, 39)]
    a = L.monte_carlo_soiling(wide, 1000, 3, dates)
    b = L.monte_carlo_soiling(wide, 1000, 3, dates)
    assert np.array_equal(a, b)
    slopes = a[:, 1] - a[:, 0]
    assert slopes.mean() == pytest.approx(-0.004, rel=0.02)
    with pytest.raises(InputError):
        L.monte_carlo_soiling(wide, 0, 3, dates)


def test_soiling_ratio_weighted():
    assert L.soiling_ratio_weighted(np.ones(5), np.arange(5.0) + 1) == pytest.approx(1.0)
    pm = np.array([0.9, 0.8, 0.7])
    assert L.soiling_ratio_weighted(pm, np.ones(3)) == pytest.approx(pm.mean())
    assert L.soiling_ratio_weighted(np.array([0.9, 0.5]), np.array([1.0, 3.0])) == pytest.approx(0.6)
    with pytest.raises(InputError):
        L.soiling_ratio_weighted(pm, np.zeros(3))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 1.2), min_size=2, max_size=30), st.integers(0, 999))
def test_soiling_ratio_between_extremes(pm, seed):
    pm = np.array(pm)
    H = np.random.default_rng(seed).uniform(0.1, 10.0, pm.size)
    r = L.soiling_ratio_weighted(pm, H)
    assert pm.min() - 1e-12 <= r <= pm.max() + 1e-12


def test_degradation_profile():
    assert L.degradation_profile("2020-01-01", ["2020-01-01"])[0] == 0.0
    assert L.degradation_profile("2020-01-01", ["2020-12-31"])[0] == pytest.approx(0.5)
    assert L.degradation_profile("2019-08-01", ["2021-02-28"])[0] == pytest.approx(0.79, abs=0.01)
    one, two = L.degradation_profile("2020-01-01", ["2020-03-01", "2020-04-30"])
    assert two == pytest.approx(2 * one)
    with pytest.raises(InputError):
        L.degradation_profile("2021-01-01", ["2020-01-01"])


def test_ohmic_loss():
    spec = L.WiringSpec(length=100.0, cross_section=10.0)
    assert spec.resistance == pytest.approx(0.171)
    w, _ = L.ohmic_loss(0.0, spec)
    assert w == 0.0
    w, p = L.ohmic_loss(10.0, spec, P_ref=1710.0)
    assert w == pytest.approx(17.1)
    assert p == pytest.approx(1.0)
    with pytest.raises(InputError):
        L.WiringSpec(length=0.0, cross_section=10.0)


def test_reference_wiring_below_three_percent(system_a):
    from pvtwin.plant import simulate
    G = np.linspace(50.0, 1100.0, 50)
    sim = simulate(system_a, G, 25.0 + 0.03 * G)
    assert sim["loss_dc_wiring"].max() <= 3.0
    assert sim["loss_ac_wiring"].max() <= 3.0


def test_inverter_loss():
    assert L.inverter_loss(1000.0, 1000.0) == 0.0
    assert L.inverter_loss(1000.0, 980.0) == pytest.approx(2.0)
    assert np.isnan(L.inverter_loss(0.0, 0.0))


def test_reference_inverter_loss_order(inverter):
    from pvtwin.pvcore import snl_ac_power
    p = np.linspace(0.1, 1.0, 50) * inverter.P_DC0
    ac = snl_ac_power(p, np.full_like(p, inverter.V_DC0), inverter)
    assert 0.5 <= np.mean(L.inverter_loss(p, ac)) <= 3.0


def test_total_loss_examples():
    assert L.total_loss([0.0]) == 0.0
    assert L.total_loss([50.0, 50.0]) == pytest.approx(75.0, abs=1e-12)
    assert L.total_loss([10.0, 20.0, 30.0]) == pytest.approx(49.6, abs=1e-12)
    with pytest.raises(InputError):
        L.total_loss([120.0])


@settings(max_examples=100, deadline=None)
@given(st.lists(pct, min_size=1, max_size=6), pct, st.randoms())
def test_total_loss_properties(factors, extra, rnd):
    base = L.total_loss(factors)
    shuffled = list(factors)
    rnd.shuffle(shuffled)
    assert L.total_loss(shuffled) == pytest.approx(base, abs=1e-9)
    assert L.total_loss(factors + [extra]) >= base - 1e-9
    assert 0.0 <= base <= 100.0


def test_loss_profile_columns_and_total():
    d = pd.date_range("2021-01-01", periods=3)
    t = L.loss_profile(d, [1, 2, 3], [0.5] * 3, [1] * 3, [0.2] * 3, [2] * 3)
    assert list(t.columns) == L.LOSS_COLUMNS + ["total"]
    assert t["total"].iloc[0] == pytest.approx(L.total_loss([1, 0.5, 1, 0.2, 2]))


def test_soiling_percent():
    assert np.allclose(L.soiling_percent([1.0, 1.1, 0.95, -0.1]), [0.0, 0.0, 5.0, 100.0])
