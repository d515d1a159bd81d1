"""Loss quantification: soiling, degradation, wiring and inverter.

Soiling follows a stochastic rate-and-recovery scheme: a daily
performance metric is median-filtered, cleaning events are the outlier
jumps, each soiling interval gets a Theil-Sen slope with a rank-based
confidence interval, and Monte Carlo sampling of those slopes yields an
insolation-weighted soiling ratio.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import pandas as pd
from scipy.special import ndtri

from . import kernels
from .errors import InputError, NumericalError

T_STC = 25.0
DAY_START_HOUR = 6
DAY_END_HOUR = 18
MEDIAN_WINDOW = 14
MIN_INTERVAL_DAYS = 5
MC_ITERATIONS = 1000
MISSING_FLAG_FRACTION = 0.2
COPPER_RHO = 0.0171  # ohm mm2 / m
LOSS_COLUMNS = ["soiling", "degradation", "dc_wiring", "ac_wiring", "inverter"]


@dataclass(frozen=True)
class WiringSpec:
    length: float
    cross_section: float
    rho: float = COPPER_RHO

    def __post_init__(self):
        if not (self.rho > 0 and self.length > 0 and self.cross_section > 0):
            raise InputError("wiring rho, length and cross_section must be positive")

    @property
    def resistance(self):
        return self.rho * self.length / self.cross_section


@dataclass
class SoilingInterval:
    start: pd.Timestamp
    end: pd.Timestamp
    slope: float
    slope_ci_low: float
    slope_ci_high: float
    cleaning_magnitude: float
    start_value: float
    i0: int  # positions into the analyzed-day arrays, inclusive
    i1: int
    missing_fraction: float = 0.0
    flagged: bool = False


@dataclass
class SoilingResult:
    dates: pd.DatetimeIndex
    events: list
    breaks: list
    intervals: list
    mc_profiles: np.ndarray
    r_s_H: float
    filtered: np.ndarray = field(repr=False, default=None)

    def mean_profile(self):
        return self.mc_profiles.mean(axis=0)


class TheilSen(NamedTuple):
    slope: float
    ci_low: float
    ci_high: float


# --------------------------------------------------------------- performance

def temperature_correct(P_AC, T_cell, gamma_pmp):
    """Power referred to 25 C cell temperature with a relative coefficient."""
    denom = 1.0 + gamma_pmp * (np.asarray(T_cell, dtype=float) - T_STC)
    if np.any(denom <= 0):
        raise NumericalError("temperature correction denominator <= 0",
                             min_denominator=float(np.min(denom)))
    out = np.asarray(P_AC, dtype=float) / denom
    return out if out.ndim else float(out)


def daily_performance(df: pd.DataFrame, gamma_pmp: float, percentile=95.0):
    """Daily energy, insolation and performance metric.

    Parameters
    ----------
    df : DataFrame
        Timestamp-indexed, regularly sampled, with ``G_POA``, ``T_cell``
        and ``P_AC`` columns.
    gamma_pmp : float
        Relative power temperature coefficient, 1/C.

    Returns
    -------
    table : DataFrame
        Indexed by day with columns ``E`` (Wh), ``H`` (Wh/m2), ``PM`` and
        ``PM_norm``. Days with zero insolation are dropped.
    excluded : list of Timestamp
        The dropped days.
    """
    if len(df) < 2:
        raise InputError("daily_performance needs at least two samples")
    step_h = pd.Series(df.index).diff().median() / pd.Timedelta(hours=1)
    hours = df.index.hour
    win = df[(hours >= DAY_START_HOUR) & (hours < DAY_END_HOUR)]
    p_tc = temperature_correct(win["P_AC"].to_numpy(), win["T_cell"].to_numpy(), gamma_pmp)
    day = win.index.normalize()
    E = pd.Series(p_tc * step_h, index=win.index).groupby(day).sum()
    H = (win["G_POA"] * step_h).groupby(day).sum()
    table = pd.DataFrame({"E": E, "H": H})
    excluded = list(table.index[table["H"] <= 0])
    table = table[table["H"] > 0].copy()
    table["PM"] = table["E"] / table["H"]
    p = np.percentile(table["PM"], percentile) if len(table) else np.nan
    table["PM_norm"] = table["PM"] / p if p > 0 else 0.0
    table.index.name = "date"
    return table, excluded


# ------------------------------------------------------------------ soiling

def rolling_median(series, window=MEDIAN_WINDOW):
    """Centered moving median, truncated at the series ends.

    For an even window the centre sits at ``window // 2`` inside it.
    """
    if window < 1:
        raise InputError("window must be >= 1")
    return kernels.rolling_median(np.asarray(series, dtype=float), int(window))


def _fence(values):
    q1, q3 = np.percentile(values, [25, 75])
    return q3 + 1.5 * (q3 - q1)


def find_jumps(filtered, return_fence=False):
    """Positions of outlier day-to-day changes in a filtered metric.

    Runs of consecutive outlier days with the same sign are reported
    once, at the largest change, since an even-width median spreads a
    single step over neighbouring days.

    Returns
    -------
    cleanings, breaks : list of int
        Positive and negative outlier jumps; a position ``i`` refers to
        the change from day ``i - 1`` to day ``i``.
    """
    x = np.asarray(filtered, dtype=float)
    if x.size < 15:
        raise InputError("cleaning detection needs at least 15 days")
    delta = np.diff(x)
    mag = np.abs(delta)
    outlier = mag > _fence(mag)
    sign = np.sign(delta)
    cleanings, breaks = [], []
    i = 0
    while i < delta.size:
        if not outlier[i]:
            i += 1
            continue
        j = i
        while j + 1 < delta.size and outlier[j + 1] and sign[j + 1] == sign[i]:
            j += 1
        best = i + int(np.argmax(mag[i:j + 1]))
        (cleanings if sign[i] > 0 else breaks).append(best + 1)
        i = j + 1
    if return_fence:
        return cleanings, breaks, _fence(mag)
    return cleanings, breaks


def detect_cleaning_events(pm_norm_filtered, dates=None):
    """Dates (or positions) of cleaning events: positive outlier jumps."""
    cleanings, _ = find_jumps(pm_norm_filtered)
    if dates is None:
        return cleanings
    return [pd.Timestamp(dates[i]) for i in cleanings]


def _ranks_of_ties(v):
    _, counts = np.unique(v, return_counts=True)
    counts = counts[counts > 1]
    return float(np.sum(counts * (counts - 1) * (2 * counts + 5)))


def pairwise_slopes(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    i, j = np.triu_indices(x.size, k=1)
    dx = x[j] - x[i]
    keep = dx != 0
    return (y[j] - y[i])[keep] / dx[keep]


def theil_sen(x, y, confidence=0.95) -> TheilSen:
    """Median pairwise slope with Sen's rank-based confidence interval."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 2:
        raise InputError("theil_sen needs at least two paired points")
    slopes = np.sort(pairwise_slopes(x, y))
    if slopes.size == 0:
        raise InputError("theil_sen needs at least two distinct x values")
    med = float(np.median(slopes))
    n, N = x.size, slopes.size
    z = ndtri(0.5 + confidence / 2.0)
    var = (n * (n - 1) * (2 * n + 5) - _ranks_of_ties(x) - _ranks_of_ties(y)) / 18.0
    sigma = np.sqrt(max(var, 0.0))
    hi = min(int(np.round((N + z * sigma) / 2.0)), N - 1)
    lo = max(int(np.round((N - z * sigma) / 2.0)) - 1, 0)
    return TheilSen(med, float(min(slopes[lo], med)), float(max(slopes[hi], med)))


def theil_sen_intercept(x, y, slope):
    return float(np.median(np.asarray(y) - slope * np.asarray(x)))


def segment_intervals(n, boundaries, min_len=MIN_INTERVAL_DAYS):
    """Split ``range(n)`` at boundary positions; short pieces join the next one.

    The last piece, having no successor, joins its predecessor.
    """
    cuts = sorted({b for b in boundaries if 0 < b < n})
    edges = [0] + cuts + [n]
    pieces = [[edges[k], edges[k + 1]] for k in range(len(edges) - 1)]
    merged = []
    carry = None
    for a, b in pieces:
        if carry is not None:
            a = carry
            carry = None
        if b - a < min_len:
            carry = a
            continue
        merged.append([a, b])
    if carry is not None:
        if merged:
            merged[-1][1] = n
        else:
            merged.append([carry, n])
    return [(a, b - 1) for a, b in merged]


def fit_intervals(dates, pm_norm, bounds):
    """Theil-Sen fit per interval on the unfiltered metric."""
    dates = pd.DatetimeIndex(dates)
    day = np.asarray((dates - dates[0]).days, dtype=float)
    y = np.asarray(pm_norm, dtype=float)
    out = []
    prev_end_value = None
    for i0, i1 in bounds:
        xs, ys = day[i0:i1 + 1], y[i0:i1 + 1]
        if xs.size >= 2:
            ts = theil_sen(xs, ys)
            b = theil_sen_intercept(xs, ys, ts.slope)
        else:
            ts = TheilSen(0.0, 0.0, 0.0)
            b = float(ys[0])
        start_value = b + ts.slope * xs[0]
        end_value = b + ts.slope * xs[-1]
        magnitude = np.nan if prev_end_value is None else start_value - prev_end_value
        span = xs[-1] - xs[0] + 1
        missing = 1.0 - xs.size / span
        out.append(SoilingInterval(
            start=dates[i0], end=dates[i1], slope=ts.slope,
            slope_ci_low=ts.ci_low, slope_ci_high=ts.ci_high,
            cleaning_magnitude=float(magnitude), start_value=float(start_value),
            i0=i0, i1=i1, missing_fraction=float(missing),
            flagged=bool(missing > MISSING_FLAG_FRACTION)))
        prev_end_value = end_value
    return out


def monte_carlo_soiling(intervals, n_iter, seed, dates):
    """Soiling profiles with each interval slope drawn from its CI.

    Each profile restarts at the interval's fitted start value, so only
    the rate is uncertain. Returns an ``(n_iter, n_days)`` matrix.
    """
    if n_iter < 1:
        raise InputError("n_iter must be >= 1")
    dates = pd.DatetimeIndex(dates)
    day = np.asarray((dates - dates[0]).days, dtype=float)
    rng = np.random.default_rng(seed)
    lo = np.array([iv.slope_ci_low for iv in intervals])
    hi = np.array([iv.slope_ci_high for iv in intervals])
    draws = rng.uniform(lo, hi, size=(n_iter, len(intervals)))
    prof = np.empty((n_iter, day.size))
    for k, iv in enumerate(intervals):
        dx = day[iv.i0:iv.i1 + 1] - day[iv.i0]
        prof[:, iv.i0:iv.i1 + 1] = iv.start_value + draws[:, k:k + 1] * dx
    return prof


def soiling_ratio_weighted(pm, H):
    """Insolation-weighted mean of a daily ratio."""
    pm = np.asarray(pm, dtype=float)
    H = np.asarray(H, dtype=float)
    if pm.shape[-1] != H.shape[-1]:
        raise InputError("pm and H lengths differ")
    if np.any(H < 0):
        raise InputError("insolation must be non-negative")
    total = H.sum()
    if total <= 0:
        raise InputError("total insolation is zero")
    return (pm * H).sum(axis=-1) / total


def refine_jump(values, p, sign, half_width):
    """Exact day of a step first seen at ``p`` in the filtered series.

    A centered median spreads one step over two filtered days, so the
    raw metric is searched over ``p - 2 .. p + 1`` for the split that
    maximizes the signed difference of the means on either side.
    """
    n = values.size
    best, score = p, -np.inf
    for t in range(max(p - 2, 1), min(p + 1, n - 1) + 1):
        left = values[max(t - half_width, 0):t]
        right = values[t:t + half_width]
        d = sign * (right.mean() - left.mean())
        if d > score:
            best, score = t, d
    return best


def confirm_boundaries(dates, pm_norm, cleanings, breaks, fence,
                       min_interval=MIN_INTERVAL_DAYS):
    """Drop candidate jumps whose fitted level change does not clear ``fence``.

    A day-to-day change of the filtered metric can exceed its outlier
    fence by noise alone; a real cleaning or break also shifts the fitted level,
    so each boundary is re-tested on ``start_value`` minus the previous
    interval's final fitted value, with the expected sign. Boundaries are
    removed and the segmentation refitted until all survivors pass.
    """
    sign = {i: 1.0 for i in cleanings}
    sign.update({i: -1.0 for i in breaks})
    n = len(dates)
    while True:
        bounds = segment_intervals(n, sorted(sign), min_interval)
        intervals = fit_intervals(dates, pm_norm, bounds)
        weak = [iv.i0 for iv in intervals[1:]
                if iv.i0 in sign and not sign[iv.i0] * iv.cleaning_magnitude > fence]
        lost = set(sign) - {iv.i0 for iv in intervals}
        if not weak and not lost:
            return intervals, sign
        for i in weak + sorted(lost):
            sign.pop(i, None)


def soiling_analysis(pm_norm, H, n_iter=MC_ITERATIONS, seed=0,
                     window=MEDIAN_WINDOW, min_interval=MIN_INTERVAL_DAYS):
    """Full soiling chain on a daily series indexed by date."""
    pm_norm = pd.Series(pm_norm).sort_index()
    H = pd.Series(H).reindex(pm_norm.index)
    dates = pd.DatetimeIndex(pm_norm.index)
    values = pm_norm.to_numpy(dtype=float)
    filtered = rolling_median(values, window)
    cleanings, breaks, fence = find_jumps(filtered, return_fence=True)
    hw = max(window // 2, 1)
    cleanings = [refine_jump(values, i, 1.0, hw) for i in cleanings]
    breaks = [refine_jump(values, i, -1.0, hw) for i in breaks]
    # a confirmed level change must exceed what one noisy day can produce
    level_fence = max(fence, _fence(np.abs(np.diff(values))))
    intervals, sign = confirm_boundaries(dates, values, cleanings, breaks, level_fence,
                                         min_interval)
    prof = monte_carlo_soiling(intervals, n_iter, seed, dates)
    r = soiling_ratio_weighted(prof, H.to_numpy())
    return SoilingResult(
        dates=dates,
        events=[dates[i] for i in sorted(sign) if sign[i] > 0],
        breaks=[dates[i] for i in sorted(sign) if sign[i] < 0],
        intervals=intervals, mc_profiles=prof, r_s_H=float(np.mean(r)),
        filtered=filtered)


def soiling_percent(profile):
    """Daily soiling loss in percent from a soiling-ratio profile."""
    return 100.0 * (1.0 - np.clip(np.asarray(profile, dtype=float), 0.0, 1.0))


# ------------------------------------------------------------ other factors

def degradation_profile(start_date, dates, annual_rate=0.5):
    """Linear degradation loss in percent since ``start_date``."""
    start = pd.Timestamp(start_date).normalize()
    d = pd.DatetimeIndex(pd.to_datetime(np.atleast_1d(dates))).normalize()
    days = np.asarray((d - start).days, dtype=float)
    if np.any(days < 0):
        raise InputError("dates precede the degradation start date")
    return annual_rate * days / 365.0


def ohmic_loss(I, spec: WiringSpec, P_ref=None):
    """Conductor loss ``I^2 R`` in watts and, given ``P_ref``, in percent."""
    watts = np.asarray(I, dtype=float) ** 2 * spec.resistance
    if P_ref is None:
        return watts, None
    P_ref = np.asarray(P_ref, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        pct = np.where(P_ref > 0, 100.0 * watts / np.where(P_ref > 0, P_ref, 1.0), np.nan)
    return watts, pct


def inverter_loss(P_DC, P_AC):
    """Conversion loss in percent; NaN where ``P_DC <= 0``."""
    P_DC = np.asarray(P_DC, dtype=float)
    P_AC = np.asarray(P_AC, dtype=float)
    ok = P_DC > 0
    ratio = np.divide(P_AC, P_DC, out=np.zeros(np.broadcast(P_DC, P_AC).shape), where=ok)
    out = np.where(ok, np.clip((1.0 - ratio) * 100.0, 0.0, 100.0), np.nan)
    return out if out.ndim else float(out)


def total_loss(factors, axis=0):
    """Combined loss of independent percentage factors."""
    f = np.asarray(factors, dtype=float)
    if f.size == 0:
        return 0.0
    if np.any((f < 0) | (f > 100)):
        raise InputError("loss factors must lie in [0, 100]")
    out = 100.0 * (1.0 - np.prod(1.0 - f / 100.0, axis=axis if f.ndim else None))
    return out if np.ndim(out) else float(out)


def loss_profile(dates, soiling, degradation, dc_wiring, ac_wiring, inverter):
    """Daily loss table with the combined total; values in percent."""
    table = pd.DataFrame({
        "soiling": soiling, "degradation": degradation, "dc_wiring": dc_wiring,
        "ac_wiring": ac_wiring, "inverter": inverter,
    }, index=pd.DatetimeIndex(dates, name="date")).astype(float)
    table = table.fillna(0.0).clip(0.0, 100.0)
    table["total"] = total_loss(table[LOSS_COLUMNS].to_numpy().T, axis=0)
    return table
