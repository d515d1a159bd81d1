"""Climate-consistent synthetic irradiance and temperature.

Historical days are grouped by month and sky category (from the daily
clearness index). Each group yields a per-slot irradiance envelope;
synthetic days are drawn slot by slot from a Gaussian truncated to the
envelope, and temperatures are drawn from historical samples recorded
at similar irradiance in the same group.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.special import ndtr, ndtri

from .errors import InputError

SLOTS_PER_DAY = 288
SLOT_MINUTES = 5
CATEGORY_BOUNDS = np.array([0.2, 0.4, 0.6, 0.67])
CATEGORIES = ("SC1", "SC2", "SC3", "SC4", "SC5")
CATEGORY_RANGES = {
    "SC1": (0.0, 0.2), "SC2": (0.2, 0.4), "SC3": (0.4, 0.6),
    "SC4": (0.6, 0.67), "SC5": (0.67, 1.0),
}
TEMP_BAND = 0.025
TEMP_BAND_CAP = 0.20


def clearness_index(G_POA, G_cs):
    """Instantaneous clearness ``G_POA / G_cs`` clamped to [0, 1]; NaN where ``G_cs <= 0``."""
    G = np.asarray(G_POA, dtype=float)
    cs = np.asarray(G_cs, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(cs > 0, np.clip(G / np.where(cs > 0, cs, 1.0), 0.0, 1.0), np.nan)
    return k if k.ndim else float(k)


def daily_clearness(G_POA, G_cs):
    """Daily clearness from sums over daylight slots, clamped to [0, 1]."""
    G = np.asarray(G_POA, dtype=float)
    cs = np.asarray(G_cs, dtype=float)
    up = cs > 0
    total = cs[..., :].sum(axis=-1, where=up)
    if np.any(total <= 0):
        raise InputError("no daylight slots in day")
    return np.clip(G.sum(axis=-1, where=up) / total, 0.0, 1.0)


def classify_sky(k):
    """Sky category label; each range is closed on the right."""
    k = np.asarray(k, dtype=float)
    if np.any((k < 0) | (k > 1)) or np.any(np.isnan(k)):
        raise InputError("clearness index must lie in [0, 1]")
    idx = np.searchsorted(CATEGORY_BOUNDS, k, side="left")
    labels = np.asarray(CATEGORIES)[idx]
    return str(labels) if labels.ndim == 0 else labels


def category_center(label):
    lo, hi = CATEGORY_RANGES[label]
    return 0.5 * (lo + hi)


def noct_cell_temp(T_amb, G_POA, T_NOCT):
    """Cell temperature from the nominal operating cell temperature model."""
    return np.asarray(T_amb) + (T_NOCT - 20.0) / 800.0 * np.asarray(G_POA)


def _day_matrix(series: pd.Series):
    """Reshape a 5-minute series into (days, 288) keeping only complete days."""
    s = series.sort_index()
    day = s.index.normalize()
    slot = (s.index.hour * 60 + s.index.minute) // SLOT_MINUTES
    frame = pd.DataFrame({"v": s.to_numpy(), "day": day, "slot": slot})
    mat = frame.pivot_table(index="day", columns="slot", values="v", aggfunc="first")
    mat = mat.reindex(columns=range(SLOTS_PER_DAY))
    mat = mat.dropna(axis=0, how="any")
    return mat


@dataclass
class DailyEnvelope:
    month: int
    category: str
    min: np.ndarray
    mean: np.ndarray
    max: np.ndarray
    n_days: int = 1

    def __post_init__(self):
        if not (np.all(self.min <= self.mean + 1e-9) and np.all(self.mean <= self.max + 1e-9)):
            raise InputError("envelope requires min <= mean <= max")


def classify_days(G_POA: pd.Series, G_cs: pd.Series):
    """Daily clearness index and category for every complete historical day."""
    g = _day_matrix(G_POA)
    cs = _day_matrix(G_cs).reindex(g.index)
    k = daily_clearness(g.to_numpy(), cs.to_numpy())
    return pd.DataFrame({"k": k, "category": classify_sky(k)}, index=g.index)


def build_envelopes(G_POA: pd.Series, G_cs: pd.Series):
    """Per-(month, category) slot-wise min, mean and max irradiance.

    Returns
    -------
    envelopes : dict
        ``{(month, category): DailyEnvelope}``; empty buckets are absent.
    days : DataFrame
        Daily clearness and category of the historical days.
    """
    g = _day_matrix(G_POA)
    days = classify_days(G_POA, G_cs)
    out = {}
    for (month, cat), idx in days.groupby([days.index.month, "category"]).groups.items():
        m = g.loc[idx].to_numpy()
        out[(int(month), str(cat))] = DailyEnvelope(
            int(month), str(cat), m.min(axis=0), m.mean(axis=0), m.max(axis=0), len(idx))
    return out, days


def nearest_envelope(envelopes, month, category):
    """Envelope for the key, else the same-month category closest in clearness."""
    if (month, category) in envelopes:
        return envelopes[(month, category)]
    options = [c for (m, c) in envelopes if m == month]
    if not options:
        raise InputError(f"no historical envelope for month {month}")
    target = category_center(category)
    best = min(options, key=lambda c: (abs(category_center(c) - target), c))
    return envelopes[(month, best)]


def day_rng(seed, date):
    """Independent generator for one calendar day under a master seed."""
    ordinal = pd.Timestamp(date).toordinal()
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(ordinal,)))


def truncated_normal(rng, mean, sigma, lo, hi):
    """Inverse-CDF draws from N(mean, sigma) truncated to [lo, hi]; sigma = 0 gives mean."""
    mean, sigma, lo, hi = np.broadcast_arrays(*(np.asarray(x, dtype=float)
                                                for x in (mean, sigma, lo, hi)))
    u = rng.random(mean.shape)
    out = mean.copy()
    live = sigma > 0
    if np.any(live):
        s = sigma[live]
        a = ndtr((lo[live] - mean[live]) / s)
        b = ndtr((hi[live] - mean[live]) / s)
        p = a + u[live] * (b - a)
        x = mean[live] + s * ndtri(np.clip(p, 1e-300, 1.0 - 1e-16))
        out[live] = np.clip(x, lo[live], hi[live])
    return out


def synth_irradiance(envelope: DailyEnvelope, n_days, seed, dates=None):
    """Synthetic daily irradiance profiles inside an envelope.

    Returns an ``(n_days, 288)`` array. Slots whose envelope maximum is
    zero stay at zero. With ``dates`` given, each day uses its own
    generator derived from ``seed`` and the date.
    """
    sigma = (envelope.max - envelope.min) / 6.0
    night = envelope.max <= 0
    out = np.empty((n_days, SLOTS_PER_DAY))
    if dates is None:
        rng = np.random.default_rng(seed)
        rngs = [rng] * n_days
    else:
        rngs = [day_rng(seed, d) for d in dates]
    for i in range(n_days):
        g = truncated_normal(rngs[i], envelope.mean, sigma, envelope.min, envelope.max)
        g[night] = 0.0
        out[i] = g
    return out


@dataclass
class TemperaturePool:
    """Historical (G, T_amb, T_cell) samples of one group, sorted by irradiance."""

    G: np.ndarray
    cum: np.ndarray  # prefix sums of Ta, Tc, Ta^2, Tc^2, Ta*Tc
    T_amb_mean: float

    @classmethod
    def build(cls, G, T_amb, T_cell):
        order = np.argsort(G, kind="stable")
        G = np.asarray(G, dtype=float)[order]
        ta = np.asarray(T_amb, dtype=float)[order]
        tc = np.asarray(T_cell, dtype=float)[order]
        cols = np.stack([ta, tc, ta * ta, tc * tc, ta * tc], axis=1)
        cum = np.vstack([np.zeros((1, 5)), np.cumsum(cols, axis=0)])
        return cls(G, cum, float(ta.mean()) if ta.size else np.nan)


@dataclass
class TemperatureDraw:
    T_amb: np.ndarray
    T_cell: np.ndarray
    band: np.ndarray  # relative half-width used, NaN where the fallback applied
    fallback: np.ndarray = field(default=None)


def synth_temperature(G_synth, pool: TemperaturePool, rng, T_NOCT, T_amb_fallback=None):
    """Temperatures for synthetic irradiance from irradiance-matched history.

    For each slot the historical samples with irradiance within +-2.5% of
    the synthetic value are summarized by their mean and covariance of
    (T_amb, T_cell), and one pair is drawn from that bivariate Gaussian.
    An empty match widens the band by doubling up to +-20%; past that
    the nominal-operating-cell-temperature model with the group's mean
    ambient temperature is used and the slot is flagged.
    """
    g = np.asarray(G_synth, dtype=float)
    shape = g.shape
    g = g.ravel()
    n = g.size
    stats = np.full((n, 5), np.nan)
    count = np.zeros(n)
    band = np.full(n, np.nan)
    todo = np.ones(n, dtype=bool)
    width = TEMP_BAND
    while width <= TEMP_BAND_CAP + 1e-12 and np.any(todo) and pool.G.size:
        idx = np.flatnonzero(todo)
        lo = np.searchsorted(pool.G, g[idx] * (1.0 - width), side="left")
        hi = np.searchsorted(pool.G, g[idx] * (1.0 + width), side="right")
        found = hi > lo
        sel = idx[found]
        c = (hi - lo)[found].astype(float)
        stats[sel] = (pool.cum[hi[found]] - pool.cum[lo[found]]) / c[:, None]
        count[sel] = c
        band[sel] = width
        todo[sel] = False
        width *= 2.0
    z = rng.standard_normal((n, 2))
    m_a, m_c = stats[:, 0], stats[:, 1]
    v_a = np.clip(stats[:, 2] - m_a ** 2, 0.0, None)
    v_c = np.clip(stats[:, 3] - m_c ** 2, 0.0, None)
    cov = stats[:, 4] - m_a * m_c
    s_a = np.sqrt(v_a)
    s_c = np.sqrt(v_c)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(s_a * s_c > 0, np.clip(cov / (s_a * s_c), -1.0, 1.0), 0.0)
    T_amb = m_a + s_a * z[:, 0]
    T_cell = m_c + s_c * (rho * z[:, 0] + np.sqrt(1.0 - rho ** 2) * z[:, 1])
    if np.any(todo):
        ta = pool.T_amb_mean if T_amb_fallback is None else T_amb_fallback
        T_amb[todo] = ta
        T_cell[todo] = noct_cell_temp(ta, g[todo], T_NOCT)
    return TemperatureDraw(T_amb.reshape(shape), T_cell.reshape(shape),
                           band.reshape(shape), todo.reshape(shape))


def category_frequencies(days: pd.DataFrame):
    """Historical share of each category per month."""
    counts = days.groupby([days.index.month, "category"]).size()
    return {int(m): (counts.loc[m] / counts.loc[m].sum()).to_dict()
            for m in counts.index.get_level_values(0).unique()}


def build_pools(history: pd.DataFrame, days: pd.DataFrame):
    """Temperature pools keyed by (month, category) plus per-month fallbacks."""
    h = history.sort_index()
    cat = days["category"].reindex(h.index.normalize()).to_numpy()
    keys = pd.DataFrame({"month": h.index.month, "category": cat}, index=h.index)
    ok = ~pd.isna(cat)
    pools = {}
    for (m, c), idx in keys[ok].groupby(["month", "category"]).groups.items():
        part = h.loc[idx]
        pools[(int(m), str(c))] = TemperaturePool.build(
            part["G_POA"].to_numpy(), part["T_amb"].to_numpy(), part["T_cell"].to_numpy())
    monthly = h["T_amb"].groupby(h.index.month).mean().to_dict()
    return pools, {int(k): float(v) for k, v in monthly.items()}


def generate(history: pd.DataFrame, G_cs_fn, dates, seed, T_NOCT, envelopes=None, days=None):
    """Synthetic 5-minute weather for each requested date.

    Parameters
    ----------
    history : DataFrame
        Historical 5-minute ``G_POA``, ``T_amb``, ``T_cell`` (local time index).
    G_cs_fn : callable
        Maps a DatetimeIndex to clear-sky plane-of-array irradiance.
    dates : sequence of dates
        Days to generate.
    seed : int
        Master seed; every day derives its own generator from it.

    Returns
    -------
    DataFrame
        5-minute index with ``G_POA``, ``T_amb``, ``T_cell``, ``G_cs``, ``k``,
        ``category`` (the generating category), ``temp_fallback``.
    """
    if envelopes is None or days is None:
        cs_hist = pd.Series(G_cs_fn(history.index), index=history.index)
        envelopes, days = build_envelopes(history["G_POA"], cs_hist)
    freqs = category_frequencies(days)
    pools, monthly = build_pools(history, days)
    frames = []
    for d in pd.DatetimeIndex(dates).normalize():
        rng = day_rng(seed, d)
        probs = freqs.get(d.month)
        if probs is None:
            raise InputError(f"no historical days for month {d.month}")
        cats = sorted(probs)
        cat = str(rng.choice(cats, p=[probs[c] for c in cats]))
        env = nearest_envelope(envelopes, d.month, cat)
        sigma = (env.max - env.min) / 6.0
        g = truncated_normal(rng, env.mean, sigma, env.min, env.max)
        idx = pd.date_range(d, periods=SLOTS_PER_DAY, freq=f"{SLOT_MINUTES}min")
        cs = np.asarray(G_cs_fn(idx), dtype=float)
        # sunrise drifts within a month; the sun must be up on this date too
        g[(env.max <= 0) | (cs <= 0)] = 0.0
        pool = pools.get((d.month, env.category))
        if pool is None:
            pool = TemperaturePool.build(np.empty(0), np.empty(0), np.empty(0))
        draw = synth_temperature(g, pool, rng, T_NOCT, monthly.get(d.month))
        frames.append(pd.DataFrame({
            "G_POA": g, "T_amb": draw.T_amb, "T_cell": draw.T_cell, "G_cs": cs,
            "k": np.nan_to_num(clearness_index(g, cs)), "category": env.category,
            "temp_fallback": draw.fallback,
        }, index=idx))
    out = pd.concat(frames)
    out.index.name = "timestamp"
    return out
