"""Synthetic site history standing in for plant monitoring data.

Produces 5-minute weather and monitored production for a configured
system, with known soiling, degradation and wiring losses, so every
downstream stage can be exercised and checked against ground truth.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .geometry import GeoLocation, clear_sky_ghi, clear_sky_poa
from .losses import degradation_profile
from .plant import SystemConfig, simulate
from .synth import SLOT_MINUTES, SLOTS_PER_DAY, noct_cell_temp

# mean daily clearness per month at a high-altitude equatorial site
MONTHLY_CLEARNESS = {1: 0.56, 2: 0.54, 3: 0.50, 4: 0.45, 5: 0.45, 6: 0.50,
                     7: 0.53, 8: 0.54, 9: 0.50, 10: 0.44, 11: 0.45, 12: 0.53}
DRY_MONTHS = (12, 1, 2)
K_CONCENTRATION = 9.0
T_AMB_MEAN = 14.0
T_CELL_NOISE = 1.2
MEASUREMENT_NOISE = 0.003
CLEAN_PROB_ON_RAIN = 0.5
RAIN_K = 0.35


@dataclass(frozen=True)
class HistorySpec:
    start: str
    end: str
    commissioning: str = "2019-08-01"
    degradation_rate: float = 0.5
    soiling_rate: tuple = (0.0005, 0.0015)


def day_index(start, end):
    """5-minute local timestamps covering whole days from ``start`` to ``end``."""
    days = pd.date_range(pd.Timestamp(start).normalize(), pd.Timestamp(end).normalize(), freq="D")
    return pd.date_range(days[0], periods=len(days) * SLOTS_PER_DAY, freq=f"{SLOT_MINUTES}min")


def _daily_k(rng, months):
    k = np.empty(len(months))
    for i, m in enumerate(months):
        mean = MONTHLY_CLEARNESS[m]
        lo = 0.25 if m in DRY_MONTHS else 0.08
        hi = 0.85
        mu = (mean - lo) / (hi - lo)
        k[i] = lo + (hi - lo) * rng.beta(mu * K_CONCENTRATION, (1 - mu) * K_CONCENTRATION)
    return k


def _intraday(rng, cs, k_day):
    """Irradiance for one day whose daily clearness equals ``k_day``."""
    up = cs > 0
    # broken skies fluctuate most; clear and overcast days are smooth
    sigma = 0.05 + 0.9 * k_day * (1.0 - k_day)
    phi = 0.85
    z = np.empty(cs.size)
    z[0] = rng.standard_normal()
    eps = rng.standard_normal(cs.size) * np.sqrt(1 - phi ** 2)
    for i in range(1, cs.size):
        z[i] = phi * z[i - 1] + eps[i]
    shape = np.exp(sigma * z)
    g = np.where(up, cs * shape, 0.0)
    for _ in range(3):
        g *= k_day * cs[up].sum() / g[up].sum()
        g = np.minimum(g, 1.2 * cs)
    return g


def weather(loc: GeoLocation, orient, spec: HistorySpec, seed, T_NOCT):
    """Weather history: ``GHI``, ``G_POA``, ``T_amb``, ``T_cell`` and daily clearness."""
    rng = np.random.default_rng(seed)
    idx = day_index(spec.start, spec.end)
    n_days = len(idx) // SLOTS_PER_DAY
    cs = np.asarray(clear_sky_poa(idx, loc, orient)).reshape(n_days, SLOTS_PER_DAY)
    cs_h = np.asarray(clear_sky_ghi(idx, loc)).reshape(n_days, SLOTS_PER_DAY)
    days = idx[::SLOTS_PER_DAY]
    k_day = _daily_k(rng, days.month)
    G = np.vstack([_intraday(rng, cs[d], k_day[d]) for d in range(n_days)])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(cs > 0, G / np.where(cs > 0, cs, 1.0), 0.0)
    ghi = ratio * cs_h
    hours = (np.arange(SLOTS_PER_DAY) * SLOT_MINUTES) / 60.0
    diurnal = np.clip(np.sin(np.pi * (hours - 7.0) / 14.0), -0.6, None)
    amp = 3.0 + 6.0 * k_day
    T_amb = (T_AMB_MEAN - 1.5 + amp[:, None] * diurnal[None, :]
             + rng.normal(0.0, 0.6, (n_days, 1)) + rng.normal(0.0, 0.3, G.shape))
    T_cell = noct_cell_temp(T_amb, G, T_NOCT) + rng.normal(0.0, T_CELL_NOISE, G.shape)
    out = pd.DataFrame({
        "GHI": ghi.ravel(), "G_POA": G.ravel(),
        "T_amb": T_amb.ravel(), "T_cell": T_cell.ravel(),
    }, index=idx)
    out.index.name = "timestamp"
    return out, pd.Series(k_day, index=days, name="k_day")


def soiling_truth(rng, k_day: pd.Series, rate_range):
    """Daily soiling ratio: linear accumulation reset by rain."""
    ratio = np.empty(len(k_day))
    level = 1.0
    rate = rng.uniform(*rate_range)
    for i, k in enumerate(k_day.to_numpy()):
        if k < RAIN_K and rng.random() < CLEAN_PROB_ON_RAIN:
            level = 1.0
            rate = rng.uniform(*rate_range)
        ratio[i] = level
        level = max(level - rate, 0.5)
    return pd.Series(ratio, index=k_day.index, name="soiling_ratio")


def monitoring(system: SystemConfig, wx: pd.DataFrame, k_day: pd.Series,
               spec: HistorySpec, seed):
    """Monitored production for one system plus its true daily losses.

    Returns
    -------
    records : DataFrame
        Canonical monitoring columns (``GHI`` ... ``E_day``).
    truth : DataFrame
        Daily ``soiling`` and ``degradation`` loss in percent.
    """
    rng = np.random.default_rng(seed)
    soil_ratio = soiling_truth(rng, k_day, spec.soiling_rate)
    deg = pd.Series(degradation_profile(spec.commissioning, k_day.index, spec.degradation_rate),
                    index=k_day.index)
    day = wx.index.normalize()
    soil_pct = 100.0 * (1.0 - soil_ratio.reindex(day).to_numpy())
    deg_pct = deg.reindex(day).to_numpy()
    sim = simulate(system, wx["G_POA"].to_numpy(), wx["T_cell"].to_numpy(),
                   soiling=soil_pct, degradation=deg_pct, index=wx.index)
    noise = 1.0 + rng.normal(0.0, MEASUREMENT_NOISE, (len(sim), 3))
    I_DC = sim["I_DC"].to_numpy() * noise[:, 0]
    V_DC = sim["V_DC"].to_numpy() * noise[:, 1]
    P_DC = I_DC * V_DC
    P_AC = sim["P_AC"].to_numpy() * noise[:, 2]
    step_h = SLOT_MINUTES / 60.0
    E_day = pd.Series(P_AC * step_h, index=wx.index).groupby(day).cumsum().to_numpy()
    records = pd.DataFrame({
        "GHI": wx["GHI"], "G_POA": wx["G_POA"], "T_amb": wx["T_amb"], "T_cell": wx["T_cell"],
        "I_DC": I_DC, "V_DC": V_DC, "P_DC": P_DC, "P_AC": P_AC, "E_day": E_day,
    }, index=wx.index)
    truth = pd.DataFrame({"soiling": 100.0 * (1.0 - soil_ratio), "degradation": deg})
    truth.index.name = "date"
    return records, truth
