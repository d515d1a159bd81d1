"""Assembly of loss archives, synthetic production and detection runs."""
from __future__ import annotations

import numpy as np
import pandas as pd

from . import detect, faults, nn, synth
from .losses import (LOSS_COLUMNS, degradation_profile, daily_performance, loss_profile,
                     ohmic_loss, soiling_analysis, soiling_percent)
from .plant import SystemConfig, simulate

TARGETS = list(nn.TARGET_WIDTHS)
SIM_LOSSES = ["soiling", "degradation", "dc_wiring", "ac_wiring"]


def _energy_weighted_pct(loss_w, ref_w, day):
    num = pd.Series(loss_w).groupby(day).sum()
    den = pd.Series(ref_w).groupby(day).sum()
    return (100.0 * num / den.where(den > 0)).fillna(0.0)


def daily_loss_archive(system: SystemConfig, records: pd.DataFrame, commissioning,
                       degradation_rate=0.5, n_iter=1000, seed=0):
    """Daily loss factors (percent) estimated from monitoring records.

    Soiling comes from the soiling-interval analysis, degradation from the
    linear rate since commissioning, wiring from the ohmic loss of the
    measured currents, and inverter loss from the ratio of inverter
    output to DC input; all daily values are energy weighted.

    Returns
    -------
    archive : DataFrame
        Daily ``soiling, degradation, dc_wiring, ac_wiring, inverter, total``.
    soiling : SoilingResult
    """
    table, _ = daily_performance(records, system.module.gamma_pmp)
    result = soiling_analysis(table["PM_norm"], table["H"], n_iter=n_iter, seed=seed)
    soil = pd.Series(soiling_percent(result.mean_profile()), index=result.dates)
    day = pd.DatetimeIndex(records.index).normalize()
    days = pd.DatetimeIndex(day.unique())
    I_DC = records["I_DC"].to_numpy(dtype=float)
    P_DC = records["P_DC"].to_numpy(dtype=float)
    P_AC = records["P_AC"].to_numpy(dtype=float)
    dc_w, _ = ohmic_loss(I_DC, system.dc_wiring)
    ac_w, _ = ohmic_loss(P_AC / system.V_AC_nominal, system.ac_wiring)
    P_inv = P_AC + ac_w
    dc = _energy_weighted_pct(dc_w, P_DC + dc_w, day)
    ac = _energy_weighted_pct(ac_w, P_inv, day)
    inv = 100.0 * (1.0 - pd.Series(P_inv).groupby(day).sum()
                   / pd.Series(P_DC).groupby(day).sum().where(lambda s: s > 0))
    archive = loss_profile(
        days,
        soiling=soil.reindex(days).ffill().bfill().to_numpy(),
        degradation=degradation_profile(commissioning, days, degradation_rate),
        dc_wiring=dc.reindex(days).to_numpy(),
        ac_wiring=ac.reindex(days).to_numpy(),
        inverter=inv.reindex(days).to_numpy(),
    )
    return archive, result


def sampled_losses(archive: pd.DataFrame, days, seed):
    """Per-day loss factors for synthetic days, one archive day per month."""
    days = pd.DatetimeIndex(days).normalize()
    parts = []
    for (y, m), grp in pd.Series(days, index=days).groupby([days.year, days.month]):
        parts.append(faults.sample_daily_losses(archive, m, y, seed, days=grp.index))
    return pd.concat(parts).sort_index()


def production(system: SystemConfig, weather: pd.DataFrame, losses: pd.DataFrame | None = None):
    """Simulated signals for synthetic weather with daily loss factors applied."""
    day = pd.DatetimeIndex(weather.index).normalize()
    kw = {}
    if losses is not None:
        for col in SIM_LOSSES:
            kw[col] = losses[col].reindex(day).to_numpy(dtype=float)
    sim = simulate(system, weather["G_POA"].to_numpy(), weather["T_cell"].to_numpy(),
                   index=weather.index, **kw)
    out = pd.concat([weather, sim.drop(columns=["G_POA", "T_cell"])], axis=1)
    out.index.name = "timestamp"
    return out


def inject(system: SystemConfig, prod: pd.DataFrame, names, seed):
    """Labeled production: faults on daylight samples only."""
    specs = faults.fault_specs(names)
    schedule = faults.generate_fault_schedule(specs, prod.index, seed,
                                              eligible=prod["G_POA"].to_numpy() > 0)
    faulted, _ = faults.apply_faults(prod, schedule, system.inverter)
    return faulted, schedule


def sky_categories(df: pd.DataFrame):
    """Daily sky category of each sample recomputed from irradiance."""
    day = pd.DatetimeIndex(df.index).normalize()
    g = df["G_POA"].groupby(day).sum()
    cs = df["G_cs"].groupby(day).sum()
    k = np.clip(g / cs.where(cs > 0), 0.0, 1.0).fillna(0.0)
    cat = pd.Series(synth.classify_sky(k.to_numpy()), index=k.index)
    return cat.reindex(day).to_numpy()


def daylight(df: pd.DataFrame):
    return df[df["G_POA"] > 0]


def detect_frame(history: pd.DataFrame, target: pd.DataFrame, signals=TARGETS,
                 strategy="quartile_iqr", min_group=detect.MIN_GROUP, literal_q3=False,
                 values=None):
    """Per-signal and combined fault labels for ``target`` from bands of ``history``.

    ``values`` optionally replaces the classified signal columns (e.g.
    network predictions); bands always come from ``history``.

    Returns
    -------
    labels : DataFrame
        One column per signal plus ``any`` (1 when any signal is outside).
    bands : dict
        ThresholdBand per signal.
    """
    h_slot, h_cat = detect.slot_of(history.index), sky_categories(history)
    t_slot, t_cat = detect.slot_of(target.index), sky_categories(target)
    labels, bands = {}, {}
    for s in signals:
        band = detect.compute_thresholds(history[s].to_numpy(), h_slot, h_cat, strategy,
                                         min_group, literal_q3)
        v = (values[s] if values is not None else target[s]).to_numpy(dtype=float)
        labels[s], _ = detect.classify(v, band, t_slot, t_cat)
        bands[s] = band
    out = pd.DataFrame(labels, index=target.index)
    out["any"] = out[list(signals)].max(axis=1).astype(np.int8)
    return out, bands
