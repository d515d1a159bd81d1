"""Stochastic fault injection, labels, and sampled historical losses."""
from __future__ import annotations

import calendar
import json
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ConfigurationError, InputError
from .pvcore import InverterParams, snl_ac_power

MAX_DAILY_FRACTION = 0.5
DC_TARGETS = ("I_DC", "V_DC", "P_DC", "V_oc", "I_sc", "T_cell")
AC_TARGETS = ("P_AC",)
KNOWN_TARGETS = DC_TARGETS + AC_TARGETS
SCHEDULE_COLUMNS = ["timestamp", "fault", "target", "magnitude"]


@dataclass(frozen=True)
class FaultSpec:
    """Fault with a percentage impact range per affected signal.

    ``min``/``max`` apply to every target unless ``ranges`` gives a
    target its own range.
    """

    name: str
    min: float
    max: float
    targets: tuple
    ranges: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.min <= self.max <= 100:
            raise InputError(f"{self.name}: require 0 <= min <= max <= 100")
        unknown = set(self.targets) - set(KNOWN_TARGETS)
        if unknown or not self.targets:
            raise ConfigurationError(f"{self.name}: unknown targets {sorted(unknown)}")
        for t, (lo, hi) in self.ranges.items():
            if t not in self.targets or not 0 <= lo <= hi <= 100:
                raise ConfigurationError(f"{self.name}: bad range for {t}")

    def range_for(self, target):
        return self.ranges.get(target, (self.min, self.max))


FAULT_TABLE = {
    "SS": FaultSpec("SS", 10.0, 20.0, ("P_DC",)),
    "HS": FaultSpec("HS", 10.0, 70.0, ("P_DC",)),
    "SOI": FaultSpec("SOI", 8.0, 12.0, ("P_DC",)),
    "HSp": FaultSpec("HSp", 2.0, 2.0, ("T_cell", "P_DC")),
    "DEG": FaultSpec("DEG", 0.0, 50.0, ("P_DC",)),
    "CC": FaultSpec("CC", 0.9, 42.8, ("T_cell", "P_DC")),
    "LL": FaultSpec("LL", 20.0, 80.0, ("V_oc",)),
    "GF": FaultSpec("GF", 0.0, 51.9, ("I_sc", "P_DC")),
    "SAF": FaultSpec("SAF", 0.0, 80.0, ("I_DC", "V_DC"),
                     {"I_DC": (0.0, 62.5), "V_DC": (0.0, 80.0)}),
    "PAF": FaultSpec("PAF", 0.0, 87.5, ("V_DC",)),
    "IF": FaultSpec("IF", 0.0, 100.0, ("P_AC",)),
}


def fault_specs(names=None):
    names = list(FAULT_TABLE) if names is None else list(names)
    unknown = [n for n in names if n not in FAULT_TABLE]
    if unknown:
        raise ConfigurationError(f"unknown faults {unknown}")
    return [FAULT_TABLE[n] for n in names]


def _day_rng(seed, day):
    key = (pd.Timestamp(day).toordinal(),)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def generate_fault_schedule(specs, index, seed, eligible=None):
    """Random fault occurrences for every day covered by ``index``.

    For each day and fault, the share of the day's eligible samples that
    is affected is drawn from U(0, 0.5) and divided by the number of
    faults; the affected samples of different faults are disjoint, so a
    day never has more than half of its samples faulty. Each affected
    sample gets its own magnitude per target, uniform over the target's
    range.

    Parameters
    ----------
    specs : list of FaultSpec
    index : DatetimeIndex
        Sample timestamps.
    seed : int
        Master seed; each day derives its own generator.
    eligible : array_like of bool, optional
        Samples that may be faulted (e.g. daylight); default all.

    Returns
    -------
    DataFrame
        Long format with columns ``timestamp, fault, target, magnitude``.
    """
    if not specs:
        raise InputError("at least one fault spec is required")
    index = pd.DatetimeIndex(index)
    ok = np.ones(len(index), dtype=bool) if eligible is None else np.asarray(eligible, bool)
    days = index.normalize()
    k = len(specs)
    pos, fault, target, mags = [], [], [], []
    codes, uniq = pd.factorize(days)
    groups = np.split(np.argsort(codes, kind="stable"), np.cumsum(np.bincount(codes))[:-1])
    for day, in_day in zip(uniq, groups):
        pool = in_day[ok[in_day]]
        rng = _day_rng(seed, day)
        order = rng.permutation(pool)
        start = 0
        for spec in specs:
            frac = rng.uniform(0.0, MAX_DAILY_FRACTION) / k
            n_pts = int(np.floor(frac * pool.size))
            n_pts = min(n_pts, order.size - start)
            pts = np.sort(order[start:start + n_pts])
            start += n_pts
            for t in spec.targets:
                lo, hi = spec.range_for(t)
                pos.append(pts)
                mags.append(rng.uniform(lo, hi, pts.size))
                fault.append(np.full(pts.size, spec.name, dtype=object))
                target.append(np.full(pts.size, t, dtype=object))
    if not pos:
        return pd.DataFrame(columns=SCHEDULE_COLUMNS)
    out = pd.DataFrame({"timestamp": index[np.concatenate(pos)],
                        "fault": np.concatenate(fault), "target": np.concatenate(target),
                        "magnitude": np.concatenate(mags)})
    return out.sort_values(["timestamp", "fault", "target"], kind="stable").reset_index(drop=True)


def labels_from_schedule(schedule: pd.DataFrame, index):
    """Binary labels: 1 where any scheduled magnitude is positive."""
    index = pd.DatetimeIndex(index)
    hit = schedule.loc[schedule["magnitude"] > 0, "timestamp"]
    return pd.Series(index.isin(pd.DatetimeIndex(hit)).astype(np.int8), index=index, name="label")


def _factors(schedule, index, targets, sign=-1.0):
    """Multiplicative factor per target: product over faults of (1 + sign*m/100)."""
    out = {}
    pos = pd.Series(np.arange(len(index)), index=index)
    for t in targets:
        rows = schedule[schedule["target"] == t]
        f = np.ones(len(index))
        if len(rows):
            idx = pos.reindex(pd.DatetimeIndex(rows["timestamp"])).to_numpy()
            if np.any(np.isnan(idx)):
                raise InputError("schedule timestamps must be a subset of the production index")
            np.multiply.at(f, idx.astype(int), 1.0 + sign * rows["magnitude"].to_numpy() / 100.0)
        out[t] = f
    return out


def apply_faults(prod: pd.DataFrame, schedule: pd.DataFrame, inverter: InverterParams):
    """Faulted production signals and their labels.

    DC-side faults scale their targets first. Current and voltage
    derates carry through to ``P_DC`` so power stays consistent, and cell
    temperature faults raise ``T_cell`` by the magnitude in percent. AC
    power is then recomputed by the inverter model from the faulted DC
    operating point (keeping the sample's AC wiring loss), and inverter
    faults scale ``P_AC`` last. Efficiencies are refreshed.

    Returns
    -------
    faulted : DataFrame
        Copy of ``prod`` with faulted signals plus ``label``, ``fault`` and
        ``fault_magnitude`` columns.
    labels : Series
    """
    unknown = set(schedule["target"]) - set(KNOWN_TARGETS)
    if unknown:
        raise ConfigurationError(f"unknown fault targets {sorted(unknown)}")
    out = prod.copy()
    index = pd.DatetimeIndex(prod.index)
    labels = labels_from_schedule(schedule, index)
    if len(schedule):
        derate = _factors(schedule, index, [t for t in DC_TARGETS if t != "T_cell"])
        heat = _factors(schedule, index, ["T_cell"], sign=1.0)["T_cell"]
        P_DC0 = prod["P_DC"].to_numpy(dtype=float)
        for t in ("I_DC", "V_DC", "V_oc", "I_sc"):
            out[t] = prod[t].to_numpy(dtype=float) * derate[t]
        out["T_cell"] = prod["T_cell"].to_numpy(dtype=float) * heat
        P_DC = P_DC0 * derate["P_DC"] * derate["I_DC"] * derate["V_DC"]
        out["P_DC"] = P_DC
        touched = np.zeros(len(index), dtype=bool)
        for t in ("P_DC", "I_DC", "V_DC"):
            touched |= derate[t] != 1.0
        if np.any(touched):
            ac_pct = (prod["loss_ac_wiring"].to_numpy(dtype=float)
                      if "loss_ac_wiring" in prod else np.zeros(len(index)))
            P_AC = prod["P_AC"].to_numpy(dtype=float).copy()
            P_AC[touched] = snl_ac_power(P_DC[touched], out["V_DC"].to_numpy()[touched],
                                         inverter) * (1.0 - ac_pct[touched] / 100.0)
            out["P_AC"] = P_AC
        out["P_AC"] = out["P_AC"].to_numpy() * _factors(schedule, index, AC_TARGETS)["P_AC"]
        if "eta_cell" in prod:
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(P_DC0 > 0, P_DC / np.where(P_DC0 > 0, P_DC0, 1.0), 1.0)
            out["eta_cell"] = prod["eta_cell"].to_numpy() * ratio
        if "eta_inv" in prod:
            pdc = out["P_DC"].to_numpy()
            out["eta_inv"] = np.where(pdc > 0, out["P_AC"].to_numpy() / np.where(pdc > 0, pdc, 1.0),
                                      0.0)
    g = schedule.groupby("timestamp")
    names = g["fault"].agg(lambda s: "+".join(sorted(set(s)))) if len(schedule) else pd.Series(dtype=str)
    mags = g["magnitude"].max() if len(schedule) else pd.Series(dtype=float)
    out["fault"] = names.reindex(index).fillna("").to_numpy()
    out["fault_magnitude"] = mags.reindex(index).fillna(0.0).to_numpy()
    out["label"] = labels.to_numpy()
    return out, labels


def schedule_to_json(schedule: pd.DataFrame):
    """Audit form of a schedule: one record per (timestamp, fault, target)."""
    recs = [{"timestamp": pd.Timestamp(r.timestamp).isoformat(), "fault": r.fault,
             "target": r.target, "magnitude": round(float(r.magnitude), 10)}
            for r in schedule.itertuples(index=False)]
    return json.dumps(recs, indent=1)


def sample_daily_losses(archive: pd.DataFrame, target_month, target_year, seed, days=None):
    """Loss values of one random archive day replicated over a month.

    Parameters
    ----------
    archive : DataFrame
        Daily loss factors indexed by date.
    target_month, target_year : int
        Month whose archive days are sampled.
    days : DatetimeIndex, optional
        Synthetic days to fill; default every day of that month.

    Returns
    -------
    DataFrame
        One row per synthetic day with the archive's columns plus
        ``source_day``.
    """
    idx = pd.DatetimeIndex(archive.index)
    cand = archive[(idx.month == target_month) & (idx.year == target_year)]
    if cand.empty:
        raise InputError(f"loss archive has no days in {target_year}-{target_month:02d}")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(target_year, target_month)))
    pick = cand.index[int(rng.integers(len(cand)))]
    if days is None:
        n = calendar.monthrange(target_year, target_month)[1]
        days = pd.date_range(f"{target_year}-{target_month:02d}-01", periods=n, freq="D")
    days = pd.DatetimeIndex(days)
    row = cand.loc[pick]
    out = pd.DataFrame(np.tile(row.to_numpy(dtype=float), (len(days), 1)),
                       columns=cand.columns, index=days)
    out["source_day"] = pd.Timestamp(pick)
    out.index.name = "date"
    return out
