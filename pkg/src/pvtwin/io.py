"""Canonical CSV schema, monitoring-data ingest and deterministic writers.

Monitoring files carry one row per 5-minute sample with an ISO-8601
local timestamp and these columns (units in brackets)::

    timestamp, GHI [W/m2], G_POA [W/m2], T_amb [C], T_cell [C],
    I_DC [A], V_DC [V], P_DC [W], P_AC [W], E_day [Wh]

``GHI`` and ``E_day`` may be empty. Daily energy is recomputed from
``P_AC`` on ingest; the reported column is kept as ``E_day_reported``.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import InputError

MONITORING_COLUMNS = ["timestamp", "GHI", "G_POA", "T_amb", "T_cell",
                      "I_DC", "V_DC", "P_DC", "P_AC", "E_day"]
OPTIONAL = {"GHI", "E_day"}
IRRADIANCE = ("GHI", "G_POA")
POWER = ("P_DC", "P_AC")
ZERO_IRRADIANCE = 1.5
MAX_MALFORMED = 0.10
FLOAT_FORMAT = "%.10g"


@dataclass
class IngestReport:
    n_input: int = 0
    n_missing: int = 0
    n_duplicate: int = 0
    n_zeroed: int = 0
    n_negative_power: int = 0
    malformed: list = field(default_factory=list)  # (line number, reason)

    @property
    def n_dropped(self):
        return self.n_missing + self.n_duplicate + len(self.malformed)

    def to_dict(self):
        return {"n_input": self.n_input, "n_records": self.n_input - self.n_dropped,
                "n_dropped": self.n_dropped, "n_missing": self.n_missing,
                "n_duplicate": self.n_duplicate, "n_zeroed": self.n_zeroed,
                "n_negative_power": self.n_negative_power,
                "malformed": [{"line": ln, "reason": r} for ln, r in self.malformed]}


def ingest(path_or_buffer, columns=MONITORING_COLUMNS):
    """Read and clean a monitoring CSV.

    Rows with a missing required field are dropped and counted; rows that
    cannot be parsed are reported with their line numbers; repeated
    timestamps keep the first occurrence. Irradiance at or below 1.5 W/m2
    becomes 0 and negative power is clipped to 0.

    Returns
    -------
    records : DataFrame
        Timestamp-indexed, sorted.
    report : IngestReport

    Raises
    ------
    InputError
        On a missing header column or when more than 10% of rows are malformed.
    """
    if isinstance(path_or_buffer, (str, Path)):
        text = Path(path_or_buffer).read_text()
    else:
        text = path_or_buffer.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise InputError("empty file") from None
    missing_cols = [c for c in columns if c not in header]
    if missing_cols:
        raise InputError(f"missing columns {missing_cols}")
    pos = {c: header.index(c) for c in columns}
    rep = IngestReport()
    rows, stamps, seen = [], [], set()
    for line_no, raw in enumerate(reader, start=2):
        if not raw or all(not x.strip() for x in raw):
            continue
        rep.n_input += 1
        if len(raw) != len(header):
            rep.malformed.append((line_no, f"expected {len(header)} fields, got {len(raw)}"))
            continue
        vals = {c: raw[pos[c]].strip() for c in columns}
        if any(vals[c] == "" for c in columns if c not in OPTIONAL):
            rep.n_missing += 1
            continue
        try:
            ts = pd.Timestamp(vals["timestamp"])
            if ts is pd.NaT:
                raise ValueError("not a timestamp")
            nums = [float(vals[c]) if vals[c] != "" else np.nan for c in columns[1:]]
        except ValueError as exc:
            rep.malformed.append((line_no, str(exc)))
            continue
        if ts in seen:
            rep.n_duplicate += 1
            continue
        seen.add(ts)
        stamps.append(ts)
        rows.append(nums)
    if rep.n_input and len(rep.malformed) / rep.n_input > MAX_MALFORMED:
        err = InputError(f"{len(rep.malformed)} of {rep.n_input} rows malformed")
        err.report = rep
        raise err
    df = pd.DataFrame(rows, columns=columns[1:], index=pd.DatetimeIndex(stamps, name="timestamp"))
    df = df.sort_index()
    for c in IRRADIANCE:
        if c in df:
            low = df[c] <= ZERO_IRRADIANCE
            rep.n_zeroed += int((low & (df[c] != 0)).sum())
            df.loc[low, c] = 0.0
    for c in POWER:
        neg = df[c] < 0
        rep.n_negative_power += int(neg.sum())
        df.loc[neg, c] = 0.0
    if "E_day" in df:
        df = df.rename(columns={"E_day": "E_day_reported"})
        df["E_day"] = integrate_daily_energy(df["P_AC"])
    return df, rep


def integrate_daily_energy(P_AC: pd.Series):
    """Cumulative AC energy per day in Wh from sampled power."""
    idx = pd.DatetimeIndex(P_AC.index)
    if len(idx) < 2:
        return pd.Series(np.zeros(len(idx)), index=idx)
    step_h = pd.Series(idx).diff().median() / pd.Timedelta(hours=1)
    return (P_AC * step_h).groupby(idx.normalize()).cumsum()


def frame_to_csv(df: pd.DataFrame, path=None, index=True):
    """Write a frame with fixed float formatting and ``\\n`` line endings."""
    out = df.copy()
    if index and isinstance(out.index, pd.DatetimeIndex):
        out.index = out.index.strftime("%Y-%m-%dT%H:%M:%S")
    text = out.to_csv(index=index, float_format=FLOAT_FORMAT, lineterminator="\n")
    if path is not None:
        Path(path).write_text(text)
    return text


def read_frame(path, index_col="timestamp"):
    df = pd.read_csv(path, index_col=index_col, parse_dates=[index_col])
    return df


def _finite(obj):
    """Replace NaN and infinities by None so the output is strict JSON."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not np.isfinite(obj):
        return None
    return obj


def dumps(obj):
    return json.dumps(_finite(obj), indent=1, sort_keys=True, default=_json_default,
                      allow_nan=False) + "\n"


def write_json(obj, path):
    Path(path).write_text(dumps(obj))


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (pd.Timestamp,)):
        return x.isoformat()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x).__name__}")


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
