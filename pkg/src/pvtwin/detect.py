"""Normal-operation bands and threshold fault detection.

Bands are derived per group of historical samples (time-of-day slot and
sky category by default). Groups too small to be trusted fall back to
the slot-only band and then to the global band.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import ConfigurationError, InputError

STRATEGIES = ("mean3sigma", "quartile_iqr", "minmax")
MIN_GROUP = 10
EPS_REL = 1e-6
LEVELS = ("slot_category", "slot", "global")


def _eps(center):
    return EPS_REL * np.maximum(np.abs(center), 1.0)


def band_limits(values, strategy="quartile_iqr", literal_q3=False):
    """Lower and upper limit of one sample under a strategy.

    ``quartile_iqr`` gives ``[Q1 - 1.5 IQR, Q3 + 1.5 IQR]``; with
    ``literal_q3`` the lower limit is ``Q3 - 1.5 IQR`` instead. A band of
    zero spread is widened by ``1e-6 * max(|value|, 1)`` on each side.
    """
    v = np.asarray(values, dtype=float)
    # sorted so that float sums, and hence the band, ignore sample order
    v = np.sort(v[np.isfinite(v)])
    if v.size == 0:
        raise InputError("cannot derive a band from an empty history")
    if strategy == "mean3sigma":
        mu, sd = v.mean(), v.std()
        lo, hi, spread, center = mu - 3 * sd, mu + 3 * sd, sd, mu
    elif strategy == "quartile_iqr":
        q1, q3 = np.percentile(v, [25, 75])
        iqr = q3 - q1
        lo = (q3 if literal_q3 else q1) - 1.5 * iqr
        hi, spread, center = q3 + 1.5 * iqr, iqr, q3
    elif strategy == "minmax":
        lo, hi = v.min(), v.max()
        spread, center = hi - lo, lo
    else:
        raise ConfigurationError(f"unknown strategy {strategy!r}")
    if spread == 0 or v[0] == v[-1]:
        e = float(_eps(center))
        lo, hi = lo - e, hi + e
    return float(lo), float(hi)


@dataclass
class ThresholdBand:
    """Bands keyed by (slot, category), by slot, and one global band."""

    strategy: str
    by_key: pd.DataFrame   # index (slot, category) -> lower, upper, n
    by_slot: pd.DataFrame  # index slot -> lower, upper, n
    glob: tuple

    def lookup(self, slots, categories):
        """Limits for each sample plus the grouping level used (0, 1 or 2)."""
        slots = np.asarray(slots)
        cats = np.asarray(categories).astype(str)
        n = slots.size
        lower = np.full(n, self.glob[0])
        upper = np.full(n, self.glob[1])
        level = np.full(n, 2, dtype=np.int8)
        if len(self.by_slot):
            s = self.by_slot.reindex(slots)
            ok = s["lower"].notna().to_numpy()
            lower[ok] = s["lower"].to_numpy()[ok]
            upper[ok] = s["upper"].to_numpy()[ok]
            level[ok] = 1
        if len(self.by_key):
            k = self.by_key.reindex(pd.MultiIndex.from_arrays([slots, cats]))
            ok = k["lower"].notna().to_numpy()
            lower[ok] = k["lower"].to_numpy()[ok]
            upper[ok] = k["upper"].to_numpy()[ok]
            level[ok] = 0
        return lower, upper, level

    def to_csv(self):
        rows = [("slot_category", int(s), str(c), r.lower, r.upper, int(r.n))
                for (s, c), r in self.by_key.iterrows()]
        rows += [("slot", int(s), "", r.lower, r.upper, int(r.n)) for s, r in self.by_slot.iterrows()]
        rows.append(("global", -1, "", self.glob[0], self.glob[1], int(self.glob[2])))
        df = pd.DataFrame(rows, columns=["level", "slot", "category", "lower", "upper", "n"])
        buf = io.StringIO()
        df.to_csv(buf, index=False, float_format="%.10g", lineterminator="\n")
        return buf.getvalue()


def _group_bands(values, keys, strategy, literal_q3, min_group):
    frame = pd.DataFrame({"v": values})
    for i, k in enumerate(keys):
        frame[f"k{i}"] = k
    cols = [f"k{i}" for i in range(len(keys))]
    rows = {}
    for key, part in frame.groupby(cols, sort=True)["v"]:
        if part.size >= min_group:
            lo, hi = band_limits(part.to_numpy(), strategy, literal_q3)
            rows[key if len(cols) > 1 else key[0]] = (lo, hi, part.size)
    df = pd.DataFrame.from_dict(rows, orient="index", columns=["lower", "upper", "n"])
    if len(cols) > 1 and len(df):
        df.index = pd.MultiIndex.from_tuples(df.index)
    return df


def compute_thresholds(values, slots, categories, strategy="quartile_iqr", min_group=MIN_GROUP,
                       literal_q3=False, grouping="slot_category"):
    """Normal-operation bands from a historical signal.

    Parameters
    ----------
    values : array_like
        Historical signal samples.
    slots, categories : array_like
        Time-of-day slot and sky category of each sample.
    strategy : {"mean3sigma", "quartile_iqr", "minmax"}
    min_group : int
        Smallest group that gets its own band.
    grouping : {"slot_category", "slot", "global"}
        Finest grouping level to build.
    """
    if strategy not in STRATEGIES:
        raise ConfigurationError(f"unknown strategy {strategy!r}")
    if grouping not in LEVELS:
        raise ConfigurationError(f"unknown grouping {grouping!r}")
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise InputError("empty history")
    slots = np.asarray(slots)
    cats = np.asarray(categories).astype(str)
    glob = (*band_limits(v, strategy, literal_q3), v.size)
    empty = pd.DataFrame(columns=["lower", "upper", "n"])
    by_slot = (_group_bands(v, [slots], strategy, literal_q3, min_group)
               if grouping != "global" else empty)
    by_key = (_group_bands(v, [slots, cats], strategy, literal_q3, min_group)
              if grouping == "slot_category" else empty)
    return ThresholdBand(strategy, by_key, by_slot, glob)


def classify(values, band: ThresholdBand, slots, categories):
    """Fault labels (1 outside the inclusive band) and the grouping level used."""
    v = np.asarray(values, dtype=float)
    lower, upper, level = band.lookup(slots, categories)
    labels = ((v < lower) | (v > upper)).astype(np.int8)
    return labels, level


@dataclass(frozen=True)
class ConfusionMatrix:
    TP: int
    TN: int
    FP: int
    FN: int

    @property
    def total(self):
        return self.TP + self.TN + self.FP + self.FN

    @property
    def accuracy(self):
        return (self.TP + self.TN) / self.total if self.total else float("nan")

    @property
    def recall(self):
        d = self.TP + self.FN
        return self.TP / d if d else float("nan")

    @property
    def precision(self):
        d = self.TP + self.FP
        return self.TP / d if d else float("nan")

    def to_dict(self):
        return {"TP": self.TP, "TN": self.TN, "FP": self.FP, "FN": self.FN,
                "accuracy": self.accuracy, "recall": self.recall, "precision": self.precision}


def score(pred, truth):
    """Confusion matrix and accuracy of binary predictions."""
    p = np.asarray(pred).astype(bool)
    t = np.asarray(truth).astype(bool)
    if p.shape != t.shape:
        raise InputError("prediction and truth lengths differ")
    cm = ConfusionMatrix(int(np.sum(p & t)), int(np.sum(~p & ~t)),
                         int(np.sum(p & ~t)), int(np.sum(~p & t)))
    return cm, cm.accuracy


def slot_of(index, minutes=5):
    idx = pd.DatetimeIndex(index)
    return np.asarray((idx.hour * 60 + idx.minute) // minutes)
