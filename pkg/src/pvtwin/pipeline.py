"""Stage orchestration: simulate, losses, synth, inject, train, detect, report.

Every stage reads its upstream artifacts from the output directory,
writes its own files under ``<out>/<stage>/`` and a ``manifest.json``
with the seed, the configuration hash and SHA-256 of every input and
output, so identical configs give byte-identical artifacts.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import pandas as pd

from . import dataset as ds
from . import detect, nn, synth
from . import reference as ref
from .config import STAGES, RunConfig
from .errors import MissingArtifactError
from .geometry import clear_sky_poa
from .io import dumps, frame_to_csv, ingest, read_frame, sha256, write_json
from .faults import schedule_to_json
from .losses import LOSS_COLUMNS, degradation_profile
from .plant import simulate
from .synth import SLOT_MINUTES

UPSTREAM = {
    "simulate": (),
    "losses": ("simulate",),
    "synth": ("simulate",),
    "inject": ("losses", "synth"),
    "train": ("inject",),
    "detect": ("inject", "train"),
    "report": ("simulate", "losses", "inject", "train", "detect"),
}


class Stage:
    def __init__(self, cfg: RunConfig, out: Path, name: str):
        self.cfg, self.out, self.name = cfg, Path(out), name
        self.dir = self.out / name
        self.inputs = {}
        self.outputs = []
        self.seed = cfg.stage_seed(name)

    def require(self, stage, filename):
        path = self.out / stage / filename
        if not (self.out / stage / "manifest.json").exists() or not path.exists():
            raise MissingArtifactError(stage, path)
        self.inputs[str(path.relative_to(self.out))] = sha256(path)
        return path

    def path(self, filename):
        self.dir.mkdir(parents=True, exist_ok=True)
        p = self.dir / filename
        self.outputs.append(p)
        return p

    def write_manifest(self):
        cfg_hash = _config_hash(self.cfg)
        doc = {
            "stage": self.name,
            "seed": self.seed,
            "master_seed": self.cfg.seed,
            "config_sha256": cfg_hash,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": {str(p.relative_to(self.out)): sha256(p) for p in sorted(self.outputs)},
        }
        write_json(doc, self.dir / "manifest.json")
        return doc


def _config_hash(cfg: RunConfig):
    return hashlib.sha256(json.dumps(cfg.raw, sort_keys=True).encode()).hexdigest()


def _cs_fn(cfg, system):
    return lambda idx: clear_sky_poa(pd.DatetimeIndex(idx), cfg.site, system.orientation)


def _history_spec(cfg):
    h = cfg.history
    return ref.HistorySpec(h["start"], h["end"], h.get("commissioning", "2019-08-01"),
                           float(h.get("degradation_rate", 0.5)))


def _read(path):
    return read_frame(path)


def stage_simulate(cfg: RunConfig, out):
    """Monitoring history per system (ingested or generated) and the model baseline."""
    st = Stage(cfg, out, "simulate")
    spec = _history_spec(cfg)
    sources = cfg.history.get("monitoring", {}) or {}
    summary = {}
    for i, system in enumerate(cfg.systems):
        cs = _cs_fn(cfg, system)
        if system.name in sources:
            src = Path(sources[system.name])
            records, rep = ingest(src)
            st.inputs[str(src)] = sha256(src)
            write_json(rep.to_dict(), st.path(f"ingest_{system.name}.json"))
            records = records.drop(columns=["E_day_reported"], errors="ignore")
        else:
            wx, k_day = ref.weather(cfg.site, system.orientation, spec,
                                    cfg.stage_seed("simulate", 0), system.module.T_NOCT)
            records, truth = ref.monitoring(system, wx, k_day, spec,
                                            cfg.stage_seed("simulate", 1 + i))
            frame_to_csv(truth, st.path(f"truth_{system.name}.csv"))
        records = records.copy()
        records["G_cs"] = cs(records.index)
        frame_to_csv(records, st.path(f"monitoring_{system.name}.csv"))
        days = records.index.normalize()
        deg = degradation_profile(spec.commissioning, days, spec.degradation_rate)
        model = simulate(system, records["G_POA"].to_numpy(), records["T_cell"].to_numpy(),
                         degradation=deg, index=records.index)
        frame_to_csv(model, st.path(f"model_{system.name}.csv"))
        lit = records["G_POA"].to_numpy() > 0
        m = nn.metrics(records["P_AC"].to_numpy()[lit], model["P_AC"].to_numpy()[lit])
        m.pop("APE")
        summary[system.name] = {"P_AC_model_vs_monitoring": m}
    write_json(summary, st.path("validation.json"))
    return st.write_manifest()


def stage_losses(cfg: RunConfig, out):
    """Daily loss archive per system from the monitoring history."""
    st = Stage(cfg, out, "losses")
    spec = _history_spec(cfg)
    for i, system in enumerate(cfg.systems):
        records = _read(st.require("simulate", f"monitoring_{system.name}.csv"))
        archive, res = ds.daily_loss_archive(system, records, spec.commissioning,
                                             spec.degradation_rate,
                                             seed=cfg.stage_seed("losses", i))
        frame_to_csv(archive, st.path(f"archive_{system.name}.csv"))
        soil = {
            "r_s_H": res.r_s_H,
            "cleaning_events": [d.strftime("%Y-%m-%d") for d in res.events],
            "breaks": [d.strftime("%Y-%m-%d") for d in res.breaks],
            "intervals": [{
                "start": iv.start.strftime("%Y-%m-%d"), "end": iv.end.strftime("%Y-%m-%d"),
                "slope": iv.slope, "slope_ci": [iv.slope_ci_low, iv.slope_ci_high],
                "start_value": iv.start_value, "cleaning_magnitude": iv.cleaning_magnitude,
                "missing_fraction": iv.missing_fraction, "flagged": iv.flagged,
            } for iv in res.intervals],
        }
        write_json(soil, st.path(f"soiling_{system.name}.json"))
        profile = pd.DataFrame({"pm_filtered": res.filtered, "soiling_ratio": res.mean_profile()},
                               index=pd.DatetimeIndex(res.dates, name="date"))
        frame_to_csv(profile, st.path(f"soiling_profile_{system.name}.csv"))
    return st.write_manifest()


def _block(cfg, which):
    s = cfg.synth
    return pd.date_range(s[f"{which}_start"], periods=int(s[f"{which}_days"]), freq="D")


def stage_synth(cfg: RunConfig, out):
    """Synthetic weather for the training and evaluation blocks."""
    st = Stage(cfg, out, "synth")
    for i, system in enumerate(cfg.systems):
        hist = _read(st.require("simulate", f"monitoring_{system.name}.csv"))
        cs = _cs_fn(cfg, system)
        env, days = synth.build_envelopes(hist["G_POA"], hist["G_cs"])
        for j, block in enumerate(("train", "eval")):
            wx = synth.generate(hist, cs, _block(cfg, block), cfg.stage_seed("synth", i, j),
                                system.module.T_NOCT, envelopes=env, days=days)
            frame_to_csv(wx, st.path(f"weather_{block}_{system.name}.csv"))
        counts = days.groupby([days.index.month, "category"]).size()
        frame_to_csv(counts.rename("days").reset_index().rename(columns={"level_0": "month"}),
                     st.path(f"categories_{system.name}.csv"), index=False)
    return st.write_manifest()


def stage_inject(cfg: RunConfig, out):
    """Production with sampled losses; faults injected into the evaluation block."""
    st = Stage(cfg, out, "inject")
    names = cfg.faults.get("names")
    for i, system in enumerate(cfg.systems):
        archive = _read_archive(st.require("losses", f"archive_{system.name}.csv"))
        for j, block in enumerate(("train", "eval")):
            wx = _read(st.require("synth", f"weather_{block}_{system.name}.csv"))
            days = pd.DatetimeIndex(wx.index.normalize().unique())
            sampled = ds.sampled_losses(archive[LOSS_COLUMNS], days,
                                        cfg.stage_seed("inject", i, j))
            frame_to_csv(sampled, st.path(f"losses_{block}_{system.name}.csv"))
            prod = ds.production(system, wx, sampled)
            if block == "eval":
                prod, schedule = ds.inject(system, prod, names, cfg.stage_seed("inject", i, 9))
                st.path(f"schedule_{system.name}.json").write_text(
                    schedule_to_json(schedule) + "\n")
            frame_to_csv(prod, st.path(f"{block}_{system.name}.csv"))
    return st.write_manifest()


def _read_archive(path):
    return pd.read_csv(path, index_col="date", parse_dates=["date"])


def _net_config(cfg: RunConfig, target):
    n = cfg.network
    widths = n.get("widths", nn.TARGET_WIDTHS)
    kw = {k: n[k] for k in ("epochs", "batch_size", "lr", "dropout") if k in n}
    return nn.NetworkConfig(neurons=int(widths[target]), **kw)


def stage_train(cfg: RunConfig, out):
    """One network per target signal: k-fold CV report and a final fit."""
    st = Stage(cfg, out, "train")
    folds = int(cfg.network.get("folds", 5))
    for i, system in enumerate(cfg.systems):
        data = ds.daylight(_read(st.require("inject", f"train_{system.name}.csv")))
        X = nn.feature_matrix(data)
        report = {}
        for j, target in enumerate(ds.TARGETS):
            ncfg = _net_config(cfg, target)
            y = data[target].to_numpy(dtype=float)
            cv = nn.kfold_cv(X, y, ncfg, cfg.stage_seed("train", i, j, 0), k=folds, target=target)
            model = nn.train(X, y, ncfg, cfg.stage_seed("train", i, j, 1), target=target)
            st.path(f"model_{system.name}_{target}.json").write_text(model.to_json() + "\n")
            frame_to_csv(model.history, st.path(f"history_{system.name}_{target}.csv"), index=False)
            h = model.history["train_loss"]
            report[target] = {**cv.to_dict(), "neurons": ncfg.neurons,
                              "batch_size": ncfg.resolve_batch(int(round(0.85 * len(X)))),
                              "loss_trend_ok": bool(h.iloc[-5:].mean() <= h.iloc[:5].mean())}
        write_json(report, st.path(f"cv_{system.name}.json"))
    return st.write_manifest()


def _event_spans(index, flags):
    """Contiguous runs of flagged samples as (start, end) ISO strings."""
    idx = pd.DatetimeIndex(index)
    f = np.asarray(flags, dtype=bool)
    spans = []
    step = pd.Timedelta(minutes=SLOT_MINUTES)
    start = prev = None
    for t, on in zip(idx, f):
        if on and start is not None and t - prev == step:
            prev = t
            continue
        if start is not None:
            spans.append([start.isoformat(), prev.isoformat()])
            start = None
        if on:
            start = prev = t
    if start is not None:
        spans.append([start.isoformat(), prev.isoformat()])
    return spans


def stage_detect(cfg: RunConfig, out):
    """Bands from the clean training block; detection scored on the evaluation block."""
    st = Stage(cfg, out, "detect")
    det = cfg.detection
    primary = det.get("strategy", "quartile_iqr")
    min_group = int(det.get("min_group", detect.MIN_GROUP))
    literal = bool(det.get("literal_q3", False))
    for system in cfg.systems:
        hist = ds.daylight(_read(st.require("inject", f"train_{system.name}.csv")))
        ev = ds.daylight(_read(st.require("inject", f"eval_{system.name}.csv")))
        X = nn.feature_matrix(ev)
        preds = {}
        for target in ds.TARGETS:
            path = st.require("train", f"model_{system.name}_{target}.json")
            preds[target] = nn.TrainedModel.from_json(path.read_text()).predict(X)
        preds = pd.DataFrame(preds, index=ev.index)
        truth = ev["label"].to_numpy()
        result = {"n_samples": int(len(ev)), "faulty_fraction": float(truth.mean()),
                  "primary_strategy": primary, "strategies": {}}
        big = ev["fault_magnitude"].to_numpy() >= 50.0
        kept = []
        for strategy in detect.STRATEGIES:
            entry = {}
            for source, values in (("targets", None), ("predictions", preds)):
                labels, bands = ds.detect_frame(hist, ev, strategy=strategy, min_group=min_group,
                                                literal_q3=literal, values=values)
                per = {s: detect.score(labels[s], truth)[0].to_dict() for s in ds.TARGETS}
                cm, _ = detect.score(labels["any"], truth)
                entry[source] = {"overall": cm.to_dict(), "per_signal": per,
                                 "recall_magnitude_ge_50": (float(labels["any"].to_numpy()[big].mean())
                                                            if big.any() else None)}
                if strategy != primary:
                    continue
                if source == "targets":
                    for s, band in bands.items():
                        st.path(f"bands_{system.name}_{s}.csv").write_text(band.to_csv())
                    entry[source]["events"] = _event_spans(ev.index, labels["any"])
                kept.append(labels.add_prefix(f"{source}_"))
            result["strategies"][strategy] = entry
        merged = pd.concat(kept, axis=1)
        merged["truth"] = truth
        frame_to_csv(merged, st.path(f"labels_{system.name}.csv"))
        frame_to_csv(preds, st.path(f"predictions_{system.name}.csv"))
        write_json(result, st.path(f"detection_{system.name}.json"))
    return st.write_manifest()


def stage_report(cfg: RunConfig, out):
    """Summary of every stage plus plot-ready daily series."""
    st = Stage(cfg, out, "report")
    summary = {"systems": {}}
    val = json.loads(st.require("simulate", "validation.json").read_text())
    for system in cfg.systems:
        soil = json.loads(st.require("losses", f"soiling_{system.name}.json").read_text())
        archive = _read_archive(st.require("losses", f"archive_{system.name}.csv"))
        cv = json.loads(st.require("train", f"cv_{system.name}.json").read_text())
        dres = json.loads(st.require("detect", f"detection_{system.name}.json").read_text())
        ev = _read(st.require("inject", f"eval_{system.name}.csv"))
        prim = dres["primary_strategy"]
        summary["systems"][system.name] = {
            "model_validation": val[system.name],
            "soiling": {"r_s_H": soil["r_s_H"], "n_cleaning_events": len(soil["cleaning_events"])},
            "mean_daily_loss_percent": {c: float(archive[c].mean())
                                        for c in LOSS_COLUMNS + ["total"]},
            "cv_mean": {t: v["mean"] for t, v in cv.items()},
            "detection": {s: {src: e[src]["overall"]["accuracy"] for src in e}
                          for s, e in dres["strategies"].items()},
            "detection_primary": dres["strategies"][prim]["targets"]["overall"],
        }
        daily = ev.groupby(ev.index.normalize()).agg(
            G_POA=("G_POA", "sum"), P_AC=("P_AC", "sum"), faulty=("label", "sum"))
        daily[["G_POA", "P_AC"]] *= SLOT_MINUTES / 60.0
        daily.index.name = "date"
        frame_to_csv(daily, st.path(f"plot_eval_daily_{system.name}.csv"))
        frame_to_csv(archive, st.path(f"plot_losses_{system.name}.csv"))
    st.path("report.json").write_text(dumps(summary))
    return st.write_manifest()


RUNNERS = {
    "simulate": stage_simulate, "losses": stage_losses, "synth": stage_synth,
    "inject": stage_inject, "train": stage_train, "detect": stage_detect, "report": stage_report,
}


def run_stage(cfg: RunConfig, stage, out):
    if stage not in RUNNERS:
        raise ValueError(f"unknown stage {stage!r}")
    # nearest upstream first, so the error names the stage to run next
    for up in reversed(UPSTREAM[stage]):
        if not (Path(out) / up / "manifest.json").exists():
            raise MissingArtifactError(up, Path(out) / up / "manifest.json")
    return RUNNERS[stage](cfg, out)


def run_pipeline(cfg: RunConfig, out, stages=STAGES):
    """Run stages in order; returns the manifests."""
    Path(out).mkdir(parents=True, exist_ok=True)
    return [run_stage(cfg, s, out) for s in stages]
