"""End-to-end pipeline stages behind the command line.

Every stage reads and writes files through :mod:`grnppg.io`, is fully
determined by its :class:`ExperimentConfig` plus input files, and leaves a
``manifest_<stage>.json`` next to its outputs.  The manifest carries the
config snapshot and stage arguments (enough to re-run the stage), the
toolkit version, wall-clock timing and SHA-256 hashes of every output.
"""
from __future__ import annotations

import dataclasses
import hashlib
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from . import datagen as dg
from . import io
from . import metrics as mt
from . import mine
from . import preprocessing as pp
from . import transformer as tf
from .gating import VARIANT_NAMES, gating_spec, variant_label

OUTPUT_ENV = "GRNPPG_OUTPUT_DIR"


class CompatibilityError(ValueError):
    """A checkpoint and a dataset were produced under incompatible settings."""


class ContractError(ValueError):
    """A stage was given an input it is not defined for."""


@dataclass
class ExperimentConfig:
    model: tf.ModelConfig = field(default_factory=tf.ModelConfig)
    dataset: dg.DatasetConfig = field(default_factory=dg.DatasetConfig)
    adasyn: mt.AdasynConfig = field(default_factory=mt.AdasynConfig)
    mine: mine.MineConfig = field(default_factory=mine.MineConfig)
    train_fraction: float = 0.7
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    output_dir: str = "runs"
    workers: int = 1

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        if not self.seeds:
            raise ValueError("at least one seed is required")

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "dataset": self.dataset.to_dict(),
                "adasyn": dataclasses.asdict(self.adasyn),
                "mine": dataclasses.asdict(self.mine),
                "train_fraction": self.train_fraction, "seeds": list(self.seeds),
                "output_dir": self.output_dir, "workers": self.workers}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        kw = {}
        if "model" in d:
            kw["model"] = tf.ModelConfig.from_dict(d["model"])
        if "dataset" in d:
            kw["dataset"] = dg.DatasetConfig.from_dict(d["dataset"])
        if "adasyn" in d:
            kw["adasyn"] = mt.AdasynConfig(**d["adasyn"])
        if "mine" in d:
            kw["mine"] = mine.MineConfig(**d["mine"])
        for k in ("train_fraction", "seeds", "output_dir", "workers"):
            if k in d:
                kw[k] = d[k]
        return cls(**kw)

    def output_path(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV, self.output_dir))


def toy_model_config(**overrides) -> tf.ModelConfig:
    """The desk-scale model used by tests and the CI pipeline."""
    base = dict(d_model=16, n_heads=2, n_layers=1, patch_size=16, epochs=30, batch_size=96)
    base.update(overrides)
    return tf.ModelConfig(**base)


def _manifest(path: Path, stage: str, cfg: ExperimentConfig, args: dict,
              outputs: Sequence[Path], started: float) -> Path:
    return io.write_json(path, {
        "stage": stage,
        "toolkit_version": __version__,
        "config": cfg.to_dict(),
        "args": args,
        "wall_clock_s": round(time.time() - started, 3),
        "started_unix": round(started, 3),
        "outputs": {p.name: io.sha256_file(p) for p in outputs},
    })


# ---------------------------------------------------------------- datasets


def save_dataset(path, ds: dg.LabeledDataset) -> Path:
    return io.write_bundle(path, "dataset", ds.manifest, {
        "pulses": ds.pulses, "labels": ds.labels, "offsets": ds.offsets,
        "lengths": ds.lengths, "windows": ds.windows})


def load_dataset(path) -> dg.LabeledDataset:
    header, arr = io.read_bundle(path, "dataset")
    for key in ("pulses", "labels", "offsets", "lengths", "windows"):
        if key not in arr:
            raise io.FormatError(f"{path}: dataset is missing array {key!r}")
    if arr["pulses"].ndim != 2 or arr["pulses"].shape[1] != pp.PULSE_LEN:
        raise io.FormatError(f"{path}: pulses must be [n, {pp.PULSE_LEN}]")
    return dg.LabeledDataset(arr["pulses"], arr["labels"], arr["offsets"], arr["lengths"],
                             arr["windows"], header["meta"])


def _stats_rows(stats: dict[str, pp.StatsSummary]) -> list[list]:
    rows = []
    for key in pp.STAT_FIELDS:
        rows.append([key] + [getattr(stats[c], key) if c in stats else float("nan")
                             for c in ("overall", "non_artifact", "artifact")])
    return rows


def cmd_datagen(cfg: ExperimentConfig, out_dir: Path | None = None) -> dict[str, Path]:
    started = time.time()
    out_dir = Path(out_dir or cfg.output_path())
    ds = dg.build_dataset(cfg.dataset)
    data_path = save_dataset(out_dir / "dataset.grn", ds)
    stats = pp.summarize_stats(ds.pulses, ds.labels)
    stats_path = io.write_csv(out_dir / "dataset_stats.csv", io.STATS_COLUMNS, _stats_rows(stats))
    man = _manifest(out_dir / "manifest_datagen.json", "datagen", cfg, {},
                    [data_path, stats_path], started)
    return {"dataset": data_path, "stats": stats_path, "manifest": man}


def cmd_preprocess(cfg: ExperimentConfig, signal_path, sample_rate_hz: float = 128.0,
                   out_dir: Path | None = None) -> dict[str, Path]:
    """Raw one-column signal (CSV/TXT or .npy) -> unlabelled pulse bundle + statistics."""
    started = time.time()
    out_dir = Path(out_dir or cfg.output_path())
    signal_path = Path(signal_path)
    if signal_path.suffix == ".npy":
        x = np.load(signal_path)
    else:
        x = np.loadtxt(signal_path, delimiter=",", ndmin=1)
    x = np.asarray(x, dtype=np.float64).ravel()
    raw = pp.RawSignal(x, sample_rate_hz)
    pulses = pp.extract_pulses(raw, cfg.dataset.filter, cfg.dataset.segmentation)
    if not pulses:
        raise ContractError(f"no complete pulses found in {signal_path}")
    X = np.array([p.samples for p in pulses])
    meta = {"generator": "grnppg.preprocess", "source": signal_path.name,
            "sample_rate_hz": sample_rate_hz,
            "config": {"filter": dataclasses.asdict(cfg.dataset.filter),
                       "segmentation": dataclasses.asdict(cfg.dataset.segmentation)}}
    ds = dg.LabeledDataset(X, np.full(len(X), pp.UNLABELED, dtype=np.int64),
                           np.array([p.offset for p in pulses], dtype=np.int64),
                           np.array([p.original_length for p in pulses], dtype=np.int64),
                           np.zeros(len(X), dtype=np.int64), meta)
    data_path = save_dataset(out_dir / "pulses.grn", ds)
    stats_path = io.write_csv(out_dir / "pulses_stats.csv", io.STATS_COLUMNS,
                              _stats_rows(pp.summarize_stats(X)))
    man = _manifest(out_dir / "manifest_preprocess.json", "preprocess", cfg,
                    {"signal": str(signal_path), "sample_rate_hz": sample_rate_hz},
                    [data_path, stats_path], started)
    return {"pulses": data_path, "stats": stats_path, "manifest": man}


# ---------------------------------------------------------------- checkpoints


def _preprocessing_signature(ds_meta: dict) -> dict:
    conf = ds_meta.get("config", {})
    return {"pulse_len": pp.PULSE_LEN, "normalization": "zscore",
            "filter": conf.get("filter"), "segmentation": conf.get("segmentation")}


def _dataset_digest(ds: dg.LabeledDataset) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(ds.pulses, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(ds.labels, dtype="<i8").tobytes())
    return h.hexdigest()


def save_checkpoint(path, model: tf.ClassifierModel, extra_meta: dict,
                    extra_arrays: dict[str, np.ndarray] | None = None) -> Path:
    arrays = {f"param.{k}": v for k, v in model.state_dict().items()}
    for k, v in (extra_arrays or {}).items():
        arrays[k] = v
    meta = {"model_config": model.config.to_dict(), **extra_meta}
    return io.write_bundle(path, "checkpoint", meta, arrays)


def load_checkpoint(path) -> tuple[tf.ClassifierModel, dict, dict[str, np.ndarray]]:
    header, arrays = io.read_bundle(path, "checkpoint")
    meta = header["meta"]
    model = tf.ClassifierModel(tf.ModelConfig.from_dict(meta["model_config"]))
    state = {k[len("param."):]: v for k, v in arrays.items() if k.startswith("param.")}
    model.load_state_dict(state)
    rest = {k: v for k, v in arrays.items() if not k.startswith("param.")}
    return model, meta, rest


def train_on_dataset(ds: dg.LabeledDataset, model_cfg: tf.ModelConfig, cfg: ExperimentConfig
                     ) -> tuple[tf.ClassifierModel, tf.TrainingTrace]:
    model = tf.build_model(model_cfg)
    adasyn = dataclasses.replace(cfg.adasyn, seed=model_cfg.seed)
    trace = tf.train(model, ds.pulses, ds.labels, model_cfg, adasyn=adasyn,
                     train_fraction=cfg.train_fraction)
    return model, trace


def cmd_train(cfg: ExperimentConfig, dataset_path, out_dir: Path | None = None) -> dict[str, Path]:
    started = time.time()
    out_dir = Path(out_dir or cfg.output_path())
    ds = load_dataset(dataset_path)
    if np.any(ds.labels < 0):
        raise ContractError("training needs a labelled dataset")
    model, trace = train_on_dataset(ds, cfg.model, cfg)
    ckpt = save_checkpoint(out_dir / "checkpoint.grn", model, {
        "dataset_digest": _dataset_digest(ds),
        "preprocessing": _preprocessing_signature(ds.manifest),
        "train_fraction": cfg.train_fraction,
    }, {"split.train_index": trace.train_index, "split.test_index": trace.val_index})
    curve = io.write_csv(out_dir / "learning_curve.csv", io.LEARNING_CURVE_COLUMNS, trace.rows())
    man = _manifest(out_dir / "manifest_train.json", "train", cfg,
                    {"dataset": str(dataset_path)}, [ckpt, curve], started)
    return {"checkpoint": ckpt, "learning_curve": curve, "manifest": man}


def _eval_split(model_meta: dict, extra: dict, ds: dg.LabeledDataset) -> np.ndarray:
    sig = _preprocessing_signature(ds.manifest)
    if model_meta.get("preprocessing") and sig != model_meta["preprocessing"]:
        raise CompatibilityError("dataset preprocessing differs from the checkpoint's "
                                 f"training data: {sig} vs {model_meta['preprocessing']}")
    if model_meta.get("dataset_digest") == _dataset_digest(ds) and "split.test_index" in extra:
        return extra["split.test_index"].astype(np.int64)
    return np.arange(len(ds))


def cmd_evaluate(cfg: ExperimentConfig, checkpoint_path, dataset_path,
                 out_dir: Path | None = None) -> dict[str, Path]:
    """Metrics on the checkpoint's held-out split (or the whole dataset if it is new data)."""
    started = time.time()
    out_dir = Path(out_dir or cfg.output_path())
    model, meta, extra = load_checkpoint(checkpoint_path)
    ds = load_dataset(dataset_path)
    idx = _eval_split(meta, extra, ds)
    prob = tf.predict_proba(model, ds.pulses[idx])
    rep = mt.evaluate(prob, ds.labels[idx])
    c = rep.confusion
    result = {
        "accuracy": round(rep.accuracy, 4), "precision": round(rep.precision, 4),
        "recall": round(rep.recall, 4), "f1": round(rep.f1, 4),
        "auc": None if np.isnan(rep.auc) else round(rep.auc, 4),
        "confusion": {"tp": c.tp, "tn": c.tn, "fp": c.fp, "fn": c.fn},
    }
    mpath = io.write_json(out_dir / "metrics.json", result)
    m = c.as_matrix()
    cpath = io.write_csv(out_dir / "confusion.csv", io.CONFUSION_COLUMNS,
                         [[0, m[0, 0], m[0, 1]], [1, m[1, 0], m[1, 1]]])
    man = _manifest(out_dir / "manifest_evaluate.json", "evaluate", cfg,
                    {"checkpoint": str(checkpoint_path), "dataset": str(dataset_path)},
                    [mpath, cpath], started)
    return {"metrics": mpath, "confusion": cpath, "manifest": man}


# ---------------------------------------------------------------- sweep


def _sweep_job(args):
    ds_arrays, variant, gating, seed, cfg_dict = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    pulses, labels = ds_arrays
    model_cfg = dataclasses.replace(cfg.model, variant=variant, gating=gating, seed=seed)
    model = tf.build_model(model_cfg)
    adasyn = dataclasses.replace(cfg.adasyn, seed=seed)
    trace = tf.train(model, pulses, labels, model_cfg, adasyn=adasyn,
                     train_fraction=cfg.train_fraction)
    prob = tf.predict_proba(model, pulses[trace.val_index])
    rep = mt.evaluate(prob, labels[trace.val_index])
    return (variant, gating, seed), (rep.accuracy, rep.precision, rep.recall, rep.f1)


def _model_label(variant: str, gating: str | None) -> str:
    if variant == "vanilla":
        return "Transformer"
    label = variant_label(gating)
    return label if variant == "grn_intermediate" else f"{label} (GRN-Attention)"


def sweep_jobs(variants: Sequence[str], gatings: Sequence[str], seeds: Sequence[int]
               ) -> list[tuple[str, str, int]]:
    for v in variants:
        if v not in tf.VARIANTS:
            raise ValueError(f"unknown variant {v!r}; valid: {', '.join(tf.VARIANTS)}")
    for g in gatings:
        gating_spec(g)  # raises with the list of valid names
    jobs = []
    for v in variants:
        for g in (["glu"] if v == "vanilla" else gatings):
            for s in seeds:
                jobs.append((v, g, int(s)))
    return jobs


def cmd_sweep(cfg: ExperimentConfig, dataset_path, variants: Sequence[str],
              gatings: Sequence[str], out_dir: Path | None = None) -> dict[str, Path]:
    """Train every (variant, gating, seed) combination; one CSV row each plus medians.

    The vanilla Transformer ignores gating and runs once per seed.
    """
    started = time.time()
    out_dir = Path(out_dir or cfg.output_path())
    jobs = sweep_jobs(variants, [g.lower() for g in gatings], cfg.seeds)
    ds = load_dataset(dataset_path)
    payload = [((ds.pulses, ds.labels), v, g, s, cfg.to_dict()) for v, g, s in jobs]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = dict(pool.map(_sweep_job, payload))
    else:
        results = dict(map(_sweep_job, payload))

    rows, seen = [], []
    for v, g, s in jobs:
        key = (v, "none" if v == "vanilla" else g)
        if key not in seen:
            seen.append(key)
    for v, g in seen:
        gate = "glu" if g == "none" else g
        label = _model_label(v, None if g == "none" else g)
        per_seed = []
        for s in cfg.seeds:
            acc, pre, rec, f1 = results[(v, gate, int(s))]
            per_seed.append((acc, pre, rec, f1))
            rows.append([label, v, g, int(s), acc, pre, rec, f1])
        med = np.median(np.array(per_seed), axis=0)
        rows.append([label, v, g, "median", *[float(m) for m in med]])
    path = io.write_csv(out_dir / "sweep.csv", io.SWEEP_COLUMNS, rows)
    man = _manifest(out_dir / "manifest_sweep.json", "sweep", cfg,
                    {"dataset": str(dataset_path), "variants": list(variants),
                     "gatings": list(gatings)}, [path], started)
    return {"sweep": path, "manifest": man}


def read_sweep(path) -> list[dict]:
    return io.read_csv(path, io.SWEEP_COLUMNS)


# ---------------------------------------------------------------- MINE


def cmd_mine(cfg: ExperimentConfig, checkpoint_path, dataset_path,
             out_dir: Path | None = None) -> dict[str, Path]:
    """MI between held-out latent features and labels, before and after the GRN."""
    started = time.time()
    out_dir = Path(out_dir or cfg.output_path())
    model, meta, extra = load_checkpoint(checkpoint_path)
    if model.grn is None:
        raise ContractError("MI before/after GRN needs a grn_intermediate checkpoint")
    ds = load_dataset(dataset_path)
    idx = _eval_split(meta, extra, ds)
    X, y = ds.pulses[idx], ds.labels[idx]
    before, after = tf.latent_features(model, X)
    comp = mine.compare_grn_mi(before, after, y, cfg.mine, seeds=cfg.seeds)
    result = {
        "mi_before_nats": [e.value for e in comp.before],
        "mi_after_nats": [e.value for e in comp.after],
        "seeds": list(comp.seeds),
        "median": {"mi_before_nats": comp.mi_before, "mi_after_nats": comp.mi_after},
    }
    jpath = io.write_json(out_dir / "mi.json", result)
    trace_rows = []
    for s, eb, ea in zip(comp.seeds, comp.before, comp.after):
        for name, est in (("before_grn", eb), ("after_grn", ea)):
            for epoch, v in enumerate(est.trace, 1):
                trace_rows.append([s, name, epoch, v])
    tpath = io.write_csv(out_dir / "mi_trace.csv", io.MI_TRACE_COLUMNS, trace_rows)
    d = before.shape[1]
    cols = [f"f{i}" for i in range(d)] + ["label"]
    bpath = io.write_csv(out_dir / "latent_before_grn.csv", cols,
                         [list(r) + [int(l)] for r, l in zip(before, y)])
    apath = io.write_csv(out_dir / "latent_after_grn.csv", cols,
                         [list(r) + [int(l)] for r, l in zip(after, y)])
    man = _manifest(out_dir / "manifest_mine.json", "mine", cfg,
                    {"checkpoint": str(checkpoint_path), "dataset": str(dataset_path)},
                    [jpath, tpath, bpath, apath], started)
    return {"mi": jpath, "trace": tpath, "latent_before": bpath, "latent_after": apath,
            "manifest": man}


ALL_GATINGS: tuple[str, ...] = VARIANT_NAMES
