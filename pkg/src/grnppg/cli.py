"""``grnppg`` command line: datagen, preprocess, train, evaluate, sweep, mine.

Configuration comes from an optional JSON file (``--config``), then from
command-line flags, which override file values.  The merged config is
frozen into each stage's ``manifest_<stage>.json``; ``--manifest`` re-runs a
stage from such a file and reproduces its outputs byte for byte.  The output
directory is ``--output-dir``, else ``$GRNPPG_OUTPUT_DIR``, else the
config's ``output_dir``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from . import experiment as ex
from . import io


def _set(d: dict, path: str, value) -> None:
    keys = path.split(".")
    for k in keys[:-1]:
        d = d.setdefault(k, {})
    d[keys[-1]] = value


# flag dest -> dotted config key
_OVERRIDES = {
    "seeds": "seeds",
    "train_fraction": "train_fraction",
    "workers": "workers",
    "n_nonartifact": "dataset.n_non_artifact",
    "n_artifact": "dataset.n_artifact",
    "data_seed": "dataset.seed",
    "low_cut": "dataset.filter.low_cut_hz",
    "high_cut": "dataset.filter.high_cut_hz",
    "filter_order": "dataset.filter.order",
    "variant": "model.variant",
    "gating": "model.gating",
    "epochs": "model.epochs",
    "d_model": "model.d_model",
    "n_heads": "model.n_heads",
    "n_layers": "model.n_layers",
    "patch_size": "model.patch_size",
    "batch_size": "model.batch_size",
    "learning_rate": "model.learning_rate",
    "dropout": "model.dropout",
    "seed": "model.seed",
    "mine_epochs": "mine.epochs",
    "mine_batch_size": "mine.batch_size",
    "mine_learning_rate": "mine.learning_rate",
}


def build_config(args: argparse.Namespace) -> ex.ExperimentConfig:
    raw: dict = {}
    if getattr(args, "config", None):
        raw = io.read_json(args.config)
    for dest, key in _OVERRIDES.items():
        v = getattr(args, dest, None)
        if v is not None:
            _set(raw, key, v)
    # absent keys fall back to the dataclass defaults
    return ex.ExperimentConfig.from_dict(raw)


def _out_dir(args, cfg: ex.ExperimentConfig) -> Path:
    if getattr(args, "output_dir", None):
        return Path(args.output_dir)
    return cfg.output_path()


def _run(stage: str, cfg: ex.ExperimentConfig, stage_args: dict, out: Path) -> dict:
    if stage == "datagen":
        return ex.cmd_datagen(cfg, out)
    if stage == "preprocess":
        return ex.cmd_preprocess(cfg, stage_args["signal"], stage_args["sample_rate_hz"], out)
    if stage == "train":
        return ex.cmd_train(cfg, stage_args["dataset"], out)
    if stage == "evaluate":
        return ex.cmd_evaluate(cfg, stage_args["checkpoint"], stage_args["dataset"], out)
    if stage == "sweep":
        return ex.cmd_sweep(cfg, stage_args["dataset"], stage_args["variants"],
                            stage_args["gatings"], out)
    if stage == "mine":
        return ex.cmd_mine(cfg, stage_args["checkpoint"], stage_args["dataset"], out)
    raise ValueError(f"unknown stage {stage!r}")


def _stage_args(args) -> dict:
    stage = args.command
    if stage == "preprocess":
        return {"signal": args.signal, "sample_rate_hz": args.sample_rate}
    if stage == "train":
        return {"dataset": args.dataset}
    if stage in ("evaluate", "mine"):
        return {"checkpoint": args.checkpoint, "dataset": args.dataset}
    if stage == "sweep":
        return {"dataset": args.dataset, "variants": args.variants, "gatings": args.gatings}
    return {}


def rerun_manifest(path, output_dir=None) -> dict:
    """Re-run the stage recorded in a manifest with its frozen config and arguments."""
    man = io.read_json(path)
    for key in ("stage", "config", "args"):
        if key not in man:
            raise io.FormatError(f"{path}: manifest is missing {key!r}")
    cfg = ex.ExperimentConfig.from_dict(man["config"])
    out = Path(output_dir) if output_dir else Path(path).parent
    return _run(man["stage"], cfg, man["args"], out)


def _csv_list(s: str) -> list[str]:
    return [t.strip() for t in s.split(",") if t.strip()]


def _int_list(s: str) -> list[int]:
    return [int(t) for t in _csv_list(s)]


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="grnppg", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"grnppg {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--output-dir", help=f"output directory (overrides ${ex.OUTPUT_ENV})")
    common.add_argument("--manifest", help="re-run the stage recorded in this manifest")
    common.add_argument("--seeds", type=_int_list, help="comma-separated seeds")
    common.add_argument("--train-fraction", type=float)
    common.add_argument("--workers", type=int)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--n-nonartifact", type=int)
    data.add_argument("--n-artifact", type=int)
    data.add_argument("--data-seed", type=int)
    data.add_argument("--low-cut", type=float)
    data.add_argument("--high-cut", type=float)
    data.add_argument("--filter-order", type=int)

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--variant", choices=("vanilla", "grn_intermediate", "grn_attention"))
    model.add_argument("--gating")
    model.add_argument("--epochs", type=int)
    model.add_argument("--d-model", type=int)
    model.add_argument("--n-heads", type=int)
    model.add_argument("--n-layers", type=int)
    model.add_argument("--patch-size", type=int)
    model.add_argument("--batch-size", type=int)
    model.add_argument("--learning-rate", type=float)
    model.add_argument("--dropout", type=float)
    model.add_argument("--seed", type=int)

    mine_p = argparse.ArgumentParser(add_help=False)
    mine_p.add_argument("--mine-epochs", type=int)
    mine_p.add_argument("--mine-batch-size", type=int)
    mine_p.add_argument("--mine-learning-rate", type=float)

    sub.add_parser("datagen", parents=[common, data], help="generate a labelled synthetic dataset")
    pre = sub.add_parser("preprocess", parents=[common, data],
                         help="filter and segment a raw signal into pulses")
    pre.add_argument("signal", nargs="?", help="one-column CSV/TXT or .npy signal")
    pre.add_argument("--sample-rate", type=float, default=128.0)
    tr = sub.add_parser("train", parents=[common, model], help="train a classifier")
    tr.add_argument("--dataset")
    ev = sub.add_parser("evaluate", parents=[common], help="score a checkpoint")
    ev.add_argument("--checkpoint")
    ev.add_argument("--dataset")
    sw = sub.add_parser("sweep", parents=[common, model], help="gating/variant comparison table")
    sw.add_argument("--dataset")
    sw.add_argument("--variants", type=_csv_list, default=["vanilla", "grn_intermediate"])
    sw.add_argument("--gatings", type=_csv_list, default=list(ex.ALL_GATINGS))
    mi = sub.add_parser("mine", parents=[common, mine_p], help="MI before and after the GRN")
    mi.add_argument("--checkpoint")
    mi.add_argument("--dataset")
    return p


_REQUIRED = {"preprocess": ("signal",), "train": ("dataset",), "evaluate": ("checkpoint", "dataset"),
             "sweep": ("dataset",), "mine": ("checkpoint", "dataset")}


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        if args.manifest:
            outputs = rerun_manifest(args.manifest, args.output_dir)
        else:
            for name in _REQUIRED.get(args.command, ()):
                if getattr(args, name) is None:
                    parser.error(f"{args.command} needs --{name} (or --manifest)"
                                 if name != "signal" else "preprocess needs a signal file")
            for name in ("dataset", "checkpoint", "signal"):
                p = getattr(args, name, None)
                if p is not None and not Path(p).exists():
                    raise FileNotFoundError(f"no such file: {p}")
            cfg = build_config(args)
            outputs = _run(args.command, cfg, _stage_args(args), _out_dir(args, cfg))
    except (ValueError, FileNotFoundError, OSError) as exc:
        print(f"grnppg {args.command}: error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({k: str(v) for k, v in outputs.items()}, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
