"""Experiment orchestration CLI.

Subcommands: gen-data, train, eval, prune, finetune, sweep, spectrum,
augment. Everything is driven by one JSON config file (schema in the
README); --seed and --out override the config. Each run is a pure
function of (config, input files, seed): re-running writes byte-identical
output files, and every text output embeds the tool version and the
sha256 hash of the canonical config.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__, metrics, pruning, spectra, synthgen
from .augment import (
    GeoSpec,
    MaskSpec,
    PipelineSpec,
    band_indices,
    pipeline_from_dict,
    pipeline_to_dict,
    train_pipeline,
)
from .imageio import load_image, save_image
from .nn import TrainConfig, default_model, load_model, predict_scores, save_model, train
from .pruning import PruneSpec, apply_plan, count_macs, count_params, finetune, make_plan, plan_report
from .rng import child_rng


class CliError(Exception):
    pass


class ConfigError(CliError):
    def __init__(self, field, message):
        super().__init__(f"config field {field}: {message}")
        self.field = field


# ---------------------------------------------------------------------------
# config handling


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode("ascii")).hexdigest()


def load_config(path) -> dict:
    if not os.path.exists(path):
        raise CliError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            cfg = json.load(f)
    except json.JSONDecodeError as e:
        raise CliError(f"config is not valid JSON: {e}") from e
    if not isinstance(cfg, dict):
        raise CliError("config root must be a JSON object")
    if "seed" not in cfg:
        raise ConfigError("seed", "is mandatory")
    return cfg


def _section(cfg, name) -> dict:
    value = cfg.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(name, "must be an object")
    return value


def dataset_manifest(cfg, seed) -> synthgen.DatasetManifest:
    d = _section(cfg, "dataset")
    try:
        manifest = synthgen.manifest_from_dict({**d, "seed": seed})
    except (ValueError, TypeError, KeyError) as e:
        raise ConfigError("dataset", str(e)) from e
    return manifest


def pipeline_spec(cfg) -> PipelineSpec:
    try:
        return pipeline_from_dict(_section(cfg, "pipeline"))
    except (ValueError, TypeError) as e:
        raise ConfigError("pipeline", str(e)) from e


def train_config(cfg, seed, pipeline) -> TrainConfig:
    t = _section(cfg, "train")
    try:
        return TrainConfig(
            epochs=int(t.get("epochs", 5)),
            batch_size=int(t.get("batch_size", 32)),
            learning_rate=float(t.get("learning_rate", 1e-3)),
            optimizer=t.get("optimizer", "adam"),
            momentum=float(t.get("momentum", 0.9)),
            seed=seed,
            pipeline=pipeline,
        )
    except (ValueError, TypeError) as e:
        raise ConfigError("train", str(e)) from e


def prune_spec(cfg, ratio=None) -> PruneSpec:
    p = _section(cfg, "prune")
    try:
        return PruneSpec(
            ratio=float(p.get("ratio", 0.5)) if ratio is None else ratio,
            finetune_epochs=int(p.get("finetune_epochs", 5)),
            finetune_fraction=float(p.get("finetune_fraction", 0.02)),
        )
    except (ValueError, TypeError) as e:
        raise ConfigError("prune", str(e)) from e


def model_params(cfg):
    m = _section(cfg, "model")
    widths = tuple(int(w) for w in m.get("widths", (16, 32, 64, 64)))
    kernel = int(m.get("kernel", 3))
    if not widths or any(w < 1 for w in widths):
        raise ConfigError("model.widths", "must be positive")
    return widths, kernel


# ---------------------------------------------------------------------------
# output helpers


def _provenance(cfg) -> str:
    return f"freqmask {__version__} config_sha256={config_hash(cfg)}"


def write_text(path, text: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp = str(path) + ".tmp"
    with open(tmp, "w", encoding="ascii", newline="\n") as f:
        f.write(text)
    os.replace(tmp, path)


def _data_dir(cfg, out):
    d = _section(cfg, "dataset")
    return d.get("path") or os.path.join(out, "data")


def _load_records(cfg, out):
    index = os.path.join(_data_dir(cfg, out), "index.tsv")
    if not os.path.exists(index):
        raise CliError(f"dataset index not found: {index} (run gen-data first)")
    return synthgen.load_index(index)


def _eval_rows(model, records, crop_size):
    sets = []
    for fam in synthgen.split_families(records, "test"):
        images, labels = synthgen.load_split(records, "test", fam)
        scores = predict_scores(model, images, crop_size)
        sets.append((fam, scores, labels))
    if not sets:
        raise CliError("dataset has no test split")
    return metrics.eval_rows(sets)


# ---------------------------------------------------------------------------
# commands


def cmd_gen_data(cfg, out, seed) -> int:
    manifest = dataset_manifest(cfg, seed)
    data_dir = _data_dir(cfg, out)
    os.makedirs(data_dir, exist_ok=True)
    index = synthgen.build_dataset(manifest, data_dir, provenance=_provenance(cfg))
    write_text(
        os.path.join(data_dir, "manifest.json"),
        json.dumps(
            {"provenance": _provenance(cfg), "manifest": manifest.to_dict()},
            indent=2,
            sort_keys=True,
        )
        + "\n",
    )
    print(index)
    return 0


def cmd_train(cfg, out, seed, model_dir=None) -> int:
    records = _load_records(cfg, out)
    images, labels = synthgen.load_split(records, "train")
    widths, kernel = model_params(cfg)
    pipeline = pipeline_spec(cfg)
    config = train_config(cfg, seed, pipeline)
    model = default_model(seed, in_channels=images.shape[3], widths=widths, k=kernel)
    history = train(model, images, labels, config)
    model_dir = model_dir or os.path.join(out, "model")
    save_model(
        model,
        model_dir,
        extra={
            "provenance": _provenance(cfg),
            "seed": seed,
            "pipeline": pipeline_to_dict(pipeline),
            "train": {
                "epochs": config.epochs,
                "batch_size": config.batch_size,
                "learning_rate": config.learning_rate,
                "optimizer": config.optimizer,
            },
        },
    )
    log = [f"# {_provenance(cfg)}", "epoch\tloss"]
    log += [f"{e}\t{loss:.8f}" for e, loss in enumerate(history)]
    write_text(os.path.join(out, "train_log.tsv"), "\n".join(log) + "\n")
    print(model_dir)
    return 0


def cmd_eval(cfg, out, seed, model_path=None, report_name="eval_report.tsv") -> int:
    model_path = model_path or os.path.join(out, "model")
    model, _ = load_model(model_path)
    records = _load_records(cfg, out)
    pipeline = pipeline_spec(cfg)
    rows = _eval_rows(model, records, pipeline.crop_size)
    report = metrics.format_eval_report(rows, header_lines=[_provenance(cfg)])
    path = os.path.join(out, report_name)
    write_text(path, report)
    print(path)
    return 0


def cmd_prune(cfg, out, seed, model_path=None) -> int:
    model_path = model_path or os.path.join(out, "model")
    model, extra = load_model(model_path)
    spec = prune_spec(cfg)
    d = _section(cfg, "dataset")
    input_hw = (int(d.get("image_size", 64)),) * 2
    plan = make_plan(model, spec)
    pruned = apply_plan(model, plan)
    before = (count_params(model), count_macs(model, input_hw))
    after = (count_params(pruned), count_macs(pruned, input_hw))
    save_model(pruned, os.path.join(out, "pruned_model"), extra={**extra, "prune_ratio": spec.ratio})
    write_text(os.path.join(out, "prune_plan.txt"), f"# {_provenance(cfg)}\n" + plan_report(plan))
    acct = [
        f"# {_provenance(cfg)}",
        "stage\tparams\tmacs",
        f"before\t{before[0]}\t{before[1]}",
        f"after_p{spec.ratio}\t{after[0]}\t{after[1]}",
    ]
    write_text(os.path.join(out, "prune_accounting.tsv"), "\n".join(acct) + "\n")
    print(os.path.join(out, "pruned_model"))
    return 0


def cmd_finetune(cfg, out, seed, model_path=None) -> int:
    model_path = model_path or os.path.join(out, "pruned_model")
    model, extra = load_model(model_path)
    records = _load_records(cfg, out)
    images, labels = synthgen.load_split(records, "train")
    pipeline = pipeline_spec(cfg)
    config = train_config(cfg, seed, pipeline)
    spec = prune_spec(cfg)
    finetune(model, images, labels, spec, config)
    ft_dir = os.path.join(out, "finetuned_model")
    save_model(model, ft_dir, extra={**extra, "finetuned_epochs": spec.finetune_epochs})
    rows = _eval_rows(model, records, pipeline.crop_size)
    report = metrics.format_eval_report(rows, header_lines=[_provenance(cfg)])
    write_text(os.path.join(out, "eval_after_finetune.tsv"), report)
    print(ft_dir)
    return 0


SWEEP_AXES = ("ratio", "band", "channel", "transform", "augmentation", "prune_ratio")
_AXIS_VALUES = {
    "ratio": (0.0, 0.15, 0.30, 0.50, 0.70),
    "band": ("low", "mid", "high", "all"),
    "channel": ("all", "r", "g", "b"),
    "transform": ("fourier", "wavelet", "cosine"),
    "augmentation": ("none", "pixel", "patch", "frequency", "rotate", "translate", "translate+frequency"),
    "prune_ratio": (0.0, 0.2, 0.5, 0.8),
}


def _axis_pipeline(base: PipelineSpec, axis: str, value) -> PipelineSpec:
    """Replace the augmentation list according to one sweep axis value."""
    freq = MaskSpec(domain="frequency")
    for aug in base.augmentations:
        if isinstance(aug, MaskSpec) and aug.domain == "frequency":
            freq = aug
            break
    if axis == "ratio":
        augs = () if value == 0 else (MaskSpec(domain="frequency", ratio=value, band=freq.band, transform=freq.transform, channels=freq.channels),)
    elif axis == "band":
        augs = (MaskSpec(domain="frequency", ratio=freq.ratio, band=value, transform=freq.transform, channels=freq.channels),)
    elif axis == "channel":
        augs = (MaskSpec(domain="frequency", ratio=freq.ratio, band=freq.band, transform=freq.transform, channels=value),)
    elif axis == "transform":
        augs = (MaskSpec(domain="frequency", ratio=freq.ratio, band=freq.band, transform=value, channels=freq.channels),)
    elif axis == "augmentation":
        r = freq.ratio
        table = {
            "none": (),
            "pixel": (MaskSpec(domain="pixel", ratio=r),),
            "patch": (MaskSpec(domain="patch", ratio=r),),
            "frequency": (freq,),
            "rotate": (GeoSpec("rotate", r),),
            "translate": (GeoSpec("translate", r),),
            "translate+frequency": (GeoSpec("translate", r), freq),
        }
        augs = table[value]
    else:
        raise CliError(f"unknown sweep axis {axis}")
    return PipelineSpec(
        flip_prob=base.flip_prob,
        crop_size=base.crop_size,
        blur_prob=base.blur_prob,
        jpeg_prob=base.jpeg_prob,
        blur_sigma_range=base.blur_sigma_range,
        jpeg_quality_range=base.jpeg_quality_range,
        augmentations=augs,
    )


def cmd_sweep(cfg, out, seed, axis) -> int:
    if axis not in SWEEP_AXES:
        raise CliError(f"unknown axis {axis!r}; expected one of {SWEEP_AXES}")
    seeds = [int(s) for s in cfg.get("seeds", [seed])]
    values = _AXIS_VALUES[axis]
    base_pipeline = pipeline_spec(cfg)
    widths, kernel = model_params(cfg)
    d = _section(cfg, "dataset")
    input_hw = (int(d.get("image_size", 64)),) * 2

    per_value = {v: {"map": [], "auroc": [], "params": None, "macs": None} for v in values}
    for sd in seeds:
        manifest = dataset_manifest(cfg, sd)
        data_dir = os.path.join(out, f"data_s{sd}")
        index = os.path.join(data_dir, "index.tsv")
        if not os.path.exists(index):
            synthgen.build_dataset(manifest, data_dir, provenance=_provenance(cfg))
        records = synthgen.load_index(index)
        images, labels = synthgen.load_split(records, "train")

        if axis == "prune_ratio":
            config = train_config(cfg, sd, base_pipeline)
            model = default_model(sd, in_channels=images.shape[3], widths=widths, k=kernel)
            train(model, images, labels, config)
            for v in values:
                if v == 0:
                    candidate = model.copy()
                else:
                    plan = make_plan(model, prune_spec(cfg, ratio=v))
                    candidate = apply_plan(model, plan)
                    finetune(candidate, images, labels, prune_spec(cfg, ratio=v), config)
                rows = _eval_rows(candidate, records, base_pipeline.crop_size)
                per_value[v]["map"].append(rows[-1]["ap"])
                per_value[v]["auroc"].append(rows[-1]["auroc"])
                per_value[v]["params"] = count_params(candidate)
                per_value[v]["macs"] = count_macs(candidate, input_hw)
        else:
            for v in values:
                pipeline = _axis_pipeline(base_pipeline, axis, v)
                config = train_config(cfg, sd, pipeline)
                model = default_model(sd, in_channels=images.shape[3], widths=widths, k=kernel)
                train(model, images, labels, config)
                rows = _eval_rows(model, records, pipeline.crop_size)
                per_value[v]["map"].append(rows[-1]["ap"])
                per_value[v]["auroc"].append(rows[-1]["auroc"])

    lines = [f"# {_provenance(cfg)}", f"# seeds: {','.join(str(s) for s in seeds)}"]
    if axis == "prune_ratio":
        lines.append(f"{axis}\tmap\tauroc\tparams\tmacs")
        for v in values:
            r = per_value[v]
            lines.append(
                f"{v}\t{float(np.median(r['map'])):.6f}\t{float(np.median(r['auroc'])):.6f}\t{r['params']}\t{r['macs']}"
            )
    else:
        lines.append(f"{axis}\tmap\tauroc")
        for v in values:
            r = per_value[v]
            lines.append(f"{v}\t{float(np.median(r['map'])):.6f}\t{float(np.median(r['auroc'])):.6f}")
    path = os.path.join(out, f"sweep_{axis}.tsv")
    write_text(path, "\n".join(lines) + "\n")
    print(path)
    return 0


def cmd_spectrum(cfg, out, seed, data=None, split="test", dump_grid=False) -> int:
    index = data or os.path.join(_data_dir(cfg, out), "index.tsv")
    if os.path.isdir(index):
        index = os.path.join(index, "index.tsv")
    if not os.path.exists(index):
        raise CliError(f"dataset index not found: {index}")
    records = [r for r in synthgen.load_index(index) if r["split"] == split]
    if not records:
        raise CliError(f"no records in split {split!r}")
    radius = int(_section(cfg, "spectrum").get("denoise_radius", 2))
    groups = {"real": [r for r in records if r["label"] == 0]}
    for fam in sorted({r["family"] for r in records}):
        fakes = [r for r in records if r["family"] == fam and r["label"] == 1]
        if fakes:
            groups[fam] = fakes
    os.makedirs(out, exist_ok=True)
    for name, rows in groups.items():
        report = spectra.analyze([load_image(r["path"]) for r in rows], denoise_radius=radius)
        path = os.path.join(out, f"spectrum_{name}.pgm")
        spectra.render_heatmap(report, path, comment=_provenance(cfg))
        if dump_grid:
            spectra.dump_grid(report, os.path.join(out, f"spectrum_{name}.tsv"))
        print(path)
    return 0


def cmd_augment(cfg, out, seed, image_path) -> int:
    image = load_image(image_path)
    h, w, c = image.shape
    p = dict(_section(cfg, "pipeline"))
    p.setdefault("crop_size", min(h, w))
    try:
        pipeline = pipeline_from_dict(p)
    except (ValueError, TypeError) as e:
        raise ConfigError("pipeline", str(e)) from e
    rng = child_rng(seed, 0)
    result = train_pipeline(image, pipeline, rng)
    ch, cw = pipeline.crop_size, pipeline.crop_size
    for aug in pipeline.augmentations:
        if isinstance(aug, MaskSpec):
            if aug.domain == "pixel":
                print(f"pixel r={aug.ratio}: {math.ceil(aug.ratio * ch * cw)} of {ch * cw} pixels")
            elif aug.domain == "patch":
                n = (ch // aug.patch_size) * (cw // aug.patch_size)
                print(f"patch r={aug.ratio} p={aug.patch_size}: {math.ceil(aug.ratio * n)} of {n} patches")
            else:
                b = len(band_indices(ch, cw, aug.band))
                print(f"frequency band={aug.band} r={aug.ratio}: {math.ceil(aug.ratio * b)} of {b} bins per channel")
        else:
            print(f"{aug.kind} r={aug.ratio}")
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "augmented.pgm" if c == 1 else "augmented.ppm")
    save_image(path, result, comment=_provenance(cfg))
    print(path)
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="freqmask", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")

    common(sub.add_parser("gen-data", help="build the synthetic dataset"))
    common(sub.add_parser("train", help="train the detector"))
    p = sub.add_parser("eval", help="evaluate on the test split")
    common(p)
    p.add_argument("--model", default=None, help="model directory (default OUT/model)")
    p = sub.add_parser("prune", help="structured channel pruning")
    common(p)
    p.add_argument("--model", default=None)
    p = sub.add_parser("finetune", help="fine-tune a pruned model")
    common(p)
    p.add_argument("--model", default=None)
    p = sub.add_parser("sweep", help="train/evaluate along one config axis")
    common(p)
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p = sub.add_parser("spectrum", help="averaged artifact spectra per family")
    common(p)
    p.add_argument("--data", default=None, help="dataset directory or index file")
    p.add_argument("--split", default="test")
    p.add_argument("--dump-grid", action="store_true")
    p = sub.add_parser("augment", help="augment one image for inspection")
    common(p)
    p.add_argument("--image", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else int(cfg["seed"])
        out = args.out or cfg.get("out") or "runs"
        os.makedirs(out, exist_ok=True)
        if args.command == "gen-data":
            return cmd_gen_data(cfg, out, seed)
        if args.command == "train":
            return cmd_train(cfg, out, seed)
        if args.command == "eval":
            return cmd_eval(cfg, out, seed, model_path=args.model)
        if args.command == "prune":
            return cmd_prune(cfg, out, seed, model_path=args.model)
        if args.command == "finetune":
            return cmd_finetune(cfg, out, seed, model_path=args.model)
        if args.command == "sweep":
            return cmd_sweep(cfg, out, seed, axis=args.axis)
        if args.command == "spectrum":
            return cmd_spectrum(cfg, out, seed, data=args.data, split=args.split, dump_grid=args.dump_grid)
        if args.command == "augment":
            return cmd_augment(cfg, out, seed, image_path=args.image)
        raise CliError(f"unknown command {args.command}")
    except Exception as e:  # single-line, machine-parsable failure contract
        msg = " ".join(str(e).split())
        print(f"error: {type(e).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
