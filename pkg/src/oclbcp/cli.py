"""Command-line entry point: ``oclbcp {palette,encode,split,synth,train,eval}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import color_mapping as cm
from .dataset_io import DatasetManifest, SplitConfig, closed_set_splits, make_splits, scan, synth_generate
from .dual_stream import DualStreamModel, NetworkConfig
from .experiment import embed_subjects, encode_subjects, evaluate, train_side
from .image_core import read_image, resize_bilinear, write_png
from .nn_core import OptimizerConfig
from .pipeline import encode
from .report import cmc_csv, cmc_svg

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

log = logging.getLogger("oclbcp")


class CliError(Exception):
    pass


def _resolve(args: argparse.Namespace, config: dict, defaults: dict) -> dict:
    """Flags beat config-file values, which beat built-in defaults."""
    section = {**config.get("common", {}), **config.get(args.command, {})}
    resolved = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
        elif key.replace("_", "-") in section:
            resolved[key] = section[key.replace("_", "-")]
        else:
            resolved[key] = section.get(key, default)
    return resolved


def _echo_config(command: str, resolved: dict) -> None:
    printable = {k: str(v) if isinstance(v, Path) else v for k, v in resolved.items()}
    log.info("resolved config %s", json.dumps({"command": command, **printable}, sort_keys=True))


def _load_palette(path) -> cm.ColorPalette:
    if path is None:
        raise CliError("a palette file is required (build one with `oclbcp palette`)")
    if not Path(path).is_file():
        raise CliError(f"palette file not found: {path}")
    return cm.ColorPalette.load(path)


def _load_manifest(path) -> DatasetManifest:
    if path is None:
        raise CliError("--dataset is required")
    p = Path(path)
    if p.is_dir():
        return scan(p)
    if p.is_file():
        return DatasetManifest.load_json(p)
    raise CliError(f"dataset not found: {path}")


# --- commands -----------------------------------------------------------------

def cmd_palette(cfg: dict) -> int:
    if cfg["dims"] != 3:
        raise CliError(f"--dims must be 3 (colour channels), got {cfg['dims']}")
    if cfg["out"] is None:
        raise CliError("--out is required")
    d = cm.build_distance_matrix()
    palette = cm.build_palette(cfg["dims"])
    palette.save(cfg["out"])
    corr = cm.distance_correlation(d, palette.embedding)
    print(f"palette {cfg['out']} sha256={palette.sha256()} distance_correlation={corr:.6f}")
    if cfg["swatch"]:
        swatch = palette.colors.reshape(16, 16, 3).repeat(8, axis=0).repeat(8, axis=1)
        write_png(cfg["swatch"], swatch)
    return 0


def cmd_encode(cfg: dict) -> int:
    palette = _load_palette(cfg["palette"])
    if cfg["out"] is None:
        raise CliError("--out is required")
    rgb = read_image(cfg["input"])
    if cfg["size"]:
        rgb = resize_bilinear(rgb, cfg["size"], cfg["size"])
    write_png(cfg["out"], encode(rgb, palette))
    return 0


def cmd_split(cfg: dict) -> int:
    manifest = _load_manifest(cfg["dataset"])
    if cfg["out"] is None:
        raise CliError("--out is required")
    train_count = cfg["train_subjects"]
    if train_count is None:
        train_count = len(manifest.subjects) // 2
    split = make_splits(manifest, SplitConfig(train_count, cfg["repetitions"], cfg["seed"]))
    split.save(cfg["out"])
    print(f"{len(split.train)} training subjects, {len(split.test)} test subjects, "
          f"{len(split.splits)} gallery/probe repetitions")
    return 0


def cmd_synth(cfg: dict) -> int:
    if cfg["out"] is None:
        raise CliError("--out is required")
    manifest = synth_generate(cfg["out"], cfg["classes"], cfg["per_class"], cfg["seed"])
    print(f"wrote {manifest.num_images()} images for {len(manifest.subjects)} subjects to {cfg['out']}")
    return 0


def _net_config(arch: str, num_classes: int) -> NetworkConfig:
    if arch == "full":
        return NetworkConfig.full(num_classes)
    if arch == "desk":
        return NetworkConfig(num_classes)
    raise CliError(f"unknown --arch {arch!r}")


def cmd_train(cfg: dict) -> int:
    manifest = _load_manifest(cfg["dataset"])
    if cfg["side"] not in ("left", "right"):
        raise CliError("--side must be left or right")
    if cfg["out"] is None:
        raise CliError("--out is required")
    palette = _load_palette(cfg["palette"])
    classes = manifest.train or manifest.subject_ids
    if len(classes) < 2:
        raise CliError("training needs at least two subjects")
    opt = OptimizerConfig(initial_lr=cfg["lr"], batch_size=cfg["batch_size"], epochs=cfg["epochs"])
    net = _net_config(cfg["arch"], len(classes))
    encoded = encode_subjects(manifest, classes, cfg["side"], palette, net.input_size)
    model, history = train_side(encoded, classes, cfg["side"], opt, net, cfg["seed"])
    for epoch, (lr, loss) in enumerate(zip(history.learning_rates, history.epoch_losses)):
        log.info("epoch %d lr %g loss %.6f", epoch, lr, loss)
    model.save(cfg["out"], extra={
        "classes": list(classes),
        "palette_sha256": palette.sha256(),
        "optimizer": asdict(opt),
        "seed": cfg["seed"],
        "learning_rates": history.learning_rates,
        "epoch_losses": history.epoch_losses,
    })
    print(f"saved {cfg['side']} model to {cfg['out']} (final loss {history.epoch_losses[-1]:.6f})")
    return 0


def _load_model(path, side: str) -> DualStreamModel:
    if path is None:
        raise CliError(f"--model-{side} is required")
    if not Path(path).is_file():
        raise CliError(f"checkpoint not found: {path}")
    model = DualStreamModel.load(path)
    if model.side != side:
        raise CliError(f"--model-{side} was trained on the {model.side} side")
    return model


def cmd_eval(cfg: dict) -> int:
    manifest = _load_manifest(cfg["dataset"])
    palette = _load_palette(cfg["palette"])
    if cfg["out"] is None:
        raise CliError("--out is required")
    if cfg["format"] not in ("csv", "svg"):
        raise CliError("--format must be csv or svg")
    left_model = _load_model(cfg["model_left"], "left")
    right_model = _load_model(cfg["model_right"], "right")

    if cfg["subjects"] == "train":
        subjects = manifest.train or manifest.subject_ids
        splits = closed_set_splits(manifest, subjects, cfg["repetitions"], cfg["seed"])
    else:
        if not manifest.splits:
            raise CliError("manifest has no gallery/probe splits; run `oclbcp split` or use --subjects train")
        subjects = manifest.test
        splits = manifest.splits

    size = left_model.cfg.input_size
    vectors = {}
    for side, model in (("left", left_model), ("right", right_model)):
        vectors[side] = embed_subjects(model, encode_subjects(manifest, subjects, side, palette, size))
    curve = evaluate(vectors["left"], vectors["right"], splits, cfg["rule"])

    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    if cfg["format"] == "svg":
        out.write_text(cmc_svg({"dual-stream": curve}))
        out.with_suffix(".csv").write_text(cmc_csv(curve))
    else:
        out.write_text(cmc_csv(curve))
    top = min(5, len(curve.ranks))
    print(f"rank-1 {curve.rate(1):.4f}  rank-{top} {curve.rate(top):.4f}  ({len(curve.per_repetition)} repetitions)")
    return 0


COMMANDS = {
    "palette": (cmd_palette, {"out": None, "dims": 3, "swatch": None}),
    "encode": (cmd_encode, {"input": None, "palette": None, "out": None, "size": 0}),
    "split": (cmd_split, {"dataset": None, "out": None, "train_subjects": None, "repetitions": 3, "seed": 0}),
    "synth": (cmd_synth, {"out": None, "classes": 10, "per_class": 10, "seed": 0}),
    "train": (cmd_train, {"dataset": None, "side": None, "palette": None, "out": None, "seed": 0,
                          "epochs": 200, "batch_size": 64, "lr": 1.0e-3, "arch": "desk"}),
    "eval": (cmd_eval, {"dataset": None, "palette": None, "model_left": None, "model_right": None,
                        "out": None, "format": "csv", "repetitions": 3, "seed": 0,
                        "subjects": "test", "rule": "cosine"}),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oclbcp", description=__doc__)
    parser.add_argument("--config", type=Path, help="TOML file; [common] and per-command tables")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("palette", help="build the EMD/MDS colour palette")
    p.add_argument("--out", type=Path)
    p.add_argument("--dims", type=int)
    p.add_argument("--swatch", type=Path, help="also write the 256 code colours as a PNG")

    p = sub.add_parser("encode", help="encode one image as a colourised OC-LBCP image")
    p.add_argument("input", type=Path)
    p.add_argument("--palette", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--size", type=int, help="resize to SIZExSIZE before encoding")

    p = sub.add_parser("split", help="subject-level train/test split with gallery/probe repetitions")
    p.add_argument("--dataset", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--train-subjects", type=int, dest="train_subjects")
    p.add_argument("--repetitions", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("synth", help="generate a synthetic periocular dataset")
    p.add_argument("--out", type=Path)
    p.add_argument("--classes", type=int)
    p.add_argument("--per-class", type=int, dest="per_class")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("train", help="train one side's dual-stream network")
    p.add_argument("--dataset", type=Path)
    p.add_argument("--side", choices=("left", "right"))
    p.add_argument("--palette", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr", type=float)
    p.add_argument("--arch", choices=("desk", "full"))

    p = sub.add_parser("eval", help="gallery/probe identification and CMC output")
    p.add_argument("--dataset", type=Path)
    p.add_argument("--palette", type=Path)
    p.add_argument("--model-left", type=Path, dest="model_left")
    p.add_argument("--model-right", type=Path, dest="model_right")
    p.add_argument("--out", type=Path)
    p.add_argument("--format", choices=("csv", "svg"))
    p.add_argument("--repetitions", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--subjects", choices=("test", "train"))
    p.add_argument("--rule", choices=("cosine", "one_minus_cosine"))
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        config = tomllib.loads(args.config.read_text()) if args.config else {}
        func, defaults = COMMANDS[args.command]
        resolved = _resolve(args, config, defaults)
        _echo_config(args.command, resolved)
        return func(resolved)
    except (CliError, ValueError, OSError, KeyError, tomllib.TOMLDecodeError) as exc:
        print(f"oclbcp: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
