"""Command-line entry points: preprocess, synth, train, eval, infer, render, serve.

Exit codes: 0 success, 1 usage/config problems (or preprocess failures),
2 bad data, 3 numeric failure during training.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from . import checkpoint as ckpt
from .config import RunConfig, apply_overrides, load_run_config, run_config_to_yaml
from .data import (
    load_manifest_samples,
    read_manifest,
    split_dataset,
    write_synthetic_dataset,
)
from .errors import ConfigError, FloorgenError
from .evaluation import evaluate_dataset, make_predictor, write_report
from .geometry import RawBoundary, boundary_image_from_raw, render_plan
from .graphs import graph_from_json, require_valid
from .training import train_loop

log = logging.getLogger("floorgen")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="YAML run configuration")
    p.add_argument("--seed", type=int, default=None, help="override train/synth seed")
    p.add_argument("--print-config", action="store_true", help="echo merged config and exit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="floorgen", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="struct images -> boundary encodings + manifest")
    _add_common(p)
    p.add_argument("--in", dest="in_dir", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("synth", help="emit a synthetic dataset")
    _add_common(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--count", type=int, default=None, help="override dataset.synth.count")

    p = sub.add_parser("train", help="train a model")
    _add_common(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--manifest", type=Path, default=None, help="override dataset.manifest")
    p.add_argument("--resume", type=Path, default=None, help="checkpoint to resume from")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a manifest")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--manifest", type=Path, default=None, help="override eval.manifest")

    p = sub.add_parser("infer", help="generate a plan for one struct+graph pair")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--struct", type=Path, required=True)
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("render", help="render a label grid to an RGB PNG")
    _add_common(p)
    p.add_argument("--labels", type=Path, required=True, help=".npy label grid")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("serve", help="run the inference HTTP service")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--port", type=int, default=None, help="override serve.port")
    return parser


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_preprocess(cfg: RunConfig, in_dir: Path, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    failures = []
    for path in sorted(Path(in_dir).glob("*.png")):
        try:
            with Image.open(path) as im:
                arr = np.asarray(im.convert("L"), dtype=np.float32)
            raw = RawBoundary.from_image(arr, threshold=cfg.dataset.threshold)
            boundary = boundary_image_from_raw(raw)
            npy_name = path.stem + "_boundary.npy"
            np.save(out_dir / npy_name, boundary.channels)
            records.append({"id": path.stem, "struct_path": str(path), "boundary_path": npy_name})
        except Exception as exc:
            failures.append({"file": str(path), "error": f"{type(exc).__name__}: {exc}"})
    with (out_dir / "manifest.jsonl").open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    if failures:
        with (out_dir / "failures.jsonl").open("w", encoding="utf-8") as fh:
            for rec in failures:
                fh.write(json.dumps(rec) + "\n")
        log.error("%d of %d inputs failed; see failures.jsonl", len(failures), len(failures) + len(records))
        return 1
    log.info("preprocessed %d struct images", len(records))
    return 0


def cmd_synth(cfg: RunConfig, out_dir: Path, count: Optional[int]) -> int:
    section = cfg.dataset.synth
    n = count if count is not None else section.count
    manifest = write_synthetic_dataset(
        out_dir, n, section.seed, section.to_synth_config(), cfg.palette
    )
    log.info("wrote %d samples to %s", n, manifest)
    return 0


def _resolve_training_sets(cfg: RunConfig, manifest_path: Optional[Path]):
    path = manifest_path or (Path(cfg.dataset.manifest) if cfg.dataset.manifest else None)
    if path is None:
        raise ConfigError("no training manifest: set dataset.manifest or pass --manifest")
    manifest = read_manifest(path, cfg.palette)
    if cfg.dataset.val_ratio > 0:
        train_m, val_m = split_dataset(
            manifest, (1.0 - cfg.dataset.val_ratio, cfg.dataset.val_ratio), cfg.dataset.split_seed
        )
        if not len(val_m):
            val_m = train_m
    else:
        train_m = val_m = manifest
    thr = cfg.dataset.threshold
    return load_manifest_samples(train_m, thr), load_manifest_samples(val_m, thr)


def cmd_train(cfg: RunConfig, out_dir: Path, manifest_path: Optional[Path], resume: Optional[Path]) -> int:
    train_s, val_s = _resolve_training_sets(cfg, manifest_path)
    size = (cfg.dataset.image_size, cfg.dataset.image_size)
    result = train_loop(
        train_s,
        cfg.train.to_train_config(),
        cfg.model_config(),
        cfg.palette,
        out_dir,
        val_samples=val_s,
        target_hw=size,
        resume_from=resume,
    )
    log.info("finished at step %d; history at %s", result.state.step, result.history_path)
    return 0


def cmd_eval(cfg: RunConfig, checkpoint_path: Path, out_dir: Path, manifest_path: Optional[Path]) -> int:
    path = manifest_path or (Path(cfg.eval.manifest) if cfg.eval.manifest else None)
    if path is None:
        raise ConfigError("no eval manifest: set eval.manifest or pass --manifest")
    params = ckpt.load_params(checkpoint_path)
    samples = load_manifest_samples(read_manifest(path, cfg.palette), cfg.dataset.threshold)
    report, rows = evaluate_dataset(params, samples, cfg.palette, cfg.eval.aggregation)
    report_path = write_report(report, rows, cfg.palette, out_dir)
    print(report_path.read_text(encoding="utf-8"))
    return 0


def cmd_infer(cfg: RunConfig, checkpoint_path: Path, struct: Path, graph_path: Path, out_dir: Path) -> int:
    params = ckpt.load_params(checkpoint_path)
    with Image.open(struct) as im:
        arr = np.asarray(im.convert("L"), dtype=np.float32)
    raw = RawBoundary.from_image(arr, threshold=cfg.dataset.threshold)
    boundary = boundary_image_from_raw(raw)
    graph = graph_from_json(Path(graph_path).read_text(encoding="utf-8"), cfg.palette)
    require_valid(graph, cfg.palette)
    from .data import Sample

    sample = Sample(struct.stem, boundary, graph)
    labels = make_predictor(params, cfg.palette)(sample)
    out_dir.mkdir(parents=True, exist_ok=True)
    np.save(out_dir / f"{struct.stem}_labels.npy", labels)
    Image.fromarray(render_plan(labels, cfg.palette)).save(out_dir / f"{struct.stem}_render.png")
    log.info("wrote %s_labels.npy and %s_render.png to %s", struct.stem, struct.stem, out_dir)
    return 0


def cmd_render(cfg: RunConfig, labels_path: Path, out_path: Path) -> int:
    labels = np.load(labels_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(render_plan(labels, cfg.palette)).save(out_path)
    return 0


def cmd_serve(cfg: RunConfig, checkpoint_path: Path) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        checkpoint_path=checkpoint_path,
        palette=cfg.palette,
        max_concurrent=cfg.serve.max_concurrent,
        cors_origins=cfg.serve.cors_origins,
    )
    uvicorn.run(app, host=cfg.serve.host, port=cfg.serve.port, log_level="info")
    return 0


# ---------------------------------------------------------------------------


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        cfg = load_run_config(args.config)
        cfg = apply_overrides(cfg, seed=args.seed, port=getattr(args, "port", None))
        if args.print_config:
            print(run_config_to_yaml(cfg), end="")
            return 0
        if args.command == "preprocess":
            return cmd_preprocess(cfg, args.in_dir, args.out)
        if args.command == "synth":
            return cmd_synth(cfg, args.out, args.count)
        if args.command == "train":
            return cmd_train(cfg, args.out, args.manifest, args.resume)
        if args.command == "eval":
            return cmd_eval(cfg, args.checkpoint, args.out, args.manifest)
        if args.command == "infer":
            return cmd_infer(cfg, args.checkpoint, args.struct, args.graph, args.out)
        if args.command == "render":
            return cmd_render(cfg, args.labels, args.out)
        if args.command == "serve":
            return cmd_serve(cfg, args.checkpoint)
        parser.error(f"unknown command {args.command}")
        return 1
    except FloorgenError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        log.error("bad input: %s", exc)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
