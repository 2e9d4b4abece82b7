"""Command-line workflow: generate, train, eval, ablate, explain, ingest.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure. ENTRI_THREADS caps internal parallelism. Output directories are
guarded by an advisory lock file; concurrent runs against the same
directory are refused.
"""

import argparse
import contextlib
import csv
import json
import sys
from pathlib import Path

from . import datastore
from .config import config_from_dict, load_config
from .ensemble import EnsembleClassifier
from .errors import ConfigError, DataError, TrisceneError
from .explain import explain_scene
from .synthetic import generate_dataset

LOCK_NAME = ".triscene.lock"


@contextlib.contextmanager
def output_lock(directory):
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    lock = root / LOCK_NAME
    if lock.exists():
        raise DataError(
            f"cli: output directory {root} is locked by another run "
            f"(remove {lock} if stale)"
        )
    lock.write_text("locked\n")
    try:
        yield root
    finally:
        lock.unlink(missing_ok=True)


def _resolve_out(args, cfg, fallback_attr):
    if args.out:
        return args.out
    value = getattr(cfg, fallback_attr, None)
    if not value:
        raise ConfigError(f"cli: no output directory (pass --out or set {fallback_attr})")
    return value


def cmd_generate(args):
    cfg = load_config(args.config)
    if cfg.world is None:
        raise ConfigError("cli: config has no synthetic world to generate from")
    out = _resolve_out(args, cfg, "dataset_path")
    ds = generate_dataset(cfg.world, cfg.n_per_category, cfg.split_ratios)
    with output_lock(out) as root:
        datastore.save_dataset(ds, root)
    print(f"dataset: {len(ds.scenes)} scenes, {ds.n_categories} categories")
    print(f"providers: {len(ds.seg_providers)} segmentation, {len(ds.det_providers)} detection")
    print(f"written to {out}")
    return 0


def _load_dataset_for(cfg, override=None):
    path = override or cfg.dataset_path
    if not path:
        raise ConfigError("cli: no dataset path configured")
    if not Path(path, "manifest.json").exists():
        raise DataError(f"cli: dataset {path} has no manifest.json")
    return datastore.load_dataset(path)


def cmd_train(args):
    cfg = load_config(args.config)
    ds = _load_dataset_for(cfg, args.data)
    out = _resolve_out(args, cfg, "output_dir")
    model = EnsembleClassifier(cfg).fit(ds)
    test = ds.split("test")
    metrics = model.evaluate(test, k_list=_parse_topk(args.topk, model.n_categories_)) if test else None
    with output_lock(out) as root:
        datastore.save_bundle(model, root, metrics=metrics)
    for line in model.train_log_:
        print(line)
    print(f"bundle written to {out}")
    return 0


def _parse_topk(spec, n_categories):
    ks = tuple(int(k) for k in spec.split(","))
    return tuple(k for k in ks if k <= n_categories) or (1,)


def _load_bundle_and_dataset(args):
    bundle_dir = Path(args.bundle)
    summary = bundle_dir / "config.json"
    if not summary.exists():
        raise DataError(f"cli: bundle {bundle_dir} has no config.json")
    with open(summary, encoding="utf-8") as f:
        doc = json.load(f)
    cfg = config_from_dict(doc["config"])
    ds = _load_dataset_for(cfg, args.data)
    model = datastore.load_bundle(bundle_dir, ds)
    return model, ds, cfg


def cmd_eval(args):
    model, ds, _ = _load_bundle_and_dataset(args)
    scenes = ds.split(args.split)
    if not scenes:
        raise DataError(f"cli: split {args.split!r} is empty")
    metrics = model.evaluate(scenes, k_list=_parse_topk(args.topk, model.n_categories_))
    for k, v in metrics["top_k"].items():
        print(f"Top@{k}: {v:.4f}")
    datastore.save_metrics(metrics, Path(args.bundle) / "metrics.json")
    print(f"metrics written to {Path(args.bundle) / 'metrics.json'}")
    return 0


def cmd_ablate(args):
    model, ds, _ = _load_bundle_and_dataset(args)
    rows = model.ablate(ds)
    out = args.out or str(Path(args.bundle) / "ablation.csv")
    with open(out, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["case", "levels", "Top@1", "Top@2", "Top@5"])
        for row in rows:
            writer.writerow([
                row["case"], row["levels"],
                f"{row['top1']:.4f}", f"{row['top2']:.4f}", f"{row['top5']:.4f}",
            ])
    for row in rows:
        print(f"case {row['case']} [{row['levels']}] "
              f"Top@1={row['top1']:.4f} Top@2={row['top2']:.4f} Top@5={row['top5']:.4f}")
    print(f"ablation table written to {out}")
    return 0


def cmd_explain(args):
    model, ds, cfg = _load_bundle_and_dataset(args)
    ids = [int(t) for t in args.scenes.split(",")]
    out = args.out or str(Path(args.bundle) / "explanations")
    with output_lock(out) as root:
        for scene_id in ids:
            scene = ds.by_id(scene_id)
            expl = explain_scene(
                model, scene,
                window=cfg.occlusion_window, stride=cfg.occlusion_stride,
            )
            files = datastore.write_explanation(expl, root)
            print(f"scene {scene_id}: {expl.final_category} "
                  f"({len(files)} artifact files)")
    return 0


def cmd_ingest(args):
    ds = datastore.load_dataset(args.bundle)
    merged = datastore.ingest_recorded(ds, args.recorded)
    with output_lock(args.out) as root:
        datastore.save_dataset(merged, root)
    print(f"ingested recorded providers into {args.out} "
          f"({len(merged.seg_providers)} seg, {len(merged.det_providers)} det, "
          f"recorded levels: {list(merged.recorded_levels) or 'none'})")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="triscene",
        description="Tri-level ensemble scene classifier with explanations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train the full ensemble")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--data", default=None, help="override config dataset path")
    p.add_argument("--topk", default="1,2,5")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--split", default="test", choices=("train", "validation", "test"))
    p.add_argument("--topk", default="1,2,5")
    p.add_argument("--data", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run the 7-case level ablation")
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--data", default=None)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("explain", help="write explanation bundles for scenes")
    p.add_argument("--bundle", required=True)
    p.add_argument("--scenes", required=True, help="comma-separated scene ids")
    p.add_argument("--out", default=None)
    p.add_argument("--data", default=None)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("ingest", help="attach recorded provider outputs to a dataset")
    p.add_argument("--bundle", required=True, help="dataset directory to extend")
    p.add_argument("--recorded", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrisceneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
