"""On-disk layouts: dataset directories, ensemble bundles, recorded
provider bundles, and explanation artifacts.

Dataset directory:
    manifest.json                  categories, providers, splits, world echo
    scene_<id>.ppm                 P6 image
    seg_<id>_<provider>.pgm        P5 label raster per segmentation provider
    det_<id>.json                  detection records per provider
    softmax_<level>_<id>.csv       recorded softmax rows (optional)

Ensemble bundle:
    <level>_<i>.clf, meta.clf      classifier checkpoints
    weights.json                   alpha, per-level weights + accuracies
    metrics.json                   Top@k table + confusion matrix
    config.json                    engine config + dataset summary echo
    train_log.txt                  per-discriminator accuracies, alpha pick
"""

import dataclasses
import json
import os
from pathlib import Path

import numpy as np

from .classifier import load_checkpoint, save_checkpoint
from .config import config_from_dict
from .dataset import DetProviderInfo, SceneDataset, SegProviderInfo
from .ensemble import EnsembleClassifier
from .errors import DataError
from .explain import heat_to_gray
from .pnm import read_pgm, read_ppm, write_pgm, write_ppm
from .scene import Detection, DetectionSet, SceneInstance, SegmentationMap
from .submodel import SubModel


def _dump_json(payload, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise DataError(f"datastore: missing file {path}")
    except json.JSONDecodeError as exc:
        raise DataError(f"datastore: malformed JSON in {path}: {exc}")


def _sid(scene_id):
    return f"{scene_id:04d}"


# -- dataset -----------------------------------------------------------------

def save_dataset(ds, directory):
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    manifest = {
        "categories": list(ds.category_names),
        "image_size": list(ds.image_size),
        "seg_providers": [
            {
                "provider_id": p.provider_id,
                "class_names": {str(k): v for k, v in p.class_names.items()},
                "background_id": p.background_id,
            }
            for p in ds.seg_providers
        ],
        "det_providers": [
            {
                "provider_id": p.provider_id,
                "class_names": {str(k): v for k, v in p.class_names.items()},
                "vocabulary_size": p.vocabulary_size,
            }
            for p in ds.det_providers
        ],
        "scenes": [
            {"scene_id": s.scene_id, "label": s.label, "split": s.split}
            for s in ds.scenes
        ],
        "world": ds.world,
        "recorded_levels": list(ds.recorded_levels),
    }
    _dump_json(manifest, root / "manifest.json")
    for s in ds.scenes:
        sid = _sid(s.scene_id)
        write_ppm(root / f"scene_{sid}.ppm", s.image)
        for sm in s.seg_maps:
            write_pgm(root / f"seg_{sid}_{sm.provider_id}.pgm",
                      sm.labels.astype(np.uint8))
        records = [
            {
                "provider_id": dset.provider_id,
                "vocabulary_size": dset.vocabulary_size,
                "boxes": [
                    {
                        "class_id": d.class_id,
                        "class_name": d.class_name,
                        "bbox": list(d.bbox),
                        "confidence": d.confidence,
                    }
                    for d in dset.boxes
                ],
            }
            for dset in s.detections
        ]
        _dump_json(records, root / f"det_{sid}.json")
        for level, rows in s.recorded_softmax.items():
            np.savetxt(root / f"softmax_{level}_{sid}.csv",
                       np.asarray(rows), delimiter=",")
    return root


def load_dataset(directory):
    root = Path(directory)
    manifest = _load_json(root / "manifest.json")
    seg_info = tuple(
        SegProviderInfo(
            provider_id=p["provider_id"],
            class_names={int(k): v for k, v in p["class_names"].items()},
            background_id=p["background_id"],
        )
        for p in manifest["seg_providers"]
    )
    det_info = tuple(
        DetProviderInfo(
            provider_id=p["provider_id"],
            class_names={int(k): v for k, v in p["class_names"].items()},
            vocabulary_size=p["vocabulary_size"],
        )
        for p in manifest["det_providers"]
    )
    recorded_levels = tuple(manifest.get("recorded_levels", []))
    scenes = []
    for entry in manifest["scenes"]:
        sid = _sid(entry["scene_id"])
        image_path = root / f"scene_{sid}.ppm"
        if not image_path.exists():
            raise DataError(f"datastore: scene {entry['scene_id']}: missing {image_path}")
        image = read_ppm(image_path)
        seg_maps = []
        for p in seg_info:
            seg_path = root / f"seg_{sid}_{p.provider_id}.pgm"
            if not seg_path.exists():
                raise DataError(f"datastore: scene {entry['scene_id']}: missing {seg_path}")
            seg_maps.append(SegmentationMap(
                labels=read_pgm(seg_path).astype(np.int32),
                provider_id=p.provider_id,
                class_names=p.class_names,
                background_id=p.background_id,
            ))
        detections = []
        for rec in _load_json(root / f"det_{sid}.json"):
            detections.append(DetectionSet(
                provider_id=rec["provider_id"],
                boxes=tuple(
                    Detection(
                        class_id=b["class_id"],
                        class_name=b["class_name"],
                        bbox=tuple(b["bbox"]),
                        confidence=b["confidence"],
                    )
                    for b in rec["boxes"]
                ),
                vocabulary_size=rec["vocabulary_size"],
            ))
        recorded = {}
        for level in recorded_levels:
            csv_path = root / f"softmax_{level}_{sid}.csv"
            if not csv_path.exists():
                raise DataError(
                    f"datastore: scene {entry['scene_id']}: missing recorded "
                    f"softmax {csv_path}"
                )
            recorded[level] = _read_softmax_csv(csv_path, entry["scene_id"])
        scenes.append(SceneInstance(
            image=image,
            seg_maps=tuple(seg_maps),
            detections=tuple(detections),
            label=entry["label"],
            split=entry["split"],
            scene_id=entry["scene_id"],
            recorded_softmax=recorded,
        ))
    return SceneDataset(
        scenes=scenes,
        category_names=tuple(manifest["categories"]),
        seg_providers=seg_info,
        det_providers=det_info,
        image_size=tuple(manifest["image_size"]),
        world=manifest.get("world"),
        recorded_levels=recorded_levels,
    )


def _read_softmax_csv(path, scene_id):
    try:
        rows = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"datastore: scene {scene_id}: malformed softmax CSV {path}: {exc}")
    sums = rows.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        raise DataError(
            f"datastore: scene {scene_id}: softmax rows in {path} do not sum to 1"
        )
    return rows


# -- recorded provider bundles -------------------------------------------------

def ingest_recorded(ds, recorded_dir):
    """Attach externally produced maps/detections/softmax rows to a dataset.

    The recorded directory holds recorded.json (provider declarations, the
    merge mode, and any recorded softmax levels) plus per-scene files named
    like the dataset layout. File ids must cover every scene in the dataset.
    """
    root = Path(recorded_dir)
    meta = _load_json(root / "recorded.json")
    mode = meta.get("mode", "extend")
    if mode not in ("extend", "replace"):
        raise DataError(f"datastore: recorded mode {mode!r} not one of extend/replace")
    new_seg_info = tuple(
        SegProviderInfo(
            provider_id=p["provider_id"],
            class_names={int(k): v for k, v in p["class_names"].items()},
            background_id=p["background_id"],
        )
        for p in meta.get("seg_providers", [])
    )
    new_det_info = tuple(
        DetProviderInfo(
            provider_id=p["provider_id"],
            class_names={int(k): v for k, v in p["class_names"].items()},
            vocabulary_size=p["vocabulary_size"],
        )
        for p in meta.get("det_providers", [])
    )
    softmax_levels = tuple(meta.get("softmax_levels", []))

    scenes = []
    for s in ds.scenes:
        sid = _sid(s.scene_id)
        seg_maps = [] if (mode == "replace" and new_seg_info) else list(s.seg_maps)
        for p in new_seg_info:
            seg_path = root / f"seg_{sid}_{p.provider_id}.pgm"
            if not seg_path.exists():
                raise DataError(
                    f"datastore: recorded bundle missing segmentation for scene "
                    f"{s.scene_id} (expected {seg_path})"
                )
            seg_maps.append(SegmentationMap(
                labels=read_pgm(seg_path).astype(np.int32),
                provider_id=p.provider_id,
                class_names=p.class_names,
                background_id=p.background_id,
            ))
        detections = [] if (mode == "replace" and new_det_info) else list(s.detections)
        if new_det_info:
            det_path = root / f"det_{sid}.json"
            if not det_path.exists():
                raise DataError(
                    f"datastore: recorded bundle missing detections for scene "
                    f"{s.scene_id} (expected {det_path})"
                )
            for rec in _load_json(det_path):
                detections.append(DetectionSet(
                    provider_id=rec["provider_id"],
                    boxes=tuple(
                        Detection(
                            class_id=b["class_id"],
                            class_name=b["class_name"],
                            bbox=tuple(b["bbox"]),
                            confidence=b["confidence"],
                        )
                        for b in rec["boxes"]
                    ),
                    vocabulary_size=rec["vocabulary_size"],
                ))
        recorded = dict(s.recorded_softmax)
        for level in softmax_levels:
            csv_path = root / f"softmax_{level}_{sid}.csv"
            if not csv_path.exists():
                raise DataError(
                    f"datastore: recorded bundle missing softmax for scene "
                    f"{s.scene_id} (expected {csv_path})"
                )
            recorded[level] = _read_softmax_csv(csv_path, s.scene_id)
        scenes.append(dataclasses.replace(
            s,
            seg_maps=tuple(seg_maps),
            detections=tuple(detections),
            recorded_softmax=recorded,
        ))

    seg_info = (new_seg_info if (mode == "replace" and new_seg_info)
                else ds.seg_providers + new_seg_info)
    det_info = (new_det_info if (mode == "replace" and new_det_info)
                else ds.det_providers + new_det_info)
    return SceneDataset(
        scenes=scenes,
        category_names=ds.category_names,
        seg_providers=seg_info,
        det_providers=det_info,
        image_size=ds.image_size,
        world=ds.world,
        recorded_levels=tuple(dict.fromkeys(ds.recorded_levels + softmax_levels)),
    )


# -- ensemble bundles ----------------------------------------------------------

def save_bundle(model, directory, metrics=None):
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    for level in model.active_levels_:
        sub = model.submodels_[level]
        for i, clf in enumerate(sub.discriminators):
            save_checkpoint(clf, root / f"{level}_{i}.clf")
    save_checkpoint(model.meta_, root / "meta.clf")
    weights = {
        "alpha": model.alpha_,
        "levels": {
            level: {
                "weights": [float(w) for w in model.weights_[level]],
                "validation_accuracy": model.val_accuracies_[level],
            }
            for level in model.active_levels_
        },
        "validation_top1": model.validation_top1_,
    }
    _dump_json(weights, root / "weights.json")
    summary = {
        "config": model.config.to_dict(),
        "dataset_summary": {
            "image_size": list(model.image_size_),
            "n_categories": model.n_categories_,
            "category_names": list(model.category_names_),
            "recorded_m": {
                level: model.submodels_[level].recorded_m
                for level in model.active_levels_
            },
            "n_seg_providers": (
                model.submodels_["mid"].featurizer.n_providers
                if "mid" in model.submodels_ else None
            ),
            "vocab_sizes": (
                list(model.submodels_["high"].featurizer.vocab_sizes)
                if "high" in model.submodels_ else None
            ),
        },
    }
    _dump_json(summary, root / "config.json")
    if metrics is not None:
        save_metrics(metrics, root / "metrics.json")
    with open(root / "train_log.txt", "w", encoding="utf-8") as f:
        for line in model.train_log_:
            f.write(line + "\n")
    return root


def save_metrics(metrics, path):
    payload = {
        "top_k": {str(k): v for k, v in metrics["top_k"].items()},
        "confusion": np.asarray(metrics["confusion"]).tolist(),
    }
    _dump_json(payload, path)


def load_bundle(directory, dataset):
    """Rebuild a fitted ensemble from its bundle; the dataset supplies the
    featurizer geometry (image size, providers, vocabularies)."""
    root = Path(directory)
    summary = _load_json(root / "config.json")
    cfg = config_from_dict(summary["config"])
    weights_doc = _load_json(root / "weights.json")

    model = EnsembleClassifier(cfg)
    model.n_categories_ = summary["dataset_summary"]["n_categories"]
    model.category_names_ = tuple(summary["dataset_summary"]["category_names"])
    model.image_size_ = tuple(summary["dataset_summary"]["image_size"])
    model.active_levels_ = cfg.ordered_active()
    model.submodels_ = {}
    recorded_m = summary["dataset_summary"].get("recorded_m", {})
    for level in model.active_levels_:
        featurizer = model._make_featurizer(level, dataset)
        rec_m = recorded_m.get(level)
        if rec_m is not None:
            model.submodels_[level] = SubModel(level, [], featurizer, recorded_m=rec_m)
            continue
        discs = []
        i = 0
        while (root / f"{level}_{i}.clf").exists():
            discs.append(load_checkpoint(root / f"{level}_{i}.clf"))
            i += 1
        if not discs:
            raise DataError(f"datastore: bundle {directory} has no {level} checkpoints")
        model.submodels_[level] = SubModel(level, discs, featurizer)
    model.meta_ = load_checkpoint(root / "meta.clf")
    model.alpha_ = weights_doc["alpha"]
    model.weights_ = {
        level: np.asarray(doc["weights"], dtype=np.float64)
        for level, doc in weights_doc["levels"].items()
    }
    model.val_accuracies_ = {
        level: doc["validation_accuracy"] for level, doc in weights_doc["levels"].items()
    }
    model.validation_top1_ = weights_doc["validation_top1"]
    model.train_log_ = []
    log_path = root / "train_log.txt"
    if log_path.exists():
        model.train_log_ = log_path.read_text(encoding="utf-8").splitlines()
    val = dataset.split("validation")
    if val:
        model.val_matrices_ = {
            level: model.submodels_[level].predict_matrices(val)
            for level in model.active_levels_
        }
    return model


# -- explanation artifacts -------------------------------------------------------

def write_explanation(expl, directory):
    """Write the per-scene artifact set: text, JSON, heatmap PGM, overlay
    PPM, masked segmentation PPM."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    sid = _sid(expl.scene_id)
    with open(root / f"explanation_{sid}.txt", "w", encoding="utf-8", newline="\n") as f:
        f.write(expl.rendered_text)
    payload = {
        "scene_id": expl.scene_id,
        "final_category": expl.final_category,
        "agreement": {k: v for k, v in expl.agreement.items()},
        "objects": {
            level: [
                {
                    "name": o.name,
                    "contribution": o.contribution,
                    "position": o.position,
                    "color": o.color,
                    "frequency": o.frequency,
                    "statistical": o.statistical,
                }
                for o in objs
            ]
            for level, objs in expl.objects.items()
        },
    }
    _dump_json(payload, root / f"explanation_{sid}.json")
    written = [root / f"explanation_{sid}.txt", root / f"explanation_{sid}.json"]
    if "cumulative_heatmap" in expl.visuals:
        path = root / f"heat_{sid}.pgm"
        write_pgm(path, heat_to_gray(expl.visuals["cumulative_heatmap"]))
        written.append(path)
    if "detection_overlay" in expl.visuals:
        path = root / f"overlay_{sid}.ppm"
        write_ppm(path, expl.visuals["detection_overlay"])
        written.append(path)
    if "masked_segmentation" in expl.visuals:
        path = root / f"masked_seg_{sid}.ppm"
        write_ppm(path, expl.visuals["masked_segmentation"])
        written.append(path)
    return written
