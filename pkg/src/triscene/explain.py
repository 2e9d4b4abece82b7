"""Visual and textual explanation generation.

Three attribute extractors, one per representation level:

  * low: occlusion saliency per discriminator, summed into a cumulative
    heatmap; detection boxes are ranked by mean heat per pixel.
  * mid: each non-background segment is masked to the background label and
    the drop in the sub-model's confidence in its own predicted class is
    min-max normalized across segments.
  * high: each present object's count is zeroed (contribution) or swept
    over 0..count (quantity/statistical scores), normalized the same way.

The scalar response s(.) perturbed everywhere below is the mean, across a
sub-model's discriminators, of the probability assigned to the sub-model's
own unperturbed predicted class. Degenerate normalizations (all perturbed
responses equal) yield all-zero scores, and zero-score objects are omitted
from explanations.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .features import (
    build_high_level,
    grid_cell_of_point,
    grid_position,
    center_color,
    mask_segment,
    set_count,
)
from .palettes import encode_label_map

LEVEL_DESCRIPTIONS = {
    "low": "pixel-level color and texture features",
    "mid": "segmentation-based shape and layout features",
    "high": "object category and frequency features",
}
NO_OBJECTS_SENTENCE = "No attributable objects were identified at this level."


@dataclass(frozen=True)
class HeatMap:
    values: np.ndarray  # (h, w)
    kind: str  # "single" or "cumulative"
    sources: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))


@dataclass(frozen=True)
class AttributedObject:
    level: str
    name: str
    contribution: float
    position: str = None  # low, mid
    color: str = None  # low only
    frequency: int = None  # high only
    statistical: float = None  # high only

    def __post_init__(self):
        wants = {
            "low": ("position", "color"),
            "mid": ("position",),
            "high": ("frequency", "statistical"),
        }
        if self.level not in wants:
            raise ConfigError(f"explain: unknown level {self.level!r}")
        for field_name in ("position", "color", "frequency", "statistical"):
            value = getattr(self, field_name)
            if field_name in wants[self.level]:
                if value is None:
                    raise DataError(
                        f"explain: {self.level} object {self.name!r} missing {field_name}"
                    )
            elif value is not None:
                raise DataError(
                    f"explain: {self.level} object {self.name!r} must not set {field_name}"
                )


@dataclass
class Explanation:
    scene_id: int
    final_category: str
    agreement: dict  # level -> percent in [0, 100]
    objects: dict  # level -> list[AttributedObject], score-descending
    visuals: dict  # artifact name -> ndarray
    rendered_text: str


# -- low level ---------------------------------------------------------------

def _occluder_positions(dim, window, stride):
    pos = list(range(0, dim - window + 1, stride))
    if pos[-1] != dim - window:
        pos.append(dim - window)
    return pos


def occlusion_heatmap(predict_fn, image, target_class, window, stride,
                      fill=127, source=None):
    """Occlusion saliency for one discriminator.

    predict_fn maps a stack of images (n, h, w, 3) to softmax rows (n, C).
    A gray square is slid over the image; every covered pixel accumulates
    the (clamped at 0) drop in the target-class probability, overlapping
    contributions are averaged, and the map is min-max normalized to [0, 1].
    A constant map (classifier insensitive everywhere) comes back all zero.
    """
    image = np.asarray(image)
    h, w = image.shape[:2]
    if window > h or window > w:
        raise ConfigError(f"explain: occlusion window {window} exceeds image {w}x{h}")
    if stride < 1:
        raise ConfigError("explain: occlusion stride must be >= 1")
    base = predict_fn(image[None])[0][target_class]
    ys = _occluder_positions(h, window, stride)
    xs = _occluder_positions(w, window, stride)
    variants = np.repeat(image[None], len(ys) * len(xs), axis=0)
    i = 0
    for y in ys:
        for x in xs:
            variants[i, y:y + window, x:x + window] = fill
            i += 1
    probs = predict_fn(variants)[:, target_class]
    drops = np.clip(base - probs, 0.0, None)
    heat = np.zeros((h, w))
    cover = np.zeros((h, w))
    i = 0
    for y in ys:
        for x in xs:
            heat[y:y + window, x:x + window] += drops[i]
            cover[y:y + window, x:x + window] += 1.0
            i += 1
    avg = heat / np.maximum(cover, 1.0)
    lo, hi = avg.min(), avg.max()
    values = np.zeros((h, w)) if hi == lo else (avg - lo) / (hi - lo)
    return HeatMap(values, "single", sources=(source,) if source is not None else ())


def cumulative_heatmap(heatmaps):
    """Element-wise sum of single heatmaps; range grows to [0, M]."""
    if not heatmaps:
        raise DataError("explain: no heatmaps to accumulate")
    shape = heatmaps[0].values.shape
    for hm in heatmaps:
        if hm.values.shape != shape:
            raise DataError("explain: heatmap dimensions differ")
    total = np.sum([hm.values for hm in heatmaps], axis=0)
    sources = tuple(s for hm in heatmaps for s in hm.sources)
    return HeatMap(total, "cumulative", sources=sources)


def score_bbox(cum, bbox, m_l):
    """Mean cumulative heat per pixel inside the box, divided by the number
    of summed heatmaps so the score lives in [0, 1]."""
    x0, y0, x1, y1 = bbox
    h, w = cum.values.shape
    if not (0 <= x0 < x1 <= w and 0 <= y0 < y1 <= h):
        raise DataError(f"explain: box {bbox} outside heatmap {w}x{h}")
    area = (x1 - x0) * (y1 - y0)
    heat = float(cum.values[y0:y1, x0:x1].sum())
    return heat / (area * m_l)


def low_level_top_objects(cum, scene, m_l):
    """Up to 3 detection boxes with the highest heat scores, annotated with
    grid position and center color; zero-score boxes are dropped. Boxes
    from all detection providers compete in one pool; ties keep the
    earlier detection."""
    pool = [det for ds in scene.detections for det in ds.boxes]
    if not pool:
        return []
    scores = np.array([score_bbox(cum, det.bbox, m_l) for det in pool])
    order = np.argsort(-scores, kind="stable")[:3]
    out = []
    for idx in order:
        if scores[idx] <= 0.0:
            continue
        det = pool[idx]
        out.append(AttributedObject(
            level="low",
            name=det.class_name,
            contribution=float(scores[idx]),
            position=grid_position(det.bbox, scene.image_size),
            color=center_color(scene.image, det.bbox),
        ))
    return out


# -- shared normalization ------------------------------------------------------

def _normalize_drops(responses):
    """Min-max normalized impact scores: the candidate whose removal hurts
    most scores 1, the least 0; all zero when responses are identical."""
    responses = np.asarray(responses, dtype=np.float64)
    hi, lo = responses.max(), responses.min()
    if hi == lo:
        return np.zeros_like(responses)
    return (hi - responses) / (hi - lo)


def _reference_class(sub, x):
    """The sub-model's own prediction on the unperturbed input: argmax of
    the discriminator-mean softmax, ties to the lowest class."""
    return int(np.argmax(sub.mean_row(x[None, :])[0]))


# -- mid level -----------------------------------------------------------------

def mid_level_scores(sub, seg_maps):
    """Impact of masking each non-background segment, min-max normalized.

    Returns an ordered dict mapping (provider_index, class_id) to a score
    in [0, 1]. With fewer than 2 segments (or identical responses) all
    scores are 0.
    """
    candidates = []
    for i, sm in enumerate(seg_maps):
        present = sorted(int(v) for v in np.unique(sm.labels))
        candidates.extend((i, cid) for cid in present if cid != sm.background_id)
    if len(candidates) < 2:
        return {key: 0.0 for key in candidates}
    base_x = sub.featurizer.transform_maps(seg_maps)
    ref = _reference_class(sub, base_x)
    perturbed = np.array([
        sub.featurizer.transform_maps(mask_segment(seg_maps, prov, cid))
        for prov, cid in candidates
    ])
    responses = sub.mean_class_prob(perturbed, ref)
    scores = _normalize_drops(responses)
    return {key: float(s) for key, s in zip(candidates, scores)}


def _dedup_by_name(named_scored):
    """Keep the highest-scoring instance per name (first wins ties)."""
    best = {}
    for entry in named_scored:
        name = entry[0]
        if name not in best or entry[1] > best[name][1]:
            best[name] = entry
    return list(best.values())


def mid_level_top_objects(scores, seg_maps, image_size):
    """Top 3 masked-segment scores, deduplicated by class name across
    providers; position is the grid cell of the segment's pixel-mass
    centroid in the provider map that won the dedup."""
    named = [
        (seg_maps[prov].class_names[cid], score, prov, cid)
        for (prov, cid), score in scores.items()
    ]
    unique = _dedup_by_name(named)
    unique.sort(key=lambda e: -e[1])
    out = []
    for name, score, prov, cid in unique[:3]:
        if score <= 0.0:
            continue
        ys, xs = np.nonzero(seg_maps[prov].labels == cid)
        cx, cy = float(xs.mean()) + 0.5, float(ys.mean()) + 0.5
        out.append(AttributedObject(
            level="mid",
            name=name,
            contribution=float(score),
            position=grid_cell_of_point(cx, cy, image_size),
        ))
    return out


# -- high level ------------------------------------------------------------------

def present_objects(hlf):
    """(provider_index, class_id) of every entry with a nonzero count."""
    keys = []
    for prov, size in enumerate(hlf.vocab_sizes):
        offset = hlf.offset(prov)
        for cid in range(size):
            if hlf.counts[offset + cid] > 0:
                keys.append((prov, cid))
    return keys


def high_contribution_scores(sub, hlf):
    """Impact of zeroing each present object's count, min-max normalized."""
    candidates = present_objects(hlf)
    if len(candidates) < 2:
        return {key: 0.0 for key in candidates}
    base_x = sub.featurizer.transform_counts(hlf)
    ref = _reference_class(sub, base_x)
    perturbed = np.array([
        sub.featurizer.transform_counts(set_count(hlf, prov, cid, 0))
        for prov, cid in candidates
    ])
    responses = sub.mean_class_prob(perturbed, ref)
    scores = _normalize_drops(responses)
    return {key: float(s) for key, s in zip(candidates, scores)}


def quantity_scores(sub, hlf, provider_index, class_id, reference_class=None):
    """Normalized response table over every count 0..m for one object.

    Entry c is 1 when that count hurts the reference-class response the
    most and 0 when it helps the most; a flat response gives all zeros.
    """
    m = int(hlf.counts[hlf.flat_index(provider_index, class_id)])
    if reference_class is None:
        reference_class = _reference_class(sub, sub.featurizer.transform_counts(hlf))
    variants = np.array([
        sub.featurizer.transform_counts(set_count(hlf, provider_index, class_id, k))
        for k in range(m + 1)
    ])
    responses = sub.mean_class_prob(variants, reference_class)
    return _normalize_drops(responses)


def quantity_score(sub, hlf, provider_index, class_id, c_k):
    m = int(hlf.counts[hlf.flat_index(provider_index, class_id)])
    if not 0 <= c_k <= m:
        raise DataError(f"explain: quantity {c_k} outside [0, {m}]")
    return float(quantity_scores(sub, hlf, provider_index, class_id)[c_k])


def statistical_score(sub, hlf, provider_index, class_id, reference_class=None):
    """Mean absolute difference of successive quantity scores, walking the
    object's count from its scene frequency down to zero. Sensitivity of
    the prediction to how many of the object there are, in [0, 1]."""
    m = int(hlf.counts[hlf.flat_index(provider_index, class_id)])
    if m < 1:
        raise DataError("explain: statistical score needs an object count >= 1")
    table = quantity_scores(sub, hlf, provider_index, class_id, reference_class)
    return float(np.mean(np.abs(np.diff(table))))


def high_level_top_objects(sub, hlf, scores, name_map):
    """Top 3 contribution scores deduplicated by object name; each carries
    its scene frequency and statistical score."""
    named = [(name_map[key], score, key) for key, score in scores.items()]
    unique = _dedup_by_name(named)
    unique.sort(key=lambda e: -e[1])
    base_x = sub.featurizer.transform_counts(hlf)
    ref = _reference_class(sub, base_x)
    out = []
    for name, score, (prov, cid) in unique[:3]:
        if score <= 0.0:
            continue
        freq = int(hlf.counts[hlf.flat_index(prov, cid)])
        stat = statistical_score(sub, hlf, prov, cid, reference_class=ref)
        out.append(AttributedObject(
            level="high",
            name=name,
            contribution=float(score),
            frequency=freq,
            statistical=stat,
        ))
    return out


# -- agreement and rendering --------------------------------------------------

def agreement_percentage(matrix, final_category):
    """Mean probability the sub-model's rows assign to the final category,
    as a percentage."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if not 0 <= final_category < matrix.shape[1]:
        raise DataError(f"explain: category {final_category} outside matrix width")
    return float(100.0 * matrix[:, final_category].mean())


def _bullet(obj):
    if obj.level == "low":
        return (f"- {obj.name}: color {obj.color}, position {obj.position}, "
                f"contribution {obj.contribution:.2f}")
    if obj.level == "mid":
        return f"- {obj.name}: position {obj.position}, contribution {obj.contribution:.2f}"
    return (f"- {obj.name}: frequency {obj.frequency}, contribution "
            f"{obj.contribution:.2f}, statistical score {obj.statistical:.2f}")


def render_text(final_category, agreement, objects, levels):
    """Fill the fixed per-level template; one paragraph per active level."""
    paragraphs = []
    for level in levels:
        head = (f"Based on {LEVEL_DESCRIPTIONS[level]}, this sub-model agrees "
                f"with the final prediction '{final_category}' at "
                f"{agreement[level]:.1f}%.")
        objs = objects.get(level, [])
        if objs:
            lines = [head + " The most influential objects were:"]
            lines.extend(_bullet(o) for o in objs)
            paragraphs.append("\n".join(lines))
        else:
            paragraphs.append(head + " " + NO_OBJECTS_SENTENCE)
    return "\n\n".join(paragraphs) + "\n"


# -- visual artifacts ----------------------------------------------------------

def heat_to_gray(cum):
    values = cum.values
    hi = values.max()
    if hi <= 0:
        return np.zeros(values.shape, dtype=np.uint8)
    return np.clip(values / hi * 255.0, 0, 255).astype(np.uint8)


def draw_boxes(image, boxes, color=(255, 0, 0), thickness=2):
    """Burn box borders into a copy of the image."""
    out = np.array(image, dtype=np.uint8, copy=True)
    col = np.array(color, dtype=np.uint8)
    h, w = out.shape[:2]
    for (x0, y0, x1, y1) in boxes:
        t = thickness
        out[y0:min(y0 + t, h), x0:x1] = col
        out[max(y1 - t, 0):y1, x0:x1] = col
        out[y0:y1, x0:min(x0 + t, w)] = col
        out[y0:y1, max(x1 - t, 0):x1] = col
    return out


def render_masked_segmentation(seg_maps, top_names):
    """Color renderings of all provider maps side by side; segments whose
    class name is not among the top objects are dimmed 50%."""
    panels = []
    for sm in seg_maps:
        rgb = (encode_label_map(sm.labels) * 255.0).astype(np.float64)
        keep = np.zeros(sm.labels.shape, dtype=bool)
        for cid, name in sm.class_names.items():
            if name in top_names and cid != sm.background_id:
                keep |= sm.labels == cid
        rgb[~keep] *= 0.5
        panels.append(rgb.astype(np.uint8))
    return np.concatenate(panels, axis=1)


# -- orchestration --------------------------------------------------------------

def _pixel_predict_fn(clf, featurizer):
    def fn(images):
        X = np.array([featurizer.transform_image(img) for img in images])
        return clf.predict_proba(X)
    return fn


def explain_scene(model, scene, window=None, stride=None):
    """Run the full explanation pipeline for one scene against a trained
    ensemble: prediction, per-level attribute extraction, artifact
    rendering."""
    detail = model.predict_detail(scene)
    category_name = model.category_names_[detail.category]
    levels = model.active_levels_
    agreement = {
        level: agreement_percentage(detail.matrices[level], detail.category)
        for level in levels
    }
    objects = {}
    visuals = {}

    if "low" in levels:
        sub = model.submodels_["low"]
        if sub.recorded_m is not None:
            raise DataError(
                "explain: low level runs on recorded predictions; occlusion "
                "needs evaluable discriminators"
            )
        nx, ny = scene.image_size
        win = window if window is not None else max(1, nx // 8)
        strd = stride if stride is not None else max(1, win // 2)
        heatmaps = [
            occlusion_heatmap(
                _pixel_predict_fn(clf, sub.featurizer), scene.image,
                detail.category, win, strd, source=i,
            )
            for i, clf in enumerate(sub.discriminators)
        ]
        cum = cumulative_heatmap(heatmaps)
        objects["low"] = low_level_top_objects(cum, scene, sub.m)
        all_boxes = [det.bbox for ds in scene.detections for det in ds.boxes]
        top_boxes = []
        for obj in objects["low"]:
            for ds in scene.detections:
                for det in ds.boxes:
                    if det.class_name == obj.name and grid_position(det.bbox, scene.image_size) == obj.position:
                        top_boxes.append(det.bbox)
        visuals["cumulative_heatmap"] = cum
        gray = heat_to_gray(cum)
        visuals["heatmap_boxes"] = draw_boxes(np.stack([gray] * 3, axis=2), all_boxes)
        visuals["detection_overlay"] = draw_boxes(scene.image, top_boxes)

    if "mid" in levels:
        sub = model.submodels_["mid"]
        if sub.recorded_m is not None:
            raise DataError(
                "explain: mid level runs on recorded predictions; segment "
                "masking needs evaluable discriminators"
            )
        scores = mid_level_scores(sub, scene.seg_maps)
        objects["mid"] = mid_level_top_objects(scores, scene.seg_maps, scene.image_size)
        top_names = {o.name for o in objects["mid"]}
        visuals["masked_segmentation"] = render_masked_segmentation(scene.seg_maps, top_names)

    if "high" in levels:
        sub = model.submodels_["high"]
        if sub.recorded_m is not None:
            raise DataError(
                "explain: high level runs on recorded predictions; count "
                "perturbation needs evaluable discriminators"
            )
        hlf = build_high_level(scene.detections)
        scores = high_contribution_scores(sub, hlf)
        name_map = {}
        for prov, ds in enumerate(scene.detections):
            for det in ds.boxes:
                name_map[(prov, det.class_id)] = det.class_name
        objects["high"] = high_level_top_objects(sub, hlf, scores, name_map)

    text = render_text(category_name, agreement, objects, levels)
    return Explanation(
        scene_id=scene.scene_id,
        final_category=category_name,
        agreement=agreement,
        objects=objects,
        visuals=visuals,
        rendered_text=text,
    )
