"""Deterministic synthetic scene generator.

Scenes are flat-shaded geometric objects on noisy solid backgrounds, with
exact ground-truth segmentation maps and detections from a configurable
set of simulated providers. Worlds declare confusable category pairs:
pairs sharing a background palette but differing in objects, and pairs
sharing objects but differing in background, so that each representation
level has a blind spot by construction.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from .dataset import DetProviderInfo, SceneDataset, SegProviderInfo
from .errors import ConfigError, DataError
from .palettes import color_by_name
from .scene import Detection, DetectionSet, SceneInstance, SegmentationMap

SHAPES = ("square", "circle", "triangle", "plus", "diamond")


@dataclass(frozen=True)
class ObjectType:
    name: str
    shape: str
    color_name: str
    size_range: tuple  # (min, max) bbox side in pixels


@dataclass(frozen=True)
class CategorySpec:
    name: str
    background_mean: tuple  # (r, g, b)
    background_noise: int
    objects: dict  # object-type name -> (min count, max count)
    size_scale: float = 1.0  # multiplier on object size ranges in this category


@dataclass(frozen=True)
class SegProviderSpec:
    provider_id: int
    class_ids: dict  # object-type name -> provider-local id
    background_id: int = 0
    background_name: str = "background"


@dataclass(frozen=True)
class DetProviderSpec:
    provider_id: int
    vocabulary: tuple  # class id = index into this tuple


@dataclass(frozen=True)
class SyntheticWorldSpec:
    categories: tuple
    object_types: tuple
    seg_providers: tuple
    det_providers: tuple
    image_size: tuple = (64, 64)
    rng_seed: int = 0
    background_confusable: tuple = field(default_factory=tuple)  # category index pairs
    object_confusable: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not self.background_confusable or not self.object_confusable:
            raise ConfigError(
                "synthetic: world must declare at least one background-confusable "
                "and one object-confusable category pair"
            )
        cats = self.categories
        for i, j in self.background_confusable:
            if cats[i].background_mean != cats[j].background_mean:
                raise ConfigError(
                    f"synthetic: categories {i},{j} flagged background-confusable "
                    "but their palettes differ"
                )
            if cats[i].objects == cats[j].objects:
                raise ConfigError(
                    f"synthetic: background-confusable pair {i},{j} must differ "
                    "in object profile"
                )
        for i, j in self.object_confusable:
            if cats[i].objects != cats[j].objects:
                raise ConfigError(
                    f"synthetic: categories {i},{j} flagged object-confusable "
                    "but their object profiles differ"
                )
            if cats[i].background_mean == cats[j].background_mean:
                raise ConfigError(
                    f"synthetic: object-confusable pair {i},{j} must differ "
                    "in background palette"
                )

    def object_type(self, name):
        for ot in self.object_types:
            if ot.name == name:
                return ot
        raise ConfigError(f"synthetic: unknown object type {name!r}")

    @property
    def n_categories(self):
        return len(self.categories)


def shape_mask(shape, size):
    """Boolean (size, size) mask of a filled shape; every mask covers the
    integer center pixel of its bounding box."""
    s = size
    yy, xx = np.mgrid[0:s, 0:s]
    c = (s - 1) / 2.0
    if shape == "square":
        return np.ones((s, s), dtype=bool)
    if shape == "circle":
        return (xx - c) ** 2 + (yy - c) ** 2 <= c * c + 0.5
    if shape == "triangle":
        return np.abs(xx - c) <= yy / 2.0
    if shape == "plus":
        t = max(1.0, s / 3.0) / 2.0
        return (np.abs(xx - c) <= t) | (np.abs(yy - c) <= t)
    if shape == "diamond":
        return np.abs(xx - c) + np.abs(yy - c) <= c
    raise ConfigError(f"synthetic: unknown shape {shape!r}")


def split_counts(n, ratios):
    """Floor split with largest-remainder distribution, preserving order."""
    raw = [n * r for r in ratios]
    counts = [int(np.floor(v)) for v in raw]
    remainder = n - sum(counts)
    order = sorted(range(len(ratios)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:remainder]:
        counts[i] += 1
    return tuple(counts)


def _place_boxes(rng, sizes, image_size, max_attempts=200):
    """Sample non-overlapping (x0, y0, x1, y1) boxes fully inside the image."""
    nx, ny = image_size
    placed = []
    for s in sizes:
        for attempt in range(max_attempts):
            x0 = int(rng.integers(0, nx - s + 1))
            y0 = int(rng.integers(0, ny - s + 1))
            box = (x0, y0, x0 + s, y0 + s)
            clash = any(
                box[0] < b[2] + 1 and b[0] < box[2] + 1 and box[1] < b[3] + 1 and b[1] < box[3] + 1
                for b in placed
            )
            if not clash:
                placed.append(box)
                break
        else:
            raise DataError(
                f"synthetic: could not place object of size {s} after "
                f"{max_attempts} attempts"
            )
    return placed


def generate_dataset(spec, n_per_category, split_ratios=(0.8, 0.1, 0.1)):
    """Generate a full dataset from a world spec, deterministically per seed."""
    if abs(sum(split_ratios) - 1.0) > 1e-9:
        raise ConfigError(f"synthetic: split ratios {split_ratios} do not sum to 1")
    if n_per_category < 5:
        raise ConfigError("synthetic: need at least 5 scenes per category")
    nx, ny = spec.image_size
    max_scale = max((c.size_scale for c in spec.categories), default=1.0)
    for ot in spec.object_types:
        if round(ot.size_range[1] * max_scale) > min(nx, ny):
            raise ConfigError(
                f"synthetic: object {ot.name!r} (max scaled size "
                f"{round(ot.size_range[1] * max_scale)}) cannot fit inside "
                f"image {spec.image_size}"
            )
        if ot.shape not in SHAPES:
            raise ConfigError(f"synthetic: unknown shape {ot.shape!r}")

    rng = np.random.default_rng(spec.rng_seed)
    n_train, n_val, _ = split_counts(n_per_category, split_ratios)
    scenes = []
    scene_id = 0
    for label, cat in enumerate(spec.categories):
        for k in range(n_per_category):
            split = "train" if k < n_train else ("validation" if k < n_train + n_val else "test")
            scenes.append(_generate_scene(rng, spec, cat, label, split, scene_id))
            scene_id += 1

    seg_info = tuple(
        SegProviderInfo(
            provider_id=p.provider_id,
            class_names=_seg_class_names(p),
            background_id=p.background_id,
        )
        for p in spec.seg_providers
    )
    det_info = tuple(
        DetProviderInfo(
            provider_id=p.provider_id,
            class_names={i: name for i, name in enumerate(p.vocabulary)},
            vocabulary_size=len(p.vocabulary),
        )
        for p in spec.det_providers
    )
    return SceneDataset(
        scenes=scenes,
        category_names=tuple(c.name for c in spec.categories),
        seg_providers=seg_info,
        det_providers=det_info,
        image_size=spec.image_size,
        world=spec_to_dict(spec),
    )


def _seg_class_names(provider):
    names = {provider.background_id: provider.background_name}
    names.update({cid: name for name, cid in provider.class_ids.items()})
    return names


def _generate_scene(rng, spec, cat, label, split, scene_id):
    nx, ny = spec.image_size
    amp = cat.background_noise
    base = np.array(cat.background_mean, dtype=np.int64)
    noise = rng.integers(-amp, amp + 1, size=(ny, nx, 3))
    image = np.clip(base[None, None, :] + noise, 0, 255).astype(np.uint8)

    # sample the object roster first, then sizes, then placements
    roster = []
    for name, (lo, hi) in cat.objects.items():
        count = int(rng.integers(lo, hi + 1))
        ot = spec.object_type(name)
        for _ in range(count):
            base = int(rng.integers(ot.size_range[0], ot.size_range[1] + 1))
            roster.append((ot, max(3, int(round(base * cat.size_scale)))))
    boxes = _place_boxes(rng, [s for _, s in roster], spec.image_size)

    seg_labels = {
        p.provider_id: np.full((ny, nx), p.background_id, dtype=np.int32)
        for p in spec.seg_providers
    }
    placed = []
    for (ot, size), (x0, y0, x1, y1) in zip(roster, boxes):
        mask = shape_mask(ot.shape, size)
        color = np.array(color_by_name(ot.color_name), dtype=np.uint8)
        region = image[y0:y1, x0:x1]
        region[mask] = color
        for p in spec.seg_providers:
            seg_labels[p.provider_id][y0:y1, x0:x1][mask] = p.class_ids[ot.name]
        placed.append((ot, (x0, y0, x1, y1)))

    seg_maps = tuple(
        SegmentationMap(
            labels=seg_labels[p.provider_id],
            provider_id=p.provider_id,
            class_names=_seg_class_names(p),
            background_id=p.background_id,
        )
        for p in spec.seg_providers
    )
    detections = tuple(
        DetectionSet(
            provider_id=p.provider_id,
            boxes=tuple(
                Detection(
                    class_id=p.vocabulary.index(ot.name),
                    class_name=ot.name,
                    bbox=box,
                    confidence=1.0,
                )
                for ot, box in placed
                if ot.name in p.vocabulary
            ),
            vocabulary_size=len(p.vocabulary),
        )
        for p in spec.det_providers
    )
    return SceneInstance(
        image=image,
        seg_maps=seg_maps,
        detections=detections,
        label=label,
        split=split,
        scene_id=scene_id,
    )


def spec_to_dict(spec):
    return asdict(spec)


def spec_from_dict(d):
    return SyntheticWorldSpec(
        categories=tuple(
            CategorySpec(
                name=c["name"],
                background_mean=tuple(c["background_mean"]),
                background_noise=c["background_noise"],
                objects={k: tuple(v) for k, v in c["objects"].items()},
                size_scale=c.get("size_scale", 1.0),
            )
            for c in d["categories"]
        ),
        object_types=tuple(
            ObjectType(
                name=o["name"],
                shape=o["shape"],
                color_name=o["color_name"],
                size_range=tuple(o["size_range"]),
            )
            for o in d["object_types"]
        ),
        seg_providers=tuple(
            SegProviderSpec(
                provider_id=p["provider_id"],
                class_ids=dict(p["class_ids"]),
                background_id=p["background_id"],
                background_name=p["background_name"],
            )
            for p in d["seg_providers"]
        ),
        det_providers=tuple(
            DetProviderSpec(provider_id=p["provider_id"], vocabulary=tuple(p["vocabulary"]))
            for p in d["det_providers"]
        ),
        image_size=tuple(d["image_size"]),
        rng_seed=d["rng_seed"],
        background_confusable=tuple(tuple(p) for p in d["background_confusable"]),
        object_confusable=tuple(tuple(p) for p in d["object_confusable"]),
    )
