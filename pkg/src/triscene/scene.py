"""Domain types for scenes and their three representation levels.

Conventions used throughout the package:
  * raster arrays have shape (height, width[, channels]) and are indexed
    [y, x]; size tuples are (width, height) = (n_x, n_y)
  * bounding boxes are (x0, y0, x1, y1) integer pixel corners, half-open:
    the box covers pixel columns x0..x1-1 and rows y0..y1-1
  * all types are immutable after construction; their arrays are marked
    read-only so they can be shared across threads
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

SPLITS = ("train", "validation", "test")


def _freeze(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SegmentationMap:
    """Per-provider label raster with its class vocabulary."""

    labels: np.ndarray  # (h, w) int
    provider_id: int
    class_names: dict  # id -> name
    background_id: int

    def __post_init__(self):
        object.__setattr__(self, "labels", _freeze(np.asarray(self.labels, dtype=np.int32)))
        if self.labels.ndim != 2:
            raise DataError("scene: segmentation labels must be a 2-D raster")
        if self.background_id not in self.class_names:
            raise DataError(
                f"scene: provider {self.provider_id} background id {self.background_id} "
                "missing from class_names"
            )
        present = np.unique(self.labels)
        unknown = [int(v) for v in present if int(v) not in self.class_names]
        if unknown:
            raise DataError(
                f"scene: provider {self.provider_id} map contains ids {unknown} "
                "missing from class_names"
            )

    @property
    def shape(self):
        return self.labels.shape


@dataclass(frozen=True)
class Detection:
    class_id: int
    class_name: str
    bbox: tuple  # (x0, y0, x1, y1)
    confidence: float


@dataclass(frozen=True)
class DetectionSet:
    """All detections emitted by one provider for one scene."""

    provider_id: int
    boxes: tuple  # tuple[Detection, ...]
    vocabulary_size: int

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))
        for det in self.boxes:
            x0, y0, x1, y1 = det.bbox
            if not (x0 < x1 and y0 < y1):
                raise DataError(
                    f"scene: provider {self.provider_id} box {det.bbox} is degenerate"
                )
            if not (0 <= det.class_id < self.vocabulary_size):
                raise DataError(
                    f"scene: provider {self.provider_id} class id {det.class_id} outside "
                    f"vocabulary of size {self.vocabulary_size}"
                )
            if not (0.0 <= det.confidence <= 1.0):
                raise DataError(
                    f"scene: provider {self.provider_id} confidence {det.confidence} "
                    "outside [0, 1]"
                )


@dataclass(frozen=True)
class SceneInstance:
    """One scene: image, recorded segmentation maps, detections, label, split."""

    image: np.ndarray  # (h, w, 3) uint8
    seg_maps: tuple  # tuple[SegmentationMap, ...]
    detections: tuple  # tuple[DetectionSet, ...]
    label: int
    split: str
    scene_id: int = 0
    # level -> (M, n_categories) softmax rows recorded from external models;
    # when present for a level, sub-model evaluation is bypassed.
    recorded_softmax: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "image", _freeze(np.asarray(self.image, dtype=np.uint8)))
        object.__setattr__(self, "seg_maps", tuple(self.seg_maps))
        object.__setattr__(self, "detections", tuple(self.detections))
        if self.image.ndim != 3 or self.image.shape[2] != 3:
            raise DataError(f"scene {self.scene_id}: image must be (h, w, 3)")
        h, w = self.image.shape[:2]
        for sm in self.seg_maps:
            if sm.shape != (h, w):
                raise DataError(
                    f"scene {self.scene_id}: provider {sm.provider_id} map shape "
                    f"{sm.shape} != image shape {(h, w)}"
                )
        for ds in self.detections:
            for det in ds.boxes:
                x0, y0, x1, y1 = det.bbox
                if not (0 <= x0 and x1 <= w and 0 <= y0 and y1 <= h):
                    raise DataError(
                        f"scene {self.scene_id}: box {det.bbox} leaves image bounds "
                        f"{(w, h)}"
                    )
        if self.split not in SPLITS:
            raise DataError(f"scene {self.scene_id}: unknown split {self.split!r}")
        if self.label < 0:
            raise DataError(f"scene {self.scene_id}: negative label")

    @property
    def image_size(self):
        """(width, height) = (n_x, n_y)."""
        h, w = self.image.shape[:2]
        return (w, h)


@dataclass(frozen=True)
class MidLevelFeature:
    """Color-encoded segmentation maps concatenated along the channel axis."""

    channels: np.ndarray  # (h, w, 3 * n_providers) float in [0, 1]
    n_providers: int

    def __post_init__(self):
        object.__setattr__(self, "channels", _freeze(np.asarray(self.channels, dtype=np.float64)))
        if self.channels.shape[2] != 3 * self.n_providers:
            raise DataError(
                f"features: mid-level channel count {self.channels.shape[2]} != "
                f"3 * {self.n_providers}"
            )


@dataclass(frozen=True)
class HighLevelFeature:
    """Concatenated per-provider object-count vectors.

    counts[offset(provider) + class_id] is the number of detections of that
    class; vocab_sizes gives each provider's segment length.
    """

    counts: np.ndarray  # (sum of vocab sizes,) nonnegative int
    vocab_sizes: tuple

    def __post_init__(self):
        object.__setattr__(self, "counts", _freeze(np.asarray(self.counts, dtype=np.int64)))
        object.__setattr__(self, "vocab_sizes", tuple(int(v) for v in self.vocab_sizes))
        if self.counts.shape != (sum(self.vocab_sizes),):
            raise DataError(
                f"features: count vector length {self.counts.shape} != "
                f"sum of vocabulary sizes {sum(self.vocab_sizes)}"
            )
        if (self.counts < 0).any():
            raise DataError("features: negative object count")

    def offset(self, provider_index):
        return sum(self.vocab_sizes[:provider_index])

    def flat_index(self, provider_index, class_id):
        if not (0 <= provider_index < len(self.vocab_sizes)):
            raise DataError(f"features: provider index {provider_index} out of range")
        if not (0 <= class_id < self.vocab_sizes[provider_index]):
            raise DataError(
                f"features: class id {class_id} outside provider {provider_index} "
                f"vocabulary of size {self.vocab_sizes[provider_index]}"
            )
        return self.offset(provider_index) + class_id
