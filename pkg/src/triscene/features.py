"""Representation builders and the perturbation/localization primitives.

All functions are pure: inputs are never mutated, perturbations return
fresh objects.
"""

import numpy as np

from .errors import DataError
from .palettes import encode_label_map, nearest_color_name
from .scene import HighLevelFeature, MidLevelFeature, SegmentationMap

GRID_CELLS = (
    "top-left", "top-center", "top-right",
    "middle-left", "center", "middle-right",
    "bottom-left", "bottom-center", "bottom-right",
)


def build_mid_level(seg_maps):
    """Color-encode each map (id -> RGB in [0,1]) and concatenate channel-wise.

    Maps are encoded with the shared deterministic palette and stacked in
    provider order, 3 channels per provider.
    """
    if not seg_maps:
        raise DataError("features: need at least one segmentation map")
    shape = seg_maps[0].shape
    for sm in seg_maps:
        if sm.shape != shape:
            raise DataError(
                f"features: map shape {sm.shape} from provider {sm.provider_id} "
                f"differs from {shape}"
            )
    blocks = [encode_label_map(sm.labels) for sm in seg_maps]
    return MidLevelFeature(np.concatenate(blocks, axis=2), n_providers=len(seg_maps))


def build_high_level(detections):
    """Count detections per class per provider and concatenate the count vectors."""
    vocab_sizes = tuple(ds.vocabulary_size for ds in detections)
    segments = []
    for ds in detections:
        seg = np.zeros(ds.vocabulary_size, dtype=np.int64)
        for det in ds.boxes:
            if not (0 <= det.class_id < ds.vocabulary_size):
                raise DataError(
                    f"features: class id {det.class_id} outside provider "
                    f"{ds.provider_id} vocabulary"
                )
            seg[det.class_id] += 1
        segments.append(seg)
    counts = np.concatenate(segments) if segments else np.zeros(0, dtype=np.int64)
    return HighLevelFeature(counts, vocab_sizes)


def mask_segment(seg_maps, provider_index, class_id):
    """Set every pixel of class_id in one provider's map to that map's background id.

    class_id must belong to the map's vocabulary; masking a vocabulary class
    with no pixels (or the background itself) succeeds and changes nothing,
    while an unknown class raises.
    """
    if not (0 <= provider_index < len(seg_maps)):
        raise DataError(f"features: provider index {provider_index} out of range")
    target = seg_maps[provider_index]
    if class_id not in target.class_names:
        raise DataError(
            f"features: class id {class_id} absent from provider "
            f"{target.provider_id} vocabulary"
        )
    labels = target.labels.copy()
    labels[labels == class_id] = target.background_id
    masked = SegmentationMap(
        labels=labels,
        provider_id=target.provider_id,
        class_names=target.class_names,
        background_id=target.background_id,
    )
    return tuple(masked if i == provider_index else sm for i, sm in enumerate(seg_maps))


def set_count(hlf, provider_index, class_id, new_count):
    """Return a copy of the count vector with one addressed entry replaced."""
    if new_count < 0:
        raise DataError("features: object count must be nonnegative")
    idx = hlf.flat_index(provider_index, class_id)
    counts = hlf.counts.copy()
    counts[idx] = new_count
    return HighLevelFeature(counts, hlf.vocab_sizes)


def grid_cell_of_point(cx, cy, image_size):
    """Name of the 3x3 grid cell containing a point; boundary points go to
    the lower-index cell (row-major)."""
    nx, ny = image_size
    # cx <= nx/3  <=>  3*cx <= nx, kept in this form so half-integer
    # centroids compare exactly.
    col = 0 if 3 * cx <= nx else (1 if 3 * cx <= 2 * nx else 2)
    row = 0 if 3 * cy <= ny else (1 if 3 * cy <= 2 * ny else 2)
    return GRID_CELLS[3 * row + col]


def grid_position(bbox, image_size):
    """Grid cell of the bounding-box centroid."""
    x0, y0, x1, y1 = bbox
    nx, ny = image_size
    if not (0 <= x0 < x1 <= nx and 0 <= y0 < y1 <= ny):
        raise DataError(f"features: box {bbox} outside image {image_size}")
    # centroid = ((x0+x1)/2, (y0+y1)/2); comparisons stay in integers.
    col = 0 if 3 * (x0 + x1) <= 2 * nx else (1 if 3 * (x0 + x1) <= 4 * nx else 2)
    row = 0 if 3 * (y0 + y1) <= 2 * ny else (1 if 3 * (y0 + y1) <= 4 * ny else 2)
    return GRID_CELLS[3 * row + col]


def center_color(image, bbox):
    """Named color of the pixel at the integer centroid of the box."""
    image = np.asarray(image)
    h, w = image.shape[:2]
    x0, y0, x1, y1 = bbox
    if not (0 <= x0 < x1 <= w and 0 <= y0 < y1 <= h):
        raise DataError(f"features: box {bbox} outside image {(w, h)}")
    cx = (x0 + x1) // 2
    cy = (y0 + y1) // 2
    return nearest_color_name(image[cy, cx])


def block_mean(values, grid):
    """Average-pool the leading two axes down to a grid x grid raster."""
    values = np.asarray(values, dtype=np.float64)
    h, w = values.shape[:2]
    if grid > h or grid > w:
        raise DataError(f"features: pool grid {grid} exceeds raster {h}x{w}")
    ys = (np.arange(grid + 1) * h) // grid
    xs = (np.arange(grid + 1) * w) // grid
    rows = np.add.reduceat(values, ys[:-1], axis=0)
    cells = np.add.reduceat(rows, xs[:-1], axis=1)
    areas = (ys[1:] - ys[:-1])[:, None] * (xs[1:] - xs[:-1])[None, :]
    return cells / areas.reshape(areas.shape + (1,) * (values.ndim - 2))
