"""Color tables: label-id rendering palette and the named color vocabulary."""

import colorsys

import numpy as np

# Named colors used to describe object appearance in textual explanations.
# Order matters: distance ties resolve to the lowest index.
NAMED_COLORS = [
    ("black", (0, 0, 0)),
    ("white", (255, 255, 255)),
    ("gray", (128, 128, 128)),
    ("silver", (192, 192, 192)),
    ("red", (255, 0, 0)),
    ("maroon", (128, 0, 0)),
    ("lime", (0, 255, 0)),
    ("green", (0, 128, 0)),
    ("blue", (0, 0, 255)),
    ("navy", (0, 0, 128)),
    ("yellow", (255, 255, 0)),
    ("olive", (128, 128, 0)),
    ("cyan", (0, 255, 255)),
    ("teal", (0, 128, 128)),
    ("magenta", (255, 0, 255)),
    ("purple", (128, 0, 128)),
]

_NAMED_RGB = np.array([rgb for _, rgb in NAMED_COLORS], dtype=np.float64)


def color_by_name(name):
    for n, rgb in NAMED_COLORS:
        if n == name:
            return rgb
    raise KeyError(name)


def nearest_color_name(rgb):
    """Nearest entry of NAMED_COLORS by Euclidean RGB distance, ties to lowest index."""
    rgb = np.asarray(rgb, dtype=np.float64)
    d2 = np.sum((_NAMED_RGB - rgb) ** 2, axis=1)
    return NAMED_COLORS[int(np.argmin(d2))][0]


def label_colormap(n):
    """Deterministic id -> RGB table for rendering label rasters.

    Id 0 is black; higher ids take full-saturation hues stepped by the
    golden angle, so nearby ids land far apart in RGB and stay separable
    after pooling. uint8 (n, 3).
    """
    cmap = np.zeros((n, 3), dtype=np.uint8)
    for i in range(1, n):
        hue = (i * 0.61803398875) % 1.0
        value = 1.0 if i % 2 else 0.72
        cmap[i] = [int(round(255 * c)) for c in colorsys.hsv_to_rgb(hue, 1.0, value)]
    return cmap


def encode_label_map(labels, max_id=None):
    """Render an id raster to float RGB in [0, 1] using label_colormap."""
    labels = np.asarray(labels)
    hi = int(labels.max()) if max_id is None else int(max_id)
    table = label_colormap(hi + 1).astype(np.float64) / 255.0
    return table[labels]
