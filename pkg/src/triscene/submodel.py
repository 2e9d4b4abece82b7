"""Level-specific feature extractors and the sub-model prediction matrices.

A sub-model = one featurizer + M trained discriminators; its output for a
scene is the M x n_categories matrix whose row i is discriminator i's
softmax vector. Scenes carrying recorded softmax rows for a level bypass
discriminator evaluation entirely (the bridge to externally produced
predictions).
"""

import numpy as np

from .errors import ConfigError, DataError
from .features import block_mean, build_high_level, build_mid_level

LEVELS = ("low", "mid", "high")


class PixelFeaturizer:
    """Raw image scaled to [0,1], optionally average-pooled to a grid."""

    def __init__(self, image_size, pool=8):
        self.image_size = tuple(image_size)
        self.pool = pool

    @property
    def width(self):
        nx, ny = self.image_size
        if self.pool is None:
            return nx * ny * 3
        return self.pool * self.pool * 3

    def transform_image(self, image):
        scaled = np.asarray(image, dtype=np.float64) / 255.0
        if self.pool is not None:
            scaled = block_mean(scaled, self.pool)
        return scaled.ravel()

    def transform(self, scene):
        if scene.image_size != self.image_size:
            raise DataError(
                f"low: scene {scene.scene_id} size {scene.image_size} != "
                f"expected {self.image_size}"
            )
        return self.transform_image(scene.image)


class SegmentationFeaturizer:
    """Concatenated color-encoded segmentation maps, pooled and flattened."""

    def __init__(self, image_size, n_providers, pool=8):
        self.image_size = tuple(image_size)
        self.n_providers = n_providers
        self.pool = pool

    @property
    def width(self):
        nx, ny = self.image_size
        cells = nx * ny if self.pool is None else self.pool * self.pool
        return cells * 3 * self.n_providers

    def transform_maps(self, seg_maps):
        if len(seg_maps) != self.n_providers:
            raise DataError(
                f"mid: got {len(seg_maps)} segmentation maps, trained with "
                f"{self.n_providers} providers"
            )
        mlf = build_mid_level(seg_maps)
        channels = mlf.channels
        if self.pool is not None:
            channels = block_mean(channels, self.pool)
        return channels.ravel()

    def transform(self, scene):
        return self.transform_maps(scene.seg_maps)


class ObjectCountFeaturizer:
    """Concatenated object-count vectors as floats."""

    def __init__(self, vocab_sizes):
        self.vocab_sizes = tuple(vocab_sizes)

    @property
    def width(self):
        return sum(self.vocab_sizes)

    def transform_counts(self, hlf):
        if hlf.vocab_sizes != self.vocab_sizes:
            raise DataError(
                f"high: vocabulary sizes {hlf.vocab_sizes} != trained registry "
                f"{self.vocab_sizes}"
            )
        return hlf.counts.astype(np.float64)

    def transform(self, scene):
        return self.transform_counts(build_high_level(scene.detections))


FEATURIZERS = {
    "low": PixelFeaturizer,
    "mid": SegmentationFeaturizer,
    "high": ObjectCountFeaturizer,
}


class SubModel:
    """One level's ensemble of discriminators over a shared featurizer.

    Discriminators must be architecturally heterogeneous: two entries with
    identical layer widths and identical seeds are refused.
    """

    def __init__(self, level, discriminators, featurizer, recorded_m=None):
        if level not in LEVELS:
            raise ConfigError(f"submodel: unknown level {level!r}")
        if recorded_m is None and not discriminators:
            raise ConfigError(f"submodel: {level} needs at least one discriminator")
        seen = set()
        for clf in discriminators:
            key = (tuple(clf.hidden_sizes), clf.rng_seed)
            if key in seen:
                raise ConfigError(
                    f"submodel: {level} discriminators share hidden sizes "
                    f"{key[0]} and seed {key[1]}; architectures must differ"
                )
            seen.add(key)
        self.level = level
        self.discriminators = list(discriminators)
        self.featurizer = featurizer
        self.recorded_m = recorded_m

    @property
    def m(self):
        if self.recorded_m is not None:
            return self.recorded_m
        return len(self.discriminators)

    def fit(self, scenes):
        if self.recorded_m is not None:
            return self
        X = self.features(scenes)
        y = np.array([s.label for s in scenes])
        for clf in self.discriminators:
            clf.fit(X, y)
        return self

    def features(self, scenes):
        return np.array([self.featurizer.transform(s) for s in scenes])

    def predict_matrix(self, scene):
        """(M, n_categories) matrix of softmax rows for one scene."""
        recorded = scene.recorded_softmax.get(self.level)
        if self.recorded_m is not None:
            if recorded is None:
                raise DataError(
                    f"submodel: {self.level} runs on recorded predictions but "
                    f"scene {scene.scene_id} carries none"
                )
            return np.asarray(recorded, dtype=np.float64)
        if recorded is not None:
            return np.asarray(recorded, dtype=np.float64)
        x = self.featurizer.transform(scene)[None, :]
        return np.vstack([clf.predict_proba(x)[0] for clf in self.discriminators])

    def predict_matrices(self, scenes):
        """(n, M, n_categories) stack, evaluated batched per discriminator."""
        recorded = [s.recorded_softmax.get(self.level) for s in scenes]
        if any(r is not None for r in recorded):
            if not all(r is not None for r in recorded):
                missing = [s.scene_id for s, r in zip(scenes, recorded) if r is None]
                raise DataError(
                    f"submodel: {self.level} has recorded predictions for some "
                    f"scenes but not ids {missing[:5]}"
                )
            return np.stack([np.asarray(r, dtype=np.float64) for r in recorded])
        X = self.features(scenes)
        rows = [clf.predict_proba(X) for clf in self.discriminators]
        return np.stack(rows, axis=1)

    def mean_class_prob(self, X, class_index):
        """Mean over discriminators of the probability of one class, per row
        of X. This is the scalar response perturbation scores track."""
        X = np.atleast_2d(X)
        probs = np.stack([clf.predict_proba(X)[:, class_index] for clf in self.discriminators])
        return probs.mean(axis=0)

    def validation_accuracy(self, index, scenes):
        """Fraction of scenes where discriminator `index`'s argmax (ties to
        the lowest class) equals the label."""
        if not scenes:
            raise DataError("submodel: empty validation split")
        matrices = self.predict_matrices(scenes)
        preds = np.argmax(matrices[:, index, :], axis=1)
        labels = np.array([s.label for s in scenes])
        return float(np.mean(preds == labels))
