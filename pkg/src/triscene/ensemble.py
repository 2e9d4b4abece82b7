"""Validation-weighted stacking of the three sub-models.

Each discriminator's rows are scaled by (validation accuracy x 100)^alpha,
the weighted matrices are flattened and concatenated in fixed low/mid/high
order, and a fully-connected combiner is trained on those vectors. The
combiner is trained on held-out (validation) predictions: on training-split
predictions the discriminators are near-perfect, which would erase the
differences the weighting is supposed to encode. Alpha is selected by grid
search against a 50/50 split of the validation set.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .classifier import SoftmaxClassifier
from .config import LEVEL_ORDER
from .errors import ConfigError, DataError
from .submodel import FEATURIZERS, SubModel
from .util import derive_seed, engine_threads

ABLATION_CASES = (
    ("low",),
    ("mid",),
    ("high",),
    ("low", "mid"),
    ("low", "high"),
    ("mid", "high"),
    ("low", "mid", "high"),
)


def compute_weights(accuracies, alpha):
    """Per-discriminator weights (accuracy x 100)^alpha.

    Accuracies below 1% are rejected: the x100 scaling exists to lift the
    base above 1 before exponentiation, and a discriminator that weak has
    no meaningful vote to scale.
    """
    if not 1.0 <= alpha <= 3.0:
        raise ConfigError(f"ensemble: alpha {alpha} outside [1, 3]")
    accs = np.asarray(accuracies, dtype=np.float64)
    if accs.size == 0:
        raise ConfigError("ensemble: no accuracies to weight")
    if (accs <= 0.0).any():
        raise ConfigError(
            "ensemble: degenerate discriminator with validation accuracy 0; "
            "weights would vanish"
        )
    if (accs < 0.01).any():
        raise ConfigError(
            "ensemble: validation accuracy below 1% cannot be weighted "
            "(scaled base would drop below 1)"
        )
    return (accs * 100.0) ** alpha


def build_meta_input(matrices, weights, active_levels):
    """Weight each matrix row, flatten row-major, concatenate active levels
    in low/mid/high order. Accepts (M, C) or batched (n, M, C) matrices."""
    parts = []
    batched = None
    for level in LEVEL_ORDER:
        if level not in active_levels:
            continue
        if level not in matrices:
            raise DataError(f"ensemble: missing prediction matrix for {level}")
        mat = np.asarray(matrices[level], dtype=np.float64)
        w = np.asarray(weights[level], dtype=np.float64)
        if mat.ndim == 2:
            is_batch = False
            mat = mat[None, ...]
        elif mat.ndim == 3:
            is_batch = True
        else:
            raise DataError(f"ensemble: {level} matrix has ndim {mat.ndim}")
        if batched is None:
            batched = is_batch
        elif batched != is_batch:
            raise DataError("ensemble: mixed batched and single matrices")
        if w.shape != (mat.shape[1],):
            raise DataError(
                f"ensemble: {level} weight count {w.shape} != rows {mat.shape[1]}"
            )
        weighted = mat * w[None, :, None]
        parts.append(weighted.reshape(mat.shape[0], -1))
    out = np.concatenate(parts, axis=1)
    return out if batched else out[0]


@dataclass
class FinalPrediction:
    category: int
    meta_softmax: np.ndarray
    matrices: dict  # level -> (M, n_categories)


class EnsembleClassifier(BaseEstimator, ClassifierMixin):
    """Tri-level stacking classifier over SceneInstance lists."""

    def __init__(self, config):
        self.config = config

    # -- training ----------------------------------------------------------

    def fit(self, dataset):
        cfg = self.config
        cfg.validate()
        train = dataset.split("train")
        val = dataset.split("validation")
        if not train:
            raise DataError("ensemble: empty training split")
        if not val:
            raise DataError("ensemble: empty validation split")
        self.n_categories_ = dataset.n_categories
        self.category_names_ = dataset.category_names
        self.image_size_ = dataset.image_size
        self.active_levels_ = cfg.ordered_active()
        self.train_log_ = []

        self.submodels_ = {}
        for level in self.active_levels_:
            self.submodels_[level] = self._build_submodel(level, dataset)
        self._fit_discriminators(train, dataset)

        labels_val = np.array([s.label for s in val])
        self.val_matrices_ = {
            level: self.submodels_[level].predict_matrices(val)
            for level in self.active_levels_
        }
        self.val_accuracies_ = {}
        for level in self.active_levels_:
            mats = self.val_matrices_[level]
            accs = [
                float(np.mean(np.argmax(mats[:, i, :], axis=1) == labels_val))
                for i in range(mats.shape[1])
            ]
            self.val_accuracies_[level] = accs
            for i, acc in enumerate(accs):
                self.train_log_.append(f"validation accuracy {level}[{i}] = {acc:.4f}")

        alpha, weights, meta, select_acc = self._select_meta(
            self.val_matrices_, labels_val, self.active_levels_
        )
        self.alpha_ = alpha
        self.weights_ = weights
        self.meta_ = meta
        self.train_log_.append(
            f"selected alpha = {alpha} (meta-select accuracy {select_acc:.4f})"
        )
        top1 = self.evaluate(val, k_list=(1,))["top_k"][1]
        self.validation_top1_ = top1
        self.train_log_.append(f"validation Top@1 = {top1:.4f}")
        return self

    def _build_submodel(self, level, dataset):
        cfg = self.config
        if level in dataset.recorded_levels:
            featurizer = self._make_featurizer(level, dataset)
            recorded = dataset.scenes[0].recorded_softmax.get(level)
            if recorded is None:
                raise DataError(
                    f"ensemble: dataset marks {level} recorded but scene "
                    f"{dataset.scenes[0].scene_id} carries no rows"
                )
            return SubModel(level, [], featurizer, recorded_m=len(recorded))
        discs = []
        for i, hidden in enumerate(cfg.hidden_sizes[level]):
            discs.append(SoftmaxClassifier(
                hidden_sizes=tuple(hidden),
                n_classes=dataset.n_categories,
                epochs=cfg.epochs,
                batch_size=cfg.batch_size,
                learning_rate=cfg.learning_rate,
                rng_seed=derive_seed(cfg.rng_seed, level, i),
            ))
        return SubModel(level, discs, self._make_featurizer(level, dataset))

    def _make_featurizer(self, level, dataset):
        cfg = self.config
        if level == "low":
            return FEATURIZERS["low"](dataset.image_size, pool=cfg.pool.get("low"))
        if level == "mid":
            return FEATURIZERS["mid"](
                dataset.image_size, len(dataset.seg_providers), pool=cfg.pool.get("mid")
            )
        return FEATURIZERS["high"](dataset.vocab_sizes)

    def _fit_discriminators(self, train, dataset):
        """Train every discriminator of every active level; independent
        classifiers train in parallel (single writer each)."""
        tasks = []
        y = np.array([s.label for s in train])
        for level in self.active_levels_:
            sub = self.submodels_[level]
            if sub.recorded_m is not None:
                continue
            X = sub.features(train)
            for clf in sub.discriminators:
                tasks.append((clf, X))
        workers = min(engine_threads(), max(1, len(tasks)))
        if workers <= 1 or len(tasks) <= 1:
            for clf, X in tasks:
                clf.fit(X, y)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futs = [pool.submit(clf.fit, X, y) for clf, X in tasks]
                for f in futs:
                    f.result()

    def _select_meta(self, val_matrices, labels_val, active_levels):
        """Grid-search alpha; per alpha, train the combiner on half the
        validation split and score it on the held-out half. Ties prefer the
        smaller alpha."""
        cfg = self.config
        n_val = len(labels_val)
        rng = np.random.default_rng(derive_seed(cfg.rng_seed, "metasplit", 0))
        perm = rng.permutation(n_val)
        half = (n_val + 1) // 2
        fit_idx, select_idx = perm[:half], perm[half:]
        if len(select_idx) == 0:
            raise DataError("ensemble: validation split too small to select alpha")

        def run(alpha):
            weights = {
                level: compute_weights(self.val_accuracies_[level], alpha)
                for level in active_levels
            }
            X = build_meta_input(val_matrices, weights, active_levels)
            meta = SoftmaxClassifier(
                hidden_sizes=(cfg.meta_hidden_factor * X.shape[1],),
                n_classes=self.n_categories_,
                epochs=cfg.meta_epochs,
                batch_size=cfg.batch_size,
                learning_rate=cfg.meta_learning_rate,
                rng_seed=derive_seed(cfg.rng_seed, "meta", 0),
                standardize=True,
            )
            meta.fit(X[fit_idx], labels_val[fit_idx])
            acc = float(np.mean(meta.predict(X[select_idx]) == labels_val[select_idx]))
            return weights, meta, acc

        workers = min(engine_threads(), len(cfg.alpha_grid))
        if workers <= 1:
            results = [run(a) for a in cfg.alpha_grid]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(run, cfg.alpha_grid))
        best = None
        for alpha, (weights, meta, acc) in zip(cfg.alpha_grid, results):
            if best is None or acc > best[3]:
                best = (alpha, weights, meta, acc)
        return best

    # -- inference ---------------------------------------------------------

    def _check_fitted(self):
        if not hasattr(self, "meta_"):
            raise NotFittedError("ensemble: not trained")

    def predict_detail(self, scene):
        """Final category plus the meta softmax and every sub-model matrix."""
        self._check_fitted()
        matrices = {
            level: self.submodels_[level].predict_matrix(scene)
            for level in self.active_levels_
        }
        x = build_meta_input(matrices, self.weights_, self.active_levels_)
        p = self.meta_.predict_proba(x[None, :])[0]
        return FinalPrediction(int(np.argmax(p)), p, matrices)

    def predict_proba(self, scenes):
        self._check_fitted()
        matrices = {
            level: self.submodels_[level].predict_matrices(scenes)
            for level in self.active_levels_
        }
        X = build_meta_input(matrices, self.weights_, self.active_levels_)
        return self.meta_.predict_proba(X)

    def predict(self, scenes):
        return np.argmax(self.predict_proba(scenes), axis=1)

    def evaluate(self, scenes, k_list=(1, 2, 5)):
        """Top@k accuracies (ties by class index) and the confusion matrix."""
        if not scenes:
            raise DataError("ensemble: nothing to evaluate")
        for k in k_list:
            if k > self.n_categories_:
                raise DataError(f"ensemble: Top@{k} undefined with {self.n_categories_} categories")
        probs = self.predict_proba(scenes)
        labels = np.array([s.label for s in scenes])
        order = np.argsort(-probs, axis=1, kind="stable")
        top_k = {}
        for k in k_list:
            hits = (order[:, :k] == labels[:, None]).any(axis=1)
            top_k[int(k)] = float(np.mean(hits))
        confusion = np.zeros((self.n_categories_, self.n_categories_), dtype=np.int64)
        for true, pred in zip(labels, order[:, 0]):
            confusion[true, pred] += 1
        return {"top_k": top_k, "confusion": confusion}

    # -- ablation ----------------------------------------------------------

    def ablate(self, dataset, k_list=(1, 2, 5)):
        """Evaluate all 7 level subsets, retraining only the combiner per
        case; discriminators and their validation matrices are reused."""
        self._check_fitted()
        missing = [l for l in LEVEL_ORDER if l not in self.active_levels_]
        if missing:
            raise ConfigError(f"ensemble: ablation needs all levels trained, missing {missing}")
        val = dataset.split("validation")
        test = dataset.split("test")
        if not test:
            raise DataError("ensemble: empty test split")
        labels_val = np.array([s.label for s in val])
        test_matrices = {
            level: self.submodels_[level].predict_matrices(test)
            for level in LEVEL_ORDER
        }
        labels_test = np.array([s.label for s in test])
        rows = []
        for case_id, levels in enumerate(ABLATION_CASES, start=1):
            alpha, weights, meta, _ = self._select_meta(
                self.val_matrices_, labels_val, levels
            )
            X = build_meta_input(test_matrices, weights, levels)
            probs = meta.predict_proba(X)
            order = np.argsort(-probs, axis=1, kind="stable")
            row = {"case": case_id, "levels": "+".join(levels), "alpha": alpha}
            for k in k_list:
                hits = (order[:, :k] == labels_test[:, None]).any(axis=1)
                row[f"top{k}"] = float(np.mean(hits))
            rows.append(row)
        return rows
