"""Softmax MLP trained by mini-batch gradient descent on cross-entropy.

One classifier class serves every role in the engine: level discriminators
and the stacking combiner. Hidden layers use tanh (smooth, so analytic
gradients can be verified against central finite differences); weights get
He-style scaled normal initialization from the classifier's own seed, and
training is bit-deterministic given (data, seed).
"""

import struct

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .errors import ConfigError, DataError, NumericError

CHECKPOINT_MAGIC = b"TRISCENE"
CHECKPOINT_VERSION = 1


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class SoftmaxClassifier(BaseEstimator, ClassifierMixin):
    """Fully-connected softmax classifier.

    Parameters
    ----------
    hidden_sizes : tuple of int
        Widths of the hidden layers; may be empty for a linear model.
    n_classes : int or None
        Output width; inferred from the labels when None.
    standardize : bool
        When True, fit() trains on per-feature standardized inputs and then
        folds the affine standardization into the first layer, so the stored
        weights operate on raw inputs. Used for inputs with large or uneven
        scales (the stacking combiner); note it reparametrizes the first
        layer even at learning_rate=0.
    """

    def __init__(self, hidden_sizes=(64,), n_classes=None, epochs=200, batch_size=32,
                 learning_rate=0.1, rng_seed=0, activation="tanh", standardize=False):
        self.hidden_sizes = hidden_sizes
        self.n_classes = n_classes
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.rng_seed = rng_seed
        self.activation = activation
        self.standardize = standardize

    # -- estimator API ----------------------------------------------------

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise DataError("classifier: empty or non-2D training set")
        if y.shape != (X.shape[0],):
            raise DataError("classifier: labels do not match inputs")
        if self.activation != "tanh":
            raise ConfigError(f"classifier: unsupported activation {self.activation!r}")
        n_classes = self.n_classes if self.n_classes is not None else int(y.max()) + 1
        if (y < 0).any() or (y >= n_classes).any():
            raise DataError(f"classifier: labels outside [0, {n_classes})")

        self.layer_sizes_ = (X.shape[1],) + tuple(self.hidden_sizes) + (n_classes,)
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.arange(n_classes)
        rng = np.random.default_rng(self.rng_seed)
        self.weights_ = []
        self.biases_ = []
        for fan_in, fan_out in zip(self.layer_sizes_[:-1], self.layer_sizes_[1:]):
            self.weights_.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
            self.biases_.append(np.zeros(fan_out))

        if self.standardize:
            mu = X.mean(axis=0)
            sigma = X.std(axis=0)
            sigma[sigma < 1e-12] = 1.0
            Xt = (X - mu) / sigma
        else:
            Xt = X

        n = Xt.shape[0]
        self.loss_history_ = [self._loss(Xt, y)]
        for epoch in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                _, grads = self._loss_and_grads(Xt[idx], y[idx])
                for (dw, db), w, b in zip(grads, self.weights_, self.biases_):
                    w -= self.learning_rate * dw
                    b -= self.learning_rate * db
            loss = self._loss(Xt, y)
            if not np.isfinite(loss):
                raise NumericError(
                    f"classifier: loss became non-finite at epoch {epoch} "
                    f"(learning_rate={self.learning_rate}); aborting"
                )
            self.loss_history_.append(loss)

        if self.standardize:
            # z = ((x - mu)/sigma) W + b  ==  x (W/sigma) + (b - (mu/sigma) W)
            w0 = self.weights_[0] / sigma[:, None]
            self.biases_[0] = self.biases_[0] - (mu / sigma) @ self.weights_[0]
            self.weights_[0] = w0
        return self

    def predict_proba(self, X):
        X = self._check_ready(X)
        return self._forward(X)[-1]

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    # -- internals ---------------------------------------------------------

    def _check_ready(self, X):
        if not hasattr(self, "weights_"):
            raise NotFittedError("classifier: not trained")
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.layer_sizes_[0]:
            raise DataError(
                f"classifier: input width {X.shape[1]} != expected {self.layer_sizes_[0]}"
            )
        return X

    def _forward(self, X):
        """Activations per layer; the last entry is the softmax output."""
        acts = [X]
        a = X
        last = len(self.weights_) - 1
        for i, (w, b) in enumerate(zip(self.weights_, self.biases_)):
            z = a @ w + b
            a = softmax(z) if i == last else np.tanh(z)
            acts.append(a)
        return acts

    def _logits(self, X):
        a = X
        last = len(self.weights_) - 1
        for i, (w, b) in enumerate(zip(self.weights_, self.biases_)):
            z = a @ w + b
            a = z if i == last else np.tanh(z)
        return a

    def _loss(self, X, y):
        z = self._logits(X)
        zmax = z.max(axis=1)
        lse = zmax + np.log(np.exp(z - zmax[:, None]).sum(axis=1))
        return float(np.mean(lse - z[np.arange(len(y)), y]))

    def _loss_and_grads(self, X, y):
        acts = self._forward(X)
        n = X.shape[0]
        probs = acts[-1]
        eps = np.finfo(np.float64).tiny
        loss = float(-np.mean(np.log(probs[np.arange(n), y] + eps)))
        delta = probs.copy()
        delta[np.arange(n), y] -= 1.0
        delta /= n
        grads = [None] * len(self.weights_)
        for i in range(len(self.weights_) - 1, -1, -1):
            grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
            if i > 0:
                delta = (delta @ self.weights_[i].T) * (1.0 - acts[i] ** 2)
        return loss, grads

    def loss_and_gradients(self, X, y):
        """Mean cross-entropy and its analytic gradients w.r.t. every weight
        matrix and bias vector, on raw (unstandardized) inputs."""
        X = self._check_ready(X)
        y = np.asarray(y, dtype=np.int64)
        return self._loss_and_grads(X, y)

    def loss(self, X, y):
        X = self._check_ready(X)
        return self._loss(X, np.asarray(y, dtype=np.int64))


# -- checkpoint format ------------------------------------------------------
#   magic (8s) | version (<u4) | n_sizes (<u4) | sizes (<u4 each)
#   | activation tag (8s, null padded) | seed (<i8)
#   | per layer: W row-major <f8, then bias <f8
# Round-trips bit-exactly.

def save_checkpoint(clf, path):
    if not hasattr(clf, "weights_"):
        raise NotFittedError("classifier: cannot checkpoint an untrained model")
    sizes = clf.layer_sizes_
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", CHECKPOINT_VERSION, len(sizes)))
        f.write(struct.pack(f"<{len(sizes)}I", *sizes))
        f.write(struct.pack("8s", clf.activation.encode("ascii")))
        f.write(struct.pack("<q", int(clf.rng_seed)))
        for w, b in zip(clf.weights_, clf.biases_):
            f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != CHECKPOINT_MAGIC:
            raise DataError(f"checkpoint {path}: bad magic {magic!r}")
        version, n_sizes = struct.unpack("<II", f.read(8))
        if version != CHECKPOINT_VERSION:
            raise DataError(f"checkpoint {path}: unsupported version {version}")
        sizes = struct.unpack(f"<{n_sizes}I", f.read(4 * n_sizes))
        activation = struct.unpack("8s", f.read(8))[0].rstrip(b"\0").decode("ascii")
        seed = struct.unpack("<q", f.read(8))[0]
        clf = SoftmaxClassifier(
            hidden_sizes=tuple(sizes[1:-1]),
            n_classes=sizes[-1],
            rng_seed=seed,
            activation=activation,
        )
        clf.layer_sizes_ = tuple(sizes)
        clf.n_features_in_ = sizes[0]
        clf.classes_ = np.arange(sizes[-1])
        clf.weights_ = []
        clf.biases_ = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            w = np.frombuffer(f.read(8 * fan_in * fan_out), dtype="<f8")
            clf.weights_.append(w.reshape(fan_in, fan_out).copy())
            clf.biases_.append(np.frombuffer(f.read(8 * fan_out), dtype="<f8").copy())
        clf.loss_history_ = []
    return clf
