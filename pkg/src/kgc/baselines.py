"""Rule-based and supervised comparison policies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .contexts import CompressedContext
from .errors import CheckpointError
from .kg import KnowledgeGraph
from .qnet import read_params, write_params

OVERLAP_THRESHOLD = 1
LINMODEL_HEADER = "linmodel v1"


def rule_based_choose(graph: KnowledgeGraph, ctx: CompressedContext) -> int:
    """Pick the candidate whose endpoints share the most neighbours.

    Returns Reject (``K``) when no candidate reaches ``OVERLAP_THRESHOLD``.
    """
    scores = [graph.neighbor_overlap(t.head, t.tail) for t in ctx.candidates]
    best = int(np.argmax(scores))
    return best if scores[best] >= OVERLAP_THRESHOLD else ctx.K


@dataclass
class LinearModel:
    weights: np.ndarray  # (n_actions, d_state)
    bias: np.ndarray  # (n_actions,)

    @property
    def n_actions(self) -> int:
        return self.weights.shape[0]

    @property
    def d_state(self) -> int:
        return self.weights.shape[1]

    def scores(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.d_state:
            raise ValueError(f"state dimension {X.shape[-1]} != model dimension {self.d_state}")
        return X @ self.weights.T + self.bias

    def save(self, path) -> None:
        write_params(path, LINMODEL_HEADER, [self.d_state, self.n_actions], [self.weights], [self.bias])

    @classmethod
    def load(cls, path) -> "LinearModel":
        dims, weights, biases = read_params(path, LINMODEL_HEADER)
        if len(dims) != 2:
            raise CheckpointError(f"{path}: linear model needs exactly 2 dims, got {dims}")
        return cls(weights[0], biases[0])


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def fit_supervised(
    X,
    y,
    n_actions: int,
    epochs: int = 500,
    learning_rate: float = 0.1,
    seed: int = 0,
) -> LinearModel:
    """Multinomial logistic regression by full-batch gradient descent.

    Starts from zero parameters and minimises mean cross-entropy. ``seed``
    is accepted for interface symmetry; full-batch updates consume no
    randomness.

    Descent runs on standardised features (constant columns are only
    centred); the scaling is folded back into the returned parameters, so
    the model scores raw state vectors.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    if X.ndim != 2 or X.shape[0] == 0 or y.shape != (X.shape[0],):
        raise ValueError(f"need a non-empty (n, d) matrix with n labels, got {X.shape} and {y.shape}")
    if np.any((y < 0) | (y >= n_actions)):
        raise ValueError("labels must lie in [0, n_actions)")
    n, d = X.shape
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd < 1e-12] = 1.0
    Z = (X - mu) / sd
    W = np.zeros((n_actions, d))
    b = np.zeros(n_actions)
    onehot = np.eye(n_actions)[y]
    for _ in range(epochs):
        err = _softmax(Z @ W.T + b) - onehot
        W -= learning_rate * (err.T @ Z) / n
        b -= learning_rate * err.mean(axis=0)
    W_raw = W / sd
    return LinearModel(W_raw, b - W_raw @ mu)


def supervised_choose(model: LinearModel, s) -> int:
    return int(np.argmax(model.scores(s)))


class SupervisedIntegrator(ClassifierMixin, BaseEstimator):
    """scikit-learn classifier over state vectors; labels are action ids 0..K."""

    def __init__(self, n_actions=6, epochs=500, learning_rate=0.1, random_state=0):
        self.n_actions = n_actions
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.model_ = fit_supervised(X, y, self.n_actions, self.epochs, self.learning_rate, self.random_state)
        self.classes_ = np.arange(self.n_actions)
        self.n_features_in_ = X.shape[1]
        return self

    @classmethod
    def from_model(cls, model: LinearModel, **params) -> "SupervisedIntegrator":
        est = cls(n_actions=model.n_actions, **params)
        est.model_ = model
        est.classes_ = np.arange(model.n_actions)
        est.n_features_in_ = model.d_state
        return est

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        return self.model_.scores(X)

    def predict_proba(self, X) -> np.ndarray:
        return _softmax(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.decision_function(X), axis=1)
