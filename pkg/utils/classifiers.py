"""
Classifiers Module - the four objective-function classifiers
K-nearest neighbors, one-vs-rest soft-margin SVM (SMO), entropy decision tree and Gaussian Naive Bayes.
Every tie is broken towards the lower index so the whole pipeline is reproducible.
"""

import logging
from dataclasses import dataclass
from functools import singledispatch
from typing import List, Optional

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import entr

from utils.errors import DimensionError, InsufficientDataError, ParameterError, TrainingError
from utils.features import LabeledDataset

logger = logging.getLogger(__name__)

CLASSIFIER_NAMES = ('knn', 'svm', 'nb', 'dt')


def _as_queries(q, d: int) -> np.ndarray:
    Q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    if Q.shape[1] != d:
        raise DimensionError(f"expected {d} features, got {Q.shape[1]}")
    return Q


# ---------------------------------------------------------------------------
# K nearest neighbors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KnnModel:
    X: np.ndarray
    y: np.ndarray
    k: int = 1


def knn_train(data: LabeledDataset, k: int = 1) -> KnnModel:
    if data.n_samples < 1:
        raise InsufficientDataError("KNN needs at least one training sample")
    if not 1 <= k <= data.n_samples:
        raise ParameterError(f"k must be in [1, {data.n_samples}], got {k}")
    return KnnModel(X=data.X, y=data.y, k=k)


def _knn_vote(model: KnnModel, Q: np.ndarray) -> np.ndarray:
    dist = cdist(Q, model.X, 'sqeuclidean')
    if model.k == 1:
        return model.y[np.argmin(dist, axis=1)]
    order = np.argsort(dist, axis=1, kind='stable')[:, :model.k]
    labels = np.empty(len(Q), dtype=np.int64)
    for row, neighbors in enumerate(order):
        votes = model.y[neighbors]
        values, counts = np.unique(votes, return_counts=True)
        tied = set(values[counts == counts.max()])
        # among tied classes, the one whose member is nearest wins
        labels[row] = next(v for v in votes if v in tied)
    return labels


def knn_predict(model: KnnModel, q) -> int:
    """Majority label of the k nearest training points (Euclidean distance)"""
    return int(_knn_vote(model, _as_queries(q, model.X.shape[1]))[0])


# ---------------------------------------------------------------------------
# Support vector machine
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Kernel:
    name: str = 'linear'
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.name not in ('linear', 'rbf'):
            raise ParameterError(f"kernel must be 'linear' or 'rbf', got {self.name!r}")
        if self.name == 'rbf' and (self.gamma is None or self.gamma <= 0):
            raise ParameterError(f"rbf kernel needs a positive gamma, got {self.gamma}")

    def __call__(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        if self.name == 'linear':
            return A @ B.T
        return np.exp(-self.gamma * cdist(A, B, 'sqeuclidean'))


@dataclass(frozen=True)
class BinarySvm:
    alphas: np.ndarray
    labels: np.ndarray  # +1 / -1
    vectors: np.ndarray
    bias: float
    kernel: Kernel
    support: np.ndarray  # indices of the support vectors in the training set

    def decision(self, Q: np.ndarray) -> np.ndarray:
        if len(self.alphas) == 0:
            return np.full(len(Q), self.bias)
        return self.kernel(Q, self.vectors) @ (self.alphas * self.labels) + self.bias


@dataclass(frozen=True)
class SvmModel:
    classes: np.ndarray
    machines: List[BinarySvm]
    kernel: Kernel
    d: int


def _smo(K: np.ndarray, y: np.ndarray, c_reg: float, tol: float, max_passes: int,
         rng: np.random.Generator, max_iter: int = 1000):
    """Soft-margin dual by sequential minimal optimization over a precomputed kernel matrix"""
    n = len(y)
    alphas = np.zeros(n)
    bias = 0.0
    errors = -y.astype(np.float64)  # f(x) - y with f = 0
    eps = 1e-8

    def take_step(i: int, j: int) -> bool:
        nonlocal bias
        ai, aj = alphas[i], alphas[j]
        yi, yj = y[i], y[j]
        if yi == yj:
            lo, hi = max(0.0, ai + aj - c_reg), min(c_reg, ai + aj)
        else:
            lo, hi = max(0.0, aj - ai), min(c_reg, c_reg + aj - ai)
        if hi - lo < eps:
            return False
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta <= 0:
            return False
        unclipped = aj + yj * (errors[i] - errors[j]) / eta
        aj_new = min(max(unclipped, lo), hi)
        if abs(aj_new - aj) < eps * (aj_new + aj + eps):
            return False
        ai_new = ai + yi * yj * (aj - aj_new)

        b1 = bias - errors[i] - yi * (ai_new - ai) * K[i, i] - yj * (aj_new - aj) * K[i, j]
        b2 = bias - errors[j] - yi * (ai_new - ai) * K[i, j] - yj * (aj_new - aj) * K[j, j]
        if 0 < ai_new < c_reg:
            new_bias = b1
        elif 0 < aj_new < c_reg:
            new_bias = b2
        else:
            new_bias = 0.5 * (b1 + b2)

        errors[:] += yi * (ai_new - ai) * K[i] + yj * (aj_new - aj) * K[j] + (new_bias - bias)
        alphas[i], alphas[j] = ai_new, aj_new
        bias = new_bias
        return True

    diag = np.diag(K)

    def largest_step(i: int) -> int:
        """Partner j whose clipped update of alpha_j is largest, or -1 when no pair can move"""
        ai, yi = alphas[i], y[i]
        same = y == yi
        total = ai + alphas
        diff = alphas - ai
        lo = np.where(same, np.maximum(0.0, total - c_reg), np.maximum(0.0, diff))
        hi = np.where(same, np.minimum(c_reg, total), np.minimum(c_reg, c_reg + diff))
        eta = diag[i] + diag - 2.0 * K[i]
        valid = (hi - lo >= eps) & (eta > 0)
        valid[i] = False
        if not valid.any():
            return -1
        safe_eta = np.where(valid, eta, 1.0)
        target = np.clip(alphas + y * (errors[i] - errors) / safe_eta, lo, hi)
        step = np.where(valid, np.abs(target - alphas), 0.0)
        j = int(np.argmax(step))
        return j if step[j] > eps else -1

    def examine(i: int) -> bool:
        r = errors[i] * y[i]
        if not ((r < -tol and alphas[i] < c_reg) or (r > tol and alphas[i] > 0)):
            return False
        # second choice: largest |E_i - E_j| among non-bound examples, then the largest feasible step
        free = (alphas > 0) & (alphas < c_reg)
        free[i] = False
        if free.any():
            gaps = np.where(free, np.abs(errors - errors[i]), -1.0)
            if take_step(i, int(np.argmax(gaps))):
                return True
        j = largest_step(i)
        return j >= 0 and take_step(i, j)

    # full passes alternate with passes over the non-bound examples; stop after max_passes
    # full passes in a row change nothing
    passes = 0
    iteration = 0
    examine_all = True
    while passes < max_passes and iteration < max_iter:
        if examine_all:
            order = rng.permutation(n)
        else:
            order = rng.permutation(np.flatnonzero((alphas > 0) & (alphas < c_reg)))
        changed = sum(examine(int(i)) for i in order)
        iteration += 1
        if examine_all:
            if changed == 0:
                # fixed point: every partner choice is an argmax, so repeat passes cannot move either
                passes = max_passes
            else:
                examine_all = False
        elif changed == 0:
            examine_all = True

    if passes < max_passes:
        logger.warning("⚠️ SMO stopped at max_iter=%d before convergence", max_iter)
    return np.clip(alphas, 0.0, c_reg), bias


def svm_train(data: LabeledDataset, kernel: str = 'linear', c_reg: float = 1.0,
              gamma: Optional[float] = None, tol: float = 1e-3, max_passes: int = 10,
              seed: int = 0) -> SvmModel:
    """One-vs-rest soft-margin SVMs; gamma defaults to 1/d for the rbf kernel"""
    classes = data.classes
    if len(classes) < 2:
        raise TrainingError(f"SVM needs at least 2 classes, got {len(classes)}")
    if c_reg <= 0:
        raise ParameterError(f"C must be positive, got {c_reg}")
    if kernel == 'rbf' and gamma is None:
        gamma = 1.0 / max(data.n_features, 1)
    kern = Kernel(kernel, gamma if kernel == 'rbf' else None)

    K = kern(data.X, data.X)
    machines = []
    for c in classes:
        y = np.where(data.y == c, 1.0, -1.0)
        rng = np.random.default_rng([seed, int(c)])
        alphas, bias = _smo(K, y, c_reg, tol, max_passes, rng)
        support = np.flatnonzero(alphas > 0)
        machines.append(BinarySvm(alphas=alphas[support], labels=y[support], vectors=data.X[support],
                                  bias=float(bias), kernel=kern, support=support))
    return SvmModel(classes=classes, machines=machines, kernel=kern, d=data.n_features)


def svm_decision_values(model: SvmModel, Q) -> np.ndarray:
    """One column of f(x) = sum(alpha_i y_i K(x_i, x)) + b per class"""
    Q = _as_queries(Q, model.d)
    return np.column_stack([m.decision(Q) for m in model.machines])


def linear_weights(machine: BinarySvm) -> np.ndarray:
    """w = sum(alpha_i y_i x_i) for a linear-kernel machine"""
    if machine.kernel.name != 'linear':
        raise ParameterError("explicit weights exist only for the linear kernel")
    return (machine.alphas * machine.labels) @ machine.vectors


def svm_predict(model: SvmModel, q) -> int:
    """Class with the largest one-vs-rest decision value (ties to the lower class)"""
    return int(model.classes[np.argmax(svm_decision_values(model, q)[0])])


# ---------------------------------------------------------------------------
# Decision tree
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TreeNode:
    label: Optional[int] = None
    feature: int = -1
    threshold: float = 0.0
    gain: float = 0.0
    left: Optional['TreeNode'] = None
    right: Optional['TreeNode'] = None
    d: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.label is not None

    @property
    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth, self.right.depth)


def _entropy_of_counts(counts: np.ndarray) -> np.ndarray:
    """Base-2 Shannon entropy along the last axis of class-count arrays"""
    totals = counts.sum(axis=-1, keepdims=True)
    p = counts / np.where(totals == 0, 1, totals)
    return entr(p).sum(axis=-1) / np.log(2)


def _best_split(X: np.ndarray, y: np.ndarray, n_classes: int):
    """(feature, threshold, gain) maximizing information gain; first best wins ties"""
    n = len(y)
    total_counts = np.bincount(y, minlength=n_classes)
    parent = float(_entropy_of_counts(total_counts))
    best = (-1, 0.0, 0.0)

    for feature in range(X.shape[1]):
        col = X[:, feature]
        order = np.argsort(col, kind='stable')
        values = col[order]
        change = np.nonzero(values[:-1] != values[1:])[0]
        if len(change) == 0:
            continue
        one_hot = np.zeros((n, n_classes))
        one_hot[np.arange(n), y[order]] = 1.0
        left = np.cumsum(one_hot, axis=0)[change]
        right = total_counts - left
        n_left = (change + 1).astype(np.float64)
        children = (n_left * _entropy_of_counts(left) + (n - n_left) * _entropy_of_counts(right)) / n
        gains = parent - children
        at = int(np.argmax(gains))
        if gains[at] > best[2]:
            threshold = 0.5 * (values[change[at]] + values[change[at] + 1])
            best = (feature, float(threshold), float(gains[at]))
    return best


def tree_train(data: LabeledDataset, max_depth: int = 20, min_samples: int = 2) -> TreeNode:
    """Greedy information-gain tree with midpoint thresholds (left branch is <=)"""
    if data.n_samples < 1:
        raise InsufficientDataError("decision tree needs at least one training sample")
    if max_depth < 1 or min_samples < 1:
        raise ParameterError(f"max_depth and min_samples must be positive, got {max_depth}, {min_samples}")
    n_classes = int(data.y.max()) + 1
    d = data.n_features

    def grow(X: np.ndarray, y: np.ndarray, depth: int) -> TreeNode:
        counts = np.bincount(y, minlength=n_classes)
        majority = int(np.argmax(counts))
        if np.count_nonzero(counts) == 1 or depth >= max_depth or len(y) < min_samples:
            return TreeNode(label=majority, d=d)
        feature, threshold, gain = _best_split(X, y, n_classes)
        if feature < 0 or gain <= 1e-12:
            return TreeNode(label=majority, d=d)
        goes_left = X[:, feature] <= threshold
        return TreeNode(
            feature=feature, threshold=threshold, gain=gain, d=d,
            left=grow(X[goes_left], y[goes_left], depth + 1),
            right=grow(X[~goes_left], y[~goes_left], depth + 1),
        )

    return grow(data.X, data.y, 0)


def _tree_labels(node: TreeNode, Q: np.ndarray, rows: np.ndarray, out: np.ndarray):
    if node.is_leaf:
        out[rows] = node.label
        return
    goes_left = Q[rows, node.feature] <= node.threshold
    _tree_labels(node.left, Q, rows[goes_left], out)
    _tree_labels(node.right, Q, rows[~goes_left], out)


def tree_predict(model: TreeNode, q) -> int:
    Q = _as_queries(q, model.d)
    out = np.empty(len(Q), dtype=np.int64)
    _tree_labels(model, Q, np.arange(len(Q)), out)
    return int(out[0])


# ---------------------------------------------------------------------------
# Gaussian Naive Bayes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NbModel:
    classes: np.ndarray
    priors: np.ndarray
    means: np.ndarray  # classes x d
    variances: np.ndarray  # classes x d
    epsilon: float


def nb_train(data: LabeledDataset, var_smoothing: float = 1e-9) -> NbModel:
    """Class priors plus per-class feature means and variances (divisor n_class), floored at epsilon"""
    if data.n_samples < 1:
        raise InsufficientDataError("Naive Bayes needs a non-empty dataset")
    classes = data.classes
    max_var = float(np.max(np.var(data.X, axis=0))) if data.n_features else 0.0
    epsilon = var_smoothing * max_var if max_var > 0 else var_smoothing

    means = np.empty((len(classes), data.n_features))
    variances = np.empty_like(means)
    counts = np.empty(len(classes))
    for row, c in enumerate(classes):
        members = data.X[data.y == c]
        counts[row] = len(members)
        means[row] = members.mean(axis=0)
        variances[row] = members.var(axis=0)
    return NbModel(classes=classes, priors=counts / counts.sum(), means=means,
                   variances=np.maximum(variances, epsilon), epsilon=epsilon)


def nb_log_posteriors(model: NbModel, Q) -> np.ndarray:
    """Unnormalized log P(y | x): log prior plus summed Gaussian log densities"""
    Q = _as_queries(Q, model.means.shape[1])
    log_norm = -0.5 * np.sum(np.log(2.0 * np.pi * model.variances), axis=1)
    sq = (Q[:, None, :] - model.means[None, :, :]) ** 2 / model.variances[None, :, :]
    return np.log(model.priors)[None, :] + log_norm[None, :] - 0.5 * sq.sum(axis=2)


def nb_predict(model: NbModel, q) -> int:
    return int(model.classes[np.argmax(nb_log_posteriors(model, q)[0])])


# ---------------------------------------------------------------------------
# Common train / predict contract
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassifierSettings:
    name: str = 'svm'
    k: int = 1
    kernel: str = 'linear'
    c_reg: float = 1.0
    gamma: Optional[float] = None
    tol: float = 1e-3
    max_passes: int = 10
    max_depth: int = 20
    min_samples: int = 2
    var_smoothing: float = 1e-9

    def __post_init__(self):
        if self.name not in CLASSIFIER_NAMES:
            raise ParameterError(f"classifier must be one of {CLASSIFIER_NAMES}, got {self.name!r}")


def train_classifier(settings: ClassifierSettings, data: LabeledDataset, seed: int = 0):
    if settings.name == 'knn':
        return knn_train(data, settings.k)
    if settings.name == 'svm':
        return svm_train(data, settings.kernel, settings.c_reg, settings.gamma,
                         settings.tol, settings.max_passes, seed)
    if settings.name == 'dt':
        return tree_train(data, settings.max_depth, settings.min_samples)
    return nb_train(data, settings.var_smoothing)


@singledispatch
def predict(model, X) -> np.ndarray:
    """Batch prediction, one label per row of X"""
    raise TypeError(f"unsupported model type {type(model).__name__}")


@predict.register
def _(model: KnnModel, X) -> np.ndarray:
    return _knn_vote(model, _as_queries(X, model.X.shape[1]))


@predict.register
def _(model: SvmModel, X) -> np.ndarray:
    return model.classes[np.argmax(svm_decision_values(model, X), axis=1)]


@predict.register
def _(model: TreeNode, X) -> np.ndarray:
    Q = _as_queries(X, model.d)
    out = np.empty(len(Q), dtype=np.int64)
    _tree_labels(model, Q, np.arange(len(Q)), out)
    return out


@predict.register
def _(model: NbModel, X) -> np.ndarray:
    return model.classes[np.argmax(nb_log_posteriors(model, X), axis=1)]
