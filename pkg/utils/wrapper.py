"""
Wrapper Module - PSO-driven wrapper feature selection
Maps swarm positions to feature masks through a sigmoid transfer, scores masks by
cross-validated classifier accuracy and keeps the best subset found.
"""

import logging
import threading
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
from scipy.special import expit

from utils.classifiers import ClassifierSettings, predict, train_classifier
from utils.errors import DimensionError, InsufficientDataError, ParameterError
from utils.features import LabeledDataset
from utils.pso import SwarmConfig, pso_run, serial_evaluator, thread_evaluator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SelectionConfig:
    threshold: float = 0.5
    classifier: ClassifierSettings = field(default_factory=ClassifierSettings)
    folds: int = 5
    holdout: Optional[float] = None
    swarm: SwarmConfig = field(default_factory=SwarmConfig)
    workers: int = 1

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ParameterError(f"threshold must be in (0, 1), got {self.threshold}")
        if self.folds < 2:
            raise ParameterError(f"folds must be at least 2, got {self.folds}")
        if self.holdout is not None and not 0.0 < self.holdout < 1.0:
            raise ParameterError(f"holdout fraction must be in (0, 1), got {self.holdout}")
        if self.workers < 1:
            raise ParameterError(f"workers must be positive, got {self.workers}")


@dataclass(frozen=True)
class FeatureMask:
    bits: np.ndarray

    @property
    def selected_count(self) -> int:
        return int(np.count_nonzero(self.bits))

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    @classmethod
    def all_features(cls, d: int) -> 'FeatureMask':
        return cls(np.ones(d, dtype=bool))


@dataclass(frozen=True)
class CvSplit:
    """Per-sample fold assignment; only folds listed in test_folds are scored"""

    assignment: np.ndarray
    n_folds: int
    seed: int
    test_folds: Tuple[int, ...] = ()

    @classmethod
    def stratified(cls, y, folds: int, seed: int) -> 'CvSplit':
        """Deal each class's shuffled samples round-robin across folds.

        A running offset carries over between classes so fold sizes stay as even as the counts allow.
        """
        y = np.asarray(y)
        if folds < 2:
            raise ParameterError(f"folds must be at least 2, got {folds}")
        if len(y) < folds:
            raise InsufficientDataError(f"{len(y)} samples cannot fill {folds} folds")
        rng = np.random.default_rng(seed)
        assignment = np.empty(len(y), dtype=np.int64)
        offset = 0
        for c in np.unique(y):
            members = rng.permutation(np.flatnonzero(y == c))
            assignment[members] = (np.arange(len(members)) + offset) % folds
            offset = (offset + len(members)) % folds
        return cls(assignment=assignment, n_folds=folds, seed=seed, test_folds=tuple(range(folds)))

    @classmethod
    def holdout(cls, y, fraction: float, seed: int) -> 'CvSplit':
        """Single stratified holdout: fold 0 is the test part, fold 1 the training part"""
        y = np.asarray(y)
        if not 0.0 < fraction < 1.0:
            raise ParameterError(f"holdout fraction must be in (0, 1), got {fraction}")
        rng = np.random.default_rng(seed)
        assignment = np.ones(len(y), dtype=np.int64)
        for c in np.unique(y):
            members = rng.permutation(np.flatnonzero(y == c))
            if len(members) < 2:
                continue
            n_test = min(max(int(round(fraction * len(members))), 1), len(members) - 1)
            assignment[members[:n_test]] = 0
        if not np.any(assignment == 0):
            raise InsufficientDataError("holdout split left no test samples")
        return cls(assignment=assignment, n_folds=2, seed=seed, test_folds=(0,))

    def splits(self) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        """(train indices, test indices) per scored fold, skipping folds with an empty side"""
        for fold in self.test_folds:
            test = np.flatnonzero(self.assignment == fold)
            train = np.flatnonzero(self.assignment != fold)
            if len(test) and len(train):
                yield train, test


def make_split(y, folds: int, holdout: Optional[float], seed: int) -> CvSplit:
    if holdout is not None:
        return CvSplit.holdout(y, holdout, seed)
    return CvSplit.stratified(y, folds, seed)


def accuracy(pred, truth) -> float:
    """Fraction of exact label matches"""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise DimensionError(f"prediction length {pred.shape} does not match truth length {truth.shape}")
    if truth.size == 0:
        raise DimensionError("accuracy needs at least one label")
    return float(np.mean(pred == truth))


def cross_validate(data: LabeledDataset, split: CvSplit, settings: ClassifierSettings,
                   columns: Optional[np.ndarray] = None) -> float:
    """Mean held-out accuracy over the split's scored folds"""
    if columns is not None:
        data = data.columns(columns)
    scores = []
    for train, test in split.splits():
        model = train_classifier(settings, data.rows(train), seed=split.seed)
        scores.append(accuracy(predict(model, data.X[test]), data.y[test]))
    if not scores:
        raise InsufficientDataError("split has no fold with both training and test samples")
    return float(np.mean(scores))


def decode_mask(position, cfg: SelectionConfig) -> FeatureMask:
    """bit_i = sigmoid(position_i) >= threshold"""
    return FeatureMask(expit(np.asarray(position, dtype=np.float64)) >= cfg.threshold)


def fitness(mask: FeatureMask, data: LabeledDataset, split: CvSplit, cfg: SelectionConfig) -> float:
    """Cross-validated accuracy on the masked columns; 0 for an empty mask"""
    if len(mask.bits) != data.n_features:
        raise DimensionError(f"mask has {len(mask.bits)} bits for {data.n_features} features")
    if mask.selected_count == 0:
        return 0.0
    return cross_validate(data, split, cfg.classifier, mask.indices)


@dataclass(frozen=True)
class SelectionResult:
    mask: FeatureMask
    fitness: float
    history: List[float]


class _MaskFitness:
    """Memoised position -> fitness objective; thread-safe so particles can be scored in parallel"""

    def __init__(self, data: LabeledDataset, split: CvSplit, cfg: SelectionConfig):
        self.data = data
        self.split = split
        self.cfg = cfg
        self._cache: Dict[bytes, float] = {}
        self._lock = threading.Lock()

    def score(self, mask: FeatureMask) -> float:
        key = np.packbits(mask.bits).tobytes()
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        value = fitness(mask, self.data, self.split, self.cfg)
        with self._lock:
            self._cache[key] = value
        return value

    def __call__(self, position: np.ndarray) -> float:
        return self.score(decode_mask(position, self.cfg))

    @property
    def evaluations(self) -> int:
        return len(self._cache)


def select_features(data: LabeledDataset, cfg: SelectionConfig,
                    split: Optional[CvSplit] = None) -> SelectionResult:
    """Search feature subsets with PSO and return the best mask with its fitness and gbest trace.

    The folds are fixed once per call and shared by every mask evaluation. At equal
    fitness the swarm keeps the position that selects fewer features.
    """
    if data.n_features < 1:
        raise DimensionError("feature selection needs at least one feature")
    if split is None:
        split = make_split(data.y, cfg.folds, cfg.holdout, cfg.swarm.seed)
    objective = _MaskFitness(data, split, cfg)

    def prefer(candidate: np.ndarray, incumbent: np.ndarray) -> bool:
        new = decode_mask(candidate, cfg).selected_count
        old = decode_mask(incumbent, cfg).selected_count
        return new > 0 and (old == 0 or new < old)

    evaluator = thread_evaluator(cfg.workers) if cfg.workers > 1 else serial_evaluator
    result = pso_run(cfg.swarm, data.n_features, objective, evaluator, prefer)

    mask = decode_mask(result.position, cfg)
    best = result.fitness
    if mask.selected_count == 0:
        logger.warning("⚠️ swarm never selected a feature; falling back to all %d features", data.n_features)
        mask = FeatureMask.all_features(data.n_features)
        best = objective.score(mask)

    logger.debug("selected %d/%d features, fitness %.4f, %d distinct masks scored",
                 mask.selected_count, data.n_features, best, objective.evaluations)
    return SelectionResult(mask=mask, fitness=best, history=result.history)
