import itertools
import time

import numpy as np
import pytest

from tests.conftest import informative_dataset
from utils.classifiers import ClassifierSettings
from utils.errors import DimensionError, InsufficientDataError, ParameterError
from utils.features import LabeledDataset
from utils.pso import SwarmConfig
from utils.wrapper import (CvSplit, FeatureMask, SelectionConfig, accuracy, cross_validate, decode_mask, fitness,
                           select_features)


def nb_config(**swarm) -> SelectionConfig:
    return SelectionConfig(classifier=ClassifierSettings(name='nb'), folds=5, swarm=SwarmConfig(**swarm))


def mask_of(d: int, selected) -> FeatureMask:
    bits = np.zeros(d, dtype=bool)
    bits[list(selected)] = True
    return FeatureMask(bits)


def test_decode_mask_examples():
    cfg = SelectionConfig()
    assert decode_mask(np.full(4, 5.0), cfg).selected_count == 4
    assert decode_mask(np.full(4, -5.0), cfg).selected_count == 0
    assert decode_mask(np.array([0.0, -1e-9]), cfg).bits.tolist() == [True, False]


def test_decode_mask_is_monotone(rng):
    cfg = SelectionConfig(threshold=0.7)
    for _ in range(50):
        position = rng.uniform(-5, 5, 12)
        raised = position + rng.uniform(0, 2, 12)
        before = decode_mask(position, cfg).bits
        after = decode_mask(raised, cfg).bits
        assert np.all(after[before])


def test_accuracy():
    assert accuracy([1, 2, 3], [1, 2, 3]) == 1.0
    assert accuracy([0, 0], [1, 1]) == 0.0
    assert accuracy([1, 2, 3, 4], [1, 2, 3, 0]) == 0.75
    with pytest.raises(DimensionError):
        accuracy([1, 2], [1, 2, 3])
    with pytest.raises(DimensionError):
        accuracy([], [])


def test_stratified_split_is_balanced_and_deterministic():
    y = np.repeat(np.arange(3), [10, 7, 5])
    split = CvSplit.stratified(y, 5, seed=3)
    assert np.array_equal(split.assignment, CvSplit.stratified(y, 5, seed=3).assignment)
    for c in range(3):
        counts = np.bincount(split.assignment[y == c], minlength=5)
        assert counts.max() - counts.min() <= 1
    sizes = np.bincount(split.assignment, minlength=5)
    assert sizes.max() - sizes.min() <= 1
    tested = np.concatenate([test for _, test in split.splits()])
    assert sorted(tested) == list(range(len(y)))


def test_split_errors():
    with pytest.raises(ParameterError):
        CvSplit.stratified([0, 1, 0, 1], 1, seed=0)
    with pytest.raises(InsufficientDataError):
        CvSplit.stratified([0, 1], 3, seed=0)


def test_holdout_split_keeps_every_class_in_training():
    y = np.repeat(np.arange(4), 6)
    split = CvSplit.holdout(y, 0.25, seed=1)
    (train, test), = list(split.splits())
    assert len(test) == 8
    assert set(y[train]) == set(range(4))
    assert set(y[test]) == set(range(4))


def test_fitness_conventions():
    data = informative_dataset(2, 4, seed=1)
    cfg = nb_config()
    split = CvSplit.stratified(data.y, 5, seed=0)
    assert fitness(FeatureMask(np.zeros(6, dtype=bool)), data, split, cfg) == 0.0
    full = FeatureMask.all_features(6)
    a = fitness(full, data, split, cfg)
    assert a == fitness(full, data, split, cfg)
    assert a == cross_validate(data, split, cfg.classifier)
    assert 0.0 <= a <= 1.0
    with pytest.raises(DimensionError):
        fitness(FeatureMask(np.ones(5, dtype=bool)), data, split, cfg)


def test_informative_mask_beats_noise_mask():
    informative, noise = [], []
    for seed in range(10):
        data = informative_dataset(2, 8, seed=seed)
        split = CvSplit.stratified(data.y, 5, seed=seed)
        informative.append(fitness(mask_of(10, [0, 1]), data, split, nb_config()))
        noise.append(fitness(mask_of(10, [2, 3]), data, split, nb_config()))
    assert np.mean(informative) > np.mean(noise)


def test_fitness_invariant_to_feature_permutation(rng):
    data = informative_dataset(3, 5, seed=2)
    split = CvSplit.stratified(data.y, 5, seed=2)
    mask = mask_of(8, [0, 2, 5, 6])
    perm = rng.permutation(8)
    permuted = LabeledDataset(data.X[:, perm], data.y)
    permuted_mask = FeatureMask(mask.bits[perm])
    assert fitness(mask, data, split, nb_config()) == fitness(permuted_mask, permuted, split, nb_config())


def test_select_single_informative_feature():
    data = informative_dataset(1, 0, shift=3.0, seed=4)
    cfg = nb_config(particles=10, iterations=10, seed=4)
    result = select_features(data, cfg)
    assert result.mask.bits.tolist() == [True]
    split = CvSplit.stratified(data.y, 5, seed=4)
    assert result.fitness == cross_validate(data, split, cfg.classifier)


def test_selection_is_deterministic_and_history_monotone():
    data = informative_dataset(2, 6, seed=5)
    cfg = nb_config(particles=8, iterations=10, seed=1)
    a = select_features(data, cfg)
    b = select_features(data, cfg)
    assert np.array_equal(a.mask.bits, b.mask.bits)
    assert a.fitness == b.fitness
    assert a.history == b.history
    assert len(a.history) == 11
    assert all(y >= x for x, y in zip(a.history, a.history[1:]))
    assert a.mask.selected_count >= 1


def test_threaded_selection_matches_serial():
    data = informative_dataset(2, 6, seed=6)
    serial = select_features(data, nb_config(particles=6, iterations=5, seed=2))
    threaded = select_features(data, SelectionConfig(classifier=ClassifierSettings(name='nb'), workers=3,
                                                     swarm=SwarmConfig(particles=6, iterations=5, seed=2)))
    assert np.array_equal(serial.mask.bits, threaded.mask.bits)
    assert serial.history == threaded.history


def test_fewer_features_preferred_at_equal_fitness():
    # column 0 alone separates the classes perfectly; the others are constant and add nothing
    X = np.zeros((20, 4))
    X[:, 0] = np.repeat([-3.0, 3.0], 10) + np.linspace(-0.5, 0.5, 20)
    y = np.repeat([0, 1], 10)
    result = select_features(LabeledDataset(X, y), SelectionConfig(
        classifier=ClassifierSettings(name='knn'), folds=4, swarm=SwarmConfig(particles=12, iterations=30, seed=0)))
    assert result.fitness == 1.0
    assert result.mask.bits.tolist() == [True, False, False, False]


def test_config_validation():
    with pytest.raises(ParameterError):
        SelectionConfig(threshold=1.0)
    with pytest.raises(ParameterError):
        SelectionConfig(folds=1)


@pytest.mark.slow
def test_selection_is_near_optimal_at_toy_scale():
    hits = 0
    for seed in range(20):
        data = informative_dataset(2, 8, seed=100 + seed)
        cfg = nb_config(particles=20, iterations=100, seed=seed)
        split = CvSplit.stratified(data.y, cfg.folds, seed)
        oracle = sorted(fitness(mask_of(10, subset), data, split, cfg)
                        for r in range(1, 11) for subset in itertools.combinations(range(10), r))
        result = select_features(data, cfg, split)
        if result.fitness >= oracle[int(0.95 * len(oracle))]:
            hits += 1
    assert hits >= 18


@pytest.mark.slow
def test_svm_wrapper_keeps_both_informative_features():
    hits = 0
    for seed in range(10):
        rng = np.random.default_rng(200 + seed)
        y = np.repeat(np.arange(4), 12)
        X = rng.normal(0.0, 1.0, (48, 20))
        X[:, 0] = np.where(y % 2, 2.0, -2.0) + rng.normal(0.0, 0.5, 48)
        X[:, 1] = np.where(y // 2, 2.0, -2.0) + rng.normal(0.0, 0.5, 48)
        cfg = SelectionConfig(classifier=ClassifierSettings(name='svm'), folds=3,
                              swarm=SwarmConfig(particles=10, iterations=20, seed=seed))
        result = select_features(LabeledDataset(X, y), cfg)
        if result.mask.bits[0] and result.mask.bits[1]:
            hits += 1
    assert hits >= 8


def test_svm_fitness_at_feature_selection_scale_is_fast():
    # one mask evaluation on a PCA-sized problem: 10 classes, 7 images each, 83 columns, 3 folds
    rng = np.random.default_rng(31)
    y = np.repeat(np.arange(10), 7)
    X = rng.normal(0.0, 2.0, (10, 83))[y] + rng.normal(0.0, 1.0, (70, 83))
    data = LabeledDataset(X, y)
    split = CvSplit.stratified(y, 3, seed=0)
    mask = FeatureMask(rng.random(83) < 0.5)
    cfg = SelectionConfig(classifier=ClassifierSettings(name='svm'), folds=3)

    start = time.perf_counter()
    score = fitness(mask, data, split, cfg)
    assert time.perf_counter() - start < 5.0
    assert score >= 0.9
