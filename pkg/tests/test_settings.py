from pathlib import Path

import pytest

from config.settings import (ExperimentConfig, PRESETS, apply_overrides, build_settings, parse_override,
                             settings_manager)
from utils.errors import ConfigError, ParameterError
from utils.wavelet import SubbandSelection

EXPERIMENTS = Path(__file__).resolve().parent.parent / 'config' / 'experiments'


def test_defaults():
    cfg = ExperimentConfig()
    assert cfg.runs == 30
    assert cfg.imaging.size == 128
    assert cfg.wavelet.levels == 2 and cfg.wavelet.mode is SubbandSelection.ALL
    assert cfg.selection.swarm.particles == 20 and cfg.selection.swarm.iterations == 100
    assert cfg.classifier.name == 'svm' and cfg.classifier.kernel == 'linear'
    assert cfg.grid.classifiers == ['knn', 'svm', 'nb', 'dt']
    assert cfg.dataset_names == ['synthetic']


def test_presets_build():
    for name in settings_manager.preset_names():
        assert isinstance(settings_manager.preset(name), ExperimentConfig)
    ci = settings_manager.preset('ci')
    assert ci.dataset.synth.size == 32
    assert ci.imaging.ahe.tile_grid == (4, 4)
    assert settings_manager.preset('put-right').dataset_names == ['right']
    with pytest.raises(ConfigError, match='unknown preset'):
        settings_manager.preset('nope')


def test_bundled_experiment_files_load():
    for path in sorted(EXPERIMENTS.glob('*.yaml')):
        assert isinstance(settings_manager.load(path), ExperimentConfig)
    put = settings_manager.load(EXPERIMENTS / 'put.yaml')
    assert put.dataset_names == ['left', 'right']


def test_file_then_overrides_then_flags(tmp_path):
    path = tmp_path / 'exp.yaml'
    path.write_text("runs: 4\nselection:\n  swarm:\n    particles: 7\n")
    cfg = settings_manager.load(path, preset='ci', overrides=['selection.swarm.iterations=9', 'runs=5'], seed=3)
    assert cfg.selection.swarm.particles == 7
    assert cfg.selection.swarm.iterations == 9
    assert cfg.selection.folds == PRESETS['ci']['selection']['folds']
    assert cfg.runs == 5
    assert cfg.seed == 3
    assert settings_manager.load(path, overrides=['runs=5'], runs=8).runs == 8


def test_parse_override_uses_yaml_scalars():
    assert parse_override('a.b=3') == (['a', 'b'], 3)
    assert parse_override('flag=false') == (['flag'], False)
    assert parse_override('grid.classifiers=[knn, nb]') == (['grid', 'classifiers'], ['knn', 'nb'])
    assert parse_override('dataset.root=') == (['dataset', 'root'], None)
    with pytest.raises(ConfigError):
        parse_override('no-equals-sign')
    with pytest.raises(ConfigError):
        parse_override('=1')


def test_apply_overrides_merges_nested_keys():
    data = apply_overrides({'selection': {'folds': 3, 'swarm': {'particles': 4}}}, ['selection.swarm.seed=2'])
    assert data == {'selection': {'folds': 3, 'swarm': {'particles': 4, 'seed': 2}}}


def test_unknown_key_names_the_dotted_path():
    with pytest.raises(ConfigError, match="selection.swarm.particle'"):
        settings_manager.load(overrides=['selection.swarm.particle=3'])
    with pytest.raises(ConfigError, match='expected a mapping'):
        build_settings(ExperimentConfig, {'imaging': 5})


@pytest.mark.parametrize('override', [
    'runs=0',
    'grid.classifiers=[knn, cnn]',
    'selection.threshold=1.5',
    'wavelet.mode=diagonal',
    'dataset.hands=[middle]',
    'evaluation.holdout=1.0',
    'report.formats=[xml]',
    'pca.method=svd',
    'imaging.ahe.bins=1',
])
def test_invalid_values(override):
    with pytest.raises(ParameterError):
        settings_manager.load(overrides=[override])


def test_bad_yaml_files(tmp_path):
    broken = tmp_path / 'broken.yaml'
    broken.write_text("runs: [1, 2\n")
    with pytest.raises(ConfigError, match='invalid YAML'):
        settings_manager.load(broken)
    listing = tmp_path / 'list.yaml'
    listing.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError, match='mapping'):
        settings_manager.load(listing)
    with pytest.raises(ConfigError, match='cannot read'):
        settings_manager.load(tmp_path / 'missing.yaml')


def test_workers_from_environment(monkeypatch):
    monkeypatch.setenv('PALMVEIN_WORKERS', '3')
    assert ExperimentConfig().workers == 3
    assert settings_manager.load(overrides=['workers=2']).workers == 2
    monkeypatch.setenv('PALMVEIN_WORKERS', 'many')
    with pytest.raises(ConfigError):
        ExperimentConfig()


def test_data_root_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv('PALMVEIN_DATA_ROOT', str(tmp_path))
    assert settings_manager.preset('put-left').dataset.root == str(tmp_path)
    explicit = settings_manager.load(preset='put-left', overrides=['dataset.root=/elsewhere'])
    assert explicit.dataset.root == '/elsewhere'
    assert ExperimentConfig().dataset.root is None


def test_pca_method_and_ahe_bins_overrides():
    cfg = settings_manager.load(preset='ci', overrides=['pca.method=gram', 'imaging.ahe.bins=64'])
    assert cfg.pca.method == 'gram'
    assert cfg.imaging.ahe.bins == 64
    assert settings_manager.load().pca.method == 'auto'
