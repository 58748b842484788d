# Experiment settings for the palm vein pipeline
# YAML experiment files, dotted command-line overrides, environment lookup and built-in presets

import dataclasses
import os
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import yaml
from dotenv import load_dotenv

from utils.classifiers import CLASSIFIER_NAMES, ClassifierSettings
from utils.dataset import DEFAULT_LAYOUT, HANDS, SynthSpec
from utils.errors import ConfigError, ParameterError
from utils.imaging import AheParams
from utils.pca import PCA_METHODS
from utils.pso import SwarmConfig
from utils.wavelet import SubbandSelection

load_dotenv()


def get_config(key: str, default: Optional[str] = None) -> Optional[str]:
    """Get config from environment variables (populated from .env)"""
    return os.getenv(key, default)


def default_workers() -> int:
    try:
        return max(int(get_config('PALMVEIN_WORKERS', '1')), 1)
    except ValueError:
        raise ConfigError(f"PALMVEIN_WORKERS must be an integer, got {get_config('PALMVEIN_WORKERS')!r}")


@dataclass(frozen=True)
class DatasetSettings:
    source: str = 'synthetic'
    root: Optional[str] = None
    layout: str = DEFAULT_LAYOUT
    hands: List[str] = field(default_factory=lambda: ['left'])
    cache: Optional[str] = None
    synth: SynthSpec = field(default_factory=SynthSpec)

    def __post_init__(self):
        if self.source not in ('synthetic', 'path'):
            raise ParameterError(f"dataset.source must be 'synthetic' or 'path', got {self.source!r}")
        hands = [str(h).lower() for h in self.hands]
        bad = [h for h in hands if h not in HANDS]
        if bad or not hands:
            raise ParameterError(f"dataset.hands must be a non-empty subset of {HANDS}, got {self.hands}")
        object.__setattr__(self, 'hands', hands)
        if self.source == 'path' and self.root is None:
            object.__setattr__(self, 'root', get_config('PALMVEIN_DATA_ROOT'))


@dataclass(frozen=True)
class ImagingSettings:
    ahe: AheParams = field(default_factory=AheParams)
    size: int = 128

    def __post_init__(self):
        if self.size < 1:
            raise ParameterError(f"imaging.size must be positive, got {self.size}")


@dataclass(frozen=True)
class WaveletSettings:
    levels: int = 2
    mode: SubbandSelection = SubbandSelection.ALL

    def __post_init__(self):
        object.__setattr__(self, 'mode', SubbandSelection.parse(self.mode))
        if self.levels < 1:
            raise ParameterError(f"wavelet.levels must be positive, got {self.levels}")


@dataclass(frozen=True)
class PcaSettings:
    enabled: bool = True
    retain: Union[int, float] = 0.95
    tol: float = 1e-12
    max_sweeps: int = 100
    method: str = 'auto'

    def __post_init__(self):
        if self.method not in PCA_METHODS:
            raise ParameterError(f"pca.method must be one of {PCA_METHODS}, got {self.method!r}")


@dataclass(frozen=True)
class SelectionSettings:
    enabled: bool = True
    threshold: float = 0.5
    folds: int = 5
    holdout: Optional[float] = None
    swarm: SwarmConfig = field(default_factory=SwarmConfig)

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ParameterError(f"selection.threshold must be in (0, 1), got {self.threshold}")
        if self.folds < 2:
            raise ParameterError(f"selection.folds must be at least 2, got {self.folds}")


@dataclass(frozen=True)
class EvaluationSettings:
    folds: int = 5
    holdout: Optional[float] = None

    def __post_init__(self):
        if self.folds < 2:
            raise ParameterError(f"evaluation.folds must be at least 2, got {self.folds}")
        if self.holdout is not None and not 0.0 < self.holdout < 1.0:
            raise ParameterError(f"evaluation.holdout must be in (0, 1), got {self.holdout}")


@dataclass(frozen=True)
class GridSettings:
    pca: List[bool] = field(default_factory=lambda: [False, True])
    selection: List[bool] = field(default_factory=lambda: [False, True])
    classifiers: List[str] = field(default_factory=lambda: list(CLASSIFIER_NAMES))

    def __post_init__(self):
        bad = [c for c in self.classifiers if c not in CLASSIFIER_NAMES]
        if bad or not self.classifiers:
            raise ParameterError(f"grid.classifiers must be a non-empty subset of {CLASSIFIER_NAMES}, got {self.classifiers}")
        if not self.pca or not self.selection:
            raise ParameterError("grid.pca and grid.selection need at least one state each")


@dataclass(frozen=True)
class ReportSettings:
    formats: List[str] = field(default_factory=lambda: ['csv', 'jsonl'])
    record_timing: bool = False

    def __post_init__(self):
        bad = [f for f in self.formats if f not in ('csv', 'jsonl')]
        if bad:
            raise ParameterError(f"report.formats accepts 'csv' and 'jsonl', got {bad}")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSettings = field(default_factory=DatasetSettings)
    imaging: ImagingSettings = field(default_factory=ImagingSettings)
    wavelet: WaveletSettings = field(default_factory=WaveletSettings)
    pca: PcaSettings = field(default_factory=PcaSettings)
    selection: SelectionSettings = field(default_factory=SelectionSettings)
    classifier: ClassifierSettings = field(default_factory=ClassifierSettings)
    evaluation: EvaluationSettings = field(default_factory=EvaluationSettings)
    grid: GridSettings = field(default_factory=GridSettings)
    report: ReportSettings = field(default_factory=ReportSettings)
    runs: int = 30
    seed: int = 0
    out: str = 'results'
    workers: int = field(default_factory=default_workers)

    def __post_init__(self):
        if self.runs < 1:
            raise ParameterError(f"runs must be at least 1, got {self.runs}")
        if self.workers < 1:
            raise ParameterError(f"workers must be positive, got {self.workers}")

    @property
    def dataset_names(self) -> List[str]:
        """One grid row group per dataset: 'synthetic' or each configured hand"""
        if self.dataset.source == 'synthetic':
            return ['synthetic']
        return list(self.dataset.hands)


# Built-in experiment presets (partial mappings merged over the defaults)
PRESETS: Dict[str, Dict[str, Any]] = {
    'synthetic': {
        'dataset': {'source': 'synthetic', 'synth': {'classes': 10, 'images_per_class': 12, 'size': 128}},
        'selection': {'folds': 3, 'swarm': {'particles': 10, 'iterations': 20}},
        'runs': 3,
        'out': 'results/synthetic',
    },
    'ci': {
        'dataset': {'source': 'synthetic',
                    'synth': {'classes': 4, 'images_per_class': 6, 'size': 32, 'veins': 3}},
        'imaging': {'size': 32, 'ahe': {'tile_grid': [4, 4]}},
        'selection': {'folds': 2, 'swarm': {'particles': 4, 'iterations': 3}},
        'evaluation': {'folds': 3},
        'runs': 2,
        'out': 'results/ci',
    },
    'put-left': {
        'dataset': {'source': 'path', 'hands': ['left'], 'cache': 'cache'},
        'out': 'results/put-left',
    },
    'put-right': {
        'dataset': {'source': 'path', 'hands': ['right'], 'cache': 'cache'},
        'out': 'results/put-right',
    },
}


def _tuple_fields(tp) -> bool:
    return typing.get_origin(tp) is tuple


def build_settings(cls, data: Optional[Dict[str, Any]], prefix: str = ''):
    """Instantiate a (nested) settings dataclass from a plain mapping; unknown keys are errors"""
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or 'config'}: expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    known = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        dotted = f"{prefix}.{key}" if prefix else str(key)
        if key not in known:
            raise ConfigError(f"unknown configuration key '{dotted}'")
        tp = hints[key]
        if dataclasses.is_dataclass(tp):
            kwargs[key] = build_settings(tp, value, dotted)
        elif _tuple_fields(tp) and isinstance(value, list):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(f"{prefix or 'config'}: {e}") from e


def _merge(base: Dict[str, Any], extra: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def parse_override(item: str):
    """'a.b.c=value' -> (['a', 'b', 'c'], parsed value) using YAML scalar rules"""
    if '=' not in item:
        raise ConfigError(f"override '{item}' must look like dotted.key=value")
    key, raw = item.split('=', 1)
    path = [p for p in key.strip().split('.') if p]
    if not path:
        raise ConfigError(f"override '{item}' has an empty key")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as e:
        raise ConfigError(f"override '{item}': {e}") from e
    return path, value


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    result = dict(data)
    for item in overrides or ():
        path, value = parse_override(item)
        nested = {path[-1]: value}
        for part in reversed(path[:-1]):
            nested = {part: nested}
        result = _merge(result, nested)
    return result


class SettingsManager:
    """Loads experiment configurations from presets, YAML files and overrides"""

    def preset_names(self) -> List[str]:
        return sorted(PRESETS)

    def preset(self, name: str) -> ExperimentConfig:
        return build_settings(ExperimentConfig, self._preset_data(name))

    def _preset_data(self, name: str) -> Dict[str, Any]:
        if name not in PRESETS:
            raise ConfigError(f"unknown preset '{name}' (available: {', '.join(self.preset_names())})")
        return PRESETS[name]

    def read_file(self, path) -> Dict[str, Any]:
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text())
        except OSError as e:
            raise ConfigError(f"{path}: cannot read experiment file ({e})") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: invalid YAML ({e})") from e
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return data

    def load(self, path=None, preset: Optional[str] = None, overrides: Sequence[str] = (),
             **top_level) -> ExperimentConfig:
        """Defaults <- preset <- YAML file <- --set overrides <- top-level flags (seed, runs, out)"""
        data: Dict[str, Any] = {}
        if preset:
            data = _merge(data, self._preset_data(preset))
        if path:
            data = _merge(data, self.read_file(path))
        data = apply_overrides(data, overrides)
        data = _merge(data, {k: v for k, v in top_level.items() if v is not None})
        return build_settings(ExperimentConfig, data)


settings_manager = SettingsManager()
