"""
Experiment Scheduler - the evaluation protocol
Runs single grid cells and the full PCA x feature-selection x classifier grid over repeated seeded runs.
PCA and the feature-selection wrapper are fitted inside each outer fold on training rows only.
"""

import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from joblib import Parallel, delayed

from config.settings import ExperimentConfig
from utils.classifiers import predict, train_classifier
from utils.dataset import FeatureParams, build_feature_matrix, scan_dataset, synth_generate, write_synthetic
from utils.errors import DatasetError, PalmVeinError
from utils.feature_cache import cache_key, cached_path, load_feature_cache, save_feature_cache
from utils.features import LabeledDataset
from utils.imaging import encode_pgm, intensity_histogram, load_image, preprocess_stages
from utils.pca import PcaModel, pca_fit, pca_project
from utils.report import CellReport, ExperimentReport, RunResult, emit_report
from utils.wrapper import FeatureMask, SelectionConfig, SelectionResult, accuracy, make_split, select_features

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridCell:
    dataset: str
    pca: bool
    selection: bool
    classifier: str

    @property
    def cell_id(self) -> str:
        return f"{self.dataset}-pca{int(self.pca)}-fs{int(self.selection)}-{self.classifier}"


@dataclass(frozen=True)
class FittedFold:
    """Everything fitted on one outer fold's training rows"""

    pca: Optional[PcaModel]
    selection: Optional[SelectionResult]
    model: object
    n_features: int

    @property
    def mask(self) -> Optional[FeatureMask]:
        return self.selection.mask if self.selection else None

    def transform(self, X: np.ndarray) -> np.ndarray:
        if self.pca is not None:
            X = pca_project(self.pca, X)
        if self.selection is not None:
            X = X[:, self.selection.mask.indices]
        return X


def grid_cells(cfg: ExperimentConfig) -> List[GridCell]:
    """Cells in table order: (PCA, FS) = (no, no), (yes, no), (no, yes), (yes, yes) per dataset"""
    cells = []
    for dataset in cfg.dataset_names:
        for selection in cfg.grid.selection:
            for pca in cfg.grid.pca:
                for classifier in cfg.grid.classifiers:
                    cells.append(GridCell(dataset, bool(pca), bool(selection), classifier))
    return cells


def single_cell(cfg: ExperimentConfig) -> GridCell:
    return GridCell(cfg.dataset_names[0], cfg.pca.enabled, cfg.selection.enabled, cfg.classifier.name)


def fold_seed(run_seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([run_seed, fold]).generate_state(1)[0])


def fit_fold(data: LabeledDataset, train_idx, cell: GridCell, cfg: ExperimentConfig,
             seed: int, fold: int = 0) -> FittedFold:
    """Fit PCA, the wrapper and the classifier on the training rows of one outer fold"""
    train = data.rows(train_idx)
    pca = None
    if cell.pca:
        pca = pca_fit(train.X, cfg.pca.retain, cfg.pca.tol, cfg.pca.max_sweeps, cfg.pca.method)
        train = pca_project(pca, train)
    n_features = train.n_features

    settings = replace(cfg.classifier, name=cell.classifier)
    selection = None
    if cell.selection:
        sel_cfg = SelectionConfig(
            threshold=cfg.selection.threshold,
            classifier=settings,
            folds=cfg.selection.folds,
            holdout=cfg.selection.holdout,
            swarm=replace(cfg.selection.swarm, seed=fold_seed(seed, fold)),
            workers=cfg.workers,
        )
        selection = select_features(train, sel_cfg)
        train = train.columns(selection.mask.indices)

    model = train_classifier(settings, train, seed=seed)
    return FittedFold(pca=pca, selection=selection, model=model, n_features=n_features)


def score_fold(fitted: FittedFold, data: LabeledDataset, test_idx) -> float:
    test = data.rows(test_idx)
    return accuracy(predict(fitted.model, fitted.transform(test.X)), test.y)


def run_once(data: LabeledDataset, cell: GridCell, cfg: ExperimentConfig, run: int) -> RunResult:
    """One seeded run of a cell: outer split, per-fold fitting and scoring"""
    seed = cfg.seed + run
    started = time.perf_counter()
    split = make_split(data.y, cfg.evaluation.folds, cfg.evaluation.holdout, seed)

    scores, selected, dims, fitness, histories = [], [], [], [], []
    for fold, (train_idx, test_idx) in enumerate(split.splits()):
        fitted = fit_fold(data, train_idx, cell, cfg, seed, fold)
        scores.append(score_fold(fitted, data, test_idx))
        dims.append(fitted.n_features)
        if fitted.selection is not None:
            selected.append(fitted.selection.mask.selected_count)
            fitness.append(fitted.selection.fitness)
            histories.append(list(fitted.selection.history))
        else:
            selected.append(fitted.n_features)

    return RunResult(
        cell_id=cell.cell_id,
        run=run,
        seed=seed,
        accuracy=float(np.mean(scores)),
        n_selected=float(np.mean(selected)),
        n_features=float(np.mean(dims)),
        fitness=float(np.mean(fitness)) if fitness else None,
        seconds=time.perf_counter() - started,
        fold_accuracies=scores,
        histories=histories,
    )


class ExperimentScheduler:
    """Feature building, cell and grid execution for the command line"""

    def __init__(self):
        self.last_report: Optional[ExperimentReport] = None

    def feature_params(self, cfg: ExperimentConfig) -> FeatureParams:
        return FeatureParams(ahe=cfg.imaging.ahe, size=cfg.imaging.size,
                             levels=cfg.wavelet.levels, selection=cfg.wavelet.mode)

    def load_features(self, cfg: ExperimentConfig, dataset: str) -> LabeledDataset:
        """Feature matrix for one dataset row ('synthetic' or a hand), through the disk cache when set"""
        params = self.feature_params(cfg)
        if cfg.dataset.source == 'synthetic':
            synth = synth_generate(cfg.dataset.synth)
            return build_feature_matrix(synth.images, synth.labels, params, cfg.workers)

        if not cfg.dataset.root:
            raise DatasetError("dataset.root is not set (configure it or PALMVEIN_DATA_ROOT)")
        manifest = scan_dataset(cfg.dataset.root, cfg.dataset.layout, hands=[dataset])
        key = cache_key(root=str(Path(cfg.dataset.root).resolve()), layout=cfg.dataset.layout, hand=dataset,
                        ahe=params.ahe, size=params.size, levels=params.levels, mode=params.selection.value,
                        n=len(manifest))
        path = cached_path(cfg.dataset.cache, key)
        if path is not None and path.exists():
            logger.info("✅ Using cached features %s", path)
            return load_feature_cache(path)
        data = build_feature_matrix(manifest.paths, manifest.labels, params, cfg.workers)
        if path is not None:
            save_feature_cache(path, data)
        return data

    def run_cell(self, cfg: ExperimentConfig, cell: Optional[GridCell] = None,
                 data: Optional[LabeledDataset] = None) -> ExperimentReport:
        cell = cell or single_cell(cfg)
        if data is None:
            data = self.load_features(cfg, cell.dataset)
        report = ExperimentReport(cells=[self._run_cell(cfg, cell, data)])
        self.last_report = report
        return report

    def _run_cell(self, cfg: ExperimentConfig, cell: GridCell, data: LabeledDataset) -> CellReport:
        logger.info("🔍 Running %s (%d runs)", cell.cell_id, cfg.runs)
        runs = Parallel(n_jobs=cfg.workers, prefer='threads')(
            delayed(run_once)(data, cell, cfg, r) for r in range(cfg.runs))
        result = CellReport(cell_id=cell.cell_id, dataset=cell.dataset, pca=cell.pca,
                            selection=cell.selection, classifier=cell.classifier, runs=list(runs))
        logger.info("✅ %s: mean accuracy %.4f (std %.4f)", cell.cell_id, result.mean, result.std)
        return result

    def run_grid(self, cfg: ExperimentConfig) -> ExperimentReport:
        """Every configured cell; cells of one dataset share its feature matrix"""
        features: Dict[str, LabeledDataset] = {}
        cells = []
        for cell in grid_cells(cfg):
            if cell.dataset not in features:
                features[cell.dataset] = self.load_features(cfg, cell.dataset)
            cells.append(self._run_cell(cfg, cell, features[cell.dataset]))
        report = ExperimentReport(cells=cells)
        self.last_report = report
        return report

    # Command-line entry points: errors come back as {'success': False, 'error': ...}

    def execute(self, cfg: ExperimentConfig, grid: bool = False) -> Dict:
        try:
            report = self.run_grid(cfg) if grid else self.run_cell(cfg)
            files = emit_report(report, cfg.out, cfg.report.formats, cfg.report.record_timing)
            return {'success': True, 'report': report, 'files': files}
        except (PalmVeinError, OSError) as e:
            logger.error("🛑 %s", e)
            return {'success': False, 'error': str(e)}

    def generate_synthetic(self, cfg: ExperimentConfig, out) -> Dict:
        try:
            manifest = write_synthetic(synth_generate(cfg.dataset.synth), out)
            return {'success': True, 'images': len(manifest), 'classes': manifest.n_classes, 'root': str(out)}
        except (PalmVeinError, OSError) as e:
            logger.error("🛑 %s", e)
            return {'success': False, 'error': str(e)}

    def build_features(self, cfg: ExperimentConfig, out) -> Dict:
        try:
            written = []
            for dataset in cfg.dataset_names:
                data = self.load_features(cfg, dataset)
                written.append(str(save_feature_cache(Path(out) / f"{dataset}.pvfm", data)))
            return {'success': True, 'files': written}
        except (PalmVeinError, OSError) as e:
            logger.error("🛑 %s", e)
            return {'success': False, 'error': str(e)}

    def preprocess_image(self, cfg: ExperimentConfig, image_path, out) -> Dict:
        """Write each preprocessing stage as PGM plus its intensity histogram as CSV"""
        try:
            stages = preprocess_stages(load_image(image_path), cfg.imaging.ahe, cfg.imaging.size)
            out = Path(out)
            out.mkdir(parents=True, exist_ok=True)
            lines = ['intensity,' + ','.join(stages)]
            histograms = [intensity_histogram(img) for img in stages.values()]
            for level in range(256):
                lines.append(f"{level}," + ','.join(str(int(h[level])) for h in histograms))
            for name, img in stages.items():
                (out / f"{name}.pgm").write_bytes(encode_pgm(img))
            (out / 'histograms.csv').write_text('\n'.join(lines) + '\n')
            return {'success': True, 'stages': list(stages), 'out': str(out)}
        except (PalmVeinError, OSError) as e:
            logger.error("🛑 %s", e)
            return {'success': False, 'error': str(e)}


experiment_scheduler = ExperimentScheduler()
