"""
Report Module - experiment statistics and result files
Per-run detail rows, JSON-lines mirror with PSO histories, a table-shaped summary,
per-cell statistics and convergence traces.
"""

import csv
import json
import logging
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from utils.classifiers import CLASSIFIER_NAMES
from utils.errors import PalmVeinError

logger = logging.getLogger(__name__)

DETAIL_COLUMNS = ['cell_id', 'pca', 'fs', 'classifier', 'run', 'seed', 'accuracy', 'n_selected', 'seconds',
                  'dataset', 'n_features', 'fitness']
CELL_COLUMNS = ['cell_id', 'dataset', 'pca', 'fs', 'classifier', 'runs',
                'mean', 'std', 'min', 'max', 'mean_selected', 'mean_fitness', 'std_fitness', 'seconds']
TRACE_COLUMNS = ['cell_id', 'run', 'fold', 'iteration', 'gbest_fitness']


@dataclass
class RunResult:
    cell_id: str
    run: int
    seed: int
    accuracy: float
    n_selected: float
    n_features: float
    fitness: Optional[float] = None
    seconds: float = 0.0
    fold_accuracies: List[float] = field(default_factory=list)
    histories: List[List[float]] = field(default_factory=list)


def _stats(values: Sequence[float]):
    if not values:
        return None, None, None, None
    return statistics.fmean(values), statistics.pstdev(values), min(values), max(values)


@dataclass
class CellReport:
    cell_id: str
    dataset: str
    pca: bool
    selection: bool
    classifier: str
    runs: List[RunResult] = field(default_factory=list)

    @property
    def accuracies(self) -> List[float]:
        return [r.accuracy for r in self.runs]

    @property
    def mean(self) -> float:
        return _stats(self.accuracies)[0]

    @property
    def std(self) -> float:
        return _stats(self.accuracies)[1]

    @property
    def minimum(self) -> float:
        return _stats(self.accuracies)[2]

    @property
    def maximum(self) -> float:
        return _stats(self.accuracies)[3]

    @property
    def fitness_values(self) -> List[float]:
        return [r.fitness for r in self.runs if r.fitness is not None]

    @property
    def mean_selected(self) -> Optional[float]:
        return statistics.fmean(r.n_selected for r in self.runs) if self.runs else None

    @property
    def seconds(self) -> float:
        return sum(r.seconds for r in self.runs)


@dataclass
class ExperimentReport:
    cells: List[CellReport] = field(default_factory=list)

    def cell(self, cell_id: str) -> CellReport:
        for c in self.cells:
            if c.cell_id == cell_id:
                return c
        raise KeyError(cell_id)


def _yes_no(flag: bool) -> str:
    return 'Yes' if flag else 'No'


def _num(value) -> str:
    return '' if value is None else repr(float(value))


def _detail_rows(report: ExperimentReport, record_timing: bool):
    for cell in report.cells:
        for run in cell.runs:
            yield [cell.cell_id, _yes_no(cell.pca), _yes_no(cell.selection), cell.classifier, run.run, run.seed,
                   _num(run.accuracy), _num(run.n_selected), _num(run.seconds) if record_timing else '',
                   cell.dataset, _num(run.n_features), _num(run.fitness)]


def _cell_rows(report: ExperimentReport, record_timing: bool):
    for cell in report.cells:
        fitness = _stats(cell.fitness_values)
        yield [cell.cell_id, cell.dataset, _yes_no(cell.pca), _yes_no(cell.selection), cell.classifier,
               len(cell.runs), _num(cell.mean), _num(cell.std), _num(cell.minimum), _num(cell.maximum),
               _num(cell.mean_selected), _num(fitness[0]), _num(fitness[1]),
               _num(cell.seconds) if record_timing else '']


def summary_table(report: ExperimentReport) -> List[List[str]]:
    """Header plus one row per (dataset, PCA, FS) with a mean-accuracy percentage per classifier"""
    present = {c.classifier for c in report.cells}
    classifiers = [name for name in CLASSIFIER_NAMES if name in present] or list(CLASSIFIER_NAMES)
    rows: Dict[tuple, Dict[str, str]] = {}
    for cell in report.cells:
        key = (cell.dataset, _yes_no(cell.pca), _yes_no(cell.selection))
        value = '' if cell.mean is None else f"{100.0 * cell.mean:.2f}"
        rows.setdefault(key, {})[cell.classifier] = value
    table = [['dataset', 'pca', 'fs'] + classifiers]
    for key, values in rows.items():
        table.append(list(key) + [values.get(name, '') for name in classifiers])
    return table


def _write_csv(path: Path, header: List[str], rows) -> Path:
    with path.open('w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _write_jsonl(path: Path, report: ExperimentReport, record_timing: bool) -> Path:
    with path.open('w') as fh:
        for cell in report.cells:
            for run in cell.runs:
                record = {
                    'cell_id': cell.cell_id, 'dataset': cell.dataset, 'pca': cell.pca, 'fs': cell.selection,
                    'classifier': cell.classifier, 'run': run.run, 'seed': run.seed, 'accuracy': run.accuracy,
                    'n_selected': run.n_selected, 'n_features': run.n_features, 'fitness': run.fitness,
                    'fold_accuracies': run.fold_accuracies, 'histories': run.histories,
                }
                if record_timing:
                    record['seconds'] = run.seconds
                fh.write(json.dumps(record) + '\n')
    return path


def _trace_rows(report: ExperimentReport):
    for cell in report.cells:
        for run in cell.runs:
            for fold, history in enumerate(run.histories):
                for iteration, value in enumerate(history):
                    yield [cell.cell_id, run.run, fold, iteration, _num(value)]


def emit_report(report: ExperimentReport, out_dir, formats: Sequence[str] = ('csv', 'jsonl'),
                record_timing: bool = False) -> Dict[str, Path]:
    """Write the report files into out_dir and return them by name"""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        files = {}
        if 'csv' in formats:
            files['results.csv'] = _write_csv(out / 'results.csv', DETAIL_COLUMNS,
                                              _detail_rows(report, record_timing))
            table = summary_table(report)
            files['summary.csv'] = _write_csv(out / 'summary.csv', table[0], table[1:])
            files['cells.csv'] = _write_csv(out / 'cells.csv', CELL_COLUMNS, _cell_rows(report, record_timing))
            files['traces.csv'] = _write_csv(out / 'traces.csv', TRACE_COLUMNS, _trace_rows(report))
        if 'jsonl' in formats:
            files['results.jsonl'] = _write_jsonl(out / 'results.jsonl', report, record_timing)
    except OSError as e:
        raise PalmVeinError(f"cannot write report to {out}: {e}") from e
    logger.info("✅ Report written to %s (%s)", out, ', '.join(files))
    return files
