import csv
import json
import statistics

import pytest

from utils.errors import PalmVeinError
from utils.report import (CELL_COLUMNS, DETAIL_COLUMNS, CellReport, ExperimentReport, RunResult, emit_report,
                          summary_table)


def make_cell(classifier='svm', pca=True, selection=True, dataset='synthetic', accuracies=(0.9, 0.8, 1.0)):
    cell_id = f"{dataset}-pca{int(pca)}-fs{int(selection)}-{classifier}"
    runs = [RunResult(cell_id=cell_id, run=r, seed=r, accuracy=a, n_selected=12.5, n_features=40.0,
                      fitness=0.5 + 0.1 * r if selection else None, seconds=1.25,
                      fold_accuracies=[a, a], histories=[[0.1, 0.3, 0.5]] if selection else [])
            for r, a in enumerate(accuracies)]
    return CellReport(cell_id=cell_id, dataset=dataset, pca=pca, selection=selection, classifier=classifier,
                      runs=runs)


def read_csv(path):
    with path.open(newline='') as fh:
        return list(csv.reader(fh))


def test_empty_report_writes_headers_only(tmp_path):
    files = emit_report(ExperimentReport(), tmp_path)
    assert read_csv(files['results.csv']) == [DETAIL_COLUMNS]
    assert read_csv(files['cells.csv']) == [CELL_COLUMNS]
    assert read_csv(files['summary.csv']) == [['dataset', 'pca', 'fs', 'knn', 'svm', 'nb', 'dt']]
    assert files['results.jsonl'].read_text() == ''


def test_detail_rows(tmp_path):
    report = ExperimentReport([make_cell('knn'), make_cell('svm')])
    rows = read_csv(emit_report(report, tmp_path)['results.csv'])
    assert rows[0][:9] == ['cell_id', 'pca', 'fs', 'classifier', 'run', 'seed', 'accuracy', 'n_selected', 'seconds']
    assert len(rows) == 1 + 6
    assert rows[1][:8] == ['synthetic-pca1-fs1-knn', 'Yes', 'Yes', 'knn', '0', '0', '0.9', '12.5']
    assert all(row[8] == '' for row in rows[1:])


def test_timing_is_recorded_on_request(tmp_path):
    files = emit_report(ExperimentReport([make_cell()]), tmp_path, record_timing=True)
    rows = read_csv(files['results.csv'])
    assert {row[8] for row in rows[1:]} == {'1.25'}
    assert all('seconds' in json.loads(line) for line in files['results.jsonl'].read_text().splitlines())


def test_summary_table_shape_for_full_grid():
    cells = [make_cell(c, pca, fs) for fs in (False, True) for pca in (False, True) for c in ('knn', 'svm', 'nb', 'dt')]
    table = summary_table(ExperimentReport(cells))
    assert table[0] == ['dataset', 'pca', 'fs', 'knn', 'svm', 'nb', 'dt']
    assert [row[:3] for row in table[1:]] == [['synthetic', 'No', 'No'], ['synthetic', 'Yes', 'No'],
                                               ['synthetic', 'No', 'Yes'], ['synthetic', 'Yes', 'Yes']]
    assert table[1][3:] == ['90.00'] * 4


def test_summary_keeps_configured_classifier_subset():
    table = summary_table(ExperimentReport([make_cell('nb'), make_cell('knn')]))
    assert table[0] == ['dataset', 'pca', 'fs', 'knn', 'nb']


def test_summary_matches_detail_rows(tmp_path):
    cells = [make_cell('svm', accuracies=(0.75, 0.5, 1.0)), make_cell('dt', accuracies=(0.6, 0.7)),
             make_cell('svm', pca=False, selection=False, accuracies=(0.31, 0.42, 0.53))]
    files = emit_report(ExperimentReport(cells), tmp_path)
    detail = read_csv(files['results.csv'])[1:]
    summary = read_csv(files['summary.csv'])
    header = summary[0]
    for row in summary[1:]:
        for classifier, value in zip(header[3:], row[3:]):
            if not value:
                continue
            accuracies = [float(d[6]) for d in detail
                          if d[9] == row[0] and d[1] == row[1] and d[2] == row[2] and d[3] == classifier]
            assert value == f"{100.0 * statistics.fmean(accuracies):.2f}"


def test_cell_statistics(tmp_path):
    cell = make_cell(accuracies=(0.5, 1.0))
    assert cell.mean == pytest.approx(0.75)
    assert cell.std == pytest.approx(0.25)
    assert (cell.minimum, cell.maximum) == (0.5, 1.0)
    assert cell.fitness_values == pytest.approx([0.5, 0.6])
    row = read_csv(emit_report(ExperimentReport([cell]), tmp_path)['cells.csv'])[1]
    assert row[:6] == [cell.cell_id, 'synthetic', 'Yes', 'Yes', 'svm', '2']
    assert float(row[CELL_COLUMNS.index('mean_fitness')]) == pytest.approx(0.55)


def test_jsonl_and_traces(tmp_path):
    files = emit_report(ExperimentReport([make_cell(accuracies=(0.9, 0.8))]), tmp_path)
    records = [json.loads(line) for line in files['results.jsonl'].read_text().splitlines()]
    assert len(records) == 2
    assert records[0]['histories'] == [[0.1, 0.3, 0.5]]
    assert records[1]['fold_accuracies'] == [0.8, 0.8]
    assert 'seconds' not in records[0]
    traces = read_csv(files['traces.csv'])
    assert traces[0] == ['cell_id', 'run', 'fold', 'iteration', 'gbest_fitness']
    assert len(traces) == 1 + 2 * 3
    assert traces[3][3:] == ['2', '0.5']


def test_format_selection(tmp_path):
    files = emit_report(ExperimentReport([make_cell()]), tmp_path, formats=['jsonl'])
    assert list(files) == ['results.jsonl']
    assert not (tmp_path / 'results.csv').exists()


def test_unwritable_output(tmp_path):
    blocker = tmp_path / 'file'
    blocker.write_text('x')
    with pytest.raises(PalmVeinError, match='cannot write report'):
        emit_report(ExperimentReport(), blocker / 'out')
