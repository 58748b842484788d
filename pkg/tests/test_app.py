import pytest

from app import build_parser, main

CHEAP = ['--preset', 'ci', '--runs', '1', '--set', 'grid.classifiers=[knn, nb]', '--set', 'workers=1']


def test_grid_writes_report(tmp_path, capsys):
    out = tmp_path / 'grid'
    assert main(['grid', *CHEAP, '--out', str(out)]) == 0
    for name in ('results.csv', 'summary.csv', 'cells.csv', 'traces.csv', 'results.jsonl'):
        assert (out / name).exists()
    assert len((out / 'results.csv').read_text().splitlines()) == 1 + 8
    summary = (out / 'summary.csv').read_text().splitlines()
    assert summary[0] == 'dataset,pca,fs,knn,nb'
    assert len(summary) == 5
    assert 'synthetic-pca1-fs1-nb' in capsys.readouterr().out


def test_grid_output_is_byte_identical_on_repeat(tmp_path):
    first, second = tmp_path / 'a', tmp_path / 'b'
    assert main(['grid', *CHEAP, '--seed', '7', '--out', str(first)]) == 0
    assert main(['grid', *CHEAP, '--seed', '7', '--out', str(second)]) == 0
    for name in ('results.csv', 'summary.csv', 'cells.csv', 'traces.csv'):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_run_single_cell(tmp_path):
    out = tmp_path / 'run'
    assert main(['run', *CHEAP, '--set', 'classifier.name=nb', '--set', 'selection.enabled=false',
                 '--out', str(out)]) == 0
    rows = (out / 'results.csv').read_text().splitlines()
    assert len(rows) == 2
    assert rows[1].startswith('synthetic-pca1-fs0-nb,Yes,No,nb,0,0,')


def test_synth_features_and_preprocess(tmp_path, capsys):
    data = tmp_path / 'data'
    assert main(['synth', '--preset', 'ci', '--out', str(data)]) == 0
    assert 'Wrote 24 images of 4 classes' in capsys.readouterr().out
    assert len(list(data.rglob('*.pgm'))) == 24

    features = tmp_path / 'features'
    assert main(['features', '--preset', 'ci', '--out', str(features)]) == 0
    assert (features / 'synthetic.pvfm').exists()

    image = sorted(data.rglob('*.pgm'))[0]
    stages = tmp_path / 'stages'
    assert main(['preprocess', str(image), '--preset', 'ci', '--out', str(stages)]) == 0
    assert (stages / 'resized.pgm').exists()
    assert (stages / 'histograms.csv').exists()


def test_run_on_scanned_dataset(tmp_path):
    data = tmp_path / 'data'
    assert main(['synth', '--preset', 'ci', '--out', str(data)]) == 0
    out = tmp_path / 'out'
    assert main(['run', *CHEAP, '--set', 'dataset.source=path', '--set', f'dataset.root={data}',
                 '--set', 'dataset.layout="{hand}/{subject}/{session}_{shot}.pgm"',
                 '--set', 'classifier.name=knn', '--out', str(out)]) == 0
    assert (out / 'results.csv').read_text().splitlines()[1].startswith('left-pca1-fs1-knn')


def test_configuration_errors_exit_nonzero(tmp_path, capsys):
    assert main(['run', '--preset', 'ci', '--set', 'selection.swarm.particle=3', '--out', str(tmp_path)]) == 1
    assert 'selection.swarm.particle' in capsys.readouterr().err
    assert main(['run', '--preset', 'ci', '--set', 'runs=0', '--out', str(tmp_path)]) == 1
    assert main(['run', '--config', str(tmp_path / 'missing.yaml')]) == 1


def test_missing_dataset_root_exits_nonzero(tmp_path, capsys):
    absent = tmp_path / 'absent'
    assert main(['run', '--preset', 'put-left', '--set', f'dataset.root={absent}', '--out', str(tmp_path)]) == 1
    assert 'does not exist' in capsys.readouterr().err


def test_usage_errors():
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(['grid', '--preset', 'nope'])
    assert info.value.code == 2
    with pytest.raises(SystemExit):
        build_parser().parse_args(['preprocess'])
