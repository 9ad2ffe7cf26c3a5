import copy
import json

import pandas as pd
import pytest
import yaml

from lab_orchestrator import (EXIT_ACCEPTANCE, EXIT_INVALID, EXIT_OK, LabOrchestrator, configure_logging, main)


@pytest.fixture(autouse=True)
def in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def write_config(tmp_path, document, name='experiment.yaml'):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(document))
    return path


class TestLabOrchestrator:

    def test_artifacts(self, tmp_path, lab_document):
        doc = dict(copy.deepcopy(lab_document), output_dir=str(tmp_path / 'out'))
        orchestrator = LabOrchestrator(doc, workers=1)
        manifest = orchestrator.run()
        out = tmp_path / 'out'
        assert (out / 'field.csv').exists()
        assert (out / 'summary.json').exists()
        body = json.loads((out / 'manifest.json').read_text())
        assert body['checksum_sha256'] == manifest.checksum
        assert body['outputs'] == ['field.csv', 'summary.json']
        assert manifest.acceptance_passed
        assert orchestrator.last_report.kind == 'solve'
        assert set(pd.read_csv(out / 'field.csv')['seed']) == {1}

    def test_checksum_is_reproducible(self, tmp_path, lab_document):
        first = LabOrchestrator(dict(lab_document, output_dir=str(tmp_path / 'a')), workers=1).run()
        second = LabOrchestrator(dict(lab_document, output_dir=str(tmp_path / 'b')), workers=2).run()
        assert first.checksum == second.checksum
        assert (tmp_path / 'a' / 'field.csv').read_bytes() == (tmp_path / 'b' / 'field.csv').read_bytes()

    def test_log_file(self, tmp_path):
        configure_logging(quiet=True, log_dir=tmp_path / 'logs')
        assert (tmp_path / 'logs' / 'stochlab.log').exists()


class TestCommandLine:

    def test_validate(self, tmp_path, lab_document, capsys):
        path = write_config(tmp_path, lab_document)
        assert main(['validate', '--config', str(path), '--quiet']) == EXIT_OK
        assert json.loads(capsys.readouterr().out)['ok'] is True

    def test_validate_rejects_off_grid_dt(self, tmp_path, lab_document):
        path = write_config(tmp_path, lab_document)
        assert main(['validate', '--config', str(path), '--dt', '0.03', '--quiet']) == EXIT_INVALID

    def test_run_rejects_invalid_document(self, tmp_path, lab_document):
        path = write_config(tmp_path, lab_document)
        assert main(['solve', '--config', str(path), '--paths', '0', '--quiet']) == EXIT_INVALID

    def test_solve(self, tmp_path, lab_document):
        path = write_config(tmp_path, lab_document)
        out = tmp_path / 'run'
        assert main(['solve', '--config', str(path), '--out', str(out), '--seed', '7', '--quiet']) == EXIT_OK
        assert json.loads((out / 'manifest.json').read_text())['config']['numerics']['seed'] == 7
        assert (tmp_path / 'logs' / 'stochlab.log').exists()

    def test_acceptance_failure(self, tmp_path, lab_document):
        doc = copy.deepcopy(lab_document)
        doc['numerics']['schedules'] = {'mu': [0.4, 0.3]}
        doc['experiment'] = {'identities': ['coarea']}
        path = write_config(tmp_path, doc)
        assert main(['weakform', '--config', str(path), '--out', str(tmp_path / 'run'), '--quiet']) \
            == EXIT_ACCEPTANCE
