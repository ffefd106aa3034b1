#!/usr/bin/env python3
"""
Test CSV, JSON and ZIP exports
"""
import csv
import io
import json
import os
import sys
import unittest
import zipfile

import yaml

# Add the repository root to the Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.ecology import summarize
from src.experiment import ExperimentReport, ExperimentSpec, InvasionProb, run
from src.export_manager import ExportManager
from src.gillespie import SimConfig
from src.lotka_volterra import LVSystem, integrate
from src.presets import get_preset
from src.scenario_predictor import predict
from src.spec_files import spec_to_dict


class TestExportManager(unittest.TestCase):

    def setUp(self):
        self.manager = ExportManager()

    def test_ode_csv(self):
        params = get_preset('speedup')
        solution = integrate(LVSystem.from_params(params), [1.1, 0.01, 0.0], 1.0, stride=0.5)
        buffer = io.StringIO()
        self.manager.write_ode_csv(solution, buffer)
        rows = list(csv.reader(io.StringIO(buffer.getvalue())))
        self.assertEqual(rows[0], ['t', 'n0', 'n1', 'n2'])
        self.assertEqual([float(r[0]) for r in rows[1:]], [0.0, 0.5, 1.0])
        self.assertEqual(float(rows[1][2]), 0.01)
        self.assertTrue(all(float(r[3]) == 0.0 for r in rows[1:]))

    def test_predictions_json(self):
        predictions = predict(summarize(get_preset('speedup')))
        data = json.loads(self.manager.predictions_json(predictions))
        self.assertEqual(len(data), len(predictions))
        self.assertIn('FirstLeads:E', self.manager.predictions_text(predictions, 1000))

    def test_zip_without_replicates(self):
        predictions = predict(summarize(get_preset('speedup')))
        report = ExperimentReport('speedup run', [], predictions, [], {'replicates': 0})
        memory_file, filename = self.manager.export_experiment_zip(report, {'params': {'preset': 'speedup'}})
        self.assertTrue(filename.startswith('speedup_run_results_'))
        self.assertTrue(filename.endswith('.zip'))
        with zipfile.ZipFile(memory_file) as bundle:
            names = set(bundle.namelist())
            self.assertEqual(names, {'report.json', 'verdicts.txt', 'predictions.json',
                                     'predictions.txt', 'spec.yaml'})
            spec = yaml.safe_load(bundle.read('spec.yaml'))
            self.assertEqual(spec['params']['preset'], 'speedup')

    def test_zip_with_replicates(self):
        spec = ExperimentSpec(params=get_preset('single_sweep').with_carrying_capacity(100),
                              sim=SimConfig(seed=1, horizon=10.0, mutation2_enabled=False,
                                            stop_on_mutant_loss=True),
                              replicates=4, targets=[InvasionProb(type=1)], parallelism=1)
        report = run(spec)
        memory_file, _ = self.manager.export_experiment_zip(report, spec_to_dict(spec), 100)
        with zipfile.ZipFile(memory_file) as bundle:
            rows = list(csv.DictReader(io.StringIO(bundle.read('replicates.csv').decode('utf-8'))))
            self.assertEqual([r['replicate'] for r in rows], ['0', '1', '2', '3'])
            saved = json.loads(bundle.read('report.json'))
            self.assertEqual(saved['provenance']['replicates'], 4)

    def test_sanitize(self):
        self.assertEqual(self.manager._sanitize_filename('my run/1'), 'my_run_1')
        self.assertEqual(self.manager._sanitize_filename('***'), 'experiment')


if __name__ == '__main__':
    unittest.main()
