import os
import tempfile
import unittest
from pathlib import Path
from unittest import mock

from app.calibrator import load_estimator
from app.cli import main
from app.experiments import load_record_csv

SMALL_CONFIG = """\
# tiny calibration for command tests
STEP_DEG = 10
N_B = 4
HIDDEN_SIZES = 3
MAX_EPOCHS = 10
REPETITIONS = 5
EVAL_PHASES = 4
EVAL_EVENTS = 1000
"""


class CommandTests(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)
        self.config = self.dir / 'small.cfg'
        self.config.write_text(SMALL_CONFIG, encoding='utf-8')
        env = mock.patch.dict(os.environ, {}, clear=True)
        env.start()
        self.addCleanup(env.stop)

    def path(self, name):
        return str(self.dir / name)

    def run_cli(self, *argv):
        return main(['--config', str(self.config), *argv])

    def test_simulate_record_is_reproducible(self):
        self.assertEqual(self.run_cli('--seed', '4', 'simulate-record', '--out', self.path('a.csv')), 0)
        self.assertEqual(self.run_cli('simulate-record', '--seed', '4', '--out', self.path('b.csv')), 0)
        a = Path(self.path('a.csv')).read_text(encoding='utf-8')
        self.assertEqual(a, Path(self.path('b.csv')).read_text(encoding='utf-8'))
        self.assertIn('# SEED = 4', a.splitlines())
        record = load_record_csv(self.path('a.csv'))
        self.assertEqual(len(record), 18)

    def test_calibrate_estimate_and_evaluate(self):
        estimator = self.path('estimator.txt')
        self.assertEqual(self.run_cli('calibrate', '--out', estimator), 0)
        self.assertEqual(load_estimator(estimator).phase_max, 170.0)

        self.assertEqual(self.run_cli('estimate', '--estimator', estimator,
                                      '--counts', '2000,3000,2500,2500',
                                      '--out', self.path('estimate.csv')), 0)
        lines = Path(self.path('estimate.csv')).read_text(encoding='utf-8').splitlines()
        self.assertEqual(lines[-2], 'phi_hat_deg,delta_phi_deg,n_b,flag_clamped')
        self.assertEqual(lines[-1].split(',')[2], '4')

        self.assertEqual(self.run_cli('evaluate', '--estimator', estimator,
                                      '--out', self.path('eval.csv')), 0)
        lines = Path(self.path('eval.csv')).read_text(encoding='utf-8').splitlines()
        self.assertEqual(len([line for line in lines if not line.startswith('#')]), 5)

    def test_calibrate_from_record_file(self):
        record = self.path('record.csv')
        self.assertEqual(self.run_cli('simulate-record', '--step', '15', '--out', record), 0)
        estimator = self.path('estimator.txt')
        self.assertEqual(self.run_cli('calibrate', '--record', record, '--hidden', '2x2',
                                      '--n-b', '3', '--out', estimator), 0)
        loaded = load_estimator(estimator)
        self.assertEqual(loaded.phase_max, 165.0)
        self.assertEqual(loaded.provenance['topology'], '2x2')
        self.assertEqual(loaded.provenance['record_sha256'], load_record_csv(record).sha256())

    def test_crb_curve(self):
        out = self.path('crb.csv')
        self.assertEqual(self.run_cli('crb-curve', '--events', '10000', '--step', '1', '--out', out), 0)
        rows = [line for line in Path(out).read_text(encoding='utf-8').splitlines()
                if not line.startswith('#')]
        self.assertEqual(rows[0], 'phase_deg,fisher_rad2,sigma_deg,M')
        self.assertEqual(len(rows), 182)
        self.assertEqual(rows[-1].split(',')[0], '180.0')

    def test_sweeps_and_fm_table(self):
        self.assertEqual(self.run_cli('sweep-neurons', '--hidden', '2,3', '--trainings', '2',
                                      '--out', self.path('nn.csv')), 0)
        rows = [line for line in Path(self.path('nn.csv')).read_text(encoding='utf-8').splitlines()
                if not line.startswith('#')]
        self.assertEqual(rows[0], 'param,eps_deg,eps_err_deg,n_trainings')
        self.assertEqual([row.split(',')[0] for row in rows[1:]], ['2', '3'])

        self.assertEqual(self.run_cli('fm-table', '--step', '10', '--events', '1000,2000',
                                      '--phases', '45,90', '--out', self.path('fm.csv'),
                                      '--detail', self.path('detail.csv')), 0)
        detail = Path(self.path('detail.csv')).read_text(encoding='utf-8').splitlines()
        self.assertEqual(len([line for line in detail if not line.startswith('#')]), 5)

    def test_fm_table_from_acquisition_times(self):
        out = self.path('fm.csv')
        self.assertEqual(self.run_cli('fm-table', '--step', '10', '--phases', '45',
                                      '--acquisitions', '--out', out), 0)
        lines = Path(out).read_text(encoding='utf-8').splitlines()
        self.assertIn('# EVENT_COUNTS = 5000.0,10000.0,40000.0,1500.0', lines)
        rows = [line for line in lines if not line.startswith('#')]
        self.assertEqual([row.split(',')[0] for row in rows[1:]],
                         ['5000.0', '10000.0', '40000.0', '1500.0'])

        self.assertEqual(self.run_cli('fm-table', '--step', '10', '--phases', '45',
                                      '--acquisitions', '0.1,0.5:0.3', '--out', out), 0)
        rows = [line for line in Path(out).read_text(encoding='utf-8').splitlines()
                if not line.startswith('#')]
        self.assertEqual([row.split(',')[0] for row in rows[1:]], ['1000.0', '1500.0'])

    def test_scaling(self):
        estimator = self.path('estimator.txt')
        self.assertEqual(self.run_cli('calibrate', '--out', estimator), 0)
        out = self.path('scaling.csv')
        self.assertEqual(self.run_cli('scaling', '--estimator', estimator, '--events', '1000,10000',
                                      '--trials', '5', '--out', out), 0)
        lines = Path(out).read_text(encoding='utf-8').splitlines()
        self.assertIn('# phase_deg = 45.0', lines)
        self.assertTrue(any(line.startswith('# slope = ') for line in lines))
        rows = [line for line in lines if not line.startswith('#')]
        self.assertEqual(rows[0], 'M,median_delta_phi_deg')
        self.assertEqual([row.split(',')[0] for row in rows[1:]], ['1000', '10000'])

    def test_wide_calibration_range_fails(self):
        with self.assertLogs('app.cli', level='ERROR'):
            self.assertEqual(self.run_cli('simulate-record', '--phase-min', '-20',
                                          '--phase-max', '200'), 1)

    def test_errors_return_status_one(self):
        bad = self.dir / 'bad.cfg'
        bad.write_text('NEURONS = 30\n', encoding='utf-8')
        with self.assertLogs('app.cli', level='ERROR'):
            self.assertEqual(main(['--config', str(bad), 'crb-curve']), 1)
        with self.assertLogs('app.cli', level='ERROR'):
            self.assertEqual(self.run_cli('estimate', '--estimator', self.path('missing.txt'),
                                          '--counts', '1,2,3,4'), 1)

    def test_counts_must_be_integers(self):
        with self.assertRaises(SystemExit):
            self.run_cli('estimate', '--counts', '1,2,x,4')


if __name__ == "__main__":
    unittest.main()
