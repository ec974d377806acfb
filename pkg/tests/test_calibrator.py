import unittest

import numpy as np

from app.calibrator import (
    CalibrationRecord,
    TrainedEstimator,
    build_training_set,
    calibrate,
    dump_estimator,
    estimate,
    parse_estimator,
)
from app.errors import EmptyDataError, FormatVersionError, ModelError, ShapeError
from app.experiments import parse_record_csv, simulate_record, uncertainty_scaling
from app.network import Topology, TrainConfig
from app.sensor import CountVector, SensorModel


def small_estimator(seed=0):
    model = SensorModel.create()
    record = simulate_record(model, step_deg=5.0, seed=seed)
    config = TrainConfig(max_epochs=40)
    return calibrate(record, Topology(4, (6,)), config, n_b=10, seed=seed), record


class _ConstantNetwork:
    def __init__(self, value):
        self.value = value

    def predict(self, inputs):
        x = np.asarray(inputs)
        return self.value if x.ndim == 1 else np.full(x.shape[0], self.value)


class CalibrationRecordTests(unittest.TestCase):
    def test_validation(self):
        with self.assertRaises(ModelError):
            CalibrationRecord([0.0, 0.0], [[1, 2, 3, 4], [1, 2, 3, 4]], 1.0)
        with self.assertRaises(ModelError):
            CalibrationRecord([0.0, 1.0], [[1, 2, 3, 4], [1, -2, 3, 4]], 1.0)
        with self.assertRaises(ShapeError):
            CalibrationRecord([0.0, 1.0], [[1, 2, 3, 4]], 1.0)

    def test_phases_stay_within_one_fringe_period(self):
        counts = [[1, 2, 3, 4], [4, 3, 2, 1]]
        CalibrationRecord([-10.0, 169.5], counts, 1.0)
        for phases in ([-10.0, 170.0], [0.0, 180.0], [-20.0, 199.0]):
            with self.subTest(phases=phases), self.assertRaises(ModelError):
                CalibrationRecord(phases, counts, 1.0)

    def test_wide_simulated_record_is_rejected(self):
        model = SensorModel.create()
        self.assertEqual(len(simulate_record(model, step_deg=2.0, phase_min=-20.0,
                                             phase_max=160.0)), 90)
        with self.assertRaises(ModelError):
            simulate_record(model, step_deg=2.0, phase_min=-20.0, phase_max=200.0)
        with self.assertRaises(ModelError):
            simulate_record(model, step_deg=1.0, phase_min=0.0, phase_max=181.0)

    def test_wide_record_file_is_rejected(self):
        lines = ['phase_deg,count_1,count_2,count_3,count_4,exposure_s',
                 '-10,1,2,3,4,1', '170,1,2,3,4,1']
        with self.assertRaises(ModelError):
            parse_record_csv(lines)

    def test_entries_and_digest(self):
        record = CalibrationRecord.from_entries(
            [(0.0, CountVector((5, 1, 0, 2))), (2.0, CountVector((1, 1, 4, 2)))])
        self.assertEqual(len(record), 2)
        self.assertEqual(record.k, 4)
        self.assertEqual(record.step_deg, 2.0)
        self.assertEqual(record.entries()[1], (2.0, CountVector((1, 1, 4, 2))))
        changed = CalibrationRecord(record.phases, [[5, 1, 0, 2], [1, 1, 4, 3]], 1.0)
        self.assertNotEqual(record.sha256(), changed.sha256())
        self.assertNotEqual(record, changed)


class TrainingSetTests(unittest.TestCase):
    def test_size_and_labels(self):
        record = simulate_record(SensorModel.create(), step_deg=10.0, seed=1)
        data = build_training_set(record, n_b=7, seed=3)
        self.assertEqual(len(data), len(record) * 7)
        np.testing.assert_allclose(data.inputs.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_array_equal(data.targets[:7], 0.0)
        np.testing.assert_array_equal(data.targets[7:14], 10.0)
        again = build_training_set(record, n_b=7, seed=3)
        np.testing.assert_array_equal(data.inputs, again.inputs)

    def test_empty_entry_names_its_phase(self):
        record = CalibrationRecord([0.0, 5.0], [[3, 1, 2, 4], [0, 0, 0, 0]], 1.0)
        with self.assertRaises(EmptyDataError) as ctx:
            build_training_set(record, n_b=5, seed=0)
        self.assertEqual(ctx.exception.phase, 5.0)


class CalibrateTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.estimator, cls.record = small_estimator()

    def test_domain_and_provenance(self):
        self.assertEqual((self.estimator.phase_min, self.estimator.phase_max), (0.0, 175.0))
        provenance = self.estimator.provenance
        self.assertEqual(provenance['record_sha256'], self.record.sha256())
        self.assertEqual(provenance['n_b'], 10)
        self.assertEqual(provenance['topology'], '6')

    def test_calibration_is_reproducible(self):
        again, _ = small_estimator()
        self.assertEqual(dump_estimator(again), dump_estimator(self.estimator))

    def test_topology_must_match_record(self):
        with self.assertRaises(ShapeError):
            calibrate(self.record, Topology(3, (4,)), TrainConfig(max_epochs=1), n_b=2)

    def test_estimate_reports_spread(self):
        counts = CountVector((2000, 3000, 2500, 2500))
        result = estimate(self.estimator, counts, n_b=30, seed=4)
        self.assertEqual(result.n_b, 30)
        self.assertGreater(result.delta_phi_deg, 0.0)
        self.assertTrue(0.0 <= result.phi_deg <= 175.0)
        self.assertEqual(result, estimate(self.estimator, counts, n_b=30, seed=4))

    def test_point_estimate_is_scale_invariant(self):
        counts = CountVector((1800, 3100, 2600, 2400))
        base = self.estimator.point_estimate(counts)
        for factor in (2, 5, 10):
            self.assertEqual(self.estimator.point_estimate(counts.scaled(factor)), base)

    def test_median_spread_decreases_with_events(self):
        model = SensorModel.create()
        for phi in (45.0, 140.0):
            medians, _ = uncertainty_scaling(self.estimator, model, phi, (1000, 5000, 10000, 40000),
                                             trials=30, n_b=30, seed=6)
            with self.subTest(phi=phi):
                self.assertTrue(all(a > b for a, b in zip(medians, medians[1:])), medians)

    def test_single_replica_has_zero_spread(self):
        result = estimate(self.estimator, CountVector((10, 20, 30, 40)), n_b=1)
        self.assertEqual(result.delta_phi_deg, 0.0)

    def test_wrong_count_length(self):
        with self.assertRaises(ShapeError):
            estimate(self.estimator, CountVector((1, 2, 3)))

    def test_all_zero_counts(self):
        with self.assertRaises(EmptyDataError):
            estimate(self.estimator, CountVector((0, 0, 0, 0)))

    def test_text_format_round_trip(self):
        restored = parse_estimator(dump_estimator(self.estimator))
        self.assertEqual((restored.phase_min, restored.phase_max, restored.k), (0.0, 175.0, 4))
        self.assertEqual(restored.provenance['record_sha256'], self.record.sha256())
        counts = CountVector((900, 1500, 1200, 1400))
        self.assertEqual(restored.point_estimate(counts), self.estimator.point_estimate(counts))

    def test_unknown_estimator_version(self):
        text = dump_estimator(self.estimator).replace('estimator 1', 'estimator 9', 1)
        with self.assertRaises(FormatVersionError):
            parse_estimator(text)


class ClampTests(unittest.TestCase):
    def test_out_of_domain_output_is_clamped(self):
        estimator = TrainedEstimator(_ConstantNetwork(190.0), 0.0, 179.0, 4)
        with self.assertLogs('app.calibrator', level='WARNING'):
            result = estimate(estimator, CountVector((5, 5, 5, 5)), n_b=5)
        self.assertTrue(result.clamped)
        self.assertEqual(result.phi_deg, 179.0)
        self.assertEqual(result.raw_phi_deg, 190.0)
        self.assertEqual(result.delta_phi_deg, 0.0)

    def test_replicas_kept_on_request(self):
        estimator = TrainedEstimator(_ConstantNetwork(42.0), 0.0, 179.0, 4)
        result = estimate(estimator, CountVector((5, 5, 5, 5)), n_b=4, keep_replicas=True)
        self.assertFalse(result.clamped)
        self.assertEqual(result.replicas, (42.0, 42.0, 42.0, 42.0))


if __name__ == "__main__":
    unittest.main()
