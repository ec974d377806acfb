import math
import unittest

import numpy as np

from app.crb import (
    crb_curve,
    crb_sigma,
    fisher_from_probabilities,
    fisher_per_event,
    fm_ratio,
    numeric_fisher,
)
from app.errors import DegenerateModelError, InfiniteInformationError, UnboundedCRBError
from app.sensor import SensorModel


class FisherTests(unittest.TestCase):
    def test_ideal_sensor_reaches_heisenberg_value(self):
        model = SensorModel.create(visibility=1.0, efficiency=1.0)
        phases = np.arange(0.0, 181.0, 1.0)
        fisher = fisher_per_event(model, phases)
        self.assertEqual(fisher.shape, (181,))
        np.testing.assert_allclose(fisher, 4.0, atol=1e-9)

    def test_reduced_visibility_lowers_information(self):
        model = SensorModel.create(visibility=0.93)
        fisher = fisher_per_event(model, np.linspace(1.0, 179.0, 50))
        self.assertTrue(np.all(fisher < 4.0))
        self.assertTrue(np.all(fisher > 0.0))

    def test_information_grows_with_visibility(self):
        phases = np.arange(0.0, 180.0, 1.0)
        levels = (0.0, 0.5, 0.8, 0.9, 0.93, 0.99, 1.0)
        fishers = [fisher_per_event(SensorModel.create(visibility=v), phases) for v in levels]
        for lower, higher in zip(fishers, fishers[1:]):
            self.assertTrue(np.all(lower <= higher + 1e-12))

    def test_vanishing_weights_are_degenerate(self):
        model = SensorModel.create(offsets_deg=(0.0, 0.0, 0.0), visibility=1.0)
        with self.assertRaises(DegenerateModelError):
            fisher_per_event(model, 90.0)
        with self.assertRaises(DegenerateModelError):
            crb_sigma(model, 90.0, 1000)

    def test_analytic_matches_numeric_derivative(self):
        model = SensorModel.create(offsets_deg=(0.0, 80.0, 175.0, 265.0),
                                   visibility=(0.93, 0.9, 0.95, 0.88),
                                   efficiency=(1.0, 0.8, 0.9, 1.1))
        for phi in (3.0, 20.8, 45.0, 90.0, 140.0, 168.8):
            self.assertAlmostEqual(fisher_per_event(model, phi) / numeric_fisher(model, phi),
                                   1.0, delta=1e-6)

    def test_null_channel_contributions(self):
        self.assertEqual(fisher_from_probabilities([0.5, 0.5, 0.0], [1.0, -1.0, 0.0]), 4.0)
        with self.assertRaises(InfiniteInformationError):
            fisher_from_probabilities([0.5, 0.5, 0.0], [1.0, -1.5, 0.5])


class BoundTests(unittest.TestCase):
    def test_sigma_scales_with_events(self):
        model = SensorModel.create(visibility=1.0)
        self.assertAlmostEqual(crb_sigma(model, 45.0, 10000), math.degrees(0.005), places=12)
        ratio = crb_sigma(model, 45.0, 1000) / crb_sigma(model, 45.0, 100000)
        self.assertAlmostEqual(ratio, 10.0, places=9)

    def test_sigma_times_root_events_is_constant(self):
        model = SensorModel.create()
        for phi in (20.8, 45.0, 140.0):
            products = [crb_sigma(model, phi, m) * math.sqrt(m)
                        for m in (1, 1000, 5000, 10000, 40000, 10 ** 6)]
            np.testing.assert_allclose(products, products[0], rtol=1e-12)

    def test_zero_visibility_is_unbounded(self):
        model = SensorModel.create(visibility=0.0)
        self.assertEqual(fisher_per_event(model, 30.0), 0.0)
        with self.assertRaises(UnboundedCRBError):
            crb_sigma(model, 30.0, 1000)
        points = crb_curve(model, [10.0, 20.0], 1000)
        self.assertTrue(all(math.isinf(p.sigma_rad) for p in points))

    def test_events_must_be_positive(self):
        with self.assertRaises(ValueError):
            crb_sigma(SensorModel.create(), 45.0, 0)

    def test_fm_ratio_of_bound_variance_is_one(self):
        model = SensorModel.create()
        variance = crb_sigma(model, 45.0, 5000) ** 2
        self.assertAlmostEqual(fm_ratio(variance, model, 45.0, 5000), 1.0, places=12)
        self.assertAlmostEqual(fm_ratio(1.5 * variance, model, 45.0, 5000), 1.5, places=12)

    def test_curve_points(self):
        model = SensorModel.create(visibility=1.0)
        points = crb_curve(model, [0.0, 90.0, 180.0], 10000)
        self.assertEqual([p.phi_deg for p in points], [0.0, 90.0, 180.0])
        for point in points:
            self.assertAlmostEqual(point.fisher, 4.0, places=9)
            self.assertAlmostEqual(point.sigma_deg, math.degrees(0.005), places=9)
            self.assertEqual(point.events, 10000)


if __name__ == "__main__":
    unittest.main()
