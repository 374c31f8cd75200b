import math
import unittest

import numpy as np

from geometry import disc, point_set, segment, union
import potential
from potential import (
    capacity,
    classify_polarity,
    equilibrium_measure,
    fekete_diameter,
    log_energy,
    potential_eval,
    probability_measure,
)


def roots_of_unity(n):
    return np.exp(2j * np.pi * np.arange(n) / n)


class LogEnergyTest(unittest.TestCase):
    def test_fourth_roots_of_unity(self):
        m = probability_measure(roots_of_unity(4))
        self.assertAlmostEqual(log_energy(m), math.log(4) / 4, places=12)

    def test_unit_distance_pair_has_zero_energy(self):
        self.assertAlmostEqual(log_energy(probability_measure([0, 1])), 0.0, places=15)

    def test_zero_weight_annihilates_cross_terms(self):
        m = potential.DiscreteMeasure(np.array([0, 3]), np.array([1.0, 0.0]), 1.0)
        self.assertEqual(log_energy(m), 0.0)

    def test_coincident_support_is_rejected(self):
        with self.assertRaisesRegex(ValueError, "coincident"):
            log_energy(probability_measure([1, 1]))

    def test_mass_must_match_weights(self):
        with self.assertRaisesRegex(ValueError, "declared mass"):
            potential.DiscreteMeasure(np.array([0, 1]), np.array([0.5, 0.4]), 1.0)


class PotentialEvalTest(unittest.TestCase):
    def test_mean_value_property_on_unit_circle(self):
        m = probability_measure(roots_of_unity(256))
        self.assertAlmostEqual(potential_eval(m, 2), math.log(2), delta=1e-3)
        self.assertAlmostEqual(potential_eval(m, 0), 0.0, delta=1e-3)

    def test_point_mass(self):
        self.assertAlmostEqual(potential_eval(potential.point_mass(0), math.e), 1.0)

    def test_support_point_returns_minus_infinity(self):
        m = probability_measure([0, 1])
        self.assertEqual(potential_eval(m, 1), -math.inf)


class EquilibriumMeasureTest(unittest.TestCase):
    def test_disc_weights_are_uniform_on_the_circle(self):
        m = equilibrium_measure(disc(0, 1), 256, 1e-8, seed=1)
        self.assertEqual(len(m), 256)
        self.assertAlmostEqual(m.mass, 1.0, places=12)
        np.testing.assert_allclose(np.abs(m.support), 1.0, atol=1e-12)
        np.testing.assert_allclose(m.weights, 1 / 256, rtol=0.02)

    def test_segment_weights_follow_arcsine_law(self):
        m = equilibrium_measure(segment(-1, 1), 256, 1e-8, seed=1)
        edges = np.linspace(-1, 1, 9)
        binned, _ = np.histogram(m.support.real, bins=edges, weights=m.weights)
        expected = (np.arcsin(edges[1:]) - np.arcsin(edges[:-1])) / math.pi
        np.testing.assert_allclose(binned, expected, rtol=0.05)
        self.assertGreater(m.weights[0], m.weights[128])

    def test_single_point_has_no_equilibrium_measure(self):
        with self.assertRaisesRegex(ValueError, "polar"):
            equilibrium_measure(point_set([0]), 1, 1e-8, seed=0)

    def test_energy_is_nondecreasing_across_iterations(self):
        _, details = potential.equilibrium_with_details(segment(-1, 1), 128, 1e-8, 3)
        history = details["energy_history"]
        for before, after in zip(history, history[1:]):
            self.assertGreaterEqual(after, before - 1e-12)

    def test_frostman_flatness_and_exterior_bound(self):
        tol = 1e-8
        for spec in (disc(0, 1), segment(-1, 1)):
            with self.subTest(spec=spec):
                m = equilibrium_measure(spec, 256, tol, seed=2)
                report = potential.frostman_check(m, spec, samples=100, seed=9)
                self.assertLessEqual(report["flatness"], 5 * tol)
                self.assertGreaterEqual(report["min_exterior_excess"], -5 * tol)


class CapacityTest(unittest.TestCase):
    def test_disc_capacity_equals_radius(self):
        for r in (0.5, 1.0, 2.0):
            with self.subTest(r=r):
                self.assertAlmostEqual(capacity(disc(0, r), 256, 1e-8, 0), r, delta=0.02 * r)

    def test_segment_capacity_is_quarter_length(self):
        for length in (1.0, 2.0, 4.0):
            with self.subTest(length=length):
                cap = capacity(segment(0, length), 256, 1e-8, 0)
                self.assertAlmostEqual(cap, length / 4, delta=0.05 * length / 4)

    def test_point_set_capacity_is_zero(self):
        self.assertEqual(capacity(point_set([0]), 256, 1e-8, 0), 0.0)

    def test_scaling_covariance(self):
        for spec, scaled in (
            (disc(0, 1), lambda a: disc(0, a)),
            (segment(-1, 1), lambda a: segment(-a, a)),
        ):
            base = capacity(spec, 256, 1e-8, 4)
            for alpha in (2.0, 0.5):
                with self.subTest(spec=spec, alpha=alpha):
                    self.assertAlmostEqual(
                        capacity(scaled(alpha), 256, 1e-8, 4), alpha * base, delta=0.02 * alpha * base
                    )

    def test_isolated_points_do_not_change_capacity(self):
        base = capacity(segment(-1, 1), 256, 1e-8, 0)
        for atoms in ([5], [0.3 + 2j, -3]):
            with self.subTest(atoms=atoms):
                cap = capacity(union([segment(-1, 1), point_set(atoms)]), 256, 1e-8, 0)
                self.assertAlmostEqual(cap, base, places=12)
                self.assertAlmostEqual(cap, 0.5, delta=0.025)

    def test_equilibrium_of_mixed_union_lives_on_the_curve(self):
        m = equilibrium_measure(union([disc(0, 1), point_set([3])]), 128, 1e-8, seed=0)
        np.testing.assert_allclose(np.abs(m.support), 1.0, atol=1e-12)
        self.assertAlmostEqual(float(m.weights.sum()), 1.0, places=12)


class FeketeDiameterTest(unittest.TestCase):
    def test_disc_matches_closed_form(self):
        values = []
        for n in (4, 8, 16):
            with self.subTest(n=n):
                d = fekete_diameter(disc(0, 1), n, seed=0)
                self.assertAlmostEqual(d, n ** (1 / (n - 1)), delta=0.01 * n ** (1 / (n - 1)))
                values.append(d)
        self.assertTrue(all(b <= a * (1 + 1e-9) for a, b in zip(values, values[1:])))

    def test_two_points_give_the_diameter(self):
        self.assertAlmostEqual(fekete_diameter(segment(-1, 1), 2, seed=0), 2.0, places=9)
        self.assertAlmostEqual(fekete_diameter(disc(0, 1), 2, seed=5), 2.0, places=9)

    def test_isolated_points_are_ignored(self):
        mixed = union([disc(0, 1), point_set([3])])
        self.assertEqual(fekete_diameter(mixed, 8, seed=0), fekete_diameter(disc(0, 1), 8, seed=0))

    def test_large_n_is_close_to_capacity(self):
        d = fekete_diameter(disc(0, 1), 128, seed=0)
        cap = capacity(disc(0, 1), 256, 1e-8, 0)
        self.assertLessEqual(abs(cap - d) / cap, 0.05)


class ClassifyPolarityTest(unittest.TestCase):
    def test_finite_point_set_is_polar(self):
        verdict = classify_polarity(point_set([0, 1, 2, 3, 4]), 1e-6)
        self.assertEqual(verdict.classification, "polar")
        self.assertEqual(verdict.capacity_estimate, 0.0)

    def test_disc_is_nonpolar(self):
        verdict = classify_polarity(disc(0, 1), 1e-6)
        self.assertEqual(verdict.classification, "nonpolar")
        self.assertAlmostEqual(verdict.capacity_estimate, 1.0, delta=0.02)
        self.assertEqual(len(verdict.sequence), 3)

    def test_curve_with_isolated_points_is_nonpolar(self):
        verdict = classify_polarity(union([disc(0, 1), point_set([4, -4j])]), 1e-6)
        self.assertEqual(verdict.classification, "nonpolar")
        self.assertAlmostEqual(verdict.capacity_estimate, 1.0, delta=0.02)

    def test_tiny_segment_is_not_nonpolar(self):
        verdict = classify_polarity(segment(0, 1e-9), 1e-6)
        self.assertIn(verdict.classification, {"polar", "inconclusive"})
        self.assertAlmostEqual(verdict.capacity_estimate, 2.5e-10, delta=2.5e-11)

    def test_verdict_json_round_trip(self):
        verdict = classify_polarity(point_set([0, 1]), 1e-6)
        self.assertEqual(potential.verdict_from_json(verdict.to_json()), verdict)


if __name__ == "__main__":
    unittest.main()
