import json
import math
import random
import unittest
from unittest import mock

import bergman_p2
from convergence import ConvergenceVerdict
from bergman_p2 import (
    MonomialIndex,
    RegionB,
    RegionUnion,
    RegionX,
    RegionY,
    RegionZ,
    dim_global_sections_p2,
    monomial_norm_estimate,
    monomial_predicate,
    omega_k_dimension,
    omega_k_monomial_basis,
    omega_k_spec,
    region_contains,
)
from geometry import PlanePoint2


class RegionContainsTest(unittest.TestCase):
    def test_literal_inequalities(self):
        cases = [
            (RegionB(), PlanePoint2(1, 1), True),
            (RegionB(), PlanePoint2(2, 0), False),
            (RegionX(2), PlanePoint2(2, 0.1), True),
            (RegionX(2), PlanePoint2(2, 0.3), False),
            (RegionY(), PlanePoint2(0.1j, 3), True),
            (RegionZ(2), PlanePoint2(1, 1.05), True),
            (RegionZ(2), PlanePoint2(1, 1.5), False),
            (RegionZ(2), PlanePoint2(0.5, 0.5), False),
        ]
        for region, pt, expected in cases:
            with self.subTest(region=region, pt=pt):
                self.assertEqual(region_contains(region, pt), expected)

    def test_union_is_any_child(self):
        omega = omega_k_spec(0)
        self.assertTrue(region_contains(omega, PlanePoint2(10, 0.01)))
        self.assertFalse(region_contains(omega, PlanePoint2(10, 3)))

    def test_parameter_ranges_are_enforced(self):
        with self.assertRaises(ValueError):
            RegionZ(1)
        with self.assertRaises(ValueError):
            RegionX(0)
        with self.assertRaises(ValueError):
            MonomialIndex(-1, 0)

    def test_json_round_trip(self):
        omega = omega_k_spec(-4)
        text = json.dumps(omega.to_json())
        self.assertEqual(bergman_p2.region_from_json(json.loads(text)), omega)


class MonomialPredicateTest(unittest.TestCase):
    def test_closed_form_examples(self):
        self.assertTrue(monomial_predicate(RegionX(1), MonomialIndex(3, 1), 0))
        self.assertFalse(monomial_predicate(RegionY(), MonomialIndex(0, 3), 0))
        self.assertFalse(monomial_predicate(RegionZ(2), MonomialIndex(2, 1), 0))
        self.assertTrue(monomial_predicate(RegionZ(2), MonomialIndex(1, 1), 0))
        self.assertTrue(monomial_predicate(RegionB(), MonomialIndex(40, 40), -6))

    def test_union_is_conjunction(self):
        union = RegionUnion((RegionX(1), RegionY()))
        self.assertFalse(monomial_predicate(union, MonomialIndex(0, 3), 0))
        self.assertTrue(monomial_predicate(union, MonomialIndex(1, 1), 0))

    def test_thinner_regions_never_lose_monomials(self):
        for k in range(-6, 4):
            for p in range(8):
                for q in range(8):
                    idx = MonomialIndex(p, q)
                    for small, large in ((1, 3), (3, 5), (5, 9)):
                        with self.subTest(k=k, p=p, q=q, ell=small):
                            if monomial_predicate(RegionX(small), idx, k):
                                self.assertTrue(monomial_predicate(RegionX(large), idx, k))
                    for small, large in ((2, 6), (6, 10)):
                        if monomial_predicate(RegionZ(small), idx, k):
                            self.assertTrue(monomial_predicate(RegionZ(large), idx, k))

    def test_exponent_sign_matches_predicate(self):
        for region in (RegionX(1), RegionX(3), RegionY(), RegionZ(2), RegionZ(6)):
            for k in (-5, -2, 0, 2):
                for p in range(7):
                    for q in range(7):
                        idx = MonomialIndex(p, q)
                        with self.subTest(region=region, k=k, p=p, q=q):
                            exponent = bergman_p2.predicate_exponent(region, idx, k)
                            self.assertEqual(exponent < -1, monomial_predicate(region, idx, k))


class MonomialNormEstimateTest(unittest.TestCase):
    def test_bounded_region_is_always_finite(self):
        for k in (-6, -2, 0, 2):
            for p, q in ((0, 0), (6, 0), (3, 3), (0, 6)):
                with self.subTest(k=k, p=p, q=q):
                    verdict = monomial_norm_estimate(RegionB(), MonomialIndex(p, q), k)
                    self.assertEqual(verdict.status, "finite")
                    self.assertGreater(verdict.value, 0)

    def test_bounded_region_closed_form(self):
        # k = -3: the weight is 1, so the norm is (2 pi)^2 (2^2 / 2)^2
        verdict = monomial_norm_estimate(RegionB(), MonomialIndex(0, 0), -3)
        self.assertAlmostEqual(verdict.value, (2 * math.pi) ** 2 * 4.0, places=9)

    def test_x1_is_finite_with_exponent_minus_three(self):
        verdict = monomial_norm_estimate(RegionX(1), MonomialIndex(3, 1), 0)
        self.assertEqual(verdict.status, "finite")
        self.assertAlmostEqual(verdict.exponent, -3.0, delta=0.2)
        self.assertLessEqual(verdict.error, 1e-3 * verdict.value)

    def test_z2_diverges_with_exponent_zero(self):
        verdict = monomial_norm_estimate(RegionZ(2), MonomialIndex(2, 1), 0)
        self.assertEqual(verdict.status, "divergent")
        self.assertAlmostEqual(verdict.exponent, 0.0, delta=0.2)

    def test_logarithmic_divergence_is_flagged(self):
        # X_1, z^3, k = 0: exponent 6 + 3 - 4 - 6 = -1
        verdict = monomial_norm_estimate(RegionX(1), MonomialIndex(3, 0), 0)
        self.assertTrue(verdict.near_critical)
        self.assertEqual(verdict.status, "divergent")

    def test_union_is_rejected(self):
        with self.assertRaises(ValueError):
            monomial_norm_estimate(omega_k_spec(0), MonomialIndex(0, 0), 0)

    def test_thin_regions_do_not_underflow(self):
        verdict = monomial_norm_estimate(RegionX(5), MonomialIndex(0, 6), -5)
        self.assertEqual(verdict.status, "finite")
        self.assertGreater(verdict.value, 0)


class OmegaKTest(unittest.TestCase):
    def test_domain_parameters(self):
        self.assertEqual(omega_k_spec(0).label, "B ∪ X_1 ∪ Y ∪ Z_2")
        self.assertEqual(omega_k_spec(-3).label, "B ∪ X_3 ∪ Y ∪ Z_6")
        self.assertEqual(omega_k_spec(-4).label, "B ∪ X_5 ∪ Y ∪ Z_10")

    def test_basis_examples(self):
        self.assertEqual(
            set(omega_k_monomial_basis(0)),
            {MonomialIndex(p, q) for p, q in ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))},
        )
        self.assertEqual(omega_k_monomial_basis(-3), [MonomialIndex(1, 0)])
        self.assertEqual(omega_k_monomial_basis(-2), [MonomialIndex(0, 0)])
        self.assertEqual(omega_k_monomial_basis(-5), [MonomialIndex(3, 0)])

    def test_dimension_formula(self):
        for k in range(-2, 4):
            with self.subTest(k=k):
                self.assertEqual(omega_k_dimension(k), (k + 3) * (k + 4) // 2)
        for k in range(-6, -2):
            with self.subTest(k=k):
                self.assertEqual(omega_k_dimension(k), 1)
                self.assertEqual(omega_k_monomial_basis(k), [MonomialIndex(-(k + 2), 0)])

    def test_dimension_sandwich(self):
        for k in range(-6, 4):
            with self.subTest(k=k):
                self.assertLess(dim_global_sections_p2(k), omega_k_dimension(k))

    def test_global_sections(self):
        self.assertEqual(dim_global_sections_p2(2), 6)
        self.assertEqual(dim_global_sections_p2(-1), 0)
        self.assertEqual(dim_global_sections_p2(0), 1)

    def test_basis_ignores_enumeration_order(self):
        omega = omega_k_spec(1)
        candidates = [MonomialIndex(p, q) for p in range(6) for q in range(6)]
        shuffled = candidates[:]
        random.Random(3).shuffle(shuffled)
        pick = lambda items: {m for m in items if monomial_predicate(omega, m, 1)}
        self.assertEqual(pick(candidates), pick(shuffled))
        self.assertEqual(pick(candidates), set(omega_k_monomial_basis(1)))

    def test_small_p_max_is_rejected(self):
        with self.assertRaisesRegex(ValueError, "p_max"):
            omega_k_monomial_basis(1, p_max=2)

    def test_report_shape(self):
        report = bergman_p2.omega_k_report(0)
        self.assertEqual(report["dimension"], 6)
        self.assertEqual(report["global_dimension"], 1)
        self.assertEqual(report["omega"], "B ∪ X_1 ∪ Y ∪ Z_2")
        for label, verdicts in report["verdicts"].items():
            for key, verdict in verdicts.items():
                with self.subTest(region=label, monomial=key):
                    self.assertEqual(verdict["status"], "finite")
        json.dumps(report)


class CrossValidateTest(unittest.TestCase):
    def test_quadrature_agrees_with_predicates(self):
        summary = bergman_p2.cross_validate()
        self.assertEqual(summary["cells"], 28 * 5 * 7)
        self.assertGreaterEqual(summary["decided_fraction"], 0.95)
        self.assertEqual(summary["contradictions"], 0)
        self.assertEqual(summary["exponent_mismatches"], 0)

    def test_undecided_cells_are_left_out_of_the_comparison(self):
        def estimate(region, idx, k, budget):
            if k == 0:
                return ConvergenceVerdict("undecided")
            return ConvergenceVerdict("finite", value=1.0, error=0.0)

        with mock.patch("bergman_p2.monomial_norm_estimate", side_effect=estimate):
            summary = bergman_p2.cross_validate((0, 1), (1,), (2,), max_degree=1)
        self.assertEqual(summary["cells"], 18)
        self.assertEqual(summary["decided"], 9)
        for row in summary["rows"]:
            self.assertEqual(row["decided"], row["k"] != 0)
        self.assertAlmostEqual(summary["decided_fraction"], 0.5)


if __name__ == "__main__":
    unittest.main()
