"""Test rctibench.rcti."""
import math
from unittest import TestCase

from rctibench.rcti import (
    CarbonBasis,
    ElasticityClass,
    ModelMeasurement,
    RctiRecord,
    Thresholds,
    classify_elasticity,
    compute_carbon_delta,
    compute_rcti,
    compute_robustness,
    recommend,
    run_rcti_sweep,
    score,
)

# (attack, epsilon, dR, dC, RCTI) as published
PUBLISHED = [
    ("FG", 0.0, -0.01077, -0.159, 14.73085),
    ("FG", 0.1, 0.13570, 0.429, 3.15769),
    ("FG", 0.2, 2.02672, 0.41401, 0.20427),
    ("FG", 0.3, 23.7521, 0.44954, 0.01892),
    ("FG", 0.4, 86.3043, 0.473309, 0.005484),
    ("FG", 0.5, 43.6129, 0.454810, 0.010428),
    ("PGD", 0.1, 0.25641, 0.128, 0.49921),
    ("PGD", 0.2, 12.14285, 0.28723, 0.02365),
    ("PGD", 0.3, 86.0, 0.301158, 0.00350),
]


def measurement(performance: float, carbon: float, epsilon: float = 0.1, **kwargs):
    return ModelMeasurement(epsilon=epsilon, performance=performance, carbon=carbon, **kwargs)


class TestDeltas(TestCase):
    def test_robustness(self):
        self.assertAlmostEqual(compute_robustness(0.9506, 0.837), 0.135723, places=6)
        self.assertEqual(compute_robustness(0.5, 0.5), 0.0)
        self.assertLess(compute_robustness(0.4, 0.5), 0.0)

    def test_robustness_zero_baseline(self):
        self.assertEqual(compute_robustness(0.02, 0.0), math.inf)
        self.assertTrue(math.isnan(compute_robustness(0.0, 0.0)))

    def test_carbon_delta(self):
        self.assertAlmostEqual(compute_carbon_delta(0.0004814, 0.000336), 0.432738, places=6)
        with self.assertRaises(ValueError):
            compute_carbon_delta(1.0, 0.0)
        with self.assertRaises(ValueError):
            compute_carbon_delta(-1.0, 1.0)

    def test_scale_invariance(self):
        for factor in (1e-6, 3.0, 475.0):
            with self.subTest(factor=factor):
                self.assertAlmostEqual(
                    compute_carbon_delta(0.0007783 * factor, 0.000551 * factor),
                    compute_carbon_delta(0.0007783, 0.000551),
                    places=12,
                )
                self.assertAlmostEqual(
                    compute_robustness(0.9174 * factor, 0.3031 * factor),
                    compute_robustness(0.9174, 0.3031),
                    places=12,
                )


class TestRcti(TestCase):
    def test_published_values(self):
        for attack, epsilon, delta_r, delta_c, expected in PUBLISHED:
            with self.subTest(attack=attack, epsilon=epsilon):
                # dC of the clean and weakest FG rows is printed to three digits
                rel = 5e-3 if attack == "FG" and epsilon <= 0.1 else 1e-3
                self.assertAlmostEqual(
                    compute_rcti(delta_c, delta_r), expected, delta=expected * rel
                )

    def test_published_classes(self):
        for attack, epsilon, delta_r, delta_c, _ in PUBLISHED:
            expected = (
                ElasticityClass.ECO_COSTLY
                if attack == "FG" and epsilon <= 0.1
                else ElasticityClass.ECO_EFFICIENT
            )
            with self.subTest(attack=attack, epsilon=epsilon):
                self.assertIs(classify_elasticity(compute_rcti(delta_c, delta_r)), expected)

    def test_absolute_value(self):
        self.assertEqual(compute_rcti(-0.5, 0.25), 2.0)
        self.assertEqual(compute_rcti(0.5, -0.25), 2.0)

    def test_infinite_robustness(self):
        with self.assertLogs("rctibench.rcti", "WARNING"):
            self.assertEqual(compute_rcti(0.00043, math.inf), math.inf)
        self.assertIs(classify_elasticity(math.inf), ElasticityClass.ECO_CRITICAL)

    def test_zero_robustness(self):
        self.assertEqual(compute_rcti(0.3, 0.0), math.inf)
        self.assertTrue(math.isnan(compute_rcti(0.0, 0.0)))
        self.assertEqual(compute_rcti(0.3, math.nan), math.inf)

    def test_zero_carbon_change(self):
        self.assertEqual(compute_rcti(0.0, 0.7), 0.0)
        self.assertIs(classify_elasticity(0.0), ElasticityClass.ECO_IDEAL)


class TestClassify(TestCase):
    def test_bands(self):
        cases = [
            (0.0, ElasticityClass.ECO_IDEAL),
            (0.5, ElasticityClass.ECO_EFFICIENT),
            (1.0, ElasticityClass.ECO_NEUTRAL),
            (1.0 + 1e-9, ElasticityClass.ECO_NEUTRAL),
            (1.5, ElasticityClass.ECO_COSTLY),
            (100.0, ElasticityClass.ECO_COSTLY),
            (100.5, ElasticityClass.ECO_CRITICAL),
            (math.inf, ElasticityClass.ECO_CRITICAL),
            (math.nan, ElasticityClass.ECO_NEUTRAL),
        ]
        for rcti, expected in cases:
            with self.subTest(rcti=rcti):
                self.assertIs(classify_elasticity(rcti), expected)

    def test_custom_threshold(self):
        thresholds = Thresholds(critical=10.0)
        self.assertIs(classify_elasticity(14.7, thresholds), ElasticityClass.ECO_CRITICAL)
        self.assertIs(classify_elasticity(14.7), ElasticityClass.ECO_COSTLY)

    def test_negative(self):
        with self.assertRaises(ValueError):
            classify_elasticity(-0.1)

    def test_threshold_validation(self):
        with self.assertRaises(ValueError):
            Thresholds(critical=1.0)
        with self.assertRaises(ValueError):
            Thresholds(tolerance=1.0)

    def test_preference_order(self):
        ranked = sorted(ElasticityClass, key=lambda item: item.preference)
        self.assertEqual(ranked[0], ElasticityClass.ECO_CRITICAL)
        self.assertEqual(ranked[-1], ElasticityClass.ECO_IDEAL)


class TestScore(TestCase):
    def test_measurement_validation(self):
        with self.assertRaises(ValueError):
            measurement(98.4, 1.0)
        with self.assertRaises(ValueError):
            measurement(0.9, -1.0)

    def test_score(self):
        record = score(measurement(0.78, 0.000438), measurement(0.98, 0.0004936, attack="PGD"))
        self.assertAlmostEqual(record.delta_r, 0.25641, places=5)
        self.assertAlmostEqual(record.rcti, abs(record.delta_c / record.delta_r))
        self.assertIs(record.elasticity, ElasticityClass.ECO_EFFICIENT)
        self.assertEqual(record.attack, "PGD")
        self.assertFalse(record.no_change)

    def test_identical_models(self):
        record = score(measurement(0.9, 0.001), measurement(0.9, 0.001))
        self.assertTrue(record.no_change)
        self.assertTrue(math.isnan(record.rcti))
        self.assertIs(record.elasticity, ElasticityClass.ECO_NEUTRAL)

    def test_both_zero_accuracy(self):
        record = score(measurement(0.0, 0.001397), measurement(0.0, 0.001889))
        self.assertTrue(math.isnan(record.delta_r))
        self.assertEqual(record.rcti, math.inf)
        self.assertIs(record.elasticity, ElasticityClass.ECO_CRITICAL)
        self.assertFalse(record.no_change)

    def test_mixed_basis(self):
        with self.assertRaises(ValueError):
            score(
                measurement(0.8, 1.0),
                measurement(0.9, 1.2, carbon_basis=CarbonBasis.EMISSIONS),
            )

    def test_mixed_span_sets(self):
        with self.assertRaises(ValueError):
            score(
                measurement(0.8, 1.0),
                measurement(0.9, 1.2, span_set=frozenset({"attack", "eval", "train"})),
            )


class TestSweep(TestCase):
    def test_order_and_length(self):
        baseline = measurement(0.5, 1.0, epsilon=0.0)
        models = [measurement(0.6, 1.1, epsilon=eps) for eps in (0.3, 0.1, 0.2)]
        records = run_rcti_sweep(baseline, models)
        self.assertEqual([record.epsilon for record in records], [0.3, 0.1, 0.2])

    def test_empty(self):
        with self.assertRaises(ValueError):
            run_rcti_sweep(measurement(0.5, 1.0), [])

    def test_mixed_basis_rejected(self):
        baseline = measurement(0.5, 1.0)
        models = [measurement(0.6, 1.1), measurement(0.6, 1.1, carbon_basis=CarbonBasis.EMISSIONS)]
        with self.assertRaises(ValueError):
            run_rcti_sweep(baseline, models)


def record(epsilon, delta_r, rcti, elasticity) -> RctiRecord:
    return RctiRecord(epsilon, delta_r, 0.1, rcti, elasticity, attack="FG")


class TestRecommend(TestCase):
    def test_prefers_better_class_then_lower_rcti(self):
        records = [
            record(0.1, 0.1, 3.0, ElasticityClass.ECO_COSTLY),
            record(0.2, 2.0, 0.2, ElasticityClass.ECO_EFFICIENT),
            record(0.3, 23.0, 0.02, ElasticityClass.ECO_EFFICIENT),
        ]
        self.assertEqual(recommend(records).epsilon, 0.3)

    def test_ties_go_to_lowest_epsilon(self):
        records = [
            record(0.4, 1.0, 0.5, ElasticityClass.ECO_EFFICIENT),
            record(0.2, 1.0, 0.5, ElasticityClass.ECO_EFFICIENT),
        ]
        self.assertEqual(recommend(records).epsilon, 0.2)

    def test_needs_a_robustness_gain(self):
        records = [
            record(0.0, -0.01, 14.7, ElasticityClass.ECO_COSTLY),
            record(0.5, math.nan, math.inf, ElasticityClass.ECO_CRITICAL),
        ]
        self.assertIsNone(recommend(records))
        self.assertIsNone(recommend([]))

    def test_infinite_gain_is_last_resort(self):
        records = [
            record(0.4, math.inf, math.inf, ElasticityClass.ECO_CRITICAL),
            record(0.1, 0.1, 3.0, ElasticityClass.ECO_COSTLY),
        ]
        self.assertEqual(recommend(records).epsilon, 0.1)
