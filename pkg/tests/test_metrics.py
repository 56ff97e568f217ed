import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlsurrogate.metrics import (
    STUDY_CSV_COLUMNS,
    cumulative_error_study,
    gain,
    generalization_bound,
    prediction_error,
    sample_std,
    sample_variance,
    wasserstein1,
)
from mlsurrogate.neural import NetworkArchitecture, TrainingConfig


class TestPredictionError:
    def test_perfect_prediction(self):
        assert prediction_error(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0

    def test_zero_prediction_full_error(self, rng):
        truth = rng.random(20) + 0.5
        assert prediction_error(np.zeros(20), truth, p=2) == pytest.approx(1.0, rel=1e-12)

    def test_hand_fixture(self):
        err = prediction_error(np.array([3.0, 0.0]), np.array([3.0, 4.0]), p=2)
        assert err == pytest.approx(0.8, rel=1e-15)

    def test_matches_norm_ratio(self, rng):
        pred = rng.random(50)
        truth = rng.random(50) + 0.1
        direct = np.linalg.norm(pred - truth) / np.linalg.norm(truth)
        assert prediction_error(pred, truth, p=2) == pytest.approx(direct, rel=1e-12)

    def test_zero_norm_truth_rejected(self):
        with pytest.raises(ValueError):
            prediction_error(np.array([1.0]), np.array([0.0]))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            prediction_error(np.array([]), np.array([]))


class TestGain:
    def test_equal_errors(self):
        assert gain(0.5, 0.5) == 1.0

    def test_hand_fixture(self):
        assert gain(0.04, 0.01) == pytest.approx(4.0, rel=1e-12)

    def test_scale_invariance(self):
        for c in (0.1, 3.0, 1e6):
            assert gain(c * 0.04, c * 0.01) == pytest.approx(4.0, rel=1e-12)

    def test_zero_denominator(self):
        with pytest.raises(ZeroDivisionError):
            gain(1.0, 0.0)


def lp_wasserstein(a, b):
    """Brute-force optimal transport between equally weighted atom lists."""
    from scipy.optimize import linprog

    na, nb = len(a), len(b)
    cost = np.abs(np.subtract.outer(a, b)).ravel()
    a_eq = []
    b_eq = []
    for i in range(na):
        row = np.zeros(na * nb)
        row[i * nb : (i + 1) * nb] = 1.0
        a_eq.append(row)
        b_eq.append(1.0 / na)
    for j in range(nb):
        row = np.zeros(na * nb)
        row[j::nb] = 1.0
        a_eq.append(row)
        b_eq.append(1.0 / nb)
    res = linprog(cost, A_eq=np.array(a_eq), b_eq=np.array(b_eq), bounds=(0, None))
    assert res.success
    return res.fun


class TestWasserstein1:
    def test_identical_measures(self, rng):
        v = rng.random(30)
        assert wasserstein1(v, v.copy()) == 0.0

    def test_single_atoms(self):
        assert wasserstein1(np.array([0.0]), np.array([1.0])) == pytest.approx(1.0, rel=1e-15)

    def test_two_atom_fixture(self):
        # Optimal plan moves 0->0.5 and 1->0.5, each with mass 1/2.
        d = wasserstein1(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
        assert d == pytest.approx(0.5, rel=1e-12)

    def test_matches_lp_oracle_small(self, rng):
        for _ in range(25):
            na = rng.integers(1, 7)
            nb = rng.integers(1, 7)
            a = rng.random(na) * 4 - 2
            b = rng.random(nb) * 4 - 2
            assert wasserstein1(a, b) == pytest.approx(lp_wasserstein(a, b), abs=1e-9)

    def test_matches_scipy_unequal_sizes(self, rng):
        from scipy.stats import wasserstein_distance

        a = rng.standard_normal(137)
        b = rng.standard_normal(512) + 0.3
        assert wasserstein1(a, b) == pytest.approx(wasserstein_distance(a, b), rel=1e-10)

    def test_symmetry(self, rng):
        a = rng.random(11)
        b = rng.random(23)
        assert wasserstein1(a, b) == wasserstein1(b, a)

    def test_triangle_inequality(self, rng):
        for _ in range(100):
            a = rng.random(rng.integers(1, 9))
            b = rng.random(rng.integers(1, 9))
            c = rng.random(rng.integers(1, 9))
            assert wasserstein1(a, c) <= wasserstein1(a, b) + wasserstein1(b, c) + 1e-12

    def test_zero_iff_equal_sorted(self, rng):
        a = rng.random(10)
        b = np.random.default_rng(1).permutation(a)
        assert wasserstein1(a, b) == 0.0
        b2 = a.copy()
        b2[0] += 0.5
        assert wasserstein1(a, b2) > 0.0

    def test_translation_invariance(self, rng):
        a = rng.random(9)
        b = rng.random(17)
        assert wasserstein1(a + 3.7, b + 3.7) == pytest.approx(wasserstein1(a, b), abs=1e-14)

    @given(
        a=st.lists(st.floats(min_value=-5, max_value=5), min_size=1, max_size=6),
        b=st.lists(st.floats(min_value=-5, max_value=5), min_size=1, max_size=6),
    )
    @settings(max_examples=40, deadline=None)
    def test_lp_equivalence_property(self, a, b):
        a = np.array(a)
        b = np.array(b)
        assert wasserstein1(a, b) == pytest.approx(lp_wasserstein(a, b), abs=1e-8)


class TestSampleMoments:
    def test_constant_values(self):
        assert sample_variance(np.array([1.0, 1.0, 1.0])) == 0.0
        assert sample_std(np.array([1.0, 1.0, 1.0])) == 0.0

    def test_two_point_fixture(self):
        assert sample_variance(np.array([0.0, 2.0])) == pytest.approx(2.0, rel=1e-15)
        assert sample_std(np.array([0.0, 2.0])) == pytest.approx(math.sqrt(2.0), rel=1e-15)

    def test_standard_normal_draws(self):
        draws = np.random.default_rng(7).standard_normal(100000)
        assert abs(sample_std(draws) - 1.0) < 0.01

    def test_too_few_values(self):
        with pytest.raises(ValueError):
            sample_variance(np.array([1.0]))


class TestGeneralizationBound:
    def test_hand_fixture(self):
        report = generalization_bound(0.0, 0.0, 1.0, 1.0, 16)
        assert report.bound == pytest.approx(math.sqrt(2.0), rel=1e-12)

    def test_sqrt_n_scaling(self):
        b1 = generalization_bound(0.0, 0.0, 1.3, 0.7, 25).bound
        b2 = generalization_bound(0.0, 0.0, 1.3, 0.7, 100).bound
        assert b2 == pytest.approx(b1 / 2, rel=1e-12)

    def test_compression_filled(self):
        report = generalization_bound(0.1, 0.2, 1.0, 1.0, 64, measured=0.25)
        expected = (0.1 + 0.2 + 2 * math.sqrt(2) * 2 / 8) / 0.25
        assert report.compression == pytest.approx(expected, rel=1e-12)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            generalization_bound(-0.1, 0.0, 1.0, 1.0, 4)
        with pytest.raises(ValueError):
            generalization_bound(0.0, 0.0, 1.0, 1.0, 0)


class TestCumulativeErrorStudy:
    def test_degenerate_single_run(self):
        def quadratic_map(points):
            return 3.0 * points[:, 0] ** 2 + points[:, 1]

        rows = cumulative_error_study(
            quadratic_map,
            dimension=2,
            arch=NetworkArchitecture.mlp(2, 1, 6),
            config=TrainingConfig(p=1, epochs=200, validation_fraction=0.0),
            sizes=[8, 16],
            retrainings=1,
            validation_realizations=1,
            master_seed=3,
            evaluation_budget=80,
            surrogate_std_points=50,
        )
        assert [r.size for r in rows] == [8, 16]
        for row in rows:
            assert row.bound > 0
            assert row.generalization_error > 0
            assert row.validation_gap == pytest.approx(
                abs(row.validation_error - row.training_error), rel=1e-12
            )
            assert row.compression == pytest.approx(row.bound / row.generalization_error, rel=1e-12)

    def test_csv_columns_frozen(self):
        assert STUDY_CSV_COLUMNS == (
            "size",
            "training_error",
            "validation_error",
            "validation_gap",
            "generalization_error",
            "bound",
            "compression",
        )
