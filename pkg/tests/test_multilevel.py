import numpy as np
import pytest

from mlsurrogate.ensemble import SurrogateEnsemble, nn_only_grid
from mlsurrogate.multilevel import (
    LevelDataset,
    MultilevelSurrogate,
    SurrogateDiagnostics,
    build_sequence,
    estimate_speedup,
    generate_level_data,
    multilevel_from_dir,
    multilevel_to_dir,
    predict,
    train_multilevel,
    well_trained_check,
)
from mlsurrogate.neural import NetworkArchitecture, TrainingConfig
from mlsurrogate.sampling import InvalidSequenceError, allocate_samples

from test_ensemble import constant_network

ARCH = NetworkArchitecture.mlp(7, 2, 8)
FAST = TrainingConfig(p=2, epochs=300)
GRID = nn_only_grid(qs=(2,), reg_weights=(1e-6,), init_seeds=1)


def constant_ensemble(value, input_dim=7):
    return SurrogateEnsemble(
        nn=constant_network(value, input_dim=input_dim),
        gp=None,
        alpha_nn=1.0,
        alpha_gp=0.0,
        validation_error=0.0,
    )


class TestBuildSequence:
    @pytest.mark.parametrize(
        "indices,complexity",
        [
            ((0, 6), 1 / 6),
            ((0, 3, 6), 4 / 6),
            ((0, 2, 4, 6), 1.5),
            ((0, 1, 2, 3, 4, 5, 6), 6.0),
        ],
    )
    def test_published_complexities(self, indices, complexity):
        seq = build_sequence(6, indices)
        assert seq.complexity == pytest.approx(complexity, abs=1e-15)

    def test_complexity_matches_printed_values(self):
        printed = {(0, 6): 0.16, (0, 3, 6): 0.67, (0, 2, 4, 6): 1.5, (0, 1, 2, 3, 4, 5, 6): 6.0}
        for indices, value in printed.items():
            assert abs(build_sequence(6, indices).complexity - value) <= 0.01

    def test_invalid_sequences(self):
        with pytest.raises(InvalidSequenceError):
            build_sequence(6, (0,))
        with pytest.raises(InvalidSequenceError):
            build_sequence(6, (1, 6))
        with pytest.raises(InvalidSequenceError):
            build_sequence(6, (0, 5))
        with pytest.raises(InvalidSequenceError):
            build_sequence(6, (0, 4, 4, 6))


class TestGenerateLevelData:
    def test_dataset_sizes(self, model):
        seq = build_sequence(6, (0, 6))
        alloc = allocate_samples(seq.indices, 256, 4, 6)
        datasets = generate_level_data(model, seq, alloc, seed=1)
        assert [d.count for d in datasets] == [256, 4]
        assert datasets[0].is_base and datasets[0].fine_level == 0
        assert datasets[1].coarse_level == 0 and datasets[1].fine_level == 6

    def test_reproducible(self, model):
        seq = build_sequence(6, (0, 3, 6))
        alloc = allocate_samples(seq.indices, 64, 4, 6)
        a = generate_level_data(model, seq, alloc, seed=7)
        b = generate_level_data(model, seq, alloc, seed=7)
        for da, db in zip(a, b):
            assert np.array_equal(da.inputs, db.inputs)
            assert np.array_equal(da.values, db.values)

    def test_levels_never_share_points(self, model):
        seq = build_sequence(6, (0, 3, 6))
        alloc = allocate_samples(seq.indices, 32, 8, 6)
        datasets = generate_level_data(model, seq, alloc, seed=3)
        rows = [set(map(tuple, d.inputs)) for d in datasets]
        assert not (rows[0] & rows[1]) and not (rows[1] & rows[2])

    def test_sobol_blocks_are_consecutive(self, model):
        from mlsurrogate.sampling import ParameterSpace, sobol_sample

        seq = build_sequence(6, (0, 6))
        alloc = allocate_samples(seq.indices, 16, 4, 6)
        datasets = generate_level_data(model, seq, alloc, provenance_kind="sobol", seed=0)
        stream = sobol_sample(ParameterSpace(7), 20, skip=0).points
        assert np.array_equal(datasets[0].inputs, stream[:16])
        assert np.array_equal(datasets[1].inputs, stream[16:20])

    def test_detail_std_below_base_std(self, model):
        seq = build_sequence(6, (0, 2, 4, 6))
        alloc = allocate_samples(seq.indices, 300, 300, 6)
        datasets = generate_level_data(model, seq, alloc, seed=5)
        base_std = datasets[0].values.std(ddof=1)
        for d in datasets[1:]:
            assert d.values.std(ddof=1) < base_std

    def test_cost_ledger(self, model):
        seq = build_sequence(6, (0, 6))
        alloc = allocate_samples(seq.indices, 256, 4, 6)
        datasets = generate_level_data(model, seq, alloc, seed=1)
        assert datasets[0].cost == pytest.approx(256 * 12.5, rel=1e-12)
        assert datasets[1].cost == pytest.approx(4 * (800 + 12.5), rel=1e-12)

    def test_pinned_finest_inputs(self, model, rng):
        seq = build_sequence(6, (0, 6))
        alloc = allocate_samples(seq.indices, 16, 4, 6)
        pinned = rng.random((10, 7))
        datasets = generate_level_data(model, seq, alloc, seed=2, finest_inputs=pinned)
        assert np.array_equal(datasets[1].inputs, pinned[:4])

    def test_allocation_mismatch_rejected(self, model):
        seq = build_sequence(6, (0, 3, 6))
        alloc = allocate_samples((0, 6), 16, 4, 6)
        with pytest.raises(InvalidSequenceError):
            generate_level_data(model, seq, alloc, seed=0)


class TestTrainAndPredict:
    def test_prediction_is_telescopic_sum(self, rng):
        seq = build_sequence(6, (0, 3, 6))
        alloc = allocate_samples(seq.indices, 16, 4, 6)
        surrogate = MultilevelSurrogate(
            base=constant_ensemble(2.0),
            details=(constant_ensemble(0.1), constant_ensemble(-0.05)),
            sequence=seq,
            allocation=alloc,
            generation_cost=0.0,
        )
        y = rng.random(7)
        assert predict(surrogate, y) == pytest.approx(2.05, rel=1e-12)

    def test_zero_details_reduce_to_base(self, model, rng):
        seq = build_sequence(6, (0, 6))
        alloc = allocate_samples(seq.indices, 48, 8, 6)
        datasets = generate_level_data(model, seq, alloc, seed=11)
        zero_detail = LevelDataset(
            inputs=datasets[1].inputs,
            values=np.zeros_like(datasets[1].values),
            coarse_level=datasets[1].coarse_level,
            fine_level=datasets[1].fine_level,
            cost=datasets[1].cost,
            provenance=datasets[1].provenance,
        )
        cfg = TrainingConfig(p=2, reg_weight=1e-6, epochs=10000)
        surrogate = train_multilevel(
            [datasets[0], zero_detail], ARCH, GRID, cfg, seq, alloc, seed=1
        )
        ys = rng.random((50, 7))
        base_pred = surrogate.base.predict(ys)
        full_pred = predict(surrogate, ys)
        assert np.max(np.abs(full_pred - base_pred)) < 1e-2

    def test_wrong_dataset_count_rejected(self, model):
        seq = build_sequence(6, (0, 3, 6))
        alloc = allocate_samples(seq.indices, 16, 4, 6)
        datasets = generate_level_data(model, seq, alloc, seed=0)
        with pytest.raises(ValueError):
            train_multilevel(datasets[:2], ARCH, GRID, FAST, seq, alloc, seed=0)

    def test_training_reproducible(self, model, rng):
        seq = build_sequence(6, (0, 6))
        alloc = allocate_samples(seq.indices, 24, 4, 6)
        datasets = generate_level_data(model, seq, alloc, seed=4)
        a = train_multilevel(datasets, ARCH, GRID, FAST, seq, alloc, seed=9)
        b = train_multilevel(datasets, ARCH, GRID, FAST, seq, alloc, seed=9)
        ys = rng.random((20, 7))
        assert np.array_equal(predict(a, ys), predict(b, ys))

    def test_generation_cost_totals(self, model):
        seq = build_sequence(6, (0, 6))
        alloc = allocate_samples(seq.indices, 24, 4, 6)
        datasets = generate_level_data(model, seq, alloc, seed=4)
        surrogate = train_multilevel(datasets, ARCH, GRID, FAST, seq, alloc, seed=9)
        assert surrogate.generation_cost == pytest.approx(sum(d.cost for d in datasets), rel=1e-12)


class TestWellTrained:
    def test_clean_pass(self):
        report = well_trained_check(
            [
                SurrogateDiagnostics(
                    label="base",
                    training_error=0.0,
                    validation_gap=0.0,
                    sample_count=100,
                    surrogate_std=1.0,
                    target_std=1.0,
                )
            ]
        )
        assert report.all_well_trained

    def test_threshold_violation(self):
        report = well_trained_check(
            [
                SurrogateDiagnostics(
                    label="base",
                    training_error=10 * 1.0 / np.sqrt(100),
                    validation_gap=0.0,
                    sample_count=100,
                    surrogate_std=1.0,
                    target_std=1.0,
                )
            ]
        )
        assert not report.all_well_trained

    def test_std_comparability_required(self):
        report = well_trained_check(
            [
                SurrogateDiagnostics(
                    label="detail",
                    training_error=0.0,
                    validation_gap=0.0,
                    sample_count=100,
                    surrogate_std=0.1,
                    target_std=1.0,
                )
            ]
        )
        assert not report.all_well_trained


class TestEstimateSpeedup:
    def test_single_level_formula(self):
        seq = build_sequence(6, (0, 6))
        v_map = 3.7
        speedup = estimate_speedup([v_map, 0.0], seq, cost_exponent=2.0, map_variance=v_map)
        assert 1.0 / speedup == pytest.approx(6 * 2.0 ** (-12), rel=1e-12)

    def test_no_speedup_when_details_do_not_decay(self):
        seq = build_sequence(6, (0, 3, 6))
        v = 2.0
        speedup = estimate_speedup([v, v, v], seq, cost_exponent=1.0, map_variance=v)
        assert 1.0 / speedup >= 6  # last term alone contributes L

    def test_projectile_variances_predict_speedup(self, model, rng):
        ys = rng.random((2000, 7))
        base_vals = model.level_values(ys, 0)
        seq = build_sequence(6, (0, 1, 2, 3, 4, 5, 6))
        variances = [base_vals.var(ddof=1)]
        for coarse, fine in seq.pairs():
            variances.append(model.detail_values(ys, coarse, fine).var(ddof=1))
        finest_var = model.level_values(ys, 6).var(ddof=1)
        speedup = estimate_speedup(variances, seq, cost_exponent=1.0, map_variance=finest_var)
        assert speedup > 1.0

    def test_input_validation(self):
        seq = build_sequence(6, (0, 6))
        with pytest.raises(ValueError):
            estimate_speedup([1.0], seq, 1.0, 1.0)
        with pytest.raises(ValueError):
            estimate_speedup([1.0, -0.1], seq, 1.0, 1.0)
        with pytest.raises(ValueError):
            estimate_speedup([1.0, 0.1], seq, 1.0, 0.0)


class TestPersistence:
    def test_directory_round_trip(self, model, tmp_path, rng):
        seq = build_sequence(6, (0, 6))
        alloc = allocate_samples(seq.indices, 24, 4, 6)
        datasets = generate_level_data(model, seq, alloc, seed=4)
        surrogate = train_multilevel(datasets, ARCH, GRID, FAST, seq, alloc, seed=9)
        out = tmp_path / "ml"
        multilevel_to_dir(surrogate, out)
        loaded = multilevel_from_dir(out)
        ys = rng.random((15, 7))
        assert np.allclose(predict(loaded, ys), predict(surrogate, ys), atol=1e-12)
        assert loaded.sequence == surrogate.sequence
        assert loaded.generation_cost == surrogate.generation_cost
