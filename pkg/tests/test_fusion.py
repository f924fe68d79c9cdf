"""Weight dynamics, product-of-experts fusion, and the online loop."""

import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gptdf import gp_core
from gptdf.data_io import generate_synthetic
from gptdf.fusion import (
    EnsembleState,
    WeightCollapseWarning,
    confidence_interval,
    ensemble_from_features,
    fuse,
    fuse_predictions,
    fused_prediction,
    gaussian_predictive_density,
    gptdf_step,
    log_record,
    predictive_weights,
    run_stream,
    update_weights,
)
from gptdf.gp_core import PredictiveDistribution, TemporalFeature, TimeSeries

simplexes = st.integers(1, 6).flatmap(
    lambda m: arrays(np.float64, (m,), elements=st.floats(1e-6, 1.0)).map(
        lambda w: w / w.sum()))


class TestPredictiveWeights:
    def test_symmetric_pair_stays_uniform(self):
        np.testing.assert_allclose(predictive_weights([0.5, 0.5], 0.3), [0.5, 0.5])

    def test_single_model(self):
        np.testing.assert_allclose(predictive_weights([1.0], 0.9), [1.0])

    def test_direct_evaluation(self):
        a, b = 0.9 ** 0.9, 0.1 ** 0.9
        np.testing.assert_allclose(predictive_weights([0.9, 0.1], 0.9),
                                   [a / (a + b), b / (a + b)], rtol=1e-14)

    def test_degenerate_weight_rejected(self):
        with pytest.raises(ValueError, match="degenerate weight"):
            predictive_weights([0.5, 0.0, 0.5], 0.9)
        with pytest.raises(ValueError, match="degenerate weight"):
            predictive_weights([1.1, -0.1], 0.9)

    def test_alpha_range_enforced(self):
        for alpha in (0.0, 1.0, -0.5, 1.5):
            with pytest.raises(ValueError):
                predictive_weights([0.5, 0.5], alpha)

    @settings(max_examples=80, deadline=None)
    @given(w=simplexes, alpha=st.floats(0.01, 0.99))
    def test_flattens_toward_uniform(self, w, alpha):
        oh = predictive_weights(w, alpha)
        assert oh.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(oh > 0)
        if w.size > 1 and w.max() - w.min() > 1e-9:
            assert oh.max() < w.max()
            assert oh.min() > w.min()


class TestUpdateWeights:
    def test_equal_likelihoods_change_nothing(self):
        oh = np.array([0.3, 0.7])
        np.testing.assert_allclose(update_weights(oh, [2.5, 2.5]), oh, atol=1e-12)

    def test_direct_arithmetic(self):
        np.testing.assert_allclose(update_weights([0.5, 0.5], [3.0, 1.0]), [0.75, 0.25])

    def test_single_model_always_one(self):
        np.testing.assert_allclose(update_weights([1.0], [0.123]), [1.0])

    def test_all_zero_likelihoods_keep_weights(self):
        oh = np.array([0.6, 0.4])
        with pytest.warns(WeightCollapseWarning):
            w = update_weights(oh, [0.0, 0.0])
        np.testing.assert_allclose(w, oh, atol=1e-9)

    def test_floor_keeps_experts_alive(self):
        w = update_weights([0.5, 0.5], [1.0, 0.0])
        assert w[1] >= 1e-8 / 2 / 2  # floored then renormalized
        assert w.sum() == pytest.approx(1.0, abs=1e-12)

    def test_negative_likelihood_rejected(self):
        with pytest.raises(ValueError):
            update_weights([0.5, 0.5], [1.0, -1.0])

    @settings(max_examples=80, deadline=None)
    @given(w=simplexes, alpha=st.floats(0.05, 0.95), seed=st.integers(0, 2**31))
    def test_simplex_preserved_through_cycles(self, w, alpha, seed):
        rng = np.random.default_rng(seed)
        for _ in range(5):
            oh = predictive_weights(w, alpha)
            lik = rng.uniform(0.0, 10.0, size=w.size)
            w = update_weights(oh, lik)
            assert np.all(w > 0)
            assert w.sum() == pytest.approx(1.0, abs=1e-9)


class TestDensity:
    def test_standard_normal_at_mean(self):
        pred = PredictiveDistribution(0.0, 1.0)
        assert gaussian_predictive_density(pred, 0.0) == \
            pytest.approx(1.0 / math.sqrt(2 * math.pi))

    def test_translation_invariance(self):
        assert gaussian_predictive_density(PredictiveDistribution(2.0, 1.0), 2.0) == \
            pytest.approx(1.0 / math.sqrt(2 * math.pi))

    def test_wider_variance(self):
        assert gaussian_predictive_density(PredictiveDistribution(0.0, 4.0), 0.0) == \
            pytest.approx(1.0 / math.sqrt(8 * math.pi))

    def test_zero_variance_floored(self):
        pred = PredictiveDistribution(0.0, 0.0)
        assert math.isfinite(gaussian_predictive_density(pred, 0.0))


class TestFuse:
    def test_single_model_collapse(self):
        pred = PredictiveDistribution(1.3, 0.7)
        fused = fuse([pred], [1.0])
        assert fused.mean == pytest.approx(1.3, abs=1e-12)
        assert fused.variance == pytest.approx(0.7, abs=1e-12)

    def test_equal_precision_pair(self):
        fused = fuse([PredictiveDistribution(0.0, 1.0), PredictiveDistribution(2.0, 1.0)],
                     [0.5, 0.5])
        assert fused.mean == pytest.approx(1.0)
        assert fused.variance == pytest.approx(1.0)

    def test_unequal_precision_pair(self):
        fused = fuse([PredictiveDistribution(0.0, 1.0), PredictiveDistribution(2.0, 4.0)],
                     [0.5, 0.5])
        assert fused.mean == pytest.approx(0.4)
        assert fused.variance == pytest.approx(1.6)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            fuse([PredictiveDistribution(0.0, 1.0)], [0.5, 0.5])

    @settings(max_examples=60, deadline=None)
    @given(w=simplexes, seed=st.integers(0, 2**31))
    def test_precision_additivity_and_bound(self, w, seed):
        rng = np.random.default_rng(seed)
        preds = [PredictiveDistribution(float(rng.normal()), float(rng.uniform(0.1, 5.0)))
                 for _ in range(w.size)]
        fused = fuse(preds, w)
        precisions = np.array([wj / p.variance for wj, p in zip(w, preds)])
        assert fused.variance == pytest.approx(1.0 / precisions.sum(), rel=1e-12)
        assert fused.variance <= min(p.variance / wj for wj, p in zip(w, preds)) + 1e-12

    def test_permutation_leaves_fusion_unchanged(self, rng):
        preds = [PredictiveDistribution(float(rng.normal()), float(rng.uniform(0.1, 3.0)))
                 for _ in range(5)]
        w = rng.uniform(0.1, 1.0, 5)
        w /= w.sum()
        base = fuse(preds, w)
        perm = rng.permutation(5)
        shuffled = fuse([preds[i] for i in perm], w[perm])
        assert shuffled.mean == pytest.approx(base.mean, abs=1e-12)
        assert shuffled.variance == pytest.approx(base.variance, abs=1e-12)


class TestConfidenceInterval:
    def test_three_sigma_standard(self):
        assert confidence_interval(PredictiveDistribution(0.0, 1.0), 3.0) == \
            pytest.approx((-3.0, 3.0))

    def test_zero_variance(self):
        assert confidence_interval(PredictiveDistribution(5.0, 0.0), 7.0) == (5.0, 5.0)

    def test_one_sigma(self):
        assert confidence_interval(PredictiveDistribution(1.0, 4.0), 1.0) == \
            pytest.approx((-1.0, 3.0))


class TestEnsembleState:
    def test_from_features_starts_uniform(self):
        state = ensemble_from_features([TemporalFeature(1, 1, 0.1)] * 4)
        np.testing.assert_allclose(state.weights, 0.25)
        np.testing.assert_allclose(state.omega_hat, 0.25)
        assert state.alpha == 0.9
        assert state.tau == 50

    def test_needs_a_model(self):
        with pytest.raises(ValueError):
            ensemble_from_features([])

    def test_invalid_weights_rejected(self):
        models = [TemporalFeature(1, 1, 0.1).to_model()]
        with pytest.raises(ValueError):
            EnsembleState(models=models, weights=np.array([0.5]),
                          omega_hat=np.array([0.5]))


class TestGptdfStep:
    def test_first_step_fuses_priors(self):
        features = [TemporalFeature(1.0, 1.0, 0.1), TemporalFeature(0.5, 3.0, 0.1)]
        state = ensemble_from_features(features)
        fused, state = gptdf_step(state, (0.0, 0.7))
        assert fused.distribution.mean == pytest.approx(0.0)
        # prior fusion of variances 1.0 and 0.25 with uniform weights
        expected_var = 1.0 / (0.5 / 1.0 + 0.5 / 0.25)
        assert fused.distribution.variance == pytest.approx(expected_var)
        # first observation does not reweight the experts
        np.testing.assert_allclose(state.weights, 0.5)
        assert state.step == 1
        assert list(state.window_values) == [0.7]

    def test_timestamps_must_increase(self):
        state = ensemble_from_features([TemporalFeature(1, 1, 0.1)])
        gptdf_step(state, (0.0, 0.1))
        with pytest.raises(ValueError, match="increase"):
            gptdf_step(state, (0.0, 0.2))

    def test_window_respects_tau(self):
        state = ensemble_from_features([TemporalFeature(1, 1, 0.1)], tau=5)
        for k in range(12):
            gptdf_step(state, (float(k), 0.0))
        assert len(state.window_times) == 5
        assert list(state.window_times) == [7.0, 8.0, 9.0, 10.0, 11.0]

    def test_single_model_collapses_to_windowed_gp(self):
        feature = TemporalFeature(0.8215, 2.0752, 0.1001)
        stream = generate_synthetic(feature, 80, 3)
        state = ensemble_from_features([feature], tau=20)
        records = run_stream(state, stream)

        model = feature.to_model()
        wt, wy = deque(maxlen=20), deque(maxlen=20)
        for rec in records:
            window = TimeSeries(np.array(wt), np.array(wy)) if wt else None
            ref = gp_core.predict(model, window, rec.t)
            assert rec.prediction.distribution.mean == pytest.approx(ref.mean, abs=1e-12)
            assert rec.prediction.distribution.variance == pytest.approx(ref.variance, abs=1e-12)
            wt.append(rec.t)
            wy.append(rec.truth)

    def test_weights_sum_to_one_throughout(self):
        features = [TemporalFeature(0.8, 2.0, 0.1), TemporalFeature(0.8, 6.0, 0.1),
                    TemporalFeature(1.5, 1.0, 0.1)]
        stream = generate_synthetic(features[0], 60, 1)
        state = ensemble_from_features(features, tau=15)
        for k in range(len(stream)):
            gptdf_step(state, (float(stream.timestamps[k]), float(stream.values[k])))
            assert state.weights.sum() == pytest.approx(1.0, abs=1e-9)
            assert state.omega_hat.sum() == pytest.approx(1.0, abs=1e-9)
            assert np.all(state.weights > 0)

    def test_model_order_permutation_equivariance(self):
        features = [TemporalFeature(0.8, 2.0, 0.1), TemporalFeature(0.8, 8.0, 0.1),
                    TemporalFeature(1.2, 0.7, 0.1)]
        stream = generate_synthetic(features[0], 40, 9)
        perm = [2, 0, 1]
        state_a = ensemble_from_features(features, tau=10)
        state_b = ensemble_from_features([features[i] for i in perm], tau=10)
        recs_a = run_stream(state_a, stream)
        recs_b = run_stream(state_b, stream)
        for ra, rb in zip(recs_a, recs_b):
            assert rb.prediction.distribution.mean == \
                pytest.approx(ra.prediction.distribution.mean, abs=1e-9)
            assert rb.prediction.distribution.variance == \
                pytest.approx(ra.prediction.distribution.variance, abs=1e-9)
        np.testing.assert_allclose(state_b.weights, state_a.weights[perm], atol=1e-9)

    def test_prediction_emitted_at_first_iteration(self):
        # zero warm-up: the record for step 0 exists and carries an interval
        state = ensemble_from_features([TemporalFeature(1, 1, 0.1)])
        records = run_stream(state, TimeSeries.from_values([0.4, 0.5, 0.1]))
        assert [r.step for r in records] == [0, 1, 2]
        lo, hi = records[0].prediction.interval_3sigma
        assert lo < records[0].prediction.distribution.mean < hi


class TestFusedPredictionHelpers:
    def test_interval_matches_three_sigma(self, rng):
        preds = [PredictiveDistribution(1.0, 0.5), PredictiveDistribution(0.0, 2.0)]
        fused = fuse_predictions(preds, [0.4, 0.6])
        lo, hi = fused.interval_3sigma
        sd = math.sqrt(fused.distribution.variance)
        assert lo == pytest.approx(fused.distribution.mean - 3 * sd)
        assert hi == pytest.approx(fused.distribution.mean + 3 * sd)
        assert sum(fused.omega_hat) == pytest.approx(1.0)

    def test_log_record_field_names(self):
        state = ensemble_from_features([TemporalFeature(1, 1, 0.1)] * 2)
        records = run_stream(state, TimeSeries.from_values([0.1, 0.2]))
        rec = log_record(records[0])
        assert list(rec) == ["step", "t", "fused_mean", "fused_variance",
                             "interval_low", "interval_high", "omega_hat"]
        assert rec["step"] == 0
        assert len(rec["omega_hat"]) == 2

    def test_pure_prediction_does_not_advance_state(self):
        state = ensemble_from_features([TemporalFeature(1, 1, 0.1)])
        gptdf_step(state, (0.0, 0.3))
        before = (state.step, tuple(state.window_times))
        fused_prediction(state, 1.0)
        assert (state.step, tuple(state.window_times)) == before
