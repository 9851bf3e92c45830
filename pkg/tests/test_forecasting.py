"""Two-layer blended forecasting: persistence oracles, blender selection,
reduction properties, early-morning models, and full-day forecasts."""

from datetime import date, timedelta

import numpy as np
import pytest

from solarblend.data import DAY_HOURS, DayProfile, HourRecord
from solarblend.forecasting import (EARLY_HOURS, M3Regressor,
                                    MissingPreviousDay, TooFewSamples,
                                    DimensionMismatch, _merge_small_clusters,
                                    day_feature_row, early_morning_set,
                                    forecast_day, hourly_transition_set,
                                    persistence_cloudiness, persistence_day,
                                    train_early_morning, train_uc_m3)
from solarblend.learners import BLENDER_CANDIDATES, LearnerVariant

SMALL_CATALOG = (
    LearnerVariant("ridge", "ridge", {"alpha": 1e-6}),
    LearnerVariant("knn", "knn", {"k": 3}),
)
RIDGE_BLENDER = (LearnerVariant("ridge", "ridge", {"alpha": 1e-8}),)


def _synth_day(d, seed=0, csi=0.8):
    rng = np.random.default_rng(seed)
    recs = []
    for hour in DAY_HOURS:
        clr = max(0.0, 900.0 * np.sin(np.pi * (hour - 6) / 14))
        recs.append(HourRecord(
            date=d, hour=hour, ghi=round(clr * csi, 3), ghi_clr=round(clr, 3),
            dni=400.0, dhi=150.0, temp=20.0 + rng.normal(), rh=40.0,
            pres=1013.0, ws=3.0, wd=180.0, img_mu=0.0, img_sigma=0.05,
            img_entropy=2.0))
    return DayProfile(d, tuple(recs))


def _days(n, seed=0):
    rng = np.random.default_rng(seed)
    return [_synth_day(date(2023, 3, 1) + timedelta(days=i), seed=i,
                       csi=float(rng.uniform(0.3, 1.0))) for i in range(n)]


class TestPersistenceCloudiness:
    def test_spot_value(self):
        assert persistence_cloudiness(400.0, 800.0, 900.0) == pytest.approx(450.0)

    def test_clear_sky_identity(self):
        assert persistence_cloudiness(750.0, 750.0, 600.0) == pytest.approx(600.0)

    def test_zero_clear_sky_convention(self):
        assert persistence_cloudiness(100.0, 0.0, 500.0) == pytest.approx(500.0)

    def test_clear_day_reproduced_exactly(self):
        d1 = _synth_day(date(2023, 3, 1), csi=1.0)
        d2 = _synth_day(date(2023, 3, 2), csi=1.0)
        fc = persistence_day(d2, d1)
        actual = [d2.record_at(h).ghi for h in DAY_HOURS]
        assert fc == pytest.approx(actual, abs=1e-9)

    def test_missing_previous_day(self):
        with pytest.raises(MissingPreviousDay):
            persistence_day(_synth_day(date(2023, 3, 1)), None)

    def test_forecasts_non_negative(self):
        fc = persistence_day(_synth_day(date(2023, 3, 2), csi=0.4),
                             _synth_day(date(2023, 3, 1), csi=0.9))
        assert np.all(fc >= 0)


class TestM3Regressor:
    def _linear(self, n=80, d=3, seed=0):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, d))
        y = X @ np.arange(1, d + 1) + 5.0 + 0.01 * rng.normal(size=n)
        return X, y

    def test_blender_input_length_matches_catalog(self):
        X, y = self._linear()
        m = M3Regressor(folds=4, seed=0).fit(X, y)
        Z = m.first_layer_predictions(X[:3])
        assert Z.shape == (3, 11)

    def test_cv_table_shape(self):
        X, y = self._linear()
        m = M3Regressor(catalog=SMALL_CATALOG, folds=4, seed=0).fit(X, y)
        assert set(m.cv_table_) == {c.name for c in BLENDER_CANDIDATES}
        assert all(len(s) == 4 for s in m.cv_table_.values())

    def test_selected_blender_has_minimal_mean_cv(self):
        X, y = self._linear(seed=2)
        m = M3Regressor(catalog=SMALL_CATALOG, folds=5, seed=1).fit(X, y)
        means = {n: float(np.mean(s)) for n, s in m.cv_table_.items()}
        assert means[m.blender_name_] == min(means.values())

    def test_constant_target_reproduced(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(60, 2))
        y = np.full(60, 300.0)
        m = M3Regressor(catalog=SMALL_CATALOG,
                        blender_candidates=RIDGE_BLENDER,
                        folds=4, seed=0).fit(X, y)
        assert m.predict(X) == pytest.approx(np.full(60, 300.0), abs=1e-3)

    def test_single_variant_identity_blender_reduces_to_variant(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(80, 3))
        y = X @ np.array([1.0, 2.0, 3.0]) + 5.0  # exactly linear
        one = (LearnerVariant("lin", "ridge", {"alpha": 1e-8}),)
        m = M3Regressor(catalog=one, blender_candidates=RIDGE_BLENDER,
                        folds=4, seed=0).fit(X, y)
        direct = m.predict_variant(X, "lin")
        assert m.predict(X) == pytest.approx(direct, abs=1e-6)

    def test_deterministic_blender_selection(self):
        X, y = self._linear(seed=5)
        a = M3Regressor(catalog=SMALL_CATALOG, folds=4, seed=7).fit(X, y)
        b = M3Regressor(catalog=SMALL_CATALOG, folds=4, seed=7).fit(X, y)
        assert a.blender_name_ == b.blender_name_
        assert np.array_equal(a.predict(X[:5]), b.predict(X[:5]))

    def test_parallel_fit_matches_serial(self):
        X, y = self._linear(seed=6)
        serial = M3Regressor(catalog=SMALL_CATALOG, folds=4, seed=3,
                             n_jobs=1).fit(X, y)
        par = M3Regressor(catalog=SMALL_CATALOG, folds=4, seed=3,
                          n_jobs=2).fit(X, y)
        assert serial.blender_name_ == par.blender_name_
        assert np.array_equal(serial.oof_matrix_, par.oof_matrix_)
        assert np.array_equal(serial.predict(X[:5]), par.predict(X[:5]))

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamples):
            M3Regressor(folds=10).fit(np.zeros((6, 2)), np.zeros(6))

    def test_dimension_mismatch(self):
        X, y = self._linear()
        m = M3Regressor(catalog=SMALL_CATALOG, folds=4).fit(X, y)
        with pytest.raises(DimensionMismatch):
            m.predict(np.zeros((2, 9)))

    def test_negative_blend_clipped_to_zero(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(40, 2))
        y = X @ np.array([5.0, 5.0]) - 50.0  # mostly negative targets
        m = M3Regressor(catalog=SMALL_CATALOG,
                        blender_candidates=RIDGE_BLENDER,
                        folds=4, seed=0).fit(X, y)
        assert np.all(m.predict(X) >= 0.0)


class TestTrainingSets:
    def test_feature_row_has_13_entries(self):
        row = day_feature_row(_synth_day(date(2023, 3, 1)), 12)
        assert row.shape == (13,)

    def test_hourly_transitions_cover_12_hours_per_day(self):
        days = _days(4)
        X, y = hourly_transition_set(days)
        assert X.shape == (48, 13)
        assert y.shape == (48,)

    def test_early_morning_dimensions(self):
        days = _days(6)
        for hour, dim in zip(EARLY_HOURS, (1, 2, 3)):
            X, y = early_morning_set(days, hour)
            assert X.shape == (6, dim)

    def test_merge_small_clusters(self):
        days = _days(30, seed=2)
        labels = np.array([0] * 25 + [1] * 5)
        merged, merges = _merge_small_clusters(days, labels, min_days=10)
        assert set(np.unique(merged)) == {0}
        assert merges == [(1, 0)]


class TestFullDayForecast:
    @pytest.fixture(scope="class")
    def bundle(self):
        days = _days(40, seed=1)
        return days, train_uc_m3(days, np.zeros(40, dtype=int),
                                 catalog=SMALL_CATALOG,
                                 blender_candidates=RIDGE_BLENDER, folds=4,
                                 seed=0)

    def test_13_hour_output_clipped_to_cap(self, bundle):
        days, b = bundle
        fc, recognized = forecast_day(b, None, days[5], days[4])
        assert fc.shape == (13,)
        assert recognized == 0
        for i, hour in enumerate(DAY_HOURS):
            clr = days[5].record_at(hour).ghi_clr
            assert 0.0 <= fc[i] <= 1.2 * clr + 1e-9

    def test_variant_path_differs_from_blend_path(self, bundle):
        days, b = bundle
        fc_blend, _ = forecast_day(b, None, days[7], days[6])
        fc_knn, _ = forecast_day(b, None, days[7], days[6], variant="knn")
        assert fc_blend[0] == fc_knn[0]  # 7am persistence shared
        assert not np.array_equal(fc_blend, fc_knn)

    def test_missing_previous_day(self, bundle):
        days, b = bundle
        with pytest.raises(MissingPreviousDay):
            forecast_day(b, None, days[0], None)

    def test_shared_early_morning_models_reused(self):
        days = _days(40, seed=3)
        early = train_early_morning(days, catalog=SMALL_CATALOG,
                                    blender_candidates=RIDGE_BLENDER,
                                    folds=4, seed=5)
        b = train_uc_m3(days, np.zeros(40, dtype=int), catalog=SMALL_CATALOG,
                        blender_candidates=RIDGE_BLENDER, folds=4, seed=5,
                        early_morning=early)
        assert b.early_morning is early
