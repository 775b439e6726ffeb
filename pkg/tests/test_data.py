"""Transformations, standardization, drivers, and design construction."""

import numpy as np
import pytest

from avpvar.data import (
    DriverSet,
    StandardizationState,
    TimeSeriesPanel,
    apply_tcode,
    build_design,
    cumulative_drivers,
    read_panel_csv,
    standardize,
    time_step_drivers,
    transform_panel,
)
from avpvar.errors import DomainError, InsufficientDataError


class TestApplyTcode:
    def test_levels_identity(self):
        out = apply_tcode(np.array([1.0, 2.0, 3.0]), 1)
        np.testing.assert_array_equal(out, [1.0, 2.0, 3.0])

    def test_first_difference(self):
        out = apply_tcode(np.array([1.0, 3.0, 6.0]), 2)
        np.testing.assert_allclose(out, [2.0, 3.0])

    def test_log_difference(self):
        out = apply_tcode(np.array([1.0, 2.0, 4.0]), 5)
        np.testing.assert_allclose(out, [np.log(2.0), np.log(2.0)])

    def test_second_log_difference(self):
        x = np.array([1.0, 2.0, 8.0, 16.0])
        out = apply_tcode(x, 6)
        np.testing.assert_allclose(out, np.diff(np.log(x), n=2))
        assert out.shape == (2,)

    def test_log_rejects_nonpositive_and_names_series(self):
        with pytest.raises(DomainError, match="cpi"):
            apply_tcode(np.array([1.0, 0.0, 2.0]), 5, name="cpi")
        with pytest.raises(DomainError, match="-3"):
            apply_tcode(np.array([1.0, -3.0, 2.0]), 6)

    def test_unknown_code_rejected(self):
        with pytest.raises(DomainError):
            apply_tcode(np.array([1.0, 2.0]), 4)

    def test_too_short_for_code(self):
        with pytest.raises(InsufficientDataError):
            apply_tcode(np.array([1.0, 2.0]), 6)


class TestStandardization:
    def test_two_point_column_sample_convention(self):
        # mean 1, sample sd sqrt(2), so the points land at +-1/sqrt(2)
        state = StandardizationState.fit(np.array([[0.0], [2.0]]))
        np.testing.assert_allclose(state.means, [1.0])
        np.testing.assert_allclose(state.sds, [np.sqrt(2.0)])
        out = state.apply(np.array([[0.0], [2.0]]))
        np.testing.assert_allclose(out[:, 0], [-1.0 / np.sqrt(2.0), 1.0 / np.sqrt(2.0)])

    def test_round_trip(self):
        rng = np.random.default_rng(11)
        values = rng.normal(3.0, 2.5, size=(40, 4))
        state = StandardizationState.fit(values)
        np.testing.assert_allclose(state.invert(state.apply(values)), values, rtol=1e-10)

    def test_zero_variance_names_column(self):
        values = np.column_stack([np.arange(5.0), np.ones(5)])
        with pytest.raises(DomainError, match="flat"):
            StandardizationState.fit(values, names=("trend", "flat"))

    def test_training_window_only(self):
        values = np.vstack([np.zeros((10, 1)), np.full((10, 1), 100.0)])
        values[:10, 0] = np.arange(10.0)
        panel = TimeSeriesPanel(values, ("a",))
        std, state = standardize(panel, training_rows=10)
        np.testing.assert_allclose(state.means, [np.arange(10.0).mean()])
        # rows beyond the window keep the training-window map
        np.testing.assert_allclose(std.values[12, 0], (100.0 - state.means[0]) / state.sds[0])


class TestCumulativeDrivers:
    def test_prefix_sum_example(self):
        z = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        c = cumulative_drivers(z)
        np.testing.assert_allclose(c, [[0.0, 0.0], [1.0, 2.0], [4.0, 6.0]])

    def test_zero_drivers_stay_zero(self):
        c = cumulative_drivers(np.zeros((6, 3)))
        np.testing.assert_array_equal(c, np.zeros((6, 3)))

    def test_single_row_is_zero(self):
        c = cumulative_drivers(np.array([[7.0, 8.0]]))
        np.testing.assert_array_equal(c, [[0.0, 0.0]])

    def test_prefix_sum_law(self):
        rng = np.random.default_rng(5)
        z = rng.normal(size=(30, 4))
        c = cumulative_drivers(z)
        np.testing.assert_allclose(c[1:] - c[:-1], z[:-1], atol=1e-12)
        np.testing.assert_array_equal(c[0], np.zeros(4))


class TestTimeStepDrivers:
    def test_cumulation_gives_step_dummies(self):
        z = time_step_drivers(5)
        assert z.shape == (5, 4)
        c = cumulative_drivers(z)
        # column s of C is the indicator 1{t >= s+1} (0-based rows)
        for s in range(4):
            expected = (np.arange(5) >= s + 1).astype(float)
            np.testing.assert_array_equal(c[:, s], expected)

    def test_needs_two_rows(self):
        with pytest.raises(DomainError):
            time_step_drivers(1)


class TestBuildDesign:
    def test_scalar_ar1_layout(self):
        targets, design = build_design(np.array([[1.0], [2.0], [3.0]]), lags=1)
        np.testing.assert_allclose(design, [[1.0, 1.0], [1.0, 2.0]])
        np.testing.assert_allclose(targets, [[2.0], [3.0]])

    def test_zero_lags_rejected(self):
        with pytest.raises(DomainError):
            build_design(np.ones((4, 1)), lags=0)

    def test_shape_arithmetic(self):
        rng = np.random.default_rng(3)
        targets, design = build_design(rng.normal(size=(5, 2)), lags=2)
        assert design.shape == (3, 5)
        assert targets.shape == (3, 2)
        assert np.all(design[:, 0] == 1.0)

    def test_too_short_rejected(self):
        with pytest.raises(InsufficientDataError):
            build_design(np.ones((2, 1)), lags=2)

    def test_lag_ordering(self):
        y = np.arange(8.0).reshape(4, 2)
        targets, design = build_design(y, lags=2)
        # row for target t carries [1, y_{t-1}, y_{t-2}]
        np.testing.assert_allclose(design[0], [1.0, 2.0, 3.0, 0.0, 1.0])
        np.testing.assert_allclose(targets[0], [4.0, 5.0])

    def test_ols_recovers_ar1_slope(self):
        hits = 0
        z_scores = []
        for seed in range(100):
            rng = np.random.default_rng(1000 + seed)
            y = np.zeros(200)
            for t in range(1, 200):
                y[t] = 0.6 * y[t - 1] + rng.normal()
            targets, design = build_design(y[:, None], lags=1)
            coef, res, *_ = np.linalg.lstsq(design, targets[:, 0], rcond=None)
            dof = design.shape[0] - design.shape[1]
            sigma2 = float(res[0]) / dof
            cov = sigma2 * np.linalg.inv(design.T @ design)
            z = (coef[1] - 0.6) / np.sqrt(cov[1, 1])
            z_scores.append(z)
            if abs(z) > 3.0:
                hits += 1
        assert hits <= 3
        assert abs(np.mean(z_scores)) < 0.5


class TestPanelContainers:
    def test_name_count_checked(self):
        with pytest.raises(DomainError):
            TimeSeriesPanel(np.ones((3, 2)), ("only-one",))

    def test_values_frozen(self):
        panel = TimeSeriesPanel(np.ones((3, 2)), ("a", "b"))
        with pytest.raises(ValueError):
            panel.values[0, 0] = 5.0

    def test_window_preserves_labels(self):
        panel = TimeSeriesPanel(
            np.arange(8.0).reshape(4, 2), ("a", "b"), dates=("q1", "q2", "q3", "q4")
        )
        sub = panel.window(1, 3)
        assert sub.dates == ("q2", "q3")
        np.testing.assert_allclose(sub.values, [[2.0, 3.0], [4.0, 5.0]])

    def test_empty_driver_set(self):
        d = DriverSet.empty(7)
        assert d.n_obs == 7
        assert d.n_drivers == 0


class TestTransformPanel:
    def test_mixed_codes_align_on_common_tail(self):
        raw = np.column_stack([np.arange(1.0, 6.0), np.exp(np.arange(5.0))])
        panel = transform_panel(raw, ("lev", "gro"), (1, 6), dates=range(5))
        # tcode 6 loses two rows, so levels drop their first two as well
        assert panel.n_obs == 3
        np.testing.assert_allclose(panel.values[:, 0], [3.0, 4.0, 5.0])
        np.testing.assert_allclose(panel.values[:, 1], np.zeros(3), atol=1e-12)
        assert panel.dates == (2, 3, 4)

    def test_unknown_code_names_series(self):
        with pytest.raises(DomainError, match="gdp"):
            transform_panel(np.ones((5, 1)) + np.arange(5.0)[:, None], ("gdp",), (9,))


class TestReadPanelCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "panel.csv"
        path.write_text("date,a,b\n2001Q1,1.0,4\n2001Q2,2.5,5\n", encoding="utf-8")
        dates, names, values = read_panel_csv(path)
        assert dates == ("2001Q1", "2001Q2")
        assert names == ("a", "b")
        np.testing.assert_allclose(values, [[1.0, 4.0], [2.5, 5.0]])

    def test_missing_value_reported_with_context(self, tmp_path):
        path = tmp_path / "panel.csv"
        path.write_text("date,a\n2001Q1,1.0\n2001Q2,\n", encoding="utf-8")
        with pytest.raises(DomainError, match="a"):
            read_panel_csv(path)

    def test_absent_file(self, tmp_path):
        with pytest.raises(DomainError, match="not found"):
            read_panel_csv(tmp_path / "nope.csv")
