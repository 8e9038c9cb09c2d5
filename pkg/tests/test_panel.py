import numpy as np
import pytest

from helpers import make_panel, random_panel, write_panel_csv
from twfekit import (
    BalancedPanel,
    PanelError,
    PanelSchema,
    demean,
    k_difference,
    load_panel,
)

SCHEMA = PanelSchema(unit="unit", time="year")


class TestBalancedPanel:
    def test_basic_construction(self, rng):
        panel = random_panel(rng, 4, 3)
        assert panel.n_units == 4
        assert panel.n_periods == 3
        assert panel.periods == (1, 2, 3)
        assert panel.cluster_id == panel.units

    def test_too_few_units(self):
        with pytest.raises(PanelError, match="at least 2 units"):
            make_panel({"y": np.zeros((1, 3)), "x": np.zeros((1, 3))})

    def test_too_few_periods(self):
        with pytest.raises(PanelError, match="at least 2 periods"):
            make_panel({"y": np.zeros((3, 1)), "x": np.zeros((3, 1))})

    def test_nonconsecutive_periods(self):
        with pytest.raises(PanelError, match="consecutive"):
            BalancedPanel(
                units=("a", "b"),
                periods=(1990, 1992),
                series={"y": np.zeros((2, 2))},
            )

    def test_duplicate_units(self):
        with pytest.raises(PanelError, match="duplicate unit"):
            BalancedPanel(
                units=("a", "a"),
                periods=(1, 2),
                series={"y": np.zeros((2, 2))},
            )

    def test_shape_mismatch(self):
        with pytest.raises(PanelError, match="shape"):
            BalancedPanel(
                units=("a", "b"),
                periods=(1, 2),
                series={"y": np.zeros((2, 3))},
            )

    def test_nonfinite_names_cell(self):
        values = np.zeros((2, 2))
        values[1, 0] = np.nan
        with pytest.raises(PanelError, match="unit 'b' in period 1"):
            BalancedPanel(
                units=("a", "b"), periods=(1, 2), series={"y": values}
            )

    def test_series_are_read_only(self, rng):
        panel = random_panel(rng, 3, 3)
        with pytest.raises(ValueError):
            panel.values("y")[0, 0] = 1.0

    def test_unknown_series(self, rng):
        panel = random_panel(rng, 3, 3)
        with pytest.raises(PanelError, match="unknown series 'z'"):
            panel.values("z")

    def test_period_index(self, rng):
        panel = make_panel({"y": rng.normal(size=(2, 4))}, first_period=1990)
        assert panel.period_index(1990) == 0
        assert panel.period_index(1993) == 3
        with pytest.raises(PanelError, match="outside panel range"):
            panel.period_index(1989)

    def test_cluster_length_checked(self):
        with pytest.raises(PanelError, match="cluster_id"):
            BalancedPanel(
                units=("a", "b"),
                periods=(1, 2),
                series={"y": np.zeros((2, 2))},
                cluster_id=("g1",),
            )


class TestTransforms:
    def test_demean_removes_period_means(self, rng):
        panel = random_panel(rng, 9, 7)
        tilde = demean(panel, "x").values
        scale = np.abs(panel.values("x")).max()
        assert np.abs(tilde.sum(axis=0)).max() < 1e-12 * max(scale, 1.0) * 9

    def test_demean_is_idempotent(self, rng):
        panel = random_panel(rng, 6, 5)
        once = demean(panel, "x").values
        again = once - once.mean(axis=0)
        assert np.allclose(once, again, rtol=0, atol=1e-14)

    def test_demean_matches_direct_subtraction(self, rng):
        panel = random_panel(rng, 5, 4)
        v = panel.values("y")
        expected = v - v.mean(axis=0)
        assert np.allclose(demean(panel, "y").values, expected, atol=1e-12)

    def test_k_difference_matches_slicing(self, rng):
        panel = random_panel(rng, 4, 6)
        v = panel.values("x")
        for k in range(1, 6):
            diff = k_difference(panel, "x", k)
            assert diff.gap == k
            assert diff.values.shape == (4, 6 - k)
            assert np.array_equal(diff.values, v[:, k:] - v[:, :-k])

    def test_k_difference_rejects_bad_gap(self, rng):
        panel = random_panel(rng, 3, 4)
        for bad in (0, 4, -1):
            with pytest.raises(PanelError, match="gap must satisfy"):
                k_difference(panel, "x", bad)


class TestLoadPanel:
    def test_round_trip(self, rng, tmp_path):
        panel = random_panel(rng, 6, 5)
        path = write_panel_csv(tmp_path / "panel.csv", panel)
        loaded = load_panel(path, SCHEMA)
        assert loaded.units == panel.units
        assert loaded.periods == panel.periods
        for name in ("y", "x"):
            assert np.array_equal(loaded.values(name), panel.values(name))

    def test_row_shuffle_invariance(self, rng, tmp_path):
        panel = random_panel(rng, 5, 4)
        rows = panel.n_units * panel.n_periods
        path_a = write_panel_csv(tmp_path / "a.csv", panel)
        order = rng.permutation(rows)
        path_b = write_panel_csv(tmp_path / "b.csv", panel, order=order)
        a = load_panel(path_a, SCHEMA)
        b = load_panel(path_b, SCHEMA)
        assert a.units == b.units and a.periods == b.periods
        for name in ("y", "x"):
            assert np.array_equal(a.values(name), b.values(name))

    def test_state_year_dimensions(self, rng, tmp_path):
        panel = random_panel(rng, 51, 29)
        path = write_panel_csv(tmp_path / "states.csv", panel)
        loaded = load_panel(path, SCHEMA)
        assert loaded.n_units == 51
        assert loaded.n_periods == 29

    def test_duplicate_cell_reports_line(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text(
            "unit,year,y\n" "a,1,1.0\n" "a,1,2.0\n" "b,1,3.0\n" "b,2,4.0\n"
        )
        with pytest.raises(PanelError, match="line 3.*duplicate.*'a'.*period 1"):
            load_panel(path, SCHEMA)

    def test_missing_cell_names_unit_and_period(self, tmp_path):
        path = tmp_path / "hole.csv"
        path.write_text(
            "unit,year,y\n"
            "a,1,1.0\na,2,2.0\na,3,3.0\n"
            "b,1,4.0\nb,3,6.0\n"
            "c,1,7.0\nc,2,8.0\nc,3,9.0\n"
        )
        with pytest.raises(
            PanelError, match="unit 'b' has no observation in period 2"
        ):
            load_panel(path, SCHEMA)

    def test_drop_units_warns_with_count(self, tmp_path):
        path = tmp_path / "hole.csv"
        path.write_text(
            "unit,year,y\n"
            "a,1,1.0\na,2,2.0\n"
            "b,1,4.0\n"
            "c,1,7.0\nc,2,8.0\n"
        )
        with pytest.warns(UserWarning, match="dropped 1 of 3 units"):
            panel = load_panel(path, SCHEMA, balance="drop-units")
        assert panel.units == ("a", "c")

    def test_drop_units_leaving_too_few(self, tmp_path):
        path = tmp_path / "thin.csv"
        path.write_text("unit,year,y\na,1,1.0\na,2,2.0\nb,1,4.0\n")
        with pytest.raises(PanelError, match="complete units remain"):
            with pytest.warns(UserWarning):
                load_panel(path, SCHEMA, balance="drop-units")

    def test_missing_year_everywhere(self, tmp_path):
        path = tmp_path / "gap.csv"
        path.write_text(
            "unit,year,y\n"
            "a,1990,1.0\na,1992,2.0\n"
            "b,1990,3.0\nb,1992,4.0\n"
        )
        with pytest.raises(PanelError, match="no observations in period 1991"):
            load_panel(path, SCHEMA)

    def test_non_numeric_value(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "unit,year,y\na,1,1.0\na,2,oops\nb,1,2.0\nb,2,3.0\n"
        )
        with pytest.raises(PanelError, match="line 3.*'oops'.*column 'y'"):
            load_panel(path, SCHEMA)

    def test_non_integer_year(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("unit,year,y\na,1.5,1.0\n")
        with pytest.raises(PanelError, match="time label '1.5'"):
            load_panel(path, SCHEMA)

    def test_float_integer_year_accepted(self, tmp_path):
        path = tmp_path / "ok.csv"
        path.write_text(
            "unit,year,y\na,1990.0,1.0\na,1991.0,2.0\n"
            "b,1990.0,3.0\nb,1991.0,4.0\n"
        )
        panel = load_panel(path, SCHEMA)
        assert panel.periods == (1990, 1991)

    def test_missing_column_named(self, tmp_path):
        path = tmp_path / "cols.csv"
        path.write_text("id,year,y\na,1,1.0\n")
        with pytest.raises(PanelError, match="column 'unit' not found"):
            load_panel(path, SCHEMA)

    def test_series_selection(self, rng, tmp_path):
        panel = random_panel(rng, 3, 3, extra_series=("w",))
        path = write_panel_csv(tmp_path / "p.csv", panel)
        schema = PanelSchema(unit="unit", time="year", series=("y",))
        loaded = load_panel(path, schema)
        assert set(loaded.series) == {"y"}

    def test_cluster_column(self, tmp_path):
        path = tmp_path / "cl.csv"
        path.write_text(
            "unit,year,region,y\n"
            "a,1,south,1.0\na,2,south,2.0\n"
            "b,1,north,3.0\nb,2,north,4.0\n"
        )
        schema = PanelSchema(unit="unit", time="year", cluster="region")
        panel = load_panel(path, schema)
        assert panel.cluster_id == ("south", "north")
        assert set(panel.series) == {"y"}

    def test_inconsistent_cluster_rejected(self, tmp_path):
        path = tmp_path / "cl.csv"
        path.write_text(
            "unit,year,region,y\n"
            "a,1,south,1.0\na,2,north,2.0\n"
            "b,1,north,3.0\nb,2,north,4.0\n"
        )
        schema = PanelSchema(unit="unit", time="year", cluster="region")
        with pytest.raises(PanelError, match="line 3.*unit 'a'"):
            load_panel(path, schema)

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("unit,year,y\na,1,1.0\na,2\n")
        with pytest.raises(PanelError, match="line 3: expected 3 fields"):
            load_panel(path, SCHEMA)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(PanelError, match="empty"):
            load_panel(path, SCHEMA)

    def test_bad_balance_value(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("unit,year,y\na,1,1.0\nb,1,2.0\n")
        with pytest.raises(ValueError, match="balance must be"):
            load_panel(path, SCHEMA, balance="impute")
