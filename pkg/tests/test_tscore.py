from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from irfkit.errors import (
    IngestionError,
    InsufficientSampleError,
    ParseError,
    StructuralError,
)
from irfkit.tscore import (
    CsvSchema,
    Panel,
    Series,
    build_design,
    load_csv,
    shift_label,
    trim_common_sample,
    write_csv,
)


def _write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestSeries:
    def test_values_are_read_only(self):
        s = Series("x", [1.0, 2.0])
        with pytest.raises(ValueError):
            s.values[0] = 5.0

    @pytest.mark.parametrize("bad", [[np.nan, 1.0], [1.0, np.inf]])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(IngestionError):
            Series("x", bad)

    def test_empty_rejected(self):
        with pytest.raises(IngestionError):
            Series("x", [])

    def test_index_must_increase(self):
        with pytest.raises(StructuralError):
            Series("x", [1, 2, 3], ["1", "3", "2"])

    def test_numeric_labels_order_numerically(self):
        s = Series("x", [1, 2, 3], ["9", "10", "11"])
        assert s.period_index == ("9", "10", "11")

    def test_index_length_checked(self):
        with pytest.raises(StructuralError):
            Series("x", [1, 2], ["1"])


class TestLoadCsv:
    def test_three_row_series(self, tmp_path):
        path = _write(tmp_path, "t,x\n1,1.0\n2,2.0\n3,3.0\n")
        data = load_csv(path, CsvSchema(period="t"))
        assert_array_equal(data["x"].values, [1.0, 2.0, 3.0])
        assert data["x"].period_index == ("1", "2", "3")
        assert data.rows_dropped == 0

    def test_panel_two_entities_balanced(self, tmp_path):
        path = _write(tmp_path, "entity,period,x\nA,1,1\nA,2,2\nB,1,3\nB,2,4\n")
        panel = load_csv(path)
        assert isinstance(panel, Panel)
        assert panel.entities == ("A", "B")
        assert panel.balanced
        assert_array_equal(panel.series("B", "x").values, [3.0, 4.0])

    def test_unbalanced_panel_flagged(self, tmp_path):
        path = _write(tmp_path, "entity,period,x\nA,1,1\nA,2,2\nB,2,3\n")
        assert not load_csv(path).balanced

    def test_bad_cell_names_row_and_column(self, tmp_path):
        path = _write(tmp_path, "period,x\n1,1.0\n2,abc\n3,3.0\n")
        with pytest.raises(ParseError) as info:
            load_csv(path, na_policy="reject")
        assert info.value.row == 2
        assert info.value.column == "x"
        assert "row 2" in str(info.value)

    def test_missing_cell_rejected(self, tmp_path):
        path = _write(tmp_path, "period,x,y\n1,1,2\n2,,3\n")
        with pytest.raises(IngestionError):
            load_csv(path)

    def test_missing_cell_dropped(self, tmp_path):
        path = _write(tmp_path, "period,x,y\n1,1,2\n2,NA,3\n3,4,5\n")
        data = load_csv(path, na_policy="drop_rows")
        assert data.rows_dropped == 1
        assert data["y"].period_index == ("1", "3")
        assert_array_equal(data["y"].values, [2.0, 5.0])

    def test_duplicate_period_is_structural(self, tmp_path):
        path = _write(tmp_path, "period,x\n1,1\n1,2\n")
        with pytest.raises(StructuralError):
            load_csv(path)

    def test_duplicate_entity_period_is_structural(self, tmp_path):
        path = _write(tmp_path, "entity,period,x\nA,1,1\nB,1,2\nA,1,3\n")
        with pytest.raises(StructuralError):
            load_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IngestionError):
            load_csv(tmp_path / "absent.csv")

    def test_comment_lines_skipped(self, tmp_path):
        path = _write(tmp_path, "# produced by a simulator\nperiod,x\n1,0.5\n")
        assert_array_equal(load_csv(path)["x"].values, [0.5])

    def test_selected_columns_only(self, tmp_path):
        path = _write(tmp_path, "period,x,y\n1,1,2\n")
        data = load_csv(path, CsvSchema(values=("y",)))
        assert list(data) == ["y"]

    def test_ragged_row(self, tmp_path):
        path = _write(tmp_path, "period,x\n1,1,9\n")
        with pytest.raises(ParseError):
            load_csv(path)


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=30))
def test_csv_round_trip_full_precision(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("rt") / "rt.csv"
    a = np.array([r[0] for r in rows])
    b = np.array([r[1] for r in rows])
    write_csv({"a": Series("a", a), "b": Series("b", b)}, path)
    back = load_csv(path)
    assert_array_equal(back["a"].values, a)
    assert_array_equal(back["b"].values, b)
    write_csv(back, path)
    again = load_csv(path)
    assert_array_equal(again["b"].values, b)


def test_panel_round_trip(tmp_path):
    src = _write(tmp_path, "entity,period,x,y\nA,1,0.1,2\nA,2,0.30000000000000004,3\nB,1,1e-300,4\n")
    panel = load_csv(src)
    out = tmp_path / "out.csv"
    write_csv(panel, out)
    back = load_csv(out)
    for e in panel.entities:
        for v in panel.variables:
            assert_array_equal(back.series(e, v).values, panel.series(e, v).values)


class TestBuildDesign:
    def test_horizon_shifts_target(self):
        y = Series("y", [1, 2, 3, 4, 5])
        x = Series("x", [10, 20, 30, 40, 50])
        d = build_design(y, 1, [(x, 0)], include_intercept=False)
        assert_array_equal(d.target, [2, 3, 4, 5])
        assert_array_equal(d.column("x[0]"), [10, 20, 30, 40])
        assert d.target_label == "y[t+1]"

    def test_lag_and_lead_window(self):
        x = Series("x", [1, 2, 3, 4])
        d = build_design(x, 0, [(x, [0, -1, 1])], include_intercept=False, require_dof=False)
        assert d.nobs == 2
        assert_array_equal(d.rows, [1, 2])
        assert_array_equal(d.column("x[-1]"), [1, 2])
        assert_array_equal(d.column("x[+1]"), [3, 4])

    def test_tail_drop_with_leads(self):
        x = Series("x", np.arange(10.0))
        d = build_design(x, 2, [(x, [0, 1, 2])], include_intercept=False)
        assert d.rows_dropped_tail == 4
        assert d.nobs == 6

    def test_padded_leads_keep_tail(self):
        x = Series("x", np.arange(1.0, 11.0))
        d = build_design(x, 1, [(x, [0, 1, 2, 3])], include_intercept=False, pad_tail_leads=True)
        assert d.rows_dropped_tail == 1
        assert d.nobs == 9
        assert_array_equal(d.column("x[+3]")[-3:], [10.0, 0.0, 0.0])

    def test_intercept_first(self):
        x = Series("x", np.arange(5.0))
        assert build_design(x, 0, [(x, -1)]).labels == ("const", "x[-1]")

    def test_too_short(self):
        x = Series("x", np.arange(4.0))
        with pytest.raises(InsufficientSampleError):
            build_design(x, 2, [(x, [-1, 1])])

    def test_too_few_rows_for_columns(self):
        x = Series("x", np.arange(5.0))
        with pytest.raises(InsufficientSampleError):
            build_design(x, 0, [(x, [0, -1, -2])])

    def test_duplicate_labels_rejected(self):
        x = Series("x", np.arange(6.0))
        with pytest.raises(StructuralError):
            build_design(x, 0, [(x, [0]), (x, [0])])

    def test_misaligned_series(self):
        with pytest.raises(StructuralError):
            build_design(Series("y", [1, 2, 3]), 0, [(Series("x", [1, 2]), 0)])

    @pytest.mark.parametrize("shift,label", [(0, "x[0]"), (-2, "x[-2]"), (3, "x[+3]")])
    def test_label_grammar(self, shift, label):
        assert shift_label("x", shift) == label


@settings(max_examples=60, deadline=None)
@given(
    T=st.integers(30, 60),
    h=st.integers(0, 5),
    lags=st.integers(0, 4),
    leads=st.integers(0, 4),
)
def test_row_count_identity(T, h, lags, leads):
    x = Series("x", np.random.default_rng(T).standard_normal(T))
    shifts = [0] + [-l for l in range(1, lags + 1)] + list(range(1, leads + 1))
    d = build_design(x, h, [(x, shifts)], include_intercept=True)
    assert d.nobs == T - lags - (h + leads)
    assert d.rows_dropped_head == lags
    assert d.rows_dropped_tail == h + leads


@settings(max_examples=30, deadline=None)
@given(st.lists(finite, min_size=3, max_size=30))
def test_zero_shift_is_identity(vals):
    x = Series("x", vals)
    z = Series("z", vals[::-1])
    d = build_design(x, 0, [(x, 0), (z, 0)], include_intercept=False)
    assert d.rows_dropped_head == d.rows_dropped_tail == 0
    assert_array_equal(d.target, x.values)
    assert_array_equal(d.column("z[0]"), z.values)


class TestTrimCommonSample:
    def _pair(self):
        x = Series("x", np.arange(10.0))
        a = build_design(x, 1, [(x, [0, -1])])
        b = build_design(x, 1, [(x, [0, -1, 1, 2])])
        return a, b

    def test_trims_to_intersection(self):
        a, b = self._pair()
        ta, tb = trim_common_sample([a, b])
        assert_array_equal(ta.rows, tb.rows)
        assert_array_equal(ta.rows, b.rows)
        assert_allclose(ta.target, tb.target)

    def test_identity(self):
        a, _ = self._pair()
        (t,) = trim_common_sample([a])
        assert_array_equal(t.rows, a.rows)

    def test_disjoint(self):
        x = Series("x", np.arange(10.0))
        a = build_design(x, 0, [(x, 0)]).select_rows(slice(0, 4))
        b = build_design(x, 0, [(x, 0)]).select_rows(slice(6, 10))
        with pytest.raises(InsufficientSampleError):
            trim_common_sample([a, b])
