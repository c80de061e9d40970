import numpy as np
import pytest

from kpiloop import (
    DuplicateTimestamp,
    EmptySeries,
    MalformedRow,
    TimeSeries,
    extract_segments,
    fill_gaps,
    load_csv,
    write_csv,
)
from kpiloop.timeseries import modal_interval


def make_series(values, labels=None, step=60):
    values = np.asarray(values, dtype=np.float64)
    return TimeSeries(
        id="t",
        timestamps=np.arange(len(values), dtype=np.int64) * step,
        values=values,
        labels=None if labels is None else np.asarray(labels, dtype=np.int8),
        sampling_interval=0,
    )


class TestTimeSeries:
    def test_basic_fields(self):
        ts = make_series([1.0, 2.0, 3.0], labels=[0, 1, 0])
        assert ts.n == 3
        assert ts.has_labels
        assert ts.sampling_interval == 60
        assert not ts.synthetic_mask.any()

    def test_rejects_unsorted_timestamps(self):
        with pytest.raises(ValueError):
            TimeSeries(
                id="t",
                timestamps=np.array([10, 5], dtype=np.int64),
                values=np.array([1.0, 2.0]),
                labels=None,
                sampling_interval=0,
            )

    def test_rejects_non_finite_values(self):
        with pytest.raises(ValueError):
            make_series([1.0, np.nan])

    def test_rejects_bad_labels(self):
        with pytest.raises(ValueError):
            make_series([1.0, 2.0], labels=[0, 2])

    def test_arrays_are_read_only(self):
        ts = make_series([1.0, 2.0])
        with pytest.raises(ValueError):
            ts.values[0] = 5.0

    def test_modal_interval_prefers_smallest_on_ties(self):
        assert modal_interval(np.array([0, 60, 120, 420], dtype=np.int64)) == 60
        assert modal_interval(np.array([0, 60, 360], dtype=np.int64)) == 60


class TestCsvRoundTrip:
    def test_round_trip_preserves_everything(self, tmp_path):
        ts = make_series([1.5, -2.25, 1e-9], labels=[0, 1, 0])
        path = tmp_path / "series.csv"
        write_csv(ts, path)
        back = load_csv(path, series_id="t")
        assert np.array_equal(back.timestamps, ts.timestamps)
        assert np.array_equal(back.values, ts.values)
        assert np.array_equal(back.labels, ts.labels)

    def test_rows_sorted_by_timestamp(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("timestamp,value,label\n300,3.0,0\n0,1.0,1\n")
        ts = load_csv(path)
        assert list(ts.timestamps) == [0, 300]
        assert list(ts.values) == [1.0, 3.0]
        assert list(ts.labels) == [1, 0]

    def test_sort_is_idempotent_with_in_order_input(self, tmp_path):
        shuffled = tmp_path / "a.csv"
        ordered = tmp_path / "b.csv"
        shuffled.write_text("timestamp,value\n300,3.0\n0,1.0\n60,2.0\n")
        ordered.write_text("timestamp,value\n0,1.0\n60,2.0\n300,3.0\n")
        a, b = load_csv(shuffled), load_csv(ordered)
        assert np.array_equal(a.timestamps, b.timestamps)
        assert np.array_equal(a.values, b.values)

    def test_duplicate_timestamp_rejected(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("timestamp,value\n0,1.0\n0,2.0\n")
        with pytest.raises(DuplicateTimestamp):
            load_csv(path)

    def test_malformed_value_rejected(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("timestamp,value\n0,notanumber\n")
        with pytest.raises(MalformedRow):
            load_csv(path)

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("time,value\n0,1.0\n")
        with pytest.raises(MalformedRow):
            load_csv(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("timestamp,value\n")
        with pytest.raises(EmptySeries):
            load_csv(path)

    def test_series_without_labels(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("timestamp,value\n0,1.0\n60,2.0\n")
        ts = load_csv(path)
        assert ts.labels is None


class TestFillGaps:
    def test_no_gaps_returns_input_unchanged(self):
        ts = make_series([1.0, 2.0, 3.0])
        assert fill_gaps(ts) is ts

    def test_interpolates_missing_grid_points(self):
        ts = TimeSeries(
            id="g",
            timestamps=np.array([0, 60, 240], dtype=np.int64),
            values=np.array([0.0, 1.0, 4.0]),
            labels=np.array([0, 1, 0], dtype=np.int8),
            sampling_interval=0,
        )
        filled = fill_gaps(ts)
        assert list(filled.timestamps) == [0, 60, 120, 180, 240]
        assert filled.values == pytest.approx([0.0, 1.0, 2.0, 3.0, 4.0])
        assert list(filled.labels) == [0, 1, 0, 0, 0]
        assert list(filled.synthetic_mask) == [False, False, True, True, False]

    def test_filled_series_keeps_interval(self):
        ts = TimeSeries(
            id="g",
            timestamps=np.array([0, 300, 900], dtype=np.int64),
            values=np.array([1.0, 2.0, 3.0]),
            labels=None,
            sampling_interval=0,
        )
        filled = fill_gaps(ts)
        assert filled.sampling_interval == 300
        assert filled.n == 4
        assert filled.labels is None


class TestExtractSegments:
    def test_empty_and_all_zero(self):
        assert extract_segments(np.array([], dtype=np.int8)) == []
        assert extract_segments(np.zeros(5, dtype=np.int8)) == []

    def test_single_runs(self):
        assert extract_segments(np.array([0, 1, 1, 0, 1], dtype=np.int8)) == [
            (1, 2),
            (4, 4),
        ]

    def test_boundary_runs(self):
        assert extract_segments(np.array([1, 1, 0, 0, 1], dtype=np.int8)) == [
            (0, 1),
            (4, 4),
        ]
        assert extract_segments(np.ones(4, dtype=np.int8)) == [(0, 3)]
