import numpy as np
import pytest

from kpiloop import InvalidSpec, SynthSpec, synth_generate
from kpiloop.timeseries import extract_segments


class TestSpecValidation:
    def test_defaults_are_valid(self):
        spec = SynthSpec()
        assert spec.n == 10_000
        assert spec.anomaly_rate == 0.01

    def test_rate_bounds(self):
        with pytest.raises(InvalidSpec):
            SynthSpec(anomaly_rate=0.11)
        with pytest.raises(InvalidSpec):
            SynthSpec(anomaly_rate=-0.01)
        SynthSpec(anomaly_rate=0.0)  # no anomalies is allowed

    def test_other_bounds(self):
        with pytest.raises(InvalidSpec):
            SynthSpec(n=1)
        with pytest.raises(InvalidSpec):
            SynthSpec(period=0)
        with pytest.raises(InvalidSpec):
            SynthSpec(noise_std=-1.0)
        with pytest.raises(InvalidSpec):
            SynthSpec(anomaly_types=("spike", "wobble"))
        with pytest.raises(InvalidSpec):
            SynthSpec(anomaly_types=(), anomaly_rate=0.01)

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(InvalidSpec):
            SynthSpec.from_dict({"n": 100, "bogus": 1})

    def test_from_dict_round_trip(self):
        spec = SynthSpec.from_dict(
            {"n": 500, "seed": 3, "anomaly_types": ["spike", "dip"]}
        )
        assert spec.anomaly_types == ("spike", "dip")


class TestGeneration:
    def test_anomaly_count_matches_rate(self):
        ts = synth_generate(SynthSpec(n=10_000, anomaly_rate=0.01, seed=1))
        assert int(ts.labels.sum()) == 100

    def test_pure_signal_when_rate_and_noise_zero(self):
        spec = SynthSpec(n=500, noise_std=0.0, anomaly_rate=0.0, seed=0)
        ts = synth_generate(spec)
        expected = np.sin(2 * np.pi * np.arange(500) / spec.period)
        assert ts.values == pytest.approx(expected, abs=1e-12)
        assert ts.labels.sum() == 0

    def test_deterministic(self):
        a = synth_generate(SynthSpec(n=2000, seed=9))
        b = synth_generate(SynthSpec(n=2000, seed=9))
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.labels, b.labels)

    def test_seed_changes_series(self):
        a = synth_generate(SynthSpec(n=2000, seed=1))
        b = synth_generate(SynthSpec(n=2000, seed=2))
        assert not np.array_equal(a.values, b.values)

    def test_timestamps_on_regular_grid(self):
        ts = synth_generate(SynthSpec(n=300, seed=0))
        assert ts.sampling_interval == 300
        assert np.all(np.diff(ts.timestamps) == 300)

    def test_single_point_types_give_single_point_segments(self):
        ts = synth_generate(
            SynthSpec(n=5000, seed=4, anomaly_types=("spike", "dip"))
        )
        segments = extract_segments(ts.labels)
        assert segments
        assert all(end == start for start, end in segments)

    def test_segment_types_give_runs(self):
        ts = synth_generate(
            SynthSpec(n=5000, seed=4, anomaly_types=("burst", "level_shift"))
        )
        lengths = [end - start + 1 for start, end in extract_segments(ts.labels)]
        assert max(lengths) >= 3

    def test_anomalous_points_stand_out(self):
        ts = synth_generate(SynthSpec(n=4000, seed=6, anomaly_types=("spike",)))
        anomalies = np.flatnonzero(ts.labels == 1)
        base = np.sin(2 * np.pi * np.arange(4000) / 288)
        residual = np.abs(ts.values - base)
        assert residual[anomalies].min() > 3 * residual.std()
