"""Segmentation, resampling and normalization tests."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ecgstudy.preprocess import (
    LeadNotFoundError, MAX_SEGMENT_S, MIN_SEGMENT_S, PreprocessError, Segment,
    TooShortError, extract_lead, normalize, resample, resample_segment,
    split_segments,
)

from conftest import make_record


def signal_of(duration_s, fs=500.0):
    return extract_lead(make_record(duration_s, fs=fs), "I")


class TestExtractLead:
    def test_projection(self, record_12lead):
        lead = extract_lead(record_12lead, "I")
        np.testing.assert_array_equal(lead.samples, record_12lead.samples[0])
        assert lead.sampling_rate_hz == record_12lead.sampling_rate_hz

    def test_missing_lead_lists_available(self):
        rec = make_record(1.0, n_leads=1)
        with pytest.raises(LeadNotFoundError, match="available"):
            extract_lead(rec, "II")

    def test_twelve_lead_to_lead_i(self, record_12lead):
        assert extract_lead(record_12lead, "I").lead_name == "I"


class TestSplitSegments:
    def test_25s_single_segment(self):
        [seg] = split_segments(signal_of(25.0))
        assert seg.start_s == 0.0
        assert seg.duration_s == pytest.approx(25.0)

    def test_70s_policy(self):
        segs = split_segments(signal_of(70.0))
        assert [(s.start_s, s.start_s + s.duration_s) for s in segs] == [
            (0.0, 30.0), (30.0, 60.0), (60.0, 70.0)
        ]

    def test_65s_trailing_rescue_window(self):
        segs = split_segments(signal_of(65.0))
        assert [(s.start_s, s.start_s + s.duration_s) for s in segs] == [
            (0.0, 30.0), (30.0, 60.0), (55.0, 65.0)
        ]

    def test_too_short(self):
        with pytest.raises(TooShortError):
            split_segments(signal_of(9.9))

    def test_exact_multiple_has_no_rescue(self):
        segs = split_segments(signal_of(60.0))
        assert len(segs) == 2

    def test_segment_ids_carry_provenance(self):
        segs = split_segments(signal_of(70.0))
        assert [s.segment_id for s in segs] == ["rec_s00", "rec_s01", "rec_s02"]

    @settings(max_examples=60, deadline=None)
    @given(st.floats(10.0, 300.0), st.sampled_from([250.0, 360.0, 500.0]))
    def test_randomized_durations(self, duration, fs):
        signal = signal_of(duration, fs=fs)
        segs = split_segments(signal)
        n = len(signal.samples)
        covered = np.zeros(n, dtype=bool)
        for seg in segs:
            tol = 1.0 / fs
            assert MIN_SEGMENT_S - tol <= seg.duration_s <= MAX_SEGMENT_S + tol
            a = int(round(seg.start_s * fs))
            covered[a:a + len(seg.samples)] = True
        assert covered.all(), "every input sample must fall in some window"
        assert len(segs) >= 1


class TestSegmentInvariants:
    def test_duration_bounds_enforced(self):
        with pytest.raises(PreprocessError):
            Segment("p", 0, "I", np.zeros(100), 500.0, 0.0)

    def test_empty_rejected(self):
        with pytest.raises(PreprocessError):
            Segment("p", 0, "I", np.zeros(0), 500.0, 0.0)


class TestResample:
    def test_identity_rate(self):
        x = np.arange(10.0)
        out = resample(x, 100.0, 100.0)
        np.testing.assert_array_equal(out, x)

    def test_ramp_upsample_interpolates(self):
        out = resample(np.array([0.0, 1.0, 2.0, 3.0]), 4.0, 8.0)
        assert 0.5 in out and 1.5 in out

    def test_sample_count(self):
        out = resample(np.zeros(5000), 500.0, 250.0)
        assert abs(len(out) - 2500) <= 1

    def test_no_overshoot(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=400)
        out = resample(x, 100.0, 173.0)
        assert out.min() >= x.min() - 1e-12
        assert out.max() <= x.max() + 1e-12

    def test_bad_target(self):
        with pytest.raises(PreprocessError):
            resample(np.zeros(10), 100.0, 0.0)

    def test_resample_segment_metadata(self, segment_10s):
        out = resample_segment(segment_10s, 125.0)
        assert out.sampling_rate_hz == 125.0
        assert out.duration_s == pytest.approx(segment_10s.duration_s, abs=1 / 125.0)
        assert out.parent_id == segment_10s.parent_id


class TestNormalize:
    def test_constant_maps_to_zeros(self):
        # Exactly representable constant -> exact zeros; otherwise the eps
        # guard bounds the residual far below any physiological scale.
        np.testing.assert_array_equal(normalize(np.full(100, 8.0)), np.zeros(100))
        np.testing.assert_allclose(normalize(np.full(100, 7.3)), 0.0, atol=1e-6)

    def test_alternating_unit(self):
        out = normalize(np.tile([-1.0, 1.0], 50))
        np.testing.assert_allclose(np.abs(out), 1.0, atol=1e-6)

    def test_moments(self):
        rng = np.random.default_rng(1)
        out = normalize(rng.normal(5.0, 37.0, size=4096))
        assert abs(out.mean()) < 1e-9
        assert abs(out.std() - 1.0) < 1e-6

    def test_idempotent(self):
        rng = np.random.default_rng(2)
        x = rng.normal(0, 300, size=1000)
        once = normalize(x)
        np.testing.assert_allclose(normalize(once), once, atol=1e-6)

    def test_empty(self):
        with pytest.raises(PreprocessError):
            normalize(np.zeros(0))
