"""Lead extraction, 10-30 s segmentation, resampling and normalization.

Segmentation policy: greedy non-overlapping 30 s windows from the start;
a final remainder of at least 10 s becomes its own segment; a shorter
nonzero remainder is rescued as the trailing 10 s window ending at the
signal end (overlap with the previous window is allowed). No sample is
ever dropped and no emitted segment is shorter than 10 s.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .ecgio import EcgRecord

MIN_SEGMENT_S = 10.0
MAX_SEGMENT_S = 30.0

# Canonical model sampling rate: keeps the sub-40 Hz diagnostic band at a
# quarter of the typical 500 Hz acquisition cost.
MODEL_SAMPLING_RATE_HZ = 250.0

NORM_EPS_UV = 1e-8


class PreprocessError(ValueError):
    pass


class LeadNotFoundError(PreprocessError):
    pass


class TooShortError(PreprocessError):
    """Signal shorter than the 10 s analysis minimum; record is excluded."""


@dataclass(frozen=True)
class LeadSignal:
    """A single lead pulled out of a record."""

    record_id: str
    lead_name: str
    samples: np.ndarray
    sampling_rate_hz: float

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sampling_rate_hz


@dataclass(frozen=True)
class Segment:
    """A single-lead 10-30 s excerpt with provenance."""

    parent_id: str
    segment_index: int
    lead_name: str
    samples: np.ndarray
    sampling_rate_hz: float
    start_s: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.size == 0:
            raise PreprocessError("empty segment")
        tol = 1.0 / self.sampling_rate_hz  # one sample period of slack
        if not (MIN_SEGMENT_S - tol <= self.duration_s <= MAX_SEGMENT_S + tol):
            raise PreprocessError(
                f"segment duration {self.duration_s:.3f} s outside "
                f"[{MIN_SEGMENT_S:g}, {MAX_SEGMENT_S:g}] s"
            )

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sampling_rate_hz

    @property
    def segment_id(self) -> str:
        return f"{self.parent_id}_s{self.segment_index:02d}"


def extract_lead(record: EcgRecord, lead_name: str = "I") -> LeadSignal:
    if lead_name not in record.lead_names:
        raise LeadNotFoundError(
            f"record {record.record_id!r} has no lead {lead_name!r}; "
            f"available: {list(record.lead_names)}"
        )
    return LeadSignal(
        record_id=record.record_id,
        lead_name=lead_name,
        samples=record.lead(lead_name),
        sampling_rate_hz=record.sampling_rate_hz,
    )


def split_segments(signal: LeadSignal) -> list[Segment]:
    """Split a lead into 10-30 s segments covering every input sample."""
    fs = signal.sampling_rate_hz
    n = len(signal.samples)
    w30 = int(round(MAX_SEGMENT_S * fs))
    w10 = int(round(MIN_SEGMENT_S * fs))
    if n < w10:
        raise TooShortError(
            f"record {signal.record_id!r}: {n / fs:.2f} s is below the "
            f"{MIN_SEGMENT_S:g} s minimum"
        )

    bounds: list[tuple[int, int]] = []
    pos = 0
    while n - pos >= w30:
        bounds.append((pos, pos + w30))
        pos += w30
    remainder = n - pos
    if remainder >= w10:
        bounds.append((pos, n))
    elif remainder > 0:
        bounds.append((n - w10, n))  # trailing rescue window, may overlap

    return [
        Segment(
            parent_id=signal.record_id,
            segment_index=i,
            lead_name=signal.lead_name,
            samples=signal.samples[a:b],
            sampling_rate_hz=fs,
            start_s=a / fs,
        )
        for i, (a, b) in enumerate(bounds)
    ]


def resample(samples: np.ndarray, source_hz: float, target_hz: float) -> np.ndarray:
    """Linear interpolation onto a uniform grid at ``target_hz``."""
    if target_hz <= 0:
        raise PreprocessError(f"target rate must be positive, got {target_hz}")
    if source_hz <= 0:
        raise PreprocessError(f"source rate must be positive, got {source_hz}")
    samples = np.asarray(samples, dtype=np.float64)
    if source_hz == target_hz:
        return samples.copy()
    n_out = int(round(len(samples) * target_hz / source_hz))
    n_out = max(n_out, 1)
    t_out = np.arange(n_out) / target_hz
    t_in = np.arange(len(samples)) / source_hz
    return np.interp(t_out, t_in, samples)


def resample_segment(segment: Segment, target_hz: float = MODEL_SAMPLING_RATE_HZ) -> Segment:
    out = resample(segment.samples, segment.sampling_rate_hz, target_hz)
    return replace(segment, samples=out, sampling_rate_hz=target_hz)


def normalize(samples: np.ndarray) -> np.ndarray:
    """Per-segment z-score; a flatline maps to all zeros via the eps guard."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        raise PreprocessError("cannot normalize an empty signal")
    return (samples - samples.mean()) / (samples.std() + NORM_EPS_UV)
