"""Deterministic synthetic ECG generator for desk-scale training.

Four classes on lead I:
  NSR   - regular P-QRS-T beats, RR jitter under 3%.
  AFIB  - independently drawn RR intervals (coefficient of variation
          above 15%), no P wave, low-amplitude 4-9 Hz fibrillatory
          baseline oscillation.
  OTHER - regular rhythm with a widened QRS, or periodically dropped
          beats.
  NOISE - band-limited noise or near-flatline with no QRS periodicity.

All morphology constants are fixed; a spec's seed fully determines the
output waveform.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ecgio import EcgRecord, REFERENCE_LABELS

MODEL_CLASSES = ("NSR", "AFIB", "OTHER", "NOISE")

# Template wave parameters: (center offset within the beat in units of the
# RR interval, width in seconds, amplitude in uV).
_P_WAVE = (-0.16, 0.025, 120.0)
_Q_WAVE = (-0.02, 0.010, -100.0)
_R_WAVE = (0.0, 0.012, 1100.0)
_S_WAVE = (0.02, 0.010, -180.0)
_T_WAVE = (0.22, 0.060, 280.0)


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SynthSpec:
    label: str
    duration_s: float = 10.0
    sampling_rate_hz: float = 500.0
    heart_rate_bpm: tuple[float, float] = (55.0, 95.0)
    seed: int = 0

    def __post_init__(self):
        if self.label not in MODEL_CLASSES:
            raise SynthError(f"label {self.label!r} not in {MODEL_CLASSES}")
        if not (10.0 <= self.duration_s <= 30.0):
            raise SynthError(f"duration {self.duration_s} s outside [10, 30]")
        if self.sampling_rate_hz <= 0:
            raise SynthError("sampling rate must be positive")
        lo, hi = self.heart_rate_bpm
        if not (0 < lo <= hi):
            raise SynthError(f"empty heart-rate range {self.heart_rate_bpm}")


@dataclass(frozen=True)
class SynthRecord:
    """Generated record plus its 4-class training label."""

    record: EcgRecord
    label: str


def _gauss(t: np.ndarray, center: float, width: float, amp: float) -> np.ndarray:
    return amp * np.exp(-0.5 * ((t - center) / width) ** 2)


def _beat_train(
    t: np.ndarray,
    beat_times: np.ndarray,
    waves,
    rr_mean: float,
) -> np.ndarray:
    out = np.zeros_like(t)
    for bt in beat_times:
        for offset, width, amp in waves:
            center = bt + offset * rr_mean
            # Gaussians are negligible beyond 6 widths; restrict the window.
            lo, hi = np.searchsorted(t, [center - 6 * width, center + 6 * width])
            out[lo:hi] += _gauss(t[lo:hi], center, width, amp)
    return out


def synth_signal(spec: SynthSpec) -> np.ndarray:
    """Generate one lead-I waveform in microvolts."""
    rng = np.random.default_rng(spec.seed)
    fs = spec.sampling_rate_hz
    n = int(round(spec.duration_s * fs))
    t = np.arange(n) / fs
    hr = rng.uniform(*spec.heart_rate_bpm)
    rr_mean = 60.0 / hr
    n_beats = int(spec.duration_s / rr_mean) + 3

    if spec.label == "NSR":
        rr = rr_mean * (1.0 + rng.uniform(-0.02, 0.02, size=n_beats))
        beats = np.cumsum(rr) - rr[0] / 2
        waves = (_P_WAVE, _Q_WAVE, _R_WAVE, _S_WAVE, _T_WAVE)
        x = _beat_train(t, beats, waves, rr_mean)
    elif spec.label == "AFIB":
        # Irregularly irregular RR, no P wave, fibrillatory baseline.
        rr = rr_mean * rng.uniform(0.55, 1.45, size=2 * n_beats)
        beats = np.cumsum(rr) - rr[0] / 2
        waves = (_Q_WAVE, _R_WAVE, _S_WAVE, _T_WAVE)
        x = _beat_train(t, beats, waves, rr_mean)
        f_fib = rng.uniform(4.0, 9.0)
        phase = rng.uniform(0, 2 * np.pi)
        x += 60.0 * np.sin(2 * np.pi * f_fib * t + phase)
        x += 25.0 * np.sin(2 * np.pi * (f_fib * 1.31) * t + phase * 0.7)
    elif spec.label == "OTHER":
        rr = rr_mean * (1.0 + rng.uniform(-0.02, 0.02, size=n_beats))
        beats = np.cumsum(rr) - rr[0] / 2
        if rng.random() < 0.5:
            # Widened QRS (bundle-branch-block-like), reduced amplitude.
            waves = (
                _P_WAVE,
                (-0.05, 0.035, -150.0),
                (0.0, 0.045, 750.0),
                (0.06, 0.035, -250.0),
                (0.26, 0.070, -220.0),
            )
            x = _beat_train(t, beats, waves, rr_mean)
        else:
            # Periodically dropped beats (2:1-style block).
            keep = np.ones(len(beats), dtype=bool)
            keep[2::3] = False
            waves = (_P_WAVE, _Q_WAVE, _R_WAVE, _S_WAVE, _T_WAVE)
            x = _beat_train(t, beats[keep], waves, rr_mean)
            # P waves continue for the dropped beats.
            x += _beat_train(t, beats[~keep], (_P_WAVE,), rr_mean)
    else:  # NOISE
        if rng.random() < 0.5:
            # Band-limited noise: white noise smoothed by a moving average.
            w = rng.normal(0.0, 400.0, size=n + 50)
            kernel = np.ones(25) / 25.0
            x = np.convolve(w, kernel, mode="same")[:n]
            x += 150.0 * np.sin(2 * np.pi * rng.uniform(0.2, 1.5) * t)
        else:
            # Near-flatline with drift.
            x = 30.0 * np.sin(2 * np.pi * rng.uniform(0.05, 0.3) * t)
            x += rng.normal(0.0, 10.0, size=n)

    if spec.label != "NOISE":
        # Measurement noise and baseline wander common to real recordings.
        x = x + rng.normal(0.0, 12.0, size=n)
        x = x + 40.0 * np.sin(2 * np.pi * rng.uniform(0.1, 0.4) * t + rng.uniform(0, 2 * np.pi))
    return x


def synth_dataset(specs: list[SynthSpec], id_prefix: str = "synth") -> list[SynthRecord]:
    out = []
    for i, spec in enumerate(specs):
        x = synth_signal(spec)
        rec = EcgRecord(
            record_id=f"{id_prefix}_{spec.label.lower()}_{i:04d}",
            sampling_rate_hz=spec.sampling_rate_hz,
            lead_names=("I",),
            samples=x[None, :],
            reference_label=spec.label if spec.label in REFERENCE_LABELS else None,
        )
        out.append(SynthRecord(record=rec, label=spec.label))
    return out


def default_specs(per_class: int, seed: int, duration_s: float = 10.0, sampling_rate_hz: float = 500.0) -> list[SynthSpec]:
    """One spec per record, seeds derived from the corpus seed."""
    rng = np.random.default_rng(seed)
    specs = []
    for label in MODEL_CLASSES:
        for _ in range(per_class):
            specs.append(
                SynthSpec(
                    label=label,
                    duration_s=duration_s,
                    sampling_rate_hz=sampling_rate_hz,
                    seed=int(rng.integers(0, 2**63 - 1)),
                )
            )
    return specs
