import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ecgstudy.ecgio import EcgRecord
from ecgstudy.preprocess import Segment


@pytest.fixture
def record_12lead():
    rng = np.random.default_rng(42)
    names = ("I", "II", "III", "aVR", "aVL", "aVF",
             "V1", "V2", "V3", "V4", "V5", "V6")
    samples = rng.normal(0, 300, size=(12, 5000))
    return EcgRecord("r12", 500.0, names, samples)


@pytest.fixture
def segment_10s():
    rng = np.random.default_rng(3)
    return Segment(
        parent_id="rec", segment_index=0, lead_name="I",
        samples=rng.normal(0, 200, size=2500),
        sampling_rate_hz=250.0, start_s=0.0,
    )


def make_record(duration_s: float, fs: float = 500.0, record_id: str = "rec",
                n_leads: int = 1, seed: int = 0) -> EcgRecord:
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * fs))
    names = ("I", "II", "III")[:n_leads]
    return EcgRecord(record_id, fs, names, rng.normal(0, 250, size=(n_leads, n)))
