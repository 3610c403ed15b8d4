"""Parsing, validation and writing of ECG records and dataset manifests.

Supported on-disk forms:
  * a WFDB subset: text header + little-endian signed 16-bit ``.dat``
    payload, sample-interleaved across leads, format code ``16`` only;
  * plain CSV with a lead-name header row and per-sample microvolt rows;
  * dataset manifest CSV with columns ``record_id,path,label``.

Amplitudes are microvolts everywhere inside this package.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Reference labels carried by datasets. There is deliberately no NOISE
# here: everything that is not NSR or AFIB belongs to OTHER.
REFERENCE_LABELS = ("AFIB", "NSR", "OTHER")

TWELVE_LEAD_ORDER = (
    "I", "II", "III", "aVR", "aVL", "aVF",
    "V1", "V2", "V3", "V4", "V5", "V6",
)


class EcgIoError(ValueError):
    """Base class for ingestion-boundary failures."""


class HeaderParseError(EcgIoError):
    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"header line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class TruncationError(EcgIoError):
    pass


class UnsupportedFormatError(EcgIoError):
    pass


class ManifestError(EcgIoError):
    pass


class QuantizationError(EcgIoError):
    pass


@dataclass(frozen=True)
class EcgRecord:
    """A multi-lead sampled waveform in microvolts."""

    record_id: str
    sampling_rate_hz: float
    lead_names: tuple[str, ...]
    samples: np.ndarray  # shape (n_leads, n_samples), float64 microvolts
    reference_label: str | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2:
            raise EcgIoError(f"samples must be 2-D (leads, samples), got shape {samples.shape}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "lead_names", tuple(self.lead_names))
        if samples.shape[0] != len(self.lead_names):
            raise EcgIoError(
                f"{samples.shape[0]} sample rows for {len(self.lead_names)} lead names"
            )
        if samples.shape[1] < 1:
            raise EcgIoError("records need at least one sample per lead")
        if len(set(self.lead_names)) != len(self.lead_names):
            raise EcgIoError(f"duplicate lead names: {self.lead_names}")
        if not (self.sampling_rate_hz > 0 and np.isfinite(self.sampling_rate_hz)):
            raise EcgIoError(f"sampling rate must be positive, got {self.sampling_rate_hz}")
        if self.reference_label is not None and self.reference_label not in REFERENCE_LABELS:
            raise EcgIoError(
                f"reference label {self.reference_label!r} not in {REFERENCE_LABELS}"
            )

    @property
    def n_leads(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sampling_rate_hz

    def lead(self, name: str) -> np.ndarray:
        if name not in self.lead_names:
            raise EcgIoError(f"lead {name!r} not present; available: {list(self.lead_names)}")
        return self.samples[self.lead_names.index(name)]


@dataclass(frozen=True)
class ManifestEntry:
    record_id: str
    path: str
    label: str


@dataclass(frozen=True)
class DatasetManifest:
    dataset_name: str
    entries: tuple[ManifestEntry, ...]
    root: Path = field(default=Path("."))

    def __len__(self):
        return len(self.entries)


def parse_wfdb_subset(header_text: str, dat_bytes: bytes, record_id: str | None = None) -> EcgRecord:
    """Decode a WFDB-subset header plus 16-bit interleaved ``.dat`` payload.

    Header grammar::

        name n_leads fs n_samples
        file format gain baseline lead_name      (one line per lead)

    Amplitude conversion: ``uV = (raw - baseline) / gain * 1000`` where
    gain is raw units per millivolt.
    """
    lines = [ln for ln in header_text.splitlines()]
    # Skip trailing blank lines but keep line numbering from the original text.
    numbered = [(i + 1, ln.strip()) for i, ln in enumerate(lines) if ln.strip()]
    if not numbered:
        raise HeaderParseError("empty header")

    line_no, first = numbered[0]
    fields = first.split()
    if len(fields) != 4:
        raise HeaderParseError(f"expected 'name n_leads fs n_samples', got {first!r}", line_no)
    name = fields[0]
    try:
        n_leads = int(fields[1])
        fs = float(fields[2])
        n_samples = int(fields[3])
    except ValueError as exc:
        raise HeaderParseError(str(exc), line_no) from exc
    if n_leads < 1 or n_samples < 1 or fs <= 0:
        raise HeaderParseError(
            f"invalid dimensions: n_leads={n_leads} fs={fs} n_samples={n_samples}", line_no
        )

    lead_lines = numbered[1:]
    if len(lead_lines) != n_leads:
        raise HeaderParseError(
            f"header declares {n_leads} leads but has {len(lead_lines)} lead lines"
        )

    gains = np.empty(n_leads)
    baselines = np.empty(n_leads)
    lead_names = []
    for idx, (line_no, line) in enumerate(lead_lines):
        fields = line.split()
        if len(fields) != 5:
            raise HeaderParseError(
                f"expected 'file format gain baseline lead_name', got {line!r}", line_no
            )
        _file, fmt, gain_s, baseline_s, lead_name = fields
        if fmt != "16":
            raise UnsupportedFormatError(
                f"header line {line_no}: unsupported format code {fmt!r} (only '16')"
            )
        try:
            gains[idx] = float(gain_s)
            baselines[idx] = float(baseline_s)
        except ValueError as exc:
            raise HeaderParseError(str(exc), line_no) from exc
        if gains[idx] <= 0:
            raise HeaderParseError(f"gain must be positive, got {gain_s}", line_no)
        lead_names.append(lead_name)

    expected = 2 * n_leads * n_samples
    if len(dat_bytes) != expected:
        raise TruncationError(
            f".dat payload is {len(dat_bytes)} bytes, expected {expected} "
            f"(2 x {n_leads} leads x {n_samples} samples)"
        )

    raw = np.frombuffer(dat_bytes, dtype="<i2").astype(np.float64)
    raw = raw.reshape(n_samples, n_leads).T  # sample-interleaved on disk
    uv = (raw - baselines[:, None]) / gains[:, None] * 1000.0
    return EcgRecord(
        record_id=record_id or name,
        sampling_rate_hz=fs,
        lead_names=tuple(lead_names),
        samples=uv,
    )


def write_wfdb_subset(record: EcgRecord, gain: float = 200.0, baseline: int = 0) -> tuple[str, bytes]:
    """Inverse of :func:`parse_wfdb_subset`; round-trips raw integers exactly."""
    if gain <= 0:
        raise EcgIoError(f"gain must be positive, got {gain}")
    raw = np.rint(record.samples * gain / 1000.0 + baseline)
    lo, hi = np.iinfo(np.int16).min, np.iinfo(np.int16).max
    bad = (raw < lo) | (raw > hi)
    if bad.any():
        lead_idx, sample_idx = np.argwhere(bad)[0]
        raise QuantizationError(
            f"sample {sample_idx} of lead {record.lead_names[lead_idx]!r} "
            f"quantizes to {raw[lead_idx, sample_idx]:.0f}, outside int16"
        )
    dat = raw.astype("<i2").T.tobytes()  # interleave by sample

    lines = [f"{record.record_id} {record.n_leads} {record.sampling_rate_hz:g} {record.n_samples}"]
    for name in record.lead_names:
        lines.append(f"{record.record_id}.dat 16 {gain:g} {baseline} {name}")
    return "\n".join(lines) + "\n", dat


def parse_csv_record(
    text: str, sampling_rate_hz: float, record_id: str = "csv", reference_label: str | None = None
) -> EcgRecord:
    """Parse a CSV record: lead-name header row, then per-sample uV rows."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EcgIoError("empty CSV record") from None
    lead_names = [h.strip() for h in header]
    rows = []
    for row_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(lead_names):
            raise EcgIoError(
                f"row {row_no}: {len(row)} values for {len(lead_names)} leads"
            )
        try:
            rows.append([float(v) for v in row])
        except ValueError:
            bad = next(i for i, v in enumerate(row) if not _is_float(v))
            raise EcgIoError(f"row {row_no}, column {bad + 1}: non-numeric value {row[bad]!r}") from None
    if not rows:
        raise EcgIoError("CSV record has a header but no sample rows")
    samples = np.asarray(rows, dtype=np.float64).T
    return EcgRecord(
        record_id=record_id,
        sampling_rate_hz=sampling_rate_hz,
        lead_names=tuple(lead_names),
        samples=samples,
        reference_label=reference_label,
    )


def write_csv_record(record: EcgRecord) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(record.lead_names)
    for row in record.samples.T:
        writer.writerow([f"{v:.6g}" for v in row])
    return out.getvalue()


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def load_manifest(path: str | os.PathLike, allowed_labels=REFERENCE_LABELS) -> DatasetManifest:
    """Load a ``record_id,path,label`` manifest CSV.

    ``allowed_labels`` defaults to the three reference classes; training
    corpora that carry a NOISE class pass an extended set.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(f"{path}: empty manifest") from None
        if [h.strip() for h in header] != ["record_id", "path", "label"]:
            raise ManifestError(
                f"{path}: expected header 'record_id,path,label', got {','.join(header)!r}"
            )
        entries = []
        seen = set()
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ManifestError(f"{path} row {row_no}: expected 3 columns, got {len(row)}")
            record_id, rel_path, label = (v.strip() for v in row)
            if record_id in seen:
                raise ManifestError(f"{path} row {row_no}: duplicate record_id {record_id!r}")
            seen.add(record_id)
            if label not in allowed_labels:
                raise ManifestError(
                    f"{path} row {row_no}: unknown label {label!r} (allowed: {sorted(allowed_labels)})"
                )
            entries.append(ManifestEntry(record_id, rel_path, label))
    return DatasetManifest(dataset_name=path.stem, entries=tuple(entries), root=path.parent)


def save_manifest(manifest: DatasetManifest, path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["record_id", "path", "label"])
        for e in manifest.entries:
            writer.writerow([e.record_id, e.path, e.label])


def load_record(path: str | os.PathLike, reference_label: str | None = None) -> EcgRecord:
    """Load a record from a ``.hea``/``.dat`` pair or a ``.csv`` file.

    CSV records read the sampling rate from a ``# fs=<hz>`` first line if
    present, else a sibling ``<name>.fs`` file, else raise.
    """
    path = Path(path)
    if path.suffix == ".hea":
        header_text = path.read_text(encoding="utf-8")
        dat = path.with_suffix(".dat").read_bytes()
        rec = parse_wfdb_subset(header_text, dat, record_id=path.stem)
    elif path.suffix == ".csv":
        text = path.read_text(encoding="utf-8")
        fs = None
        if text.startswith("# fs="):
            first, _, rest = text.partition("\n")
            fs = float(first[len("# fs="):])
            text = rest
        else:
            fs_file = path.with_suffix(".fs")
            if fs_file.exists():
                fs = float(fs_file.read_text().strip())
        if fs is None:
            raise EcgIoError(f"{path}: no sampling rate ('# fs=' line or sibling .fs file)")
        rec = parse_csv_record(text, fs, record_id=path.stem)
    else:
        raise UnsupportedFormatError(f"{path}: unknown record extension {path.suffix!r}")
    if reference_label is not None:
        rec = EcgRecord(
            record_id=rec.record_id,
            sampling_rate_hz=rec.sampling_rate_hz,
            lead_names=rec.lead_names,
            samples=rec.samples,
            reference_label=reference_label,
        )
    return rec


def save_record(record: EcgRecord, directory: str | os.PathLike, gain: float = 200.0) -> Path:
    """Write a record as a ``.hea``/``.dat`` pair; returns the header path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    header, dat = write_wfdb_subset(record, gain=gain)
    hea_path = directory / f"{record.record_id}.hea"
    hea_path.write_text(header, encoding="utf-8")
    (directory / f"{record.record_id}.dat").write_bytes(dat)
    return hea_path


def load_manifest_records(manifest: DatasetManifest) -> list[EcgRecord]:
    # NOISE (training corpora only) is not a reference label, so it does not
    # land on EcgRecord.reference_label; the manifest entry still carries it.
    return [
        load_record(
            manifest.root / e.path,
            reference_label=e.label if e.label in REFERENCE_LABELS else None,
        )
        for e in manifest.entries
    ]
