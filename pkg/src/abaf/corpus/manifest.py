"""Corpus manifests: one CSV row per subject.

Header is fixed: subject_id,wav_path,label,scale_score,scale_kind.
label is the binary target (1 = depression), scale_score the raw clinical
score when one exists (blank for synthetic corpora), scale_kind one of
hamd17 / phq9 / synthetic.
"""

import csv
import os
from dataclasses import dataclass, field
from typing import Optional

from abaf.errors import ManifestError

MANIFEST_HEADER = ["subject_id", "wav_path", "label", "scale_score", "scale_kind"]

SCALE_KINDS = ("hamd17", "phq9", "synthetic")

# (lo, hi, band name); severity grows with the score.
HAMD17_BANDS = ((0, 7, "NC"), (8, 16, "Mild"), (17, 24, "Moderate"), (25, 52, "Severe"))
PHQ9_BANDS = (
    (0, 0, "NC"),
    (1, 4, "Minimal"),
    (5, 9, "Mild"),
    (10, 14, "Moderate"),
    (15, 19, "ModeratelySevere"),
    (20, 27, "Severe"),
)

_SCORE_MAX = {"hamd17": 52, "phq9": 27}


def band_label(scale_kind: str, score: int) -> str:
    """Map a clinical score to its severity band name."""
    bands = {"hamd17": HAMD17_BANDS, "phq9": PHQ9_BANDS}.get(scale_kind)
    if bands is None:
        raise ManifestError("scale_kind", f"no band table for {scale_kind!r}")
    for lo, hi, name in bands:
        if lo <= score <= hi:
            return name
    raise ManifestError("scale_score", f"{score} outside {scale_kind} range")


@dataclass(frozen=True)
class SubjectRecord:
    subject_id: str
    wav_path: str
    label: int
    scale_score: Optional[int] = None
    scale_kind: str = "synthetic"


@dataclass
class CorpusManifest:
    records: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def ids(self):
        return [r.subject_id for r in self.records]

    def labels(self):
        return [r.label for r in self.records]

    def by_id(self, subject_id: str) -> SubjectRecord:
        for r in self.records:
            if r.subject_id == subject_id:
                return r
        raise KeyError(subject_id)


def _parse_record(row: dict, line_no: int) -> SubjectRecord:
    sid = row["subject_id"].strip()
    if not sid:
        raise ManifestError("subject_id", f"line {line_no}: empty subject_id")
    wav_path = row["wav_path"].strip()
    if not wav_path:
        raise ManifestError("wav_path", f"line {line_no}: empty wav_path")
    try:
        label = int(row["label"])
    except ValueError:
        raise ManifestError("label", f"line {line_no}: label must be an integer, got {row['label']!r}")
    if label not in (0, 1):
        raise ManifestError("label", f"line {line_no}: label must be 0 or 1, got {label}")
    kind = row["scale_kind"].strip()
    if kind not in SCALE_KINDS:
        raise ManifestError("scale_kind", f"line {line_no}: unknown scale_kind {kind!r}")
    raw_score = row["scale_score"].strip()
    score: Optional[int] = None
    if raw_score:
        try:
            score = int(raw_score)
        except ValueError:
            raise ManifestError("scale_score", f"line {line_no}: scale_score must be an integer, got {raw_score!r}")
        if kind in _SCORE_MAX and not (0 <= score <= _SCORE_MAX[kind]):
            raise ManifestError(
                "scale_score", f"line {line_no}: {kind} score must be in [0, {_SCORE_MAX[kind]}], got {score}"
            )
    return SubjectRecord(sid, wav_path, label, score, kind)


def load_manifest(path) -> CorpusManifest:
    """Read and validate a manifest CSV. Duplicate subject ids are an error."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError("header", "empty manifest file")
        if header != MANIFEST_HEADER:
            raise ManifestError("header", f"expected {','.join(MANIFEST_HEADER)}, got {','.join(header)}")
        records = []
        seen = set()
        for line_no, cols in enumerate(reader, start=2):
            if not cols:
                continue
            if len(cols) != len(MANIFEST_HEADER):
                raise ManifestError("row", f"line {line_no}: expected {len(MANIFEST_HEADER)} columns, got {len(cols)}")
            rec = _parse_record(dict(zip(MANIFEST_HEADER, cols)), line_no)
            if rec.subject_id in seen:
                raise ManifestError("subject_id", f"line {line_no}: duplicate subject_id {rec.subject_id!r}")
            seen.add(rec.subject_id)
            records.append(rec)
    return CorpusManifest(records)


def save_manifest(manifest: CorpusManifest, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        for r in manifest.records:
            score = "" if r.scale_score is None else str(r.scale_score)
            writer.writerow([r.subject_id, r.wav_path, str(r.label), score, r.scale_kind])


def validate_label_consistency(manifest: CorpusManifest) -> list:
    """Subject ids whose label disagrees with the band table (label 0 <=> NC).

    Synthetic records and records without a score are skipped; they carry
    no clinical scale to check against.
    """
    bad = []
    for r in manifest.records:
        if r.scale_kind == "synthetic" or r.scale_score is None:
            continue
        expected = 0 if band_label(r.scale_kind, r.scale_score) == "NC" else 1
        if r.label != expected:
            bad.append(r.subject_id)
    return bad
