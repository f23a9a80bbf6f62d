"""Bias metadata sidecar stored next to the dataset file.

``data.csv`` gets ``data.biasmeta.json``.  The sidecar names the dataset by
the SHA-256 of its bytes and holds one record per profile hash; merging
records across profiles is left to the reader.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import BiasAuditError

SCHEMA_VERSION = 1
SUFFIX = ".biasmeta.json"


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def sidecar_path(dataset_path) -> Path:
    p = Path(dataset_path)
    return p.with_name(p.stem + SUFFIX)


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


@dataclass
class HistoryEntry:
    plan: dict
    deltas: list
    worsened: list
    source_sha256: str
    source_finding_ids: list

    def __post_init__(self):
        target = self.plan.get("target_finding")
        if target is not None and target not in self.source_finding_ids:
            raise BiasAuditError(f"history entry targets unknown finding {target!r}")

    def as_dict(self) -> dict:
        return {
            "plan": self.plan,
            "deltas": self.deltas,
            "worsened": self.worsened,
            "source_sha256": self.source_sha256,
            "source_finding_ids": list(self.source_finding_ids),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "HistoryEntry":
        return cls(doc["plan"], doc["deltas"], doc["worsened"], doc["source_sha256"], doc["source_finding_ids"])


@dataclass
class BiasMetadata:
    dataset_name: str
    content_hash: str
    profile_hash: str
    tool_version: str
    timestamp: str
    findings: list  # finding dicts
    mitigation_history: list = field(default_factory=list)  # HistoryEntry
    stale: bool = False

    def record(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
            "findings": self.findings,
            "mitigation_history": [h.as_dict() for h in self.mitigation_history],
        }


def write_sidecar(dataset_path, meta: BiasMetadata) -> Path:
    """Add or replace the record for ``meta.profile_hash``.

    Records from an older version of the dataset (different content hash)
    are discarded rather than merged.
    """
    target = sidecar_path(dataset_path)
    doc = None
    if target.exists():
        try:
            doc = json.loads(target.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            doc = None
        if doc and doc.get("dataset", {}).get("sha256") != meta.content_hash:
            doc = None
    if doc is None:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "dataset": {"name": meta.dataset_name, "sha256": meta.content_hash},
            "records": {},
        }
    doc["records"][meta.profile_hash] = meta.record()
    target.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return target


def read_sidecar(dataset_path, profile_hash: str | None = None) -> BiasMetadata:
    """Load a record and recompute the dataset hash; ``stale`` marks a mismatch.

    With ``profile_hash=None`` the sidecar must hold exactly one record.
    """
    target = sidecar_path(dataset_path)
    doc = json.loads(target.read_text(encoding="utf-8"))
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise BiasAuditError(f"unsupported sidecar schema_version {doc.get('schema_version')!r}")
    records = doc["records"]
    if profile_hash is None:
        if len(records) != 1:
            raise BiasAuditError(f"sidecar holds {len(records)} records; name a profile hash")
        profile_hash = next(iter(records))
    rec = records[profile_hash]
    stored = doc["dataset"]["sha256"]
    return BiasMetadata(
        dataset_name=doc["dataset"]["name"],
        content_hash=stored,
        profile_hash=profile_hash,
        tool_version=rec["tool_version"],
        timestamp=rec["timestamp"],
        findings=rec["findings"],
        mitigation_history=[HistoryEntry.from_dict(h) for h in rec["mitigation_history"]],
        stale=file_sha256(dataset_path) != stored,
    )


def verify(dataset_path) -> bool:
    """True when the sidecar's stored hash matches the dataset bytes."""
    doc = json.loads(sidecar_path(dataset_path).read_text(encoding="utf-8"))
    return doc["dataset"]["sha256"] == file_sha256(dataset_path)
