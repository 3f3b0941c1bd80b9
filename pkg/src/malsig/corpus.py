"""Corpus ingestion, label handling, and fingerprinting.

Two directory layouts are supported: ``family-dirs`` (each immediate
subdirectory names a family and holds its samples) and ``flat`` (one
directory of samples with labels supplied by a sidecar TSV of
``sha256<TAB>label`` lines).  Fingerprinting walks a manifest in its
stable path order and writes the store atomically, so an unchanged corpus
always reproduces a byte-identical store.
"""

from __future__ import annotations

import hashlib
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import features as feat
from . import store as store_mod
from .errors import MalformedLabelsFile

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CorpusEntry:
    path: Path
    sha256: str
    label: str
    byte_length: int


@dataclass
class CorpusManifest:
    entries: list[CorpusEntry]
    root: Path
    created_at: float = field(default_factory=time.time)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class LabelCacheEntry:
    label: str
    source: str
    fetched_at: float


class LabelCache:
    """Offline sha256 -> label map, the stand-in for an AV label service."""

    def __init__(self):
        self._entries: dict[str, LabelCacheEntry] = {}

    @classmethod
    def from_tsv(cls, path, source: str = "tsv") -> "LabelCache":
        cache = cls()
        fetched = time.time()
        for sha, label in load_labels_tsv(path).items():
            cache.put(sha, label, source=source, fetched_at=fetched)
        return cache

    def put(self, sha256: str, label: str, source: str = "manual", fetched_at=None):
        self._entries[sha256] = LabelCacheEntry(
            label=label,
            source=source,
            fetched_at=time.time() if fetched_at is None else fetched_at,
        )

    def get(self, sha256: str) -> str:
        entry = self._entries.get(sha256)
        return entry.label if entry else ""

    def __len__(self) -> int:
        return len(self._entries)


def load_labels_tsv(path) -> dict[str, str]:
    """Parse a ``sha256<TAB>label`` file; blank lines and # comments allowed."""
    labels: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedLabelsFile(f"cannot read labels file: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0].strip():
            raise MalformedLabelsFile(f"line {lineno}: expected 'sha256<TAB>label'")
        sha = parts[0].strip().lower()
        if len(sha) != 64 or any(c not in "0123456789abcdef" for c in sha):
            raise MalformedLabelsFile(f"line {lineno}: {sha!r} is not a sha256 hex digest")
        labels[sha] = parts[1].strip()
    return labels


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def ingest(root, layout: str = "family-dirs", labels_file=None) -> CorpusManifest:
    """Walk a sample directory into a manifest of hashed, labeled entries.

    Empty files are skipped with a warning; in flat layout, samples whose
    hash is missing from the labels TSV get an empty label.
    """
    root = Path(root)
    entries: list[CorpusEntry] = []

    if layout == "family-dirs":
        for family_dir in sorted(p for p in root.iterdir() if p.is_dir()):
            for path in sorted(p for p in family_dir.rglob("*") if p.is_file()):
                entry = _entry_for(path, family_dir.name)
                if entry:
                    entries.append(entry)
    elif layout == "flat":
        labels = load_labels_tsv(labels_file) if labels_file else {}
        for path in sorted(p for p in root.rglob("*") if p.is_file()):
            entry = _entry_for(path, None)
            if entry is None:
                continue
            label = labels.get(entry.sha256, "")
            if labels and not label:
                log.warning("no label for %s (%s)", path.name, entry.sha256[:12])
            entries.append(CorpusEntry(entry.path, entry.sha256, label, entry.byte_length))
    else:
        raise ValueError(f"unknown layout {layout!r}")

    if not entries:
        log.warning("ingest of %s produced an empty manifest", root)
    return CorpusManifest(entries=entries, root=root)


def _entry_for(path: Path, label: str | None) -> CorpusEntry | None:
    size = path.stat().st_size
    if size == 0:
        log.warning("skipping empty file %s", path)
        return None
    return CorpusEntry(
        path=path,
        sha256=sha256_file(path),
        label=label or "",
        byte_length=size,
    )


@dataclass
class FingerprintSummary:
    written: int
    failed: list[tuple[Path, str]]


def fingerprint_corpus(
    manifest: CorpusManifest,
    config: feat.FeatureConfig,
    out_path,
    policy=None,
    extra_metadata: dict | None = None,
) -> FingerprintSummary:
    """Descriptor every manifest entry and persist the fingerprint store.

    Per-file failures are collected, not fatal; the store is written
    atomically once all readable entries are fingerprinted.  Record
    timestamps come from file mtimes so re-runs stay byte-identical.
    """
    from .images import DEFAULT_WIDTH_POLICY

    policy = policy or DEFAULT_WIDTH_POLICY
    records = []
    failed: list[tuple[Path, str]] = []
    for entry in manifest.entries:
        try:
            raw = entry.path.read_bytes()
            descriptor = feat.describe_bytes(raw, config, policy)
            records.append(
                store_mod.FingerprintRecord(
                    sha256=entry.sha256,
                    label=entry.label,
                    descriptor=descriptor.astype("float32"),
                    byte_length=entry.byte_length,
                    added_at=entry.path.stat().st_mtime,
                )
            )
        except Exception as exc:  # keep going; summary lists the failures
            log.warning("fingerprinting failed for %s: %s", entry.path, exc)
            failed.append((entry.path, str(exc)))

    metadata = {"feature": feat.config_metadata(config)}
    if extra_metadata:
        metadata.update(extra_metadata)
    store_mod.save(records, metadata, out_path)
    return FingerprintSummary(written=len(records), failed=failed)
