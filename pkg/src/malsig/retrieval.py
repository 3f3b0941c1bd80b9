"""Content-based retrieval over fingerprint records.

A fingerprint corpus is indexed with an exact ball tree keyed by content
hash; query results carry a confidence grade derived from the top-match
distance against three configurable thresholds.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .balltree import BallTree, QueryStats
from .errors import DimensionMismatch, EmptyIndex, InvalidConfig
from .store import FingerprintRecord


class Confidence(str, Enum):
    VERY_HIGH = "VeryHigh"
    HIGH = "High"
    LOW = "Low"
    VERY_LOW = "VeryLow"


@dataclass(frozen=True)
class ConfidenceThresholds:
    t1: float
    t2: float
    t3: float

    def __post_init__(self):
        if not 0 <= self.t1 <= self.t2 <= self.t3:
            raise InvalidConfig("thresholds must satisfy 0 <= t1 <= t2 <= t3")


# Fallback grading for uncalibrated corpora, in descriptor distance units.
DEFAULT_THRESHOLDS = ConfidenceThresholds(1e-6, 0.1, 1.0)


@dataclass
class MatchResult:
    matches: list[tuple[str, str, float]]  # (sha256, label, distance), ascending
    confidence: Confidence
    query_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "matches": [
                {"sha256": sha, "label": label, "distance": dist}
                for sha, label, dist in self.matches
            ],
            "confidence": self.confidence.value,
            "query_time": self.query_time,
        }


def grade_confidence(
    top1_distance: float, thresholds: ConfidenceThresholds = DEFAULT_THRESHOLDS
) -> Confidence:
    """Bucket a top-match distance; boundaries are inclusive downward."""
    if top1_distance <= thresholds.t1:
        return Confidence.VERY_HIGH
    if top1_distance <= thresholds.t2:
        return Confidence.HIGH
    if top1_distance <= thresholds.t3:
        return Confidence.LOW
    return Confidence.VERY_LOW


def calibrate_thresholds(
    descriptors: np.ndarray, labels, percentiles=(99.0, 99.9)
) -> ConfidenceThresholds:
    """Derive grading thresholds from a labeled held-out corpus.

    t1 is the given percentile of intra-family pairwise distances, t2 the
    higher percentile, and t3 the median of cross-family distances.
    """
    pts = np.asarray(descriptors, dtype=np.float64)
    labels = list(labels)
    intra = []
    cross = []
    for i in range(len(pts)):
        d = np.sqrt(((pts[i + 1 :] - pts[i]) ** 2).sum(axis=1))
        for j, dist in enumerate(d, start=i + 1):
            (intra if labels[i] == labels[j] else cross).append(dist)
    if not intra or not cross:
        raise InvalidConfig("calibration needs both intra- and cross-family pairs")
    t1 = float(np.percentile(intra, percentiles[0]))
    t2 = float(np.percentile(intra, percentiles[1]))
    t3 = float(np.median(cross))
    t2 = max(t2, t1)
    t3 = max(t3, t2)
    return ConfidenceThresholds(t1, t2, t3)


@dataclass
class FingerprintIndex:
    """Ball-tree index over a record list, ready for top-k retrieval."""

    records: list[FingerprintRecord]
    tree: BallTree
    thresholds: ConfidenceThresholds = field(default_factory=lambda: DEFAULT_THRESHOLDS)

    @property
    def dim(self) -> int:
        return self.tree.dim

    def query(self, descriptor: np.ndarray, k: int = 10, stats: QueryStats | None = None) -> MatchResult:
        q = np.asarray(descriptor, dtype=np.float64).ravel()
        if q.size != self.dim:
            raise DimensionMismatch(f"query dim {q.size} != store dim {self.dim}")
        started = time.perf_counter()
        idx, dists = self.tree.query(q, k=k, stats=stats)
        elapsed = time.perf_counter() - started
        matches = [
            (self.records[i].sha256, self.records[i].label, float(d))
            for i, d in zip(idx, dists)
        ]
        return MatchResult(
            matches=matches,
            confidence=grade_confidence(matches[0][2], self.thresholds),
            query_time=elapsed,
        )


def build_index(
    records: list[FingerprintRecord],
    leaf_size: int = 40,
    thresholds: ConfidenceThresholds | None = None,
) -> FingerprintIndex:
    """Index records by descriptor; ties at equal distance order by sha256."""
    if not records:
        raise EmptyIndex("cannot index zero records")
    dim = len(records[0].descriptor)
    for rec in records:
        if len(rec.descriptor) != dim:
            raise DimensionMismatch("records have mixed descriptor dimensions")
    points = np.stack([np.asarray(r.descriptor, dtype=np.float64) for r in records])
    tree = BallTree(points, keys=[r.sha256 for r in records], leaf_size=leaf_size)
    return FingerprintIndex(
        records=records,
        tree=tree,
        thresholds=thresholds if thresholds is not None else DEFAULT_THRESHOLDS,
    )
