"""Classification evaluation: nearest neighbor, k-fold CV, and holdout grids.

Splits are stratified per family and fully determined by their seed, so
any report can be reproduced from the configuration snapshot it embeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import features as feat
from . import sparse
from .errors import InsufficientSamples, InvalidConfig, SizeMismatch

EVAL_DIMS = (48, 96, 192, 256, 384, 512)


@dataclass
class LabeledDataset:
    """Feature vectors with ids and family labels, uniform dimension."""

    ids: list[str]
    vectors: np.ndarray  # (n, dim)
    labels: list[str]

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise SizeMismatch("vectors must be a 2-D array")
        if not (len(self.ids) == self.vectors.shape[0] == len(self.labels)):
            raise SizeMismatch("ids, vectors and labels must have equal length")

    @property
    def families(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.labels)))

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class EvalReport:
    accuracy: float
    per_family_accuracy: dict[str, float]
    confusion: np.ndarray  # (L, L) counts, rows = true family
    fold_accuracies: list[float]
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_family_accuracy": self.per_family_accuracy,
            "confusion": self.confusion.tolist(),
            "fold_accuracies": self.fold_accuracies,
            "config": self.config,
        }


def classify_nn(train: LabeledDataset, query: np.ndarray) -> str:
    """Label of the training item nearest to ``query`` (Euclidean).

    Exact distance ties are broken by the lowest item id.
    """
    q = np.asarray(query, dtype=np.float64).ravel()
    if q.size != train.vectors.shape[1]:
        raise SizeMismatch("query dimension does not match training set")
    dists = np.linalg.norm(train.vectors - q, axis=1)
    best = dists.min()
    candidates = np.flatnonzero(dists == best)
    winner = min(candidates, key=lambda i: train.ids[i])
    return train.labels[winner]


def _classify_nn_many(train: LabeledDataset, queries: np.ndarray) -> list[str]:
    diffs = queries[:, None, :] - train.vectors[None, :, :]
    dists = np.sqrt(np.sum(diffs * diffs, axis=2))
    out = []
    for row in dists:
        best = row.min()
        candidates = np.flatnonzero(row == best)
        winner = min(candidates, key=lambda i: train.ids[i])
        out.append(train.labels[winner])
    return out


def _predict(train: LabeledDataset, queries: np.ndarray, classifier: str, eps) -> list[str]:
    if classifier == "nn":
        if queries.shape[0] * len(train) * train.vectors.shape[1] > 5_000_000:
            # avoid the cubic broadcast blowup on big cells
            return [classify_nn(train, q) for q in queries]
        return _classify_nn_many(train, queries)
    if classifier == "src":
        dictionary = sparse.build_dictionary(zip(train.vectors, train.labels))
        decisions = sparse.classify_src_batch(dictionary, queries, eps=eps)
        return [d.family for d in decisions]
    raise InvalidConfig(f"unknown classifier {classifier!r}")


def _confusion(families, true_labels, predicted) -> np.ndarray:
    index = {f: i for i, f in enumerate(families)}
    mat = np.zeros((len(families), len(families)), dtype=np.int64)
    for t, p in zip(true_labels, predicted):
        mat[index[t], index[p]] += 1
    return mat


def _report(families, confusion, fold_accuracies, config) -> EvalReport:
    total = confusion.sum()
    accuracy = float(np.trace(confusion)) / total if total else 0.0
    per_family = {}
    for i, fam in enumerate(families):
        row = confusion[i].sum()
        per_family[fam] = float(confusion[i, i]) / row if row else 0.0
    return EvalReport(
        accuracy=accuracy,
        per_family_accuracy=per_family,
        confusion=confusion,
        fold_accuracies=fold_accuracies,
        config=config,
    )


def stratified_folds(labels, k: int, seed: int) -> list[np.ndarray]:
    """Partition indices into k folds, preserving family proportions.

    Every family must have at least k members.  Folds are disjoint and
    jointly cover all indices; the layout depends only on (labels, k, seed).
    """
    if k < 2:
        raise InvalidConfig("need at least 2 folds")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    labels = list(labels)
    for fam in sorted(set(labels)):
        members = np.flatnonzero(np.asarray(labels, dtype=object) == fam)
        if members.size < k:
            raise InsufficientSamples(
                f"family {fam!r} has {members.size} members, needs >= {k}"
            )
        members = rng.permutation(members)
        for pos, idx in enumerate(members):
            folds[pos % k].append(int(idx))
    return [np.array(sorted(f), dtype=np.intp) for f in folds]


def kfold(
    dataset: LabeledDataset,
    k: int = 10,
    seed: int = 0,
    classifier: str = "nn",
    eps=sparse.ADAPTIVE,
) -> EvalReport:
    """Stratified k-fold cross validation; every item is tested exactly once."""
    families = dataset.families
    folds = stratified_folds(dataset.labels, k, seed)
    confusion = np.zeros((len(families), len(families)), dtype=np.int64)
    fold_accuracies = []
    all_idx = np.arange(len(dataset))
    for fold in folds:
        mask = np.ones(len(dataset), dtype=bool)
        mask[fold] = False
        train = LabeledDataset(
            ids=[dataset.ids[i] for i in all_idx[mask]],
            vectors=dataset.vectors[mask],
            labels=[dataset.labels[i] for i in all_idx[mask]],
        )
        test_labels = [dataset.labels[i] for i in fold]
        predicted = _predict(train, dataset.vectors[fold], classifier, eps)
        confusion += _confusion(families, test_labels, predicted)
        hits = sum(t == p for t, p in zip(test_labels, predicted))
        fold_accuracies.append(hits / len(fold))
    config = {"mode": "kfold", "k": k, "seed": seed, "classifier": classifier}
    return _report(families, confusion, fold_accuracies, config)


def holdout_split(labels, train_frac: float, seed: int):
    """Stratified train/test index split; deterministic in (labels, frac, seed)."""
    if not 0 < train_frac < 1:
        raise InvalidConfig("train fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train_idx: list[int] = []
    test_idx: list[int] = []
    labels = list(labels)
    for fam in sorted(set(labels)):
        members = np.flatnonzero(np.asarray(labels, dtype=object) == fam)
        if members.size < 2:
            raise InsufficientSamples(f"family {fam!r} needs >= 2 members to split")
        members = rng.permutation(members)
        n_train = int(round(train_frac * members.size))
        n_train = min(max(n_train, 1), members.size - 1)
        train_idx.extend(int(i) for i in members[:n_train])
        test_idx.extend(int(i) for i in members[n_train:])
    return np.array(sorted(train_idx), dtype=np.intp), np.array(sorted(test_idx), dtype=np.intp)


def evaluate_holdout(
    dataset: LabeledDataset,
    train_frac: float = 0.8,
    seed: int = 0,
    classifier: str = "nn",
    eps=sparse.ADAPTIVE,
    config: dict | None = None,
) -> EvalReport:
    """Single stratified holdout evaluation on precomputed features."""
    families = dataset.families
    train_idx, test_idx = holdout_split(dataset.labels, train_frac, seed)
    train = LabeledDataset(
        ids=[dataset.ids[i] for i in train_idx],
        vectors=dataset.vectors[train_idx],
        labels=[dataset.labels[i] for i in train_idx],
    )
    test_labels = [dataset.labels[i] for i in test_idx]
    predicted = _predict(train, dataset.vectors[test_idx], classifier, eps)
    confusion = _confusion(families, test_labels, predicted)
    snapshot = {
        "mode": "holdout",
        "train_frac": train_frac,
        "seed": seed,
        "classifier": classifier,
        "n_train": int(train_idx.size),
        "n_test": int(test_idx.size),
    }
    if config:
        snapshot.update(config)
    report = _report(families, confusion, [], snapshot)
    report.fold_accuracies = [report.accuracy]
    return report


def holdout_grid(
    samples: list[tuple[str, bytes, str]],
    feature_kinds=("rp", "gist"),
    classifiers=("src", "nn"),
    dims=EVAL_DIMS,
    train_frac: float = 0.8,
    seed: int = 0,
    signal_length: int | None = None,
    rp_seed: int = 7,
    eps=sparse.ADAPTIVE,
) -> list[EvalReport]:
    """Run the full {feature} x {classifier} x {dim} experiment grid.

    ``samples`` holds raw binaries as (id, bytes, family) triples; features
    are extracted per grid cell and the 80/20 split is shared across cells
    so accuracies are comparable.  One report per cell, in
    (feature, classifier, dim) iteration order.
    """
    labels = [label for _, _, label in samples]
    ids = [sid for sid, _, _ in samples]
    if signal_length is None:
        signal_length = max(len(raw) for _, raw, _ in samples)

    reports = []
    for kind in feature_kinds:
        for dim in dims:
            config = feat.feature_config(
                kind, dim, signal_length=signal_length, rp_seed=rp_seed
            )
            vectors = feat.describe_all([raw for _, raw, _ in samples], config)
            dataset = LabeledDataset(ids=ids, vectors=vectors, labels=labels)
            for classifier in classifiers:
                report = evaluate_holdout(
                    dataset,
                    train_frac=train_frac,
                    seed=seed,
                    classifier=classifier,
                    eps=eps,
                    config={"feature": feat.config_metadata(config), "dim": dim},
                )
                reports.append(report)
    return reports
