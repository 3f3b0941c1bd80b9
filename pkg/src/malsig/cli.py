"""Command-line interface.

One verb per capability: ``convert`` (byteplot images), ``fingerprint``
(corpus -> store), ``index`` (store audit), ``classify`` (NN/SRC against a
store), ``retrieve`` (top-k matches), ``eval`` (k-fold or the holdout
grid), ``serve`` (HTTP query service), ``export-png``.  Options may come
from a TOML config file; command-line flags override it, and every report
embeds the resolved configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from . import corpus as corpus_mod
from . import evaluation, features, images, retrieval, sparse
from . import store as store_mod
from .service import QueryService

log = logging.getLogger("malsig")


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _feature_from_args(args, config: dict) -> features.FeatureConfig:
    section = config.get("feature", {})
    kind = args.feature or section.get("kind", "gist")
    dim = args.dim or section.get("dim") or (320 if kind == "gist" else 512)
    signal_length = getattr(args, "signal_length", None) or section.get(
        "signal_length", 2**20
    )
    rp_seed = getattr(args, "rp_seed", None)
    if rp_seed is None:
        rp_seed = section.get("rp_seed", 7)
    return features.feature_config(
        kind, dim, signal_length=signal_length, rp_seed=rp_seed
    )


def _ingest_from_args(args) -> corpus_mod.CorpusManifest:
    return corpus_mod.ingest(args.root, layout=args.layout, labels_file=args.labels)


def _add_corpus_args(p):
    p.add_argument("--root", required=True, help="corpus directory")
    p.add_argument(
        "--layout",
        choices=["family-dirs", "flat"],
        default="family-dirs",
        help="family-dirs: subdirectory per family; flat: one directory plus a labels TSV",
    )
    p.add_argument("--labels", help="labels TSV (sha256<TAB>label) for flat layout")


def _add_feature_args(p):
    p.add_argument("--feature", choices=["gist", "rp"], help="descriptor kind")
    p.add_argument("--dim", type=int, help="descriptor dimension")
    p.add_argument("--signal-length", dest="signal_length", type=int,
                   help="zero-padded signal length for random projections")
    p.add_argument("--rp-seed", dest="rp_seed", type=int,
                   help="random projection seed")


def cmd_convert(args, config):
    for path in args.files:
        raw = Path(path).read_bytes()
        img = images.to_image(images.to_signal(raw))
        info = {"path": str(path), "width": int(img.shape[1]),
                "height": int(img.shape[0]), "bytes": len(raw)}
        if args.export_png:
            out_dir = Path(args.export_png)
            out_dir.mkdir(parents=True, exist_ok=True)
            target = out_dir / (Path(path).name + ".png")
            images.save_png(img, target)
            info["png"] = str(target)
        print(json.dumps(info))
    return 0


def cmd_export_png(args, config):
    manifest = _ingest_from_args(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for entry in manifest.entries:
        img = images.to_image(images.to_signal(entry.path.read_bytes()))
        images.save_png(img, out_dir / (entry.sha256 + ".png"))
    print(json.dumps({"exported": len(manifest), "out": str(out_dir)}))
    return 0


def cmd_fingerprint(args, config):
    manifest = _ingest_from_args(args)
    if not manifest.entries:
        print(json.dumps({"written": 0, "warning": "empty corpus"}))
        return 0
    feature = _feature_from_args(args, config)
    summary = corpus_mod.fingerprint_corpus(manifest, feature, args.out)
    print(json.dumps({
        "written": summary.written,
        "failed": [[str(p), msg] for p, msg in summary.failed],
        "store": str(args.out),
        "feature": features.config_metadata(feature),
    }))
    return 0 if not summary.failed else 1


def cmd_index(args, config):
    records, metadata = store_mod.load(args.store)
    index = retrieval.build_index(records, leaf_size=args.leaf_size)
    print(json.dumps({
        "records": len(records),
        "dimension": index.dim,
        "nodes": index.tree.n_nodes,
        "leaf_size": args.leaf_size,
        "containment_ok": index.tree.audit_containment(),
        "feature": metadata.get("feature", {}),
    }))
    return 0


def _store_dataset(records) -> evaluation.LabeledDataset:
    labeled = [r for r in records if r.label]
    if len(labeled) < len(records):
        log.warning("ignoring %d unlabeled records", len(records) - len(labeled))
    return evaluation.LabeledDataset(
        ids=[r.sha256 for r in labeled],
        vectors=np.stack([np.asarray(r.descriptor, dtype=np.float64) for r in labeled]),
        labels=[r.label for r in labeled],
    )


def cmd_classify(args, config):
    records, metadata = store_mod.load(args.store)
    feature = features.config_from_metadata(metadata["feature"])
    train = _store_dataset(records)
    dictionary = None
    if args.method == "src":
        dictionary = sparse.build_dictionary(zip(train.vectors, train.labels))
    for path in args.files:
        descriptor = features.describe_bytes(Path(path).read_bytes(), feature)
        if args.method == "nn":
            family = evaluation.classify_nn(train, descriptor)
            print(json.dumps({"path": str(path), "method": "nn", "family": family}))
        else:
            decision = sparse.classify_src(dictionary, descriptor, eps=sparse.ADAPTIVE)
            print(json.dumps({
                "path": str(path),
                "method": "src",
                "family": decision.family,
                "residuals": dict(zip(dictionary.families, decision.residuals.tolist())),
                "converged": decision.coefficients.converged,
                "iterations": decision.coefficients.iterations,
                "tie": decision.tie,
            }))
    return 0


def cmd_retrieve(args, config):
    records, metadata = store_mod.load(args.store)
    feature = features.config_from_metadata(metadata["feature"])
    thresholds = _thresholds_from_config(config)
    index = retrieval.build_index(records, thresholds=thresholds)
    for path in args.files:
        descriptor = features.describe_bytes(Path(path).read_bytes(), feature)
        result = index.query(descriptor, k=args.k)
        payload = result.to_dict()
        payload["path"] = str(path)
        print(json.dumps(payload))
    return 0


def _thresholds_from_config(config):
    values = config.get("retrieval", {}).get("thresholds")
    if values:
        return retrieval.ConfidenceThresholds(*[float(v) for v in values])
    return None


def cmd_eval(args, config):
    manifest = _ingest_from_args(args)
    samples = [
        (entry.sha256, entry.path.read_bytes(), entry.label)
        for entry in manifest.entries
    ]
    eval_cfg = config.get("eval", {})
    seed = args.seed if args.seed is not None else eval_cfg.get("seed", 0)

    if args.mode == "kfold":
        feature = _feature_from_args(args, config)
        vectors = features.describe_all([raw for _, raw, _ in samples], feature)
        dataset = evaluation.LabeledDataset(
            ids=[s for s, _, _ in samples],
            vectors=vectors,
            labels=[l for _, _, l in samples],
        )
        report = evaluation.kfold(
            dataset, k=args.k, seed=seed, classifier=args.classifier
        )
        report.config["feature"] = features.config_metadata(feature)
        print(json.dumps(report.to_dict()))
        return 0

    dims = args.dims or eval_cfg.get("dims") or list(evaluation.EVAL_DIMS)
    train_frac = args.train_frac or eval_cfg.get("train_frac", 0.8)
    reports = evaluation.holdout_grid(
        samples,
        dims=tuple(int(d) for d in dims),
        train_frac=train_frac,
        seed=seed,
        signal_length=eval_cfg.get("signal_length"),
    )
    for report in reports:
        print(json.dumps(report.to_dict()))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("feature,classifier,dim,accuracy\n")
            for report in reports:
                cfg = report.config
                fh.write(
                    f"{cfg['feature']['kind']},{cfg['classifier']},"
                    f"{cfg['dim']},{report.accuracy:.6f}\n"
                )
    return 0


def cmd_serve(args, config):
    service_cfg = config.get("service", {})
    service = QueryService(
        store_path=args.store,
        host=args.host or service_cfg.get("host", "127.0.0.1"),
        port=args.port if args.port is not None else service_cfg.get("port", 8020),
        top_k=args.k or service_cfg.get("top_k", 10),
        max_body=service_cfg.get("max_body", 32 * 1024 * 1024),
        thresholds=_thresholds_from_config(config),
    )
    service.bind()
    log.info("listening on %s:%d", service.host, service.port)
    try:
        service.serve_forever()
    except KeyboardInterrupt:
        service.shutdown()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="malsig",
        description="Analyze binaries as signals/images: byteplots, texture "
        "descriptors, random projections, sparse classification, retrieval.",
    )
    parser.add_argument("--config", help="TOML configuration file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert binaries to byteplot images")
    p.add_argument("files", nargs="+")
    p.add_argument("--export-png", help="directory for PNG export")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("export-png", help="export a whole corpus as PNGs")
    _add_corpus_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_png)

    p = sub.add_parser("fingerprint", help="fingerprint a corpus into a store")
    _add_corpus_args(p)
    _add_feature_args(p)
    p.add_argument("--out", required=True, help="store file to write")
    p.set_defaults(func=cmd_fingerprint)

    p = sub.add_parser("index", help="build and audit the ball-tree index")
    p.add_argument("--store", required=True)
    p.add_argument("--leaf-size", dest="leaf_size", type=int, default=40)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("classify", help="classify binaries against a store")
    p.add_argument("--store", required=True)
    p.add_argument("--method", choices=["nn", "src"], default="nn")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("retrieve", help="top-k retrieval against a store")
    p.add_argument("--store", required=True)
    p.add_argument("-k", type=int, default=10)
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("eval", help="k-fold CV or the holdout experiment grid")
    _add_corpus_args(p)
    _add_feature_args(p)
    p.add_argument("--mode", choices=["kfold", "grid"], default="grid")
    p.add_argument("--classifier", choices=["nn", "src"], default="nn",
                   help="classifier for kfold mode")
    p.add_argument("--k", type=int, default=10, help="folds for kfold mode")
    p.add_argument("--dims", type=int, nargs="+", help="grid dimensions")
    p.add_argument("--train-frac", dest="train_frac", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--csv", help="also write a feature/classifier/dim accuracy CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="HTTP query service over a store")
    p.add_argument("--store", required=True)
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("-k", type=int, help="matches returned per query")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    config = _load_config(args.config)
    return args.func(args, config)


if __name__ == "__main__":
    sys.exit(main())
